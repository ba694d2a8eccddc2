import asyncio
import json

import pytest

import utils

from execute import reports
from records.models import ChannelStats, DisturbanceProfile, LayerSelection, TransferReport, TransferRow


@pytest.fixture
def transfer_report():

	return TransferReport(source="plain", attack="ifgsm-20", rows=[
		TransferRow(target="plain", accuracy=0.125, self_row=True),
		TransferRow(target="resnet", accuracy=0.5)
	])


def test_transfer_csv(tmp_path, transfer_report):

	rows = utils.read_csv(reports.write_transfer(str(tmp_path), [ transfer_report ]))

	assert rows == [
		{ "source": "plain", "attack": "ifgsm-20", "target": "plain", "accuracy": "0.125", "self": "true" },
		{ "source": "plain", "attack": "ifgsm-20", "target": "resnet", "accuracy": "0.5", "self": "false" }
	]


def test_sweep_csv_numbers_layers(tmp_path, transfer_report):

	rows = utils.read_csv(reports.write_sweep(str(tmp_path), [ transfer_report, transfer_report ]))

	assert [ row["layer"] for row in rows ] == [ "0", "0", "1", "1" ]


def test_lr_ablation_writes_spread(tmp_path, transfer_report):

	paths = reports.write_lr_ablation(str(tmp_path), [ (0.002, transfer_report) ], { "resnet": (0.25, 0.5, 0.25) })

	assert utils.read_csv(paths[1]) == [ { "target": "resnet", "min": "0.25", "max": "0.5", "spread": "0.25" } ]


def test_profiles_csv(tmp_path):

	profiles = [ DisturbanceProfile(source="m", target_layer=layer, values=[ 1.0, 2.0 ]) for layer in range(2) ]
	selection = LayerSelection(source="m", profiles=profiles, peaks=[ False, True ], layer=1)

	rows = utils.read_csv(reports.write_profiles(str(tmp_path), selection))

	assert len(rows) == 4
	assert rows[-1] == { "target_layer": "1", "layer": "1", "f": "2.0" }


def test_channels_sorted_by_error(tmp_path):

	stats = ChannelStats(layer=2, std=[ 0.1, 0.2, 0.3 ], transfer_error=[ 0.5, 0.25, 0.5 ],
		smoothed_std=[ 0.1, 0.2, 0.3 ], rho=None)

	rows = utils.read_csv(reports.write_channels(str(tmp_path), stats))

	assert [ row["channel"] for row in rows ] == [ "1", "0", "2" ]


def test_manifest(tmp_path):

	path = asyncio.run(reports.write_manifest(str(tmp_path), "transfer", { "slice": 10 }, { "seed": 0 },
		[ str(tmp_path / "transfer.csv") ], argv=[ "transfer", "--slice", "10" ]))

	with open(path) as manifest_file:
		manifest = json.load(manifest_file)

	assert manifest["command"] == "transfer"
	assert manifest["argv"] == [ "transfer", "--slice", "10" ]
	assert manifest["outputs"] == [ "transfer.csv" ]
	assert manifest["seeds"] == { "seed": 0 }
	assert manifest["git_describe"]


def test_manifest_is_reproducible(tmp_path):

	configs = { "slice": 10, "eps": 0.03 }

	paths = [
		asyncio.run(reports.write_manifest(str(tmp_path / run), "report", configs, { "seed": 0 },
			[ "table.csv" ], argv=[ "report" ]))
		for run in ( "first", "second" )
	]

	with open(paths[0], "rb") as first, open(paths[1], "rb") as second:
		assert first.read() == second.read()
