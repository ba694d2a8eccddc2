"""Desk-scale runs on the real CIFAR-10 batches.

Skipped unless ILA_DATA_DIR points at the binary distribution.  Models are
trained once per session; expect tens of minutes.
"""

import asyncio
import os

import numpy as np
import pytest

from analysis.disturbance import layer_selection
from attacks.baselines import ifgsm
from attacks.ila import ila_refine
from data.cifar import available, load_cifar10
from execute import experiments, reports
from records.models import AttackConfig, AttackPipeline, TrainConfig
from train.trainer import evaluate_accuracy, train
from zoo.network import build


pytestmark = [
	pytest.mark.slow,
	pytest.mark.skipif(not available(os.environ.get("ILA_DATA_DIR")), reason="ILA_DATA_DIR has no CIFAR-10 batches")
]

SLICE = 500
BASELINE = AttackConfig(epsilon=0.03, step_size=0.002, iterations=20)
ILA_BASELINE = AttackConfig(epsilon=0.03, step_size=0.002, iterations=10)
ILA = AttackConfig(epsilon=0.03, step_size=1.0, iterations=10, alpha=3.0)
METHODS = ( ("ifgsm", 3.0), ("mifgsm", 5.0) )
ARCHS = ( "mini_resnet", "plain_cnn", "mini_inception", "mini_senet" )


@pytest.fixture(scope="module")
def cifar():
	return load_cifar10(os.environ.get("ILA_DATA_DIR"))


@pytest.fixture(scope="module")
def zoo(cifar):

	train_split, test_split = cifar
	cfg = TrainConfig(epochs=10, train_subset=10000, test_subset=2000)
	models = []

	for arch in ARCHS:
		model = build(arch, 0)
		train(model, train_split, cfg)
		models.append((arch, model))

	return models


@pytest.fixture(scope="module")
def evaluation(cifar):

	subset = cifar[1].subset(SLICE)

	return subset.normalized(), subset.labels.astype(np.int64)


@pytest.fixture(scope="module")
def calibration(cifar):

	subset = cifar[0].subset(512)

	return subset.normalized(), subset.labels.astype(np.int64)


@pytest.fixture(scope="module")
def tables(zoo, evaluation, calibration):
	"""main_table for every source and both baselines, keyed by (arch, method)."""

	images, labels = evaluation
	results = {}

	for source in zoo:
		for method, alpha in METHODS:
			results[(source[0], method)] = asyncio.run(experiments.main_table(source, zoo, method, BASELINE,
				ILA_BASELINE, ILA.copy(update={ "alpha": alpha }), calibration, images, labels))

	return results


def _transfer_mean(table, column):
	return np.mean([ row[column] for row in table["rows"] if not row["self"] ])


def test_full_test_split(cifar):
	assert len(cifar[1]) == 10000


def test_models_learn(zoo, evaluation):

	images, labels = evaluation

	for arch, model in zoo:
		assert evaluate_accuracy(model, images, labels) >= 0.55, arch


def test_attacks_hurt(zoo, evaluation):

	images, labels = evaluation

	for arch, model in zoo:
		report = asyncio.run(experiments.run_transfer((arch, model), [ (arch, model) ],
			AttackPipeline(baseline=BASELINE), images, labels))
		assert report.self_accuracy <= evaluate_accuracy(model, images, labels) - 0.40, arch



def test_ila_objective_ascends(zoo, evaluation):

	images, labels = evaluation
	_, model = zoo[0]
	baseline = ifgsm(model, images, labels, ILA_BASELINE)
	trace = ila_refine(model, images, baseline, labels, ILA.copy(update={ "target_layer": 3 }))

	kept = ~np.isnan(trace.initial_loss)

	assert np.mean(trace.final_loss[kept] >= trace.initial_loss[kept]) >= 0.95


def test_disturbance_peaks_at_the_targeted_layer(zoo, evaluation):

	images, labels = evaluation
	boosted = []

	for arch, model in zoo:

		selection = layer_selection(model, images[:100], labels[:100], "ifgsm", ILA_BASELINE, ILA)
		boosted.extend(profile.values[profile.target_layer] > 1 for profile in selection.profiles)

		assert np.mean(selection.peaks) >= 0.7, arch

	assert np.mean(boosted) >= 0.9


@pytest.mark.parametrize("method", [ method for method, _ in METHODS ])
@pytest.mark.parametrize("arch", ARCHS)
def test_ila_transfers_better_than_baseline(tables, arch, method):

	table = tables[(arch, method)]

	assert _transfer_mean(table, "ila") <= _transfer_mean(table, "baseline") - 0.05


@pytest.mark.parametrize("arch", ARCHS)
def test_selected_layer_is_near_the_best_sweep_layer(tables, arch):

	table = tables[(arch, "ifgsm")]

	assert _transfer_mean(table, "ila") <= _transfer_mean(table, "opt_ila") + 0.03


@pytest.mark.parametrize("arch", ARCHS)
def test_ila_gives_up_source_accuracy(tables, arch):

	own = [ row for row in tables[(arch, "ifgsm")]["rows"] if row["self"] ]

	assert len(own) == 1
	assert own[0]["ila"] >= own[0]["baseline"]


@pytest.mark.parametrize("arch", ARCHS)
def test_larger_epsilon_transfers_better(zoo, evaluation, tables, arch):

	images, labels = evaluation
	models = dict(zoo)
	targets = [ (label, model) for label, model in zoo if label != arch ]
	layer = tables[(arch, "ifgsm")]["selected_layer"]

	results = asyncio.run(experiments.epsilon_sweep((arch, models[arch]), targets, "ifgsm", BASELINE, ILA_BASELINE,
		ILA.copy(update={ "target_layer": layer }), [ 0.02, 0.05 ], images, labels))

	(_, small_baseline, small_ila), (_, large_baseline, large_ila) = results

	for label, _ in targets:
		assert large_baseline.accuracy(label) < small_baseline.accuracy(label), label
		assert large_ila.accuracy(label) < small_ila.accuracy(label), label


@pytest.mark.parametrize("arch", ARCHS)
def test_step_size_barely_moves_transfer(zoo, evaluation, arch):

	images, labels = evaluation
	models = dict(zoo)

	_, spreads = asyncio.run(experiments.lr_ablation((arch, models[arch]), zoo, "ifgsm", BASELINE,
		[ 0.002, 0.008, 0.014, 0.02 ], images, labels))

	for label, (_, _, width) in spreads.items():
		if label != arch:
			assert width <= 0.10, label


def test_channel_std_tracks_transfer_error(zoo, evaluation, calibration):

	images, labels = evaluation
	models = dict(zoo)
	source = ("plain_cnn", models["plain_cnn"])
	rhos = []

	for layer in ( 1, 2, 3 ):

		assert source[1].channels(layer) >= 32

		for target in zoo:
			if target[0] != "plain_cnn":
				stats = asyncio.run(experiments.channel_experiment(source, target, layer, "ifgsm", ILA_BASELINE,
					ILA, images[:200], labels[:200], calibration[0]))
				rhos.append(stats.rho)

	assert any(rho is not None and rho > 0 for rho in rhos)


def test_rerun_writes_identical_table(zoo, evaluation, calibration, tables, tmp_path):

	images, labels = evaluation
	rerun = asyncio.run(experiments.main_table(zoo[0], zoo, "ifgsm", BASELINE, ILA_BASELINE, ILA,
		calibration, images, labels))

	first = reports.write_table(str(tmp_path / "first"), { "ifgsm": tables[(zoo[0][0], "ifgsm")] })
	second = reports.write_table(str(tmp_path / "second"), { "ifgsm": rerun })

	with open(first, "rb") as first_file, open(second, "rb") as second_file:
		assert first_file.read() == second_file.read()
