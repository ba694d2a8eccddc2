#!/usr/bin/env python3
"""CSV emitters and the per-experiment manifest (schemas in docs/formats.md)."""

import os
import sys

import numpy as np

import utils


log = utils.log


def _path(output_dir, name):
	return os.path.join(output_dir, name)


def write_transfer(output_dir, reports, name="transfer.csv"):

	rows = [
		(report.source, report.attack, row.target, row.accuracy, row.self_row)
		for report in reports for row in report.rows
	]
	path = _path(output_dir, name)
	utils.write_csv_atomic(path, ("source", "attack", "target", "accuracy", "self"), rows)

	return path


def write_sweep(output_dir, reports):

	rows = [ (layer, row.target, row.accuracy) for layer, report in enumerate(reports) for row in report.rows ]
	path = _path(output_dir, "sweep.csv")
	utils.write_csv_atomic(path, ("layer", "target", "accuracy"), rows)

	return path


def write_eps_sweep(output_dir, results):

	rows = []

	for epsilon, baseline, ila in results:
		for report in (baseline, ila):
			rows.extend((epsilon, report.attack, row.target, row.accuracy) for row in report.rows)

	path = _path(output_dir, "eps_sweep.csv")
	utils.write_csv_atomic(path, ("epsilon", "attack", "target", "accuracy"), rows)

	return path


def write_lr_ablation(output_dir, results, spreads):

	paths = [ _path(output_dir, "lr_ablation.csv"), _path(output_dir, "lr_spread.csv") ]
	utils.write_csv_atomic(paths[0], ("lr", "target", "accuracy"),
		[ (lr, row.target, row.accuracy) for lr, report in results for row in report.rows ])
	utils.write_csv_atomic(paths[1], ("target", "min", "max", "spread"),
		[ (target,) + tuple(values) for target, values in spreads.items() ])

	return paths


def write_profile(output_dir, profile, name="profile.csv"):

	path = _path(output_dir, name)
	utils.write_csv_atomic(path, ("layer", "f"), list(enumerate(profile.values)))

	return path


def write_profiles(output_dir, selection):

	rows = [
		(target_layer, layer, value)
		for target_layer, profile in enumerate(selection.profiles)
		for layer, value in enumerate(profile.values)
	]
	path = _path(output_dir, "profiles.csv")
	utils.write_csv_atomic(path, ("target_layer", "layer", "f"), rows)

	return path


def write_channels(output_dir, stats):
	"""Rows sorted by increasing transfer error (ties by channel index)."""

	order = np.argsort(np.asarray(stats.transfer_error), kind="stable")
	rows = [
		(int(channel), stats.std[channel], stats.transfer_error[channel], stats.smoothed_std[channel])
		for channel in order
	]
	path = _path(output_dir, "channels.csv")
	utils.write_csv_atomic(path, ("channel", "std", "transfer_error", "smoothed_std"), rows)

	return path


def write_table(output_dir, tables):
	"""`tables` maps attack method to a main_table result."""

	rows = [
		(method, row["target"], row["self"], row["baseline"], row["ila"], table["selected_layer"],
			row["opt_ila"], row["opt_layer"])
		for method, table in tables.items() for row in table["rows"]
	]
	path = _path(output_dir, "table.csv")
	utils.write_csv_atomic(path,
		("method", "target", "self", "baseline", "ila", "ila_layer", "opt_ila", "opt_layer"), rows)

	return path


async def write_manifest(output_dir, command, configs, seeds, outputs, argv=None):
	"""manifest.json:  what ran, with which settings, from which source revision."""

	manifest = {
		"command": command,
		"argv": list(sys.argv[1:] if argv is None else argv),
		"configs": configs,
		"seeds": seeds,
		"git_describe": await utils.git_describe(),
		"outputs": sorted(os.path.basename(path) for path in outputs)
	}
	path = _path(output_dir, "manifest.json")
	utils.write_json_atomic(path, manifest)
	log.info("Wrote manifest:  {}".format(path))

	return path
