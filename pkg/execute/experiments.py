#!/usr/bin/env python3
"""Experiment operations:  transfer reports, sweeps, ablations and the channel study.

Models travel as (label, Network) pairs; the label (usually the checkpoint
file stem) names the model in every report.  The source model counts as a
target too when it is passed in `targets`; its row is the self row.
"""

import numpy as np

import config
import utils

from analysis.channels import channel_std
from analysis.disturbance import select_layer
from analysis.smoothing import fit_window, savitzky_golay
from analysis.stats import rank_correlation, spread
from attacks.ila import ila_refine
from attacks.pipeline import AdversarialTriple, chunks, generate
from exceptions import ConfigError, ZeroVarianceError
from records.models import AttackPipeline, ChannelStats, TransferReport, TransferRow
from train.trainer import evaluate_accuracy


log = utils.log


def _check_classes(source, targets):

	_, source_model = source

	for label, model in targets:
		if model.classes != source_model.classes:
			raise ConfigError("Class count mismatch:  {} has {} classes, {} has {}".format(
				source[0], source_model.classes, label, model.classes))


def _chunk_size():
	return int(config.ilalab_config.get("Harness.chunk_size", 100))


async def evaluate(source, targets, triple, attack, threads=None):
	"""TransferReport of every target on the adversarial batch of `triple`."""

	accuracies = await utils.gather_in_threads(
		lambda target: evaluate_accuracy(target[1], triple.adversarial, triple.labels), targets, threads)

	rows = [
		TransferRow(target=label, accuracy=accuracy, self_row=model is source[1])
		for (label, model), accuracy in zip(targets, accuracies)
	]

	report = TransferReport(source=source[0], attack=attack, rows=rows, degenerate=len(triple.degenerate))

	for row in rows:
		log.info("{} | {} -> {}:  accuracy {:.4f}{}".format(
			attack, source[0], row.target, row.accuracy, " (self)" if row.self_row else ""))

	return report


async def attack_and_evaluate(source, targets, pipeline, images, labels, threads=None):
	"""(TransferReport, AdversarialTriple) for one pipeline on one batch."""

	_check_classes(source, targets)
	triple = await utils.run_in_thread(generate, source[1], images, labels, pipeline, _chunk_size(), threads)

	return await evaluate(source, targets, triple, pipeline.descriptor, threads), triple


async def run_transfer(source, targets, pipeline, images, labels, threads=None):
	"""Attack once on the source, evaluate every target on that same batch."""

	report, _ = await attack_and_evaluate(source, targets, pipeline, images, labels, threads)

	return report


def refine(model, clean, baseline, labels, ila_cfg, threads=None):
	"""Chunked ILA from an existing baseline batch."""

	labels = np.asarray(labels, dtype=np.int64)
	traces = utils.thread_map(
		lambda span: ila_refine(model, clean[span[0]:span[1]], baseline[span[0]:span[1]],
			labels[span[0]:span[1]], ila_cfg, channel=ila_cfg.target_channel),
		chunks(len(clean), _chunk_size()), threads)

	degenerate = [ start + index for (start, _), trace in zip(chunks(len(clean), _chunk_size()), traces)
		for index in trace.degenerate ]

	return AdversarialTriple(clean, baseline, np.concatenate([ trace.adversarial for trace in traces ]),
		labels, degenerate)


async def sweep_layers(source, targets, method, baseline_cfg, ila_cfg, images, labels, threads=None):
	"""One ILA TransferReport per tap of the source model, in layer order.

	Every layer refines the same baseline batch.
	"""

	_check_classes(source, targets)
	model = source[1]
	baseline = (await utils.run_in_thread(generate, model, images, labels,
		AttackPipeline(method=method, baseline=baseline_cfg), _chunk_size(), threads)).baseline

	reports = []

	for layer in range(model.depth):

		cfg = ila_cfg.copy(update={ "target_layer": layer })
		pipeline = AttackPipeline(method=method, baseline=baseline_cfg, ila=cfg)
		triple = await utils.run_in_thread(refine, model, images, baseline, labels, cfg, threads)
		reports.append(await evaluate(source, targets, triple, pipeline.descriptor, threads))

	return reports


def best_layer(reports):
	"""Index of the sweep report with the lowest mean transfer accuracy (first on ties)."""

	means = [ report.mean_transfer_accuracy for report in reports ]

	if any(mean is None for mean in means):
		raise ConfigError("Choosing the best layer needs at least one transfer target besides the source")

	return int(np.argmin(means))


async def epsilon_sweep(source, targets, method, baseline_cfg, ila_baseline_cfg, ila_cfg, eps_list,
	images, labels, threads=None):
	"""[(epsilon, baseline report, ILA report)] over `eps_list`, on one fixed slice."""

	if not eps_list:
		raise ConfigError("eps_list is empty")

	results = []

	for epsilon in eps_list:

		baseline_pipeline = AttackPipeline(method=method, baseline=baseline_cfg.copy(update={ "epsilon": epsilon }))
		ila_pipeline = AttackPipeline(method=method,
			baseline=ila_baseline_cfg.copy(update={ "epsilon": epsilon }),
			ila=ila_cfg.copy(update={ "epsilon": epsilon }))

		results.append((
			epsilon,
			await run_transfer(source, targets, baseline_pipeline, images, labels, threads),
			await run_transfer(source, targets, ila_pipeline, images, labels, threads)
		))

	return results


async def lr_ablation(source, targets, method, baseline_cfg, lr_list, images, labels, threads=None):
	"""Baseline reports per step size, plus the per-target spread (min, max, max - min).

	Returns:
		([(lr, TransferReport)], {target: (min, max, spread)})
	"""

	if not lr_list:
		raise ConfigError("lr_list is empty")

	results = []

	for lr in lr_list:
		pipeline = AttackPipeline(method=method, baseline=baseline_cfg.copy(update={ "step_size": lr }))
		results.append((lr, await run_transfer(source, targets, pipeline, images, labels, threads)))

	spreads = {
		label: spread([ report.accuracy(label) for _, report in results ])
		for label, _ in targets
	}

	return results, spreads


async def channel_experiment(source, target, layer, method, baseline_cfg, ila_cfg, images, labels,
	std_images, window=None, degree=None, threads=None):
	"""Channel ILA at every channel of `layer`, joined with each channel's activation std.

	The std series ordered by increasing transfer error is smoothed; the
	window shrinks to the largest odd value <= channel count when needed.
	A zero-variance correlation is reported as None.
	"""

	_check_classes(source, [ target ])
	model = source[1]
	model.check_layer(layer)
	window = window or int(config.ilalab_config.get("Analysis.savgol_window", 41))
	degree = degree if degree is not None else int(config.ilalab_config.get("Analysis.savgol_degree", 2))
	labels = np.asarray(labels, dtype=np.int64)

	baseline = (await utils.run_in_thread(generate, model, images, labels,
		AttackPipeline(method=method, baseline=baseline_cfg), _chunk_size(), threads)).baseline

	def error_rate(channel):

		cfg = ila_cfg.copy(update={ "target_layer": layer, "target_channel": channel })
		refined = np.concatenate([
			ila_refine(model, images[start:stop], baseline[start:stop], labels[start:stop], cfg, channel=channel).adversarial
			for start, stop in chunks(len(images), _chunk_size())
		])

		return 1.0 - evaluate_accuracy(target[1], refined, labels)

	channels = model.channels(layer)
	errors = np.asarray(await utils.gather_in_threads(error_rate, range(channels), threads))
	stds = await utils.run_in_thread(channel_std, model, std_images, layer)

	order = np.argsort(errors, kind="stable")
	window, degree = fit_window(channels, window, degree)
	smoothed = np.empty(channels)
	smoothed[order] = savitzky_golay(stds[order], window, degree)

	try:
		rho = rank_correlation(stds, errors)

	except ZeroVarianceError as error:
		log.warning("Channel correlation at layer {} is undefined:  {}".format(layer, error))
		rho = None

	log.info("{} layer {} -> {}:  {} channels, rho = {}".format(source[0], layer, target[0], channels, rho))

	return ChannelStats(layer=layer, std=stds.tolist(), transfer_error=errors.tolist(),
		smoothed_std=smoothed.tolist(), rho=rho)


async def main_table(source, targets, method, baseline_cfg, ila_baseline_cfg, ila_cfg,
	calibration, images, labels, threads=None):
	"""Per target:  baseline accuracy, ILA at the selected layer, and the best layer of a full sweep.

	Args:
		calibration (tuple):  (images, labels) used by select_layer

	Returns:
		dict with keys "selected_layer", "opt_layer" and "rows" (one dict per target)
	"""

	layer = await utils.run_in_thread(select_layer, source[1], calibration[0], calibration[1],
		method, ila_baseline_cfg, ila_cfg, threads)

	baseline = await run_transfer(source, targets, AttackPipeline(method=method, baseline=baseline_cfg),
		images, labels, threads)
	selected = await run_transfer(source, targets, AttackPipeline(method=method, baseline=ila_baseline_cfg,
		ila=ila_cfg.copy(update={ "target_layer": layer })), images, labels, threads)
	sweep = await sweep_layers(source, targets, method, ila_baseline_cfg, ila_cfg, images, labels, threads)
	opt_layer = best_layer(sweep)

	rows = [
		{
			"target": label,
			"self": model is source[1],
			"baseline": baseline.accuracy(label),
			"ila": selected.accuracy(label),
			"opt_ila": sweep[opt_layer].accuracy(label),
			"opt_layer": opt_layer
		}
		for label, model in targets
	]

	return { "selected_layer": layer, "opt_layer": opt_layer, "rows": rows, "sweep": sweep }
