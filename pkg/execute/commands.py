#!/usr/bin/env python3
"""Sub-command handlers behind `ilalab.py`.

Each handler receives the parsed argparse namespace, with every flag already
resolved in the order:  command line, `--config` file, YAML settings.
"""

import os

import numpy as np

import config
import utils

from analysis.disturbance import layer_selection
from attacks import adversarial_file
from attacks.pipeline import AdversarialTriple, generate
from data.cifar import load_cifar10
from data.synthetic import synthetic_dataset
from execute import experiments, reports
from records.models import AttackConfig, AttackPipeline, CheckpointMetadata, ExperimentConfig, TrainConfig
from train.trainer import evaluate_accuracy, train
from zoo import checkpoint
from zoo.network import build


log = utils.log

# Synthetic data ignores --seed; every command sees the same images
SYNTHETIC_TRAIN_SEED = 0
SYNTHETIC_TEST_SEED = 1


def setting(key, default=None):
	return config.ilalab_config.get(key, default)


def _pick(value, key, default=None):
	"""The flag value when given, otherwise the YAML setting."""

	return value if value is not None else setting(key, default)


##################################################
# Data and models

def load_data(args):
	"""(train, test) Datasets:  synthetic when --synthetic N is set, CIFAR-10 otherwise."""

	if args.synthetic:
		return (
			synthetic_dataset(SYNTHETIC_TRAIN_SEED, 5 * args.synthetic, split="train"),
			synthetic_dataset(SYNTHETIC_TEST_SEED, args.synthetic, split="test")
		)

	return load_cifar10(_pick(args.data_dir, "Data.root"))


def evaluation_slice(test, slice_size):
	"""(images, labels, dataset indices) of the first `slice_size` test images."""

	subset = test.subset(slice_size)

	return subset.normalized(), subset.labels.astype(np.int64), np.arange(len(subset))


def calibration_batch(train_split, size):

	subset = train_split.subset(size)

	return subset.normalized(), subset.labels.astype(np.int64)


def experiment_config(args, targets=None):

	return ExperimentConfig(
		source=args.source,
		targets=targets or [],
		slice=_pick(args.slice, "Harness.slice", 1000),
		seed=args.seed or 0,
		output_dir=_pick(getattr(args, "out_dir", None), "Harness.output_dir", "./results")
	)


def label_for(path):
	return os.path.splitext(os.path.basename(path))[0]


def load_models(experiment):
	"""(source, targets) as (label, Network) pairs; the source leads the targets.

	A target path naming the source checkpoint reuses the source model, which
	makes its row the self row.
	"""

	source = (label_for(experiment.source), checkpoint.load_model(experiment.source))
	targets = [ source ]
	seen = { os.path.abspath(experiment.source) }

	for path in experiment.targets:

		if os.path.abspath(path) in seen:
			continue

		seen.add(os.path.abspath(path))
		targets.append((label_for(path), checkpoint.load_model(path)))

	return source, targets


##################################################
# Attack settings

def alpha_for(method, value=None):

	if value is not None:
		return value

	return float(setting("ILA.alpha_mifgsm" if method == "mifgsm" else "ILA.alpha_ifgsm", 3.0))


def baseline_config(args, iterations=None):
	"""The full-length baseline (20 iterations by default)."""

	return AttackConfig(
		epsilon=_pick(args.eps, "Attack.epsilon"),
		step_size=_pick(args.step, "Attack.step_size"),
		iterations=_pick(iterations, "Attack.iterations"),
		momentum_decay=_pick(args.momentum_decay, "Attack.momentum_decay")
	)


def ila_baseline_config(args):
	"""The shorter baseline ILA starts from (10 iterations by default)."""

	return baseline_config(args, _pick(getattr(args, "baseline_iters", None), "ILA.baseline_iterations"))


def ila_config(args, method, layer=None, channel=None):

	return AttackConfig(
		epsilon=_pick(args.eps, "Attack.epsilon"),
		step_size=_pick(getattr(args, "ila_step", None), "ILA.step_size"),
		iterations=_pick(getattr(args, "ila_iters", None), "ILA.iterations"),
		alpha=alpha_for(method, getattr(args, "alpha", None)),
		target_layer=layer,
		target_channel=channel
	)


def parse_layer(value):
	"""'auto' or a non-negative int."""

	if value is None or value == "auto":
		return "auto"

	return int(value)


async def resolve_layer(args, source, train_split, method):
	"""The --layer value, running select_layer on the calibration batch for 'auto'."""

	layer = parse_layer(getattr(args, "layer", None))

	if layer != "auto":
		source[1].check_layer(layer)
		return layer, None

	calibration = calibration_batch(train_split, _pick(getattr(args, "calibration", None), "Analysis.calibration_size"))
	selection = await utils.run_in_thread(layer_selection, source[1], calibration[0], calibration[1],
		method, ila_baseline_config(args), ila_config(args, method))

	return selection.layer, selection


def _configs(**models):
	return { name: model.dict() for name, model in models.items() }


##################################################
# Commands

async def train_command(args):

	train_split, test_split = load_data(args)
	cfg = TrainConfig(
		epochs=_pick(args.epochs, "Train.epochs"),
		batch_size=_pick(args.batch_size, "Train.batch_size"),
		learning_rate=_pick(args.lr, "Train.learning_rate"),
		momentum=setting("Train.momentum", 0.9),
		weight_decay=setting("Train.weight_decay", 0.0005),
		seed=_pick(args.seed, "Train.seed", 0),
		train_subset=None if args.synthetic else _pick(args.subset, "Data.train_subset"),
		test_subset=None if args.synthetic else setting("Data.test_subset")
	)

	model = build(args.arch, cfg.seed)
	history = await utils.run_in_thread(train, model, train_split, cfg, test_split)
	final = history.epochs[-1].test_accuracy if history.epochs else None

	if final is None:
		test = test_split.subset(cfg.test_subset)
		final = evaluate_accuracy(model, test.normalized(), test.labels)

	checkpoint.save(model, args.out, CheckpointMetadata(
		arch=args.arch, seed=cfg.seed, epochs=cfg.epochs, test_accuracy=final, classes=model.classes))

	history_path = os.path.splitext(args.out)[0] + ".history.csv"
	utils.write_csv_atomic(history_path, ("epoch", "loss", "train_accuracy", "test_accuracy"),
		[ (stats.epoch, stats.loss, stats.train_accuracy, stats.test_accuracy) for stats in history.epochs ])
	log.info("{} trained:  test accuracy {:.4f}".format(args.arch, final))


async def attack_command(args):

	experiment = experiment_config(args)
	source, _ = load_models(experiment)
	_, test_split = load_data(args)
	images, labels, indices = evaluation_slice(test_split, experiment.slice)

	method = args.method or "ifgsm"
	pipeline = AttackPipeline(method=method, baseline=baseline_config(args, args.iters))
	triple = await utils.run_in_thread(generate, source[1], images, labels, pipeline)

	adversarial_file.write_adversarial(args.out, indices, labels, images, triple.adversarial, pipeline.baseline.epsilon)
	log.info("{} on {}:  clean accuracy {:.4f}, adversarial accuracy {:.4f}".format(
		pipeline.descriptor, source[0], evaluate_accuracy(source[1], images, labels),
		evaluate_accuracy(source[1], triple.adversarial, labels)))


async def ila_command(args):

	experiment = experiment_config(args)
	source, _ = load_models(experiment)
	train_split, test_split = load_data(args)
	images, labels, indices = evaluation_slice(test_split, experiment.slice)

	method = args.baseline or "ifgsm"
	layer, _ = await resolve_layer(args, source, train_split, method)
	pipeline = AttackPipeline(method=method, baseline=ila_baseline_config(args),
		ila=ila_config(args, method, layer, args.channel))
	triple = await utils.run_in_thread(generate, source[1], images, labels, pipeline)

	adversarial_file.write_adversarial(args.out, indices, labels, images, triple.adversarial, pipeline.ila.epsilon)
	log.info("{} on {}:  adversarial accuracy {:.4f}, {} degenerate sample(s)".format(
		pipeline.descriptor, source[0], evaluate_accuracy(source[1], triple.adversarial, labels),
		len(triple.degenerate)))


async def select_layer_command(args):

	experiment = experiment_config(args)
	source, _ = load_models(experiment)
	train_split, _ = load_data(args)
	method = args.method or "ifgsm"

	args.layer = "auto"
	layer, selection = await resolve_layer(args, source, train_split, method)

	outputs = [
		reports.write_profiles(experiment.output_dir, selection),
		reports.write_profile(experiment.output_dir, selection.profiles[layer])
	]
	await reports.write_manifest(experiment.output_dir, "select-layer",
		dict(_configs(experiment=experiment), selected_layer=layer, used_fallback=selection.used_fallback,
			peaks=selection.peaks),
		{ "seed": experiment.seed }, outputs)


async def transfer_command(args):

	experiment = experiment_config(args, args.targets)
	source, targets = load_models(experiment)

	if args.adv:
		examples = adversarial_file.read_adversarial(args.adv)
		report = await experiments.evaluate(source, targets,
			_loaded_triple(examples), "file:{}".format(os.path.basename(args.adv)))
		configs = _configs(experiment=experiment)

	else:
		train_split, test_split = load_data(args)
		images, labels, _ = evaluation_slice(test_split, experiment.slice)
		method = args.method or "ifgsm"

		if args.layer is None:
			pipeline = AttackPipeline(method=method, baseline=baseline_config(args, args.iters))

		else:
			layer, _ = await resolve_layer(args, source, train_split, method)
			pipeline = AttackPipeline(method=method, baseline=ila_baseline_config(args),
				ila=ila_config(args, method, layer, args.channel))

		report = await experiments.run_transfer(source, targets, pipeline, images, labels)
		configs = _configs(experiment=experiment, pipeline=pipeline)

	outputs = [ reports.write_transfer(experiment.output_dir, [ report ]) ]
	await reports.write_manifest(experiment.output_dir, "transfer", configs, { "seed": experiment.seed }, outputs)


def _loaded_triple(examples):

	return AdversarialTriple(examples.clean, examples.adversarial, None, examples.labels.astype(np.int64))


async def sweep_command(args):

	experiment = experiment_config(args, args.targets)
	source, targets = load_models(experiment)
	_, test_split = load_data(args)
	images, labels, _ = evaluation_slice(test_split, experiment.slice)
	method = args.method or "ifgsm"

	baseline_cfg, ila_cfg = ila_baseline_config(args), ila_config(args, method)
	sweep = await experiments.sweep_layers(source, targets, method, baseline_cfg, ila_cfg, images, labels)
	opt_layer = experiments.best_layer(sweep) if len(targets) > 1 else None
	log.info("{}:  best sweep layer {}".format(source[0], opt_layer))

	outputs = [ reports.write_sweep(experiment.output_dir, sweep) ]
	await reports.write_manifest(experiment.output_dir, "sweep",
		dict(_configs(experiment=experiment, baseline=baseline_cfg, ila=ila_cfg), method=method, opt_layer=opt_layer),
		{ "seed": experiment.seed }, outputs)


async def eps_sweep_command(args):

	experiment = experiment_config(args, args.targets)
	source, targets = load_models(experiment)
	train_split, test_split = load_data(args)
	images, labels, _ = evaluation_slice(test_split, experiment.slice)
	method = args.method or "ifgsm"
	eps_list = _pick(args.eps_list, "Harness.eps_list")

	layer, _ = await resolve_layer(args, source, train_split, method)
	results = await experiments.epsilon_sweep(source, targets, method, baseline_config(args, args.iters),
		ila_baseline_config(args), ila_config(args, method, layer), eps_list, images, labels)

	outputs = [ reports.write_eps_sweep(experiment.output_dir, results) ]
	await reports.write_manifest(experiment.output_dir, "eps-sweep",
		dict(_configs(experiment=experiment), method=method, layer=layer, eps_list=list(eps_list)),
		{ "seed": experiment.seed }, outputs)


async def lr_ablation_command(args):

	experiment = experiment_config(args, args.targets)
	source, targets = load_models(experiment)
	_, test_split = load_data(args)
	images, labels, _ = evaluation_slice(test_split, experiment.slice)
	method = args.method or "ifgsm"
	lr_list = _pick(args.lr_list, "Harness.lr_list")

	results, spreads = await experiments.lr_ablation(source, targets, method,
		baseline_config(args, args.iters), lr_list, images, labels)

	outputs = reports.write_lr_ablation(experiment.output_dir, results, spreads)
	await reports.write_manifest(experiment.output_dir, "lr-ablation",
		dict(_configs(experiment=experiment), method=method, lr_list=list(lr_list)),
		{ "seed": experiment.seed }, outputs)


async def channels_command(args):

	experiment = experiment_config(args, [ args.target ])
	source, targets = load_models(experiment)
	target = targets[-1]
	train_split, test_split = load_data(args)
	images, labels, _ = evaluation_slice(test_split, experiment.slice)
	std_images, _ = calibration_batch(train_split, _pick(args.calibration, "Analysis.calibration_size"))
	method = args.method or "ifgsm"

	layer = parse_layer(args.layer)

	if layer == "auto":
		layer, _ = await resolve_layer(args, source, train_split, method)

	stats = await experiments.channel_experiment(source, target, layer, method, ila_baseline_config(args),
		ila_config(args, method), images, labels, std_images, args.window, args.degree)

	outputs = [ reports.write_channels(experiment.output_dir, stats) ]
	await reports.write_manifest(experiment.output_dir, "channels",
		dict(_configs(experiment=experiment), method=method, layer=layer, rho=stats.rho),
		{ "seed": experiment.seed }, outputs)


async def report_command(args):

	experiment = experiment_config(args, args.targets)
	source, targets = load_models(experiment)
	train_split, test_split = load_data(args)
	images, labels, _ = evaluation_slice(test_split, experiment.slice)
	calibration = calibration_batch(train_split, _pick(args.calibration, "Analysis.calibration_size"))

	tables = {}

	for method in ( "ifgsm", "mifgsm" ):
		tables[method] = await experiments.main_table(source, targets, method, baseline_config(args, args.iters),
			ila_baseline_config(args), ila_config(args, method), calibration, images, labels)

	outputs = [ reports.write_table(experiment.output_dir, tables) ]
	await reports.write_manifest(experiment.output_dir, "report",
		dict(_configs(experiment=experiment),
			selected_layers={ method: table["selected_layer"] for method, table in tables.items() }),
		{ "seed": experiment.seed }, outputs)
