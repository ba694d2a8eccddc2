#!/usr/bin/env python3

import argparse
import asyncio
import sys

import pydantic

import config
import utils

from exceptions import ConfigError, ILALabError
from execute import commands
from records.models import ATTACK_METHODS
from zoo.architectures import ARCHITECTURES


log = utils.log

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


# Flags each command cannot run without; checked after the --config merge
REQUIRED_FLAGS = {
	"train": ( "arch", "out" ),
	"attack": ( "source", "out" ),
	"ila": ( "source", "out" ),
	"select-layer": ( "source", ),
	"transfer": ( "source", ),
	"sweep": ( "source", ),
	"eps-sweep": ( "source", ),
	"lr-ablation": ( "source", ),
	"channels": ( "source", "target" ),
	"report": ( "source", )
}


class ArgumentParser(argparse.ArgumentParser):
	"""Usage errors raise ConfigError (exit 1) instead of exiting with argparse's status 2."""

	def error(self, message):

		self.print_usage(sys.stderr)
		raise ConfigError(message)


def layer_value(value):

	if value == "auto":
		return value

	try:
		layer = int(value)

	except ValueError:
		raise argparse.ArgumentTypeError("expected 'auto' or a layer index, got '{}'".format(value))

	if layer < 0:
		raise argparse.ArgumentTypeError("layer index must be >= 0")

	return layer


def positive_int(value):

	number = int(value)

	if number <= 0:
		raise argparse.ArgumentTypeError("expected a positive integer, got {}".format(value))

	return number


def common_parser():
	"""Flags every sub-command accepts."""

	parser = ArgumentParser(add_help=False)
	parser.add_argument("--config", "-c", metavar="./experiment.conf", type=str, default=None,
		help="Flat key=value file supplying flag values; explicit flags win.")
	parser.add_argument("--ilalab-config", metavar="./settings/ilalab_config.yaml", type=str, default=None,
		help="Alternative YAML settings file.")
	parser.add_argument("--data-dir", metavar="./cifar-10-batches-bin", type=str, default=None,
		help="Directory of the CIFAR-10 binary batches (default: ILA_DATA_DIR or Data.root).")
	parser.add_argument("--synthetic", metavar="N", type=positive_int, default=None,
		help="Use synthetic data with N test images instead of CIFAR-10.")
	parser.add_argument("--slice", metavar="1000", type=positive_int, default=None,
		help="Number of test images the experiment evaluates on.")
	parser.add_argument("--seed", type=int, default=None, help="Seed recorded with the run.")

	return parser


def attack_parser():
	"""Attack hyperparameters shared by the attacking sub-commands."""

	parser = ArgumentParser(add_help=False)
	parser.add_argument("--eps", type=float, default=None, help="L-infinity radius (normalized units).")
	parser.add_argument("--step", type=float, default=None, help="Baseline step size.")
	parser.add_argument("--iters", type=int, default=None, help="Full-length baseline iterations.")
	parser.add_argument("--momentum-decay", type=float, default=None,
		help="Decay of the momentum baseline's gradient accumulator.")
	parser.add_argument("--baseline-iters", type=int, default=None, help="Baseline iterations ILA starts from.")
	parser.add_argument("--ila-iters", type=int, default=None, help="ILA iterations.")
	parser.add_argument("--ila-step", type=float, default=None, help="ILA step size.")
	parser.add_argument("--alpha", type=float, default=None,
		help="ILA magnitude weight (default 3 for ifgsm, 5 for mifgsm).")
	parser.add_argument("--calibration", type=positive_int, default=None,
		help="Training images used to select the layer for --layer auto.")

	return parser


def build_parser():

	common, attack = common_parser(), attack_parser()

	parser = ArgumentParser(prog="ilalab", description="Intermediate Level Attack laboratory.")
	sub_parsers = parser.add_subparsers(dest="command", title="Available commands",
		help="Specify which command to run.")
	sub_parsers.required = True

	parser_train = sub_parsers.add_parser("train", parents=[ common ], help="Train a model.")
	parser_train.set_defaults(call_function=commands.train_command)
	parser_train.add_argument("--arch", choices=list(ARCHITECTURES))
	parser_train.add_argument("--epochs", type=int, default=None)
	parser_train.add_argument("--subset", type=positive_int, default=None, help="Training images used.")
	parser_train.add_argument("--batch-size", type=positive_int, default=None)
	parser_train.add_argument("--lr", type=float, default=None)
	parser_train.add_argument("--out", metavar="model.ckpt", type=str)

	parser_attack = sub_parsers.add_parser("attack", parents=[ common, attack ],
		help="Run a baseline attack and write the adversarial examples.")
	parser_attack.set_defaults(call_function=commands.attack_command)
	parser_attack.add_argument("--source", metavar="model.ckpt", type=str)
	parser_attack.add_argument("--method", choices=ATTACK_METHODS, default=None)
	parser_attack.add_argument("--out", metavar="adv.bin", type=str)

	parser_ila = sub_parsers.add_parser("ila", parents=[ common, attack ],
		help="Refine a baseline attack with ILA and write the adversarial examples.")
	parser_ila.set_defaults(call_function=commands.ila_command)
	parser_ila.add_argument("--source", metavar="model.ckpt", type=str)
	parser_ila.add_argument("--baseline", choices=ATTACK_METHODS, default=None)
	parser_ila.add_argument("--layer", type=layer_value, default=None, help="'auto' or a layer index.")
	parser_ila.add_argument("--channel", type=int, default=None, help="Target a single channel of the layer.")
	parser_ila.add_argument("--out", metavar="adv.bin", type=str)

	parser_select = sub_parsers.add_parser("select-layer", parents=[ common, attack ],
		help="Choose the ILA target layer by the latest-peak rule.")
	parser_select.set_defaults(call_function=commands.select_layer_command)
	parser_select.add_argument("--source", metavar="model.ckpt", type=str)
	parser_select.add_argument("--method", choices=ATTACK_METHODS, default=None)
	parser_select.add_argument("--out-dir", type=str, default=None)

	parser_transfer = sub_parsers.add_parser("transfer", parents=[ common, attack ],
		help="Evaluate target models on adversarial examples from the source.")
	parser_transfer.set_defaults(call_function=commands.transfer_command)
	parser_transfer.add_argument("--source", metavar="model.ckpt", type=str)
	parser_transfer.add_argument("--targets", metavar="target.ckpt", nargs="+", default=None)
	parser_transfer.add_argument("--adv", metavar="adv.bin", type=str, default=None,
		help="Evaluate this adversarial file instead of attacking.")
	parser_transfer.add_argument("--method", choices=ATTACK_METHODS, default=None)
	parser_transfer.add_argument("--layer", type=layer_value, default=None,
		help="Refine with ILA at this layer ('auto' selects it).")
	parser_transfer.add_argument("--channel", type=int, default=None)
	parser_transfer.add_argument("--out-dir", type=str, default=None)

	for name, function, help_text in (
		("sweep", commands.sweep_command, "ILA transfer at every layer of the source."),
		("eps-sweep", commands.eps_sweep_command, "Baseline and ILA transfer across epsilons."),
		("lr-ablation", commands.lr_ablation_command, "Baseline transfer across step sizes."),
		("report", commands.report_command, "Baseline, ILA and best-layer ILA for both baselines.")
	):
		sub_parser = sub_parsers.add_parser(name, parents=[ common, attack ], help=help_text)
		sub_parser.set_defaults(call_function=function)
		sub_parser.add_argument("--source", metavar="model.ckpt", type=str)
		sub_parser.add_argument("--targets", metavar="target.ckpt", nargs="+", default=None)
		sub_parser.add_argument("--method", choices=ATTACK_METHODS, default=None)
		sub_parser.add_argument("--out-dir", type=str, default=None)

		if name == "eps-sweep":
			sub_parser.add_argument("--eps-list", type=float, nargs="+", default=None)
			sub_parser.add_argument("--layer", type=layer_value, default=None)

		elif name == "lr-ablation":
			sub_parser.add_argument("--lr-list", type=float, nargs="+", default=None)

	parser_channels = sub_parsers.add_parser("channels", parents=[ common, attack ],
		help="Channel ILA per channel, joined with channel activation std.")
	parser_channels.set_defaults(call_function=commands.channels_command)
	parser_channels.add_argument("--source", metavar="model.ckpt", type=str)
	parser_channels.add_argument("--target", metavar="target.ckpt", type=str)
	parser_channels.add_argument("--layer", type=layer_value, default=None)
	parser_channels.add_argument("--method", choices=ATTACK_METHODS, default=None)
	parser_channels.add_argument("--window", type=positive_int, default=None)
	parser_channels.add_argument("--degree", type=int, default=None)
	parser_channels.add_argument("--out-dir", type=str, default=None)

	return parser


def _command_parser(parser, command):

	for action in parser._actions:
		if isinstance(action, argparse._SubParsersAction):
			return action.choices[command]

	raise ConfigError("Unknown command:  {}".format(command))


def _convert(action, raw):

	if action.nargs in ("+", "*"):
		values = raw.replace(",", " ").split()
		return [ action.type(value) if action.type else value for value in values ]

	if action.choices is not None and raw not in [ str(choice) for choice in action.choices ]:
		raise ConfigError("Invalid value '{}' for {}; expected one of:  {}".format(
			raw, action.dest, ", ".join(map(str, action.choices))))

	try:
		return action.type(raw) if action.type else raw

	except (argparse.ArgumentTypeError, ValueError) as error:
		raise ConfigError("Invalid value '{}' for {}:  {}".format(raw, action.dest, error))


def apply_flat_config(parser, args):
	"""Fill flags not given on the command line from the --config file."""

	if not args.config:
		return args

	actions = { action.dest: action for action in _command_parser(parser, args.command)._actions }

	for key, raw in config.load_flat_config(args.config).items():

		if key not in actions or key in ("help", "config"):
			raise ConfigError("Unknown key '{}' in {}".format(key, args.config))

		if getattr(args, key, None) is None:
			setattr(args, key, _convert(actions[key], raw))

	return args


def check_required(args):

	missing = [ name for name in REQUIRED_FLAGS.get(args.command, ()) if getattr(args, name, None) is None ]

	if missing:
		raise ConfigError("{} needs:  {}".format(args.command,
			", ".join("--{}".format(name.replace("_", "-")) for name in missing)))


def cli(argv=None):
	"""Run one sub-command and return the process exit code."""

	parser = build_parser()

	try:
		args = parser.parse_args(sys.argv[1:] if argv is None else argv)
		args = apply_flat_config(parser, args)
		check_required(args)

		if args.ilalab_config:
			config.load(ilalab_config=args.ilalab_config)

		asyncio.run(args.call_function(args))

	except (ConfigError, pydantic.ValidationError) as error:
		print("Error:  {}".format(error), file=sys.stderr)
		return EXIT_INVALID

	except ILALabError as error:
		log.error("{}:  {}".format(type(error).__name__, error))
		return EXIT_RUNTIME

	except OSError as error:
		log.error("I/O failure:  {}".format(error))
		return EXIT_RUNTIME

	except Exception as error:
		log.exception("Unexpected {}:  {}".format(type(error).__name__, error))
		return EXIT_RUNTIME

	return EXIT_OK


if __name__ == "__main__":
	sys.exit(cli())
