#!/usr/bin/env python3

import os
import sys
import yaml


DEFAULT_CONFIG_FILE = os.path.join(
	os.path.dirname(os.path.abspath(__file__)), "settings", "ilalab_config.yaml")


class ILALab_Configuration():
	def __init__(self):
		self.config = {}

	def add(self, key, value):

		self.config[key] = value

	def get(self, key, default=None):

		return self.config.get(key, default)


def load(args=None, **kwargs):

	passed_config_file = kwargs.get("ilalab_config", None)
	env_config_file = os.environ.get("ILALAB_CONFIG")

	if passed_config_file is not None and os.path.exists(passed_config_file):
		config_file = passed_config_file

	elif env_config_file is not None and os.path.exists(env_config_file):
		config_file = env_config_file

	elif os.path.exists(DEFAULT_CONFIG_FILE):
		config_file = DEFAULT_CONFIG_FILE

	else:
		print("\nError:  Unable to load configuration.\n", file=sys.stderr)
		sys.exit(1)

	# Read in the configuration file
	with open(config_file, "rb") as yaml_file:
		configuration = yaml.safe_load(yaml_file)

	##################################################
	# Define variables

	ILALabConfig = ILALab_Configuration()
	ILALabConfig.add("ILALab.config_file", config_file)

	for section in configuration:
		for key in configuration.get(section):
			ILALabConfig.add("{}.{}".format(section, key), configuration[section].get(key))

	if os.environ.get("ILA_DATA_DIR"):
		ILALabConfig.add("Data.root", os.environ.get("ILA_DATA_DIR"))

	if ILALabConfig.get("Harness.threads") is None:
		ILALabConfig.add("Harness.threads", max(1, (os.cpu_count() or 1) * 2 - 1))

	if os.environ.get("ILA_THREADS"):
		ILALabConfig.add("Harness.threads", os.environ.get("ILA_THREADS"))

	globals()["ilalab_config"] = ILALabConfig.config


def thread_cap():
	"""Number of worker threads the harness may use.

	Raises:
		ConfigError:  ILA_THREADS (or Harness.threads) is not a positive integer.
	"""

	from exceptions import ConfigError

	value = ilalab_config.get("Harness.threads")

	try:
		threads = int(value)

	except (TypeError, ValueError):
		raise ConfigError("ILA_THREADS must be a positive integer, got:  {!r}".format(value))

	if threads < 1:
		raise ConfigError("ILA_THREADS must be a positive integer, got:  {!r}".format(value))

	return threads


def load_flat_config(path):
	"""Read a flat `key=value` experiment file.

	Blank lines and lines starting with `#` are skipped.  Keys are flag names
	without their leading dashes; `-` and `_` are interchangeable.

	Args:
		path (str):  path to the file

	Returns:
		dict:  raw string values keyed by argparse destination name
	"""

	from exceptions import ConfigError

	if not os.path.exists(path):
		raise ConfigError("Config file does not exist:  {}".format(path))

	values = {}

	with open(path, "r", encoding="utf8") as config_file:

		for number, line in enumerate(config_file, start=1):

			line = line.strip()

			if not line or line.startswith("#"):
				continue

			if "=" not in line:
				raise ConfigError("{}:{}:  expected `key=value`, got:  {}".format(path, number, line))

			key, value = line.split("=", 1)
			values[key.strip().lstrip("-").replace("-", "_")] = value.strip()

	return values


ilalab_config = {}


if __name__ == "__main__":
	print("Initializing ILALab Configuration...")
	load()
