#!/usr/bin/env python3
"""Reader for the CIFAR-10 binary distribution.

Each record is 3073 bytes:  one label byte, then 1024 red, 1024 green and
1024 blue bytes, each plane 32 x 32 row-major.
"""

import os

import numpy as np

import config
import utils

from data.dataset import CLASSES, Dataset
from exceptions import DatasetError


log = utils.log

RECORD_BYTES = 1 + 3 * 32 * 32
TRAIN_FILES = [ "data_batch_{}.bin".format(number) for number in range(1, 6) ]
TEST_FILES = [ "test_batch.bin" ]


def parse_batch(payload, source="<bytes>"):
	"""(images uint8 N x 3 x 32 x 32, labels uint8 N) from one batch file's bytes."""

	if len(payload) == 0 or len(payload) % RECORD_BYTES:
		raise DatasetError("{}:  size {} is not a positive multiple of {}".format(
			source, len(payload), RECORD_BYTES))

	records = np.frombuffer(payload, dtype=np.uint8).reshape(-1, RECORD_BYTES)
	labels = records[:, 0].copy()

	if labels.max() >= CLASSES:
		raise DatasetError("{}:  label {} out of range".format(source, labels.max()))

	return records[:, 1:].reshape(-1, 3, 32, 32).copy(), labels


def _read_split(directory, names, split):

	images, labels = [], []

	for name in names:

		path = os.path.join(directory, name)

		if not os.path.exists(path):
			raise DatasetError("Missing CIFAR-10 batch:  {}".format(path))

		with open(path, "rb") as batch_file:
			batch_images, batch_labels = parse_batch(batch_file.read(), path)

		images.append(batch_images)
		labels.append(batch_labels)

	return Dataset(np.concatenate(images), np.concatenate(labels), split)


def load_cifar10(directory=None):
	"""(train, test) Datasets from `directory`, defaulting to Data.root (ILA_DATA_DIR)."""

	directory = directory or config.ilalab_config.get("Data.root")

	train = _read_split(directory, TRAIN_FILES, "train")
	test = _read_split(directory, TEST_FILES, "test")
	log.debug("Loaded CIFAR-10 from {}:  {} train / {} test".format(directory, len(train), len(test)))

	return train, test


def available(directory=None):

	directory = directory or config.ilalab_config.get("Data.root")

	return directory is not None and all(
		os.path.exists(os.path.join(directory, name)) for name in TRAIN_FILES + TEST_FILES)
