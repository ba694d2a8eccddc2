#!/usr/bin/env python3
"""Adversarial example files.

	b"ILAX" | u32 version | u64 count | u32 C, H, W | f32 epsilon |
	count x (u32 dataset index | u8 label | f32 clean[C*H*W] | f32 adversarial[C*H*W])

Little-endian throughout, no padding.
"""

import struct

import numpy as np

import utils

from exceptions import AdversarialFileError


log = utils.log

MAGIC = b"ILAX"
VERSION = 1
HEADER = struct.Struct("<4sIQIIIf")


def record_dtype(shape):

	return np.dtype([
		("index", "<u4"),
		("label", "u1"),
		("clean", "<f4", tuple(shape)),
		("adversarial", "<f4", tuple(shape))
	])


class AdversarialFile():

	def __init__(self, indices, labels, clean, adversarial, epsilon):
		self.indices = np.asarray(indices, dtype=np.uint32)
		self.labels = np.asarray(labels, dtype=np.uint8)
		self.clean = np.asarray(clean, dtype=np.float32)
		self.adversarial = np.asarray(adversarial, dtype=np.float32)
		self.epsilon = float(epsilon)

	def __len__(self):
		return len(self.indices)


def dumps(indices, labels, clean, adversarial, epsilon):

	clean = np.asarray(clean, dtype=np.float32)
	adversarial = np.asarray(adversarial, dtype=np.float32)

	if clean.ndim != 4 or clean.shape != adversarial.shape or not (len(indices) == len(labels) == len(clean)):
		raise AdversarialFileError("Misaligned batches:  clean {}, adversarial {}, {} indices, {} labels".format(
			clean.shape, adversarial.shape, len(indices), len(labels)))

	records = np.empty(len(clean), dtype=record_dtype(clean.shape[1:]))
	records["index"] = indices
	records["label"] = labels
	records["clean"] = clean
	records["adversarial"] = adversarial

	return HEADER.pack(MAGIC, VERSION, len(clean), *clean.shape[1:], epsilon) + records.tobytes()


def write_adversarial(path, indices, labels, clean, adversarial, epsilon):

	utils.write_bytes_atomic(path, dumps(indices, labels, clean, adversarial, epsilon))
	log.info("Wrote {} adversarial examples:  {}".format(len(indices), path))


def loads(payload, path="<bytes>"):

	if len(payload) < HEADER.size:
		raise AdversarialFileError("{}:  truncated header".format(path))

	magic, version, count, channels, height, width, epsilon = HEADER.unpack_from(payload)

	if magic != MAGIC:
		raise AdversarialFileError("{}:  not an adversarial file (bad magic)".format(path))

	if version != VERSION:
		raise AdversarialFileError("{}:  unsupported version {} (expected {})".format(path, version, VERSION))

	dtype = record_dtype((channels, height, width))

	if len(payload) != HEADER.size + count * dtype.itemsize:
		raise AdversarialFileError("{}:  expected {} records of {} bytes, found {} bytes of records".format(
			path, count, dtype.itemsize, len(payload) - HEADER.size))

	records = np.frombuffer(payload, dtype=dtype, offset=HEADER.size, count=count)

	return AdversarialFile(records["index"], records["label"], records["clean"], records["adversarial"], epsilon)


def read_adversarial(path):

	try:
		with open(path, "rb") as adversarial_file:
			return loads(adversarial_file.read(), path)

	except OSError as error:
		raise AdversarialFileError("Unable to read {}:  {}".format(path, error))
