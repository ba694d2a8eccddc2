#!/usr/bin/env python3
"""Binary checkpoint files.

	b"ILAC" | u32 version | u64 spec length | JSON spec |
	float32 weights in declaration order | u64 metadata length | JSON metadata

All integers and floats are little-endian.
"""

import json
import struct

import numpy as np
import pydantic

import utils

from core.tensor import Tensor
from exceptions import CheckpointError, ConfigError, ShapeError
from records.models import CheckpointMetadata, ModelSpec
from zoo.network import Network, declarations


log = utils.log

MAGIC = b"ILAC"
VERSION = 1
WEIGHT_DTYPE = np.dtype("<f4")


def dumps(model, metadata):

	spec_blob = model.spec.json().encode("utf-8")
	meta_blob = metadata.json().encode("utf-8")

	chunks = [ MAGIC, struct.pack("<IQ", VERSION, len(spec_blob)), spec_blob ]
	chunks.extend(
		np.ascontiguousarray(tensor.data, dtype=WEIGHT_DTYPE).tobytes() for tensor in model.params.values())
	chunks.extend([ struct.pack("<Q", len(meta_blob)), meta_blob ])

	return b"".join(chunks)


def save(model, path, metadata=None):

	metadata = metadata or CheckpointMetadata(arch=model.name, classes=model.classes)
	utils.write_bytes_atomic(path, dumps(model, metadata))
	log.info("Saved {} checkpoint:  {}".format(model.name, path))


class _Reader():

	def __init__(self, payload, path):
		self.payload = payload
		self.path = path
		self.offset = 0

	def take(self, count, what):

		if self.offset + count > len(self.payload):
			raise CheckpointError("{}:  truncated while reading {}".format(self.path, what))

		chunk = self.payload[self.offset:self.offset + count]
		self.offset += count

		return chunk


def loads(payload, path="<bytes>"):
	"""Parse checkpoint bytes into (Network, CheckpointMetadata).

	Raises:
		CheckpointError:  bad magic, unsupported version, truncated or
			inconsistent contents
	"""

	reader = _Reader(payload, path)

	if reader.take(len(MAGIC), "the magic bytes") != MAGIC:
		raise CheckpointError("{}:  not a checkpoint (bad magic)".format(path))

	version, spec_length = struct.unpack("<IQ", reader.take(12, "the header"))

	if version != VERSION:
		raise CheckpointError("{}:  unsupported checkpoint version {} (expected {})".format(
			path, version, VERSION))

	try:
		spec = ModelSpec.parse_raw(reader.take(spec_length, "the model spec"))

	except (pydantic.ValidationError, ValueError) as error:
		raise CheckpointError("{}:  invalid model spec:  {}".format(path, error))

	params = []

	try:
		layout = list(declarations(spec))

	except ConfigError as error:
		raise CheckpointError("{}:  {}".format(path, error))

	for name, block, shape, _, _ in layout:

		count = int(np.prod(shape))
		raw = reader.take(count * WEIGHT_DTYPE.itemsize, "block '{}' ({})".format(block, name))
		params.append((name, Tensor(np.frombuffer(raw, dtype=WEIGHT_DTYPE).reshape(shape).copy())))

	(meta_length,) = struct.unpack("<Q", reader.take(8, "the metadata length"))

	try:
		metadata = CheckpointMetadata.parse_raw(reader.take(meta_length, "the metadata"))

	except (pydantic.ValidationError, ValueError) as error:
		raise CheckpointError("{}:  invalid metadata:  {}".format(path, error))

	if reader.offset != len(payload):
		raise CheckpointError("{}:  {} unexpected trailing bytes".format(path, len(payload) - reader.offset))

	try:
		return Network(spec, params), metadata

	except ShapeError as error:
		raise CheckpointError("{}:  {}".format(path, error))


def load(path):

	try:
		with open(path, "rb") as checkpoint_file:
			payload = checkpoint_file.read()

	except OSError as error:
		raise CheckpointError("Unable to read checkpoint {}:  {}".format(path, error))

	return loads(payload, path)


def load_model(path):

	return load(path)[0]
