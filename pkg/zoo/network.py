#!/usr/bin/env python3

from collections import OrderedDict

import numpy as np

from core.tensor import Tensor
from exceptions import ShapeError
from records.models import ModelSpec
from zoo import architectures, layers


INPUT_SHAPE = (3, 32, 32)


def declarations(spec):
	"""(parameter name, block name, shape, fan_in, gain) in checkpoint order."""

	for block in spec.blocks:
		for name, shape, fan_in, gain in layers.block_type(block).parameters(block):
			yield name, block["name"], tuple(shape), fan_in, gain


class Network():
	"""A ModelSpec plus its parameters, in declaration order.

	Parameters are frozen (no gradient) unless `trainable(True)` is in
	effect, so attacks can share one model across threads.
	"""

	def __init__(self, spec, params):

		self.spec = spec
		self.params = OrderedDict(params)

		expected = [ name for name, *_ in self.declarations() ]

		if list(self.params) != expected:
			raise ShapeError("Parameters do not match the {} declaration".format(spec.name))

	@property
	def name(self):
		return self.spec.name

	@property
	def classes(self):
		return self.spec.classes

	@property
	def taps(self):
		return self.spec.taps

	@property
	def depth(self):
		"""Number of taps, T."""
		return len(self.spec.blocks) - 1

	def declarations(self):
		return declarations(self.spec)

	def channels(self, layer):

		self.check_layer(layer)
		block = self.spec.blocks[layer]

		return layers.block_type(block).channels(block)

	def trainable(self, flag=True):

		for tensor in self.params.values():
			tensor.requires_grad = flag
			tensor.grad = None

		return self

	def check_layer(self, layer):

		if not isinstance(layer, (int, np.integer)) or not 0 <= layer < self.depth:
			raise ShapeError("Layer {} out of range for {} (0..{})".format(layer, self.name, self.depth - 1))

	def _check_input(self, x):

		if x.ndim != 4 or x.shape[1:] != INPUT_SHAPE:
			raise ShapeError("{} expects N x 3 x 32 x 32 input, got {}".format(self.name, x.shape))

	def forward(self, x, record_taps=False):
		"""Logits for the batch `x`; with `record_taps` also the list of every F_l(x)."""

		self._check_input(x)
		taps = []

		for block in self.spec.blocks:
			x = layers.block_type(block).forward(block, self.params, x)
			taps.append(x)

		return (x, taps[:-1]) if record_taps else x

	def forward_to_layer(self, x, layer):
		"""F_l(x), computing only the blocks up to and including `layer`."""

		self._check_input(x)
		self.check_layer(layer)

		for block in self.spec.blocks[:layer + 1]:
			x = layers.block_type(block).forward(block, self.params, x)

		return x

	def __call__(self, x):
		return self.forward(x)


def build(arch, seed, classes=architectures.CLASSES):
	"""Freshly initialized network; the same (arch, seed) gives identical weights."""

	spec = ModelSpec(name=arch, classes=classes, blocks=architectures.blocks_for(arch, classes))
	rng = np.random.default_rng(seed)
	params = []

	for name, _, shape, fan_in, gain in declarations(spec):
		params.append((name, Tensor(layers.initialize(shape, fan_in, rng, gain))))

	return Network(spec, params)


def logits(model, images, batch_size=256):
	"""Untracked logits for an ndarray of normalized images, evaluated in batches."""

	outputs = [
		model.forward(Tensor(images[start:start + batch_size])).data
		for start in range(0, len(images), batch_size)
	]

	return np.concatenate(outputs, axis=0)
