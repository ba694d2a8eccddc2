#!/usr/bin/env python3
"""Block types the architectures are assembled from.

A block descriptor is a plain dict (it is what a checkpoint stores):

	{ "type": "conv", "name": "conv1", "in": 3, "out": 16, ... }

Every block except the classifier is a tap:  its output is F_l for the block's
position l.  Parameters are named "{block}.{parameter}" and declared in the
order `parameters()` yields them, which is also the checkpoint order.
"""

import numpy as np

from core import ops
from exceptions import ConfigError


def relu(x):
	return ops.elementwise("relu", x)


def _conv_shape(name, channels_in, channels_out, k, gain=1.0):
	"""(name, shape, fan_in, gain) for a conv weight and its bias."""

	return [
		("{}.weight".format(name), (channels_out, channels_in, k, k), channels_in * k * k, gain),
		("{}.bias".format(name), (channels_out,), None, 1.0)
	]


def _conv(params, name, x, stride=1, pad=None):

	weight = params["{}.weight".format(name)]
	pad = weight.shape[2] // 2 if pad is None else pad

	return ops.conv2d(x, weight, params["{}.bias".format(name)], stride=stride, pad=pad)


##################################################
# Blocks

class ConvBlock():
	"""conv -> relu, optionally followed by a 2x2 max pool."""

	@staticmethod
	def parameters(block):
		return _conv_shape(block["name"], block["in"], block["out"], block.get("k", 3))

	@staticmethod
	def forward(block, params, x):

		y = relu(_conv(params, block["name"], x, stride=block.get("stride", 1)))

		if block.get("pool") == "max":
			y = ops.pool2d(y, "max", 2, 2)

		return y

	@staticmethod
	def channels(block):
		return block["out"]


class ResidualBlock():
	"""Basic residual block:  relu(conv2(relu(conv1(x))) [* SE gate] + shortcut(x)).

	The shortcut is a strided 1x1 conv whenever the shape changes.  With
	`se` set, the branch output is rescaled per channel by a squeeze-excite
	gate whose hidden width is out // se.
	"""

	@staticmethod
	def parameters(block):

		name, channels_in, channels_out = block["name"], block["in"], block["out"]
		shapes = _conv_shape("{}.conv1".format(name), channels_in, channels_out, 3)
		# Damped start, no batch normalization
		shapes += _conv_shape("{}.conv2".format(name), channels_out, channels_out, 3, gain=0.5)

		if block.get("se"):
			hidden = max(1, channels_out // block["se"])
			shapes += [
				("{}.se1.weight".format(name), (hidden, channels_out), channels_out, 1.0),
				("{}.se1.bias".format(name), (hidden,), None, 1.0),
				("{}.se2.weight".format(name), (channels_out, hidden), hidden, 1.0),
				("{}.se2.bias".format(name), (channels_out,), None, 1.0)
			]

		if ResidualBlock.projects(block):
			shapes += _conv_shape("{}.shortcut".format(name), channels_in, channels_out, 1)

		return shapes

	@staticmethod
	def projects(block):
		return block.get("stride", 1) != 1 or block["in"] != block["out"]

	@staticmethod
	def forward(block, params, x):

		name = block["name"]
		stride = block.get("stride", 1)

		branch = relu(_conv(params, "{}.conv1".format(name), x, stride=stride))
		branch = _conv(params, "{}.conv2".format(name), branch)

		if block.get("se"):
			branch = squeeze_excite(params, name, branch)

		if ResidualBlock.projects(block):
			shortcut = _conv(params, "{}.shortcut".format(name), x, stride=stride, pad=0)

		else:
			shortcut = x

		return relu(ops.elementwise("add", branch, shortcut))

	@staticmethod
	def channels(block):
		return block["out"]


def squeeze_excite(params, name, x):

	n, channels, height, _ = x.shape
	squeezed = ops.reshape(ops.pool2d(x, "avg", height, height), (n, channels))
	hidden = relu(ops.linear(squeezed,
		params["{}.se1.weight".format(name)], params["{}.se1.bias".format(name)]))
	gate = ops.elementwise("sigmoid", ops.linear(hidden,
		params["{}.se2.weight".format(name)], params["{}.se2.bias".format(name)]))

	return ops.channel_scale(x, gate)


class InceptionBlock():
	"""Three parallel branches joined along channels:  1x1, 1x1 -> 3x3, 1x1 -> 5x5."""

	@staticmethod
	def parameters(block):

		name, channels_in = block["name"], block["in"]

		return (
			_conv_shape("{}.b1".format(name), channels_in, block["c1"], 1) +
			_conv_shape("{}.b2_reduce".format(name), channels_in, block["r3"], 1) +
			_conv_shape("{}.b2".format(name), block["r3"], block["c3"], 3) +
			_conv_shape("{}.b3_reduce".format(name), channels_in, block["r5"], 1) +
			_conv_shape("{}.b3".format(name), block["r5"], block["c5"], 5)
		)

	@staticmethod
	def forward(block, params, x):

		name = block["name"]

		one = relu(_conv(params, "{}.b1".format(name), x))
		three = relu(_conv(params, "{}.b2".format(name),
			relu(_conv(params, "{}.b2_reduce".format(name), x))))
		five = relu(_conv(params, "{}.b3".format(name),
			relu(_conv(params, "{}.b3_reduce".format(name), x))))

		return ops.concat([ one, three, five ], axis=1)

	@staticmethod
	def channels(block):
		return block["c1"] + block["c3"] + block["c5"]


class PoolBlock():

	@staticmethod
	def parameters(block):
		return []

	@staticmethod
	def forward(block, params, x):
		return ops.pool2d(x, block["mode"], block["k"], block.get("stride", block["k"]))

	@staticmethod
	def channels(block):
		return block["in"]


class ClassifierBlock():
	"""Flatten then linear; not a tap."""

	@staticmethod
	def parameters(block):

		return [
			("{}.weight".format(block["name"]), (block["classes"], block["in"]), block["in"], 0.5),
			("{}.bias".format(block["name"]), (block["classes"],), None, 1.0)
		]

	@staticmethod
	def forward(block, params, x):

		flat = ops.reshape(x, (x.shape[0], x.size // x.shape[0]))

		return ops.linear(flat, params["{}.weight".format(block["name"])],
			params["{}.bias".format(block["name"])])

	@staticmethod
	def channels(block):
		return block["classes"]


BLOCK_TYPES = {
	"conv": ConvBlock,
	"residual": ResidualBlock,
	"inception": InceptionBlock,
	"pool": PoolBlock,
	"classifier": ClassifierBlock
}


def block_type(block):

	try:
		return BLOCK_TYPES[block["type"]]

	except KeyError:
		raise ConfigError("Unknown block type:  {}".format(block.get("type")))


def initialize(shape, fan_in, rng, gain=1.0):
	"""He-normal weights, N(0, 2 / fan_in) scaled by `gain`; zero biases."""

	if fan_in is None:
		return np.zeros(shape, dtype=np.float32)

	return (rng.standard_normal(shape) * gain * np.sqrt(2.0 / fan_in)).astype(np.float32)
