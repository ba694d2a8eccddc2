import numpy as np
import pytest

from core import ops
from core.gradcheck import grad_check
from core.tensor import Tensor


def test_sum_is_exact():

	x = Tensor(np.random.default_rng(0).standard_normal(20))

	assert grad_check(lambda t: ops.reduce("sum", t), x) < 1e-6


def test_l2_norm_away_from_origin():

	x = Tensor(np.random.default_rng(1).uniform(0.5, 2.0, size=30))

	assert grad_check(lambda t: ops.reduce("l2_norm", t), x) < 1e-4


def _small_cnn(seed):
	"""Weights and an input whose conv pre-activations all keep clear of the relu kink."""

	rng = np.random.default_rng(seed)

	while True:

		x = rng.uniform(-1, 1, size=(2, 2, 6, 6)).astype(np.float32)
		weight = (0.5 * rng.standard_normal((3, 2, 3, 3))).astype(np.float32)
		bias = (0.1 * rng.standard_normal(3)).astype(np.float32)
		dense = (0.3 * rng.standard_normal((4, 3 * 3 * 3))).astype(np.float32)

		pre = ops.conv2d(Tensor(x), Tensor(weight), Tensor(bias), stride=1, pad=1).data

		if np.min(np.abs(pre)) > 0.02:
			return x, weight, bias, dense


def test_conv_relu_linear_chain():

	x, weight, bias, dense = _small_cnn(0)
	labels = [ 0, 3 ]

	def loss(t):
		hidden = ops.elementwise("relu", ops.conv2d(t, Tensor(weight), Tensor(bias), stride=1, pad=1))
		pooled = ops.pool2d(hidden, "avg", 2, 2)
		logits = ops.linear(ops.reshape(pooled, (2, 27)), Tensor(dense), Tensor(np.zeros(4)))
		return ops.softmax_cross_entropy(logits, labels)

	assert grad_check(loss, Tensor(x), step=1e-3) < 1e-3


def test_sigmoid_and_channel_scale():

	rng = np.random.default_rng(3)
	x = Tensor(rng.standard_normal((2, 3, 2, 2)))
	gate = Tensor(rng.standard_normal((2, 3)))

	def loss(t):
		return ops.reduce("l2_norm", ops.reshape(ops.channel_scale(t, ops.elementwise("sigmoid", gate)), (24,)))

	assert grad_check(loss, x) < 1e-3


@pytest.mark.parametrize("op", [ "add", "sub", "mul", "div" ])
def test_binary_ops(op):

	rng = np.random.default_rng(4)
	other = Tensor(rng.uniform(1.0, 2.0, size=6))

	assert grad_check(lambda t: ops.reduce("sum", ops.elementwise(op, t, other)), Tensor(rng.uniform(1, 2, size=6))) < 1e-3


##################################################
# Parameter gradients

@pytest.fixture
def conv_operands():

	rng = np.random.default_rng(6)

	return (rng.uniform(-1, 1, size=(2, 3, 6, 6)), 0.5 * rng.standard_normal((4, 3, 3, 3)),
		0.1 * rng.standard_normal(4), rng.standard_normal(2 * 4 * 3 * 3))


def _conv_loss(x, weight, bias, direction):
	"""<direction, maxpool(relu(conv(x)))>, a scalar touching every conv output."""

	hidden = ops.elementwise("relu", ops.conv2d(x, weight, bias, stride=1, pad=1))
	pooled = ops.pool2d(hidden, "max", 2, 2)

	return ops.reduce("dot", ops.reshape(pooled, (pooled.size,)), Tensor(direction))


def test_conv_weight_gradient(conv_operands):

	x, weight, bias, direction = conv_operands

	assert grad_check(lambda w: _conv_loss(Tensor(x), w, Tensor(bias), direction), Tensor(weight),
		step=1e-3) < 1e-3


def test_conv_bias_gradient(conv_operands):

	x, weight, bias, direction = conv_operands

	assert grad_check(lambda b: _conv_loss(Tensor(x), Tensor(weight), b, direction), Tensor(bias),
		step=1e-3) < 1e-3


def test_linear_weight_and_bias_gradients():

	rng = np.random.default_rng(7)
	x = Tensor(rng.standard_normal((5, 8)))
	weight, bias = rng.standard_normal((10, 8)), rng.standard_normal(10)
	labels = [ 0, 2, 4, 6, 9 ]

	assert grad_check(lambda w: ops.softmax_cross_entropy(ops.linear(x, w, Tensor(bias)), labels),
		Tensor(weight)) < 1e-3
	assert grad_check(lambda b: ops.softmax_cross_entropy(ops.linear(x, Tensor(weight), b), labels),
		Tensor(bias)) < 1e-3


def test_max_pool_gradient():

	rng = np.random.default_rng(8)
	direction = Tensor(rng.standard_normal(2 * 3 * 4 * 4))

	def loss(t):
		return ops.reduce("dot", ops.reshape(ops.pool2d(t, "max", 2, 2), (2 * 3 * 4 * 4,)), direction)

	assert grad_check(loss, Tensor(rng.uniform(-1, 1, size=(2, 3, 8, 8))), samples=64) < 1e-3


##################################################
# Kinks

def test_relu_kink_crossings_are_skipped():

	x = Tensor(np.array([ -2e-4, 3e-4, -0.5, 0.5, 1e-4, 0.8 ]))

	def loss(t):
		return ops.reduce("sum", ops.elementwise("relu", t))

	assert grad_check(loss, x, step=1e-3, skip_kinks=False) > 0.1
	assert grad_check(loss, x, step=1e-3) < 1e-6


def test_max_pool_near_ties_are_skipped():

	x = np.zeros((1, 1, 2, 4))
	x[0, 0, 0, :2] = [ 0.3, 0.3004 ]
	x[0, 0, 1, 2:] = [ -0.7, 0.2 ]

	def loss(t):
		return ops.reduce("sum", ops.pool2d(t, "max", 2, 2))

	assert grad_check(loss, Tensor(x), step=1e-3, skip_kinks=False) > 0.1
	assert grad_check(loss, Tensor(x), step=1e-3) < 1e-6


def test_every_coordinate_on_a_kink():

	assert np.isnan(grad_check(lambda t: ops.reduce("sum", ops.elementwise("relu", t)), Tensor(np.zeros(3))))
