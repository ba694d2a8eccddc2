#!/usr/bin/env python3
"""Differentiable operations on `Tensor`.

No broadcasting: binary operands must have equal shapes, except that a Python
number or a single-element tensor acts as a scalar.
"""

import numbers

import numpy as np

from numpy.lib.stride_tricks import sliding_window_view

from core.tensor import NORM_GUARD, Tensor, note_branches, record
from exceptions import LabelError, ShapeError


ELEMENTWISE_OPS = ( "add", "sub", "mul", "div", "scalar_mul", "relu", "sigmoid", "clamp" )
POOL_MODES = ( "max", "avg" )
REDUCE_OPS = ( "l2_norm", "dot", "sum" )


def _sum64(array, **kwargs):

	return np.sum(array, dtype=np.float64, **kwargs)


def _to_tensor(value):

	if isinstance(value, Tensor):
		return value

	if isinstance(value, numbers.Number):
		return Tensor(float(value))

	raise TypeError("Expected a Tensor or a number, got:  {}".format(type(value).__name__))


def _fold(grad, shape):
	"""Sum a gradient back down to a scalar operand's shape."""

	if grad.shape == tuple(shape):
		return grad

	return np.asarray(_sum64(grad)).reshape(shape)


##################################################
# Elementwise

def elementwise(op, a, b=None):
	"""Apply an elementwise operation.

	Args:
		op (str):  one of add, sub, mul, div, scalar_mul, relu, sigmoid, clamp
		a (Tensor):  first operand
		b:  second operand for binary ops (Tensor or number), the scalar for
			scalar_mul, a (low, high) pair for clamp, unused otherwise

	Returns:
		Tensor
	"""

	if op not in ELEMENTWISE_OPS:
		raise ValueError("Unknown elementwise op:  {}".format(op))

	if op == "relu":
		x = a.data
		note_branches(x > 0)
		return record("relu", (a,), np.maximum(x, 0), lambda g: (g * (x > 0),))

	if op == "sigmoid":
		s = _sigmoid(a.data)
		return record("sigmoid", (a,), s, lambda g: (g * s * (1 - s),))

	if op == "clamp":
		low, high = b
		x = a.data
		inside = (x >= low) & (x <= high)
		note_branches(inside)
		return record("clamp", (a,), np.clip(x, low, high), lambda g: (g * inside,))

	if op == "scalar_mul":
		if not isinstance(b, numbers.Number):
			raise TypeError("scalar_mul needs a number, got:  {}".format(type(b).__name__))
		return record("scalar_mul", (a,), a.data * b, lambda g: (g * b,))

	return _binary(op, a, _to_tensor(b))


def _sigmoid(x):

	out = np.empty_like(x)
	positive = x >= 0
	out[positive] = 1 / (1 + np.exp(-x[positive]))
	exp_x = np.exp(x[~positive])
	out[~positive] = exp_x / (1 + exp_x)

	return out


def _binary(op, a, b):

	if a.shape == b.shape:
		shape = a.shape

	elif b.size == 1:
		shape = a.shape

	elif a.size == 1:
		shape = b.shape

	else:
		raise ShapeError("{}: shape mismatch {} vs {}".format(op, a.shape, b.shape))

	x = a.data if a.shape == shape else a.data.reshape(())
	y = b.data if b.shape == shape else b.data.reshape(())

	if op == "add":
		data = x + y
		rule = lambda g: (_fold(g, a.shape), _fold(g, b.shape))

	elif op == "sub":
		data = x - y
		rule = lambda g: (_fold(g, a.shape), _fold(-g, b.shape))

	elif op == "mul":
		data = x * y
		rule = lambda g: (_fold(g * y, a.shape), _fold(g * x, b.shape))

	else:
		with np.errstate(divide="ignore", invalid="ignore"):
			data = x / y
		rule = lambda g: (_fold(g / y, a.shape), _fold(-g * x / (y * y), b.shape))

	return record(op, (a, b), np.broadcast_to(data, shape), rule)


##################################################
# Convolution, pooling, affine

def _windows(x, kh, kw, stride, out_h, out_w):
	"""(N, C, out_h, out_w, kh, kw) strided view of the sliding windows."""

	view = sliding_window_view(x, (kh, kw), axis=(2, 3))

	return view[:, :, ::stride, ::stride][:, :, :out_h, :out_w]


def _scatter_windows(window_grads, padded_shape, kh, kw, stride, out_h, out_w):
	"""Adjoint of `_windows`: add (N, C, out_h, out_w, kh, kw) back onto the input grid."""

	grad = np.zeros(padded_shape, dtype=window_grads.dtype)

	for i in range(kh):
		for j in range(kw):
			grad[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += window_grads[..., i, j]

	return grad


def conv2d(input, weight, bias, stride=1, pad=0):
	"""2-D cross-correlation of an NCHW batch with an OIHW kernel.

	Output spatial size is floor((H + 2*pad - k) / stride) + 1.
	"""

	if input.ndim != 4 or weight.ndim != 4:
		raise ShapeError("conv2d expects NCHW input and OIHW weight, got {} and {}".format(
			input.shape, weight.shape))

	n, channels, height, width = input.shape
	out_channels, in_channels, kh, kw = weight.shape

	if channels != in_channels:
		raise ShapeError("conv2d channel mismatch:  input has {}, weight expects {}".format(
			channels, in_channels))

	if bias.shape != (out_channels,):
		raise ShapeError("conv2d bias must have shape ({},), got {}".format(out_channels, bias.shape))

	if stride < 1 or pad < 0:
		raise ShapeError("conv2d needs stride >= 1 and pad >= 0")

	if height + 2 * pad < kh or width + 2 * pad < kw:
		raise ShapeError("conv2d kernel {}x{} larger than padded input {}x{}".format(
			kh, kw, height + 2 * pad, width + 2 * pad))

	x = input.data
	if pad:
		x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

	out_h = (height + 2 * pad - kh) // stride + 1
	out_w = (width + 2 * pad - kw) // stride + 1

	cols = _windows(x, kh, kw, stride, out_h, out_w).transpose(0, 2, 3, 1, 4, 5).reshape(
		n * out_h * out_w, channels * kh * kw)
	kernel = weight.data.reshape(out_channels, -1)

	out = cols @ kernel.T + bias.data
	out = out.reshape(n, out_h, out_w, out_channels).transpose(0, 3, 1, 2)

	def rule(g):

		g2 = g.transpose(0, 2, 3, 1).reshape(-1, out_channels)
		grad_input = grad_weight = grad_bias = None

		if input.requires_grad:
			window_grads = (g2 @ kernel).reshape(n, out_h, out_w, channels, kh, kw).transpose(0, 3, 1, 2, 4, 5)
			grad_input = _scatter_windows(window_grads, x.shape, kh, kw, stride, out_h, out_w)
			grad_input = grad_input[:, :, pad:pad + height, pad:pad + width]

		if weight.requires_grad:
			grad_weight = (g2.T @ cols).reshape(weight.shape)

		if bias.requires_grad:
			grad_bias = _sum64(g2, axis=0)

		return grad_input, grad_weight, grad_bias

	return record("conv2d", (input, weight, bias), np.ascontiguousarray(out), rule)


def pool2d(input, mode, k, stride):
	"""Windowed max or mean over an NCHW batch.

	Max pooling routes the gradient to the first maximal position of each
	window in row-major scan order.
	"""

	if mode not in POOL_MODES:
		raise ValueError("Unknown pooling mode:  {}".format(mode))

	if k < 1 or stride < 1:
		raise ShapeError("pool2d needs positive k and stride, got k={} stride={}".format(k, stride))

	if input.ndim != 4:
		raise ShapeError("pool2d expects an NCHW input, got {}".format(input.shape))

	n, channels, height, width = input.shape

	if height < k or width < k:
		raise ShapeError("pool2d window {} larger than input {}x{}".format(k, height, width))

	out_h = (height - k) // stride + 1
	out_w = (width - k) // stride + 1
	flat = _windows(input.data, k, k, stride, out_h, out_w).reshape(n, channels, out_h, out_w, k * k)

	if mode == "max":
		winner = flat.argmax(axis=-1)
		note_branches(winner)
		out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]

		def rule(g):
			window_grads = np.zeros(flat.shape, dtype=g.dtype)
			np.put_along_axis(window_grads, winner[..., None], g[..., None], axis=-1)
			return (_scatter_windows(window_grads.reshape(n, channels, out_h, out_w, k, k),
				input.shape, k, k, stride, out_h, out_w),)

	else:
		out = _sum64(flat, axis=-1) / (k * k)

		def rule(g):
			window_grads = np.broadcast_to((g / (k * k))[..., None, None], (n, channels, out_h, out_w, k, k))
			return (_scatter_windows(window_grads, input.shape, k, k, stride, out_h, out_w),)

	return record("pool2d_{}".format(mode), (input,), out, rule)


def linear(input, weight, bias):
	"""Affine map x @ W^T + b for x of shape N x D and W of shape K x D."""

	if input.ndim != 2 or weight.ndim != 2:
		raise ShapeError("linear expects N x D input and K x D weight, got {} and {}".format(
			input.shape, weight.shape))

	if input.shape[1] != weight.shape[1] or bias.shape != (weight.shape[0],):
		raise ShapeError("linear dimension mismatch:  input {}, weight {}, bias {}".format(
			input.shape, weight.shape, bias.shape))

	x, w = input.data, weight.data

	def rule(g):
		return (
			g @ w if input.requires_grad else None,
			g.T @ x if weight.requires_grad else None,
			_sum64(g, axis=0) if bias.requires_grad else None
		)

	return record("linear", (input, weight, bias), x @ w.T + bias.data, rule)


##################################################
# Losses and reductions

def softmax_cross_entropy(logits, labels):
	"""Mean over the batch of -log softmax(logits)[label]."""

	labels = np.asarray(labels, dtype=np.int64).reshape(-1)

	if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
		raise ShapeError("softmax_cross_entropy needs N x K logits and N labels, got {} and {}".format(
			logits.shape, labels.shape))

	n, classes = logits.shape

	if labels.min() < 0 or labels.max() >= classes:
		raise LabelError("Labels must lie in [0, {}), got range [{}, {}]".format(
			classes, labels.min(), labels.max()))

	z = logits.data.astype(np.float64)
	z = z - z.max(axis=1, keepdims=True)
	log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
	rows = np.arange(n)
	loss = -log_probs[rows, labels].mean()

	def rule(g):
		probs = np.exp(log_probs)
		probs[rows, labels] -= 1
		return (g * probs / n,)

	return record("softmax_cross_entropy", (logits,), np.asarray(loss), rule)


def reduce(op, a, b=None):
	"""Scalar reductions:  l2_norm(a), dot(a, b), sum(a).

	The l2_norm gradient is a / (||a|| + 1e-12).
	"""

	if op not in REDUCE_OPS:
		raise ValueError("Unknown reduction:  {}".format(op))

	x = a.data

	if op == "sum":
		return record("sum", (a,), np.asarray(_sum64(x)), lambda g: (np.broadcast_to(g, x.shape),))

	if op == "l2_norm":
		norm = np.sqrt(_sum64(np.square(x, dtype=np.float64)))
		return record("l2_norm", (a,), np.asarray(norm), lambda g: (g * x / (norm + NORM_GUARD),))

	if b is None or a.size != b.size:
		raise ShapeError("dot needs two operands of equal length, got {} and {}".format(
			a.size, None if b is None else b.size))

	y = b.data
	value = np.dot(x.reshape(-1).astype(np.float64), y.reshape(-1).astype(np.float64))

	return record("dot", (a, b), np.asarray(value), lambda g: (g * y.reshape(x.shape), g * x.reshape(y.shape)))


def row_reduce(op, a, b=None):
	"""Per-row l2_norm or dot of N x D tensors, returning a length-N tensor."""

	if op not in ( "l2_norm", "dot" ):
		raise ValueError("Unknown row reduction:  {}".format(op))

	if a.ndim != 2:
		raise ShapeError("row_reduce expects an N x D tensor, got {}".format(a.shape))

	x = a.data

	if op == "l2_norm":
		norms = np.sqrt(_sum64(np.square(x, dtype=np.float64), axis=1))
		return record("row_l2_norm", (a,), norms,
			lambda g: (g[:, None] * x / (norms[:, None] + NORM_GUARD),))

	if b is None or b.shape != a.shape:
		raise ShapeError("row dot needs two tensors of shape {}".format(a.shape))

	y = b.data
	dots = _sum64(x.astype(np.float64) * y, axis=1)

	return record("row_dot", (a, b), dots, lambda g: (g[:, None] * y, g[:, None] * x))


##################################################
# Structural

def reshape(a, shape):

	shape = tuple(shape)
	data = a.data.reshape(shape)

	return record("reshape", (a,), data, lambda g: (g.reshape(a.shape),))


def concat(tensors, axis=1):

	tensors = tuple(tensors)
	data = np.concatenate([ tensor.data for tensor in tensors ], axis=axis)
	bounds = np.cumsum([ tensor.shape[axis] for tensor in tensors ])[:-1]

	return record("concat", tensors, data, lambda g: tuple(np.split(g, bounds, axis=axis)))


def channel_slice(a, channel):
	"""The single-channel slice a[:, channel:channel + 1] of an N x C x ... tensor."""

	if a.ndim < 2 or not 0 <= channel < a.shape[1]:
		raise ShapeError("Channel {} out of range for shape {}".format(channel, a.shape))

	def rule(g):
		grad = np.zeros(a.shape, dtype=g.dtype)
		grad[:, channel:channel + 1] = g
		return (grad,)

	return record("channel_slice", (a,), a.data[:, channel:channel + 1].copy(), rule)


def channel_scale(x, scale):
	"""Multiply every channel of an NCHW tensor by the matching entry of an N x C gate."""

	if x.ndim != 4 or scale.shape != x.shape[:2]:
		raise ShapeError("channel_scale needs NCHW input and N x C scale, got {} and {}".format(
			x.shape, scale.shape))

	s = scale.data[:, :, None, None]

	return record("channel_scale", (x, scale), x.data * s,
		lambda g: (g * s, _sum64(g * x.data, axis=(2, 3))))
