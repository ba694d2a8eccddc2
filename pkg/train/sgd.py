#!/usr/bin/env python3

import numpy as np

from exceptions import ShapeError


def sgd_step(params, grads, lr, momentum=0.0, weight_decay=0.0, velocity=None):
	"""One SGD-with-momentum update on plain arrays.

		v <- momentum * v + g + weight_decay * w
		w <- w - lr * v

	Args:
		params (list):  ndarrays
		grads (list):  ndarrays matching `params` (None leaves a parameter alone)
		velocity (list):  buffers from the previous step, or None to start at zero

	Returns:
		(updated params, updated velocity)
	"""

	if len(params) != len(grads):
		raise ShapeError("Got {} parameters but {} gradients".format(len(params), len(grads)))

	velocity = velocity or [ np.zeros_like(param) for param in params ]
	updated, buffers = [], []

	for param, grad, buffer in zip(params, grads, velocity):

		if grad is None:
			updated.append(param)
			buffers.append(buffer)
			continue

		if grad.shape != param.shape:
			raise ShapeError("Gradient shape {} does not match parameter shape {}".format(grad.shape, param.shape))

		buffer = momentum * buffer + grad + weight_decay * param
		updated.append((param - lr * buffer).astype(param.dtype))
		buffers.append(buffer.astype(param.dtype))

	return updated, buffers


class SGD():
	"""Momentum SGD over a model's parameter tensors; buffers persist across steps."""

	def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):

		self.params = list(params)
		self.lr = lr
		self.momentum = momentum
		self.weight_decay = weight_decay
		self.velocity = None

	def step(self):

		values, self.velocity = sgd_step(
			[ tensor.data for tensor in self.params ],
			[ tensor.grad for tensor in self.params ],
			self.lr, self.momentum, self.weight_decay, self.velocity
		)

		for tensor, value in zip(self.params, values):
			tensor.data = value

	def zero_grad(self):

		for tensor in self.params:
			tensor.zero_grad()
