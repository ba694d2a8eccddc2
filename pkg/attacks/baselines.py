#!/usr/bin/env python3
"""Gradient-sign baselines:  I-FGSM and I-FGSM with momentum."""

import numpy as np

import utils

from core import ops
from core.tensor import Tape, Tensor, backward
from exceptions import BoundsViolation, ConfigError


log = utils.log

# Slack for float32 rounding in the bound checks
BOUND_TOLERANCE = 1e-6
L1_GUARD = 1e-12


def as_array(images):

	return images.data if isinstance(images, Tensor) else np.asarray(images, dtype=np.float32)


def project(x, clean, epsilon):
	"""Clip to the closed epsilon ball around `clean`, then to the image range [-1, 1]."""

	return np.clip(np.clip(x, clean - epsilon, clean + epsilon), -1.0, 1.0).astype(np.float32)


def check_bounds(x, clean, epsilon, where):

	distance = np.max(np.abs(x - clean)) if x.size else 0.0

	if distance > epsilon + BOUND_TOLERANCE or np.max(np.abs(x)) > 1.0 + BOUND_TOLERANCE:
		raise BoundsViolation("{}:  iterate left the epsilon ball ({:.3g} > {:.3g}) or [-1, 1]".format(
			where, distance, epsilon))


def loss_gradient(model, x, labels):
	"""d CE(model(x), labels) / dx for an ndarray batch."""

	leaf = Tensor(x, requires_grad=True)

	with Tape() as tape:
		loss = ops.softmax_cross_entropy(model.forward(leaf), labels)

	backward(tape, loss)

	return leaf.grad


def _validate(cfg):

	if cfg.epsilon <= 0:
		raise ConfigError("epsilon must be positive, got {}".format(cfg.epsilon))


def ifgsm(model, X, labels, cfg):
	"""Iterated signed-gradient ascent on the cross-entropy, clipped every step.

		x <- clip_eps,[-1,1](x + step_size * sign(grad_x CE(model(x), labels)))
	"""

	_validate(cfg)
	clean = as_array(X)
	labels = np.asarray(labels, dtype=np.int64)
	x = clean.copy()

	for iteration in range(cfg.iterations):
		x = project(x + cfg.step_size * np.sign(loss_gradient(model, x, labels)), clean, cfg.epsilon)
		check_bounds(x, clean, cfg.epsilon, "ifgsm iteration {}".format(iteration))

	return x


def momentum_ifgsm(model, X, labels, cfg):
	"""I-FGSM over an accumulated direction g <- mu * g + grad / ||grad||_1 (per sample).

	With momentum_decay = 0 this is exactly `ifgsm`.
	"""

	_validate(cfg)
	clean = as_array(X)
	labels = np.asarray(labels, dtype=np.int64)
	x = clean.copy()
	accumulated = np.zeros_like(clean)

	for iteration in range(cfg.iterations):

		grad = loss_gradient(model, x, labels)
		l1 = np.sum(np.abs(grad), axis=(1, 2, 3), keepdims=True, dtype=np.float64)
		accumulated = cfg.momentum_decay * accumulated + (grad / np.maximum(l1, L1_GUARD)).astype(np.float32)

		x = project(x + cfg.step_size * np.sign(accumulated), clean, cfg.epsilon)
		check_bounds(x, clean, cfg.epsilon, "momentum_ifgsm iteration {}".format(iteration))

	return x


BASELINES = {
	"ifgsm": ifgsm,
	"mifgsm": momentum_ifgsm
}


def baseline(method):

	try:
		return BASELINES[method]

	except KeyError:
		raise ConfigError("Unknown attack method '{}'; expected one of:  {}".format(
			method, ", ".join(BASELINES)))
