#!/usr/bin/env python3

import numpy as np

import utils

from core.tensor import Tape, Tensor, backward, precision, watch_branches


log = utils.log


def _evaluate(function, values):

	with watch_branches() as branches:
		value = function(Tensor(values)).item()

	return value, branches


def _same_piece(first, second):

	return len(first) == len(second) and all(
		a.shape == b.shape and np.array_equal(a, b) for a, b in zip(first, second))


def grad_check(function, x, step=1e-3, samples=32, seed=0, skip_kinks=True):
	"""Compare the tape gradient of a scalar function with central differences.

	The analytic gradient is taken at the storage precision (float32); the
	numeric estimate (f(x + h) - f(x - h)) / 2h is evaluated in float64 so the
	comparison measures the gradient rules rather than float32 rounding.

	With `skip_kinks`, a coordinate whose +h or -h shift moves any relu, clamp
	or max-pool element onto another branch is not used; coordinates are drawn
	until `samples` usable ones are found or none are left.

	Args:
		function (callable):  maps a Tensor to a scalar Tensor
		x (Tensor):  point to check at
		step (float):  finite-difference step h
		samples (int):  number of coordinates checked (all when x is smaller)
		seed (int):  picks the sampled coordinates
		skip_kinks (bool):  leave out coordinates whose shifts cross a kink

	Returns:
		float:  max over the checked coordinates of
			|analytic - numeric| / max(|analytic|, |numeric|, 1e-2 * max|numeric|),
			NaN when every coordinate crossed a kink
	"""

	point = x.numpy()
	leaf = Tensor(point, requires_grad=True)

	with Tape() as tape:
		loss = function(leaf)

	backward(tape, loss)
	analytic = np.zeros(point.size) if leaf.grad is None else leaf.grad.reshape(-1).astype(np.float64)

	candidates = np.random.default_rng(seed).permutation(point.size)
	base = point.astype(np.float64).reshape(-1)
	checked, numeric = [], []
	skipped = 0

	with precision(np.float64):

		_, centre = _evaluate(function, point.astype(np.float64))

		for coordinate in candidates:

			if len(checked) == samples:
				break

			shifted = base.copy()
			shifted[coordinate] += step
			upper, upper_branches = _evaluate(function, shifted.reshape(point.shape))

			shifted[coordinate] -= 2 * step
			lower, lower_branches = _evaluate(function, shifted.reshape(point.shape))

			if skip_kinks and not (_same_piece(centre, upper_branches) and _same_piece(centre, lower_branches)):
				skipped += 1
				continue

			checked.append(coordinate)
			numeric.append((upper - lower) / (2 * step))

	if skipped:
		log.debug("grad_check skipped {} coordinate(s) crossing a kink".format(skipped))

	if not checked:
		log.warning("grad_check found no coordinate clear of a kink at step {}".format(step))
		return float("nan")

	numeric = np.asarray(numeric)
	picked = analytic[np.asarray(checked)]
	floor = 1e-2 * np.max(np.abs(numeric))
	scale = np.maximum(np.maximum(np.abs(picked), np.abs(numeric)), floor)
	scale[scale == 0] = 1.0

	return float(np.max(np.abs(picked - numeric) / scale))
