#!/usr/bin/env python3
"""Intermediate Level Attack:  fine-tune an adversarial batch at one layer.

For the baseline perturbation dY' = F_l(X') - F_l(X) and the current one
dY'' = F_l(X'') - F_l(X), each sample ascends

	L = alpha * ||dY''|| / ||dY'|| + (dY'' / ||dY''||) . (dY' / ||dY'||)

with raw (unsigned) gradient steps, projected back onto the epsilon ball and
the image range after every step.
"""

import numpy as np

import utils

from attacks.baselines import as_array, check_bounds, project
from core import ops
from core.tensor import NORM_GUARD, Tape, Tensor, backward
from exceptions import ConfigError, DegenerateBaseline, DegenerateCurrent, ShapeError


log = utils.log

# ||dY'|| at or below this leaves the loss undefined
DEGENERATE_NORM = 1e-8


class IlaTrace():
	"""Result of an ILA run.

	Attributes:
		adversarial (ndarray):  X'', degenerate samples equal to their X'
		degenerate (list):  batch indices whose baseline perturbation vanished
		initial_loss (ndarray):  per-sample objective at X' (NaN when degenerate)
		final_loss (ndarray):  per-sample objective at the returned X''
	"""

	def __init__(self, adversarial, degenerate, initial_loss, final_loss):
		self.adversarial = adversarial
		self.degenerate = degenerate
		self.initial_loss = initial_loss
		self.final_loss = final_loss


def ila_loss(dY_ref, dY_cur, alpha):
	"""The single-sample objective; `dY_ref` is a constant.

	Raises:
		DegenerateBaseline:  ||dY_ref|| <= 1e-8
		DegenerateCurrent:  ||dY_cur|| <= 1e-12
	"""

	ref = as_array(dY_ref).reshape(-1).astype(np.float64)

	if ref.size != dY_cur.size:
		raise ShapeError("ila_loss operands differ in length:  {} vs {}".format(ref.size, dY_cur.size))

	ref_norm = np.sqrt(np.sum(ref * ref))

	if ref_norm <= DEGENERATE_NORM:
		raise DegenerateBaseline("Baseline perturbation norm {:.3g} is degenerate".format(ref_norm))

	cur = ops.reshape(dY_cur, (dY_cur.size,))
	cur_norm = ops.reduce("l2_norm", cur)

	if cur_norm.item() <= NORM_GUARD:
		raise DegenerateCurrent("Current perturbation norm {:.3g} is degenerate".format(cur_norm.item()))

	magnitude = ops.elementwise("scalar_mul", cur_norm, alpha / ref_norm)
	direction = ops.elementwise("div", ops.reduce("dot", cur, Tensor(ref / ref_norm)), cur_norm)

	return ops.elementwise("add", magnitude, direction)


def ila_losses(ref, ref_norms, dY_cur, alpha):
	"""Per-sample objective for an N x D batch; returns a length-N tensor."""

	cur_norms = ops.row_reduce("l2_norm", dY_cur)
	vanished = np.flatnonzero(cur_norms.data <= NORM_GUARD)

	if vanished.size:
		raise DegenerateCurrent("Current perturbation vanished for samples:  {}".format(vanished.tolist()))

	magnitude = ops.elementwise("mul", cur_norms, Tensor(alpha / ref_norms))
	direction = ops.elementwise("div",
		ops.row_reduce("dot", dY_cur, Tensor(ref / ref_norms[:, None])), cur_norms)

	return ops.elementwise("add", magnitude, direction)


def _features(model, x, layer, channel):

	features = model.forward_to_layer(x, layer)

	if channel is not None:
		features = ops.channel_slice(features, channel)

	return ops.reshape(features, (features.shape[0], features.size // features.shape[0]))


def resolve_target(model, cfg, channel=None):
	"""Validated (layer, channel) for an ILA run."""

	layer = cfg.target_layer

	if layer is None or layer == "auto":
		raise ConfigError("ILA needs a concrete target layer; resolve 'auto' with select_layer first")

	model.check_layer(layer)

	if channel is not None and not 0 <= channel < model.channels(layer):
		raise ShapeError("Channel {} out of range for layer {} of {} ({} channels)".format(
			channel, layer, model.name, model.channels(layer)))

	return layer, channel


def ila_refine(model, X, X_adv, labels, cfg, channel=None):
	"""Run ILA from the baseline batch `X_adv` and report the objective.

	Labels are accepted for symmetry with the baselines; the objective does
	not use them.  Samples whose baseline perturbation vanishes at the
	targeted layer (or channel) pass through unchanged.

	Returns:
		IlaTrace
	"""

	layer, channel = resolve_target(model, cfg, channel)
	clean, baseline = as_array(X), as_array(X_adv)

	if clean.shape != baseline.shape:
		raise ShapeError("Clean and baseline batches differ:  {} vs {}".format(clean.shape, baseline.shape))

	clean_features = _features(model, Tensor(clean), layer, channel).data
	ref = (_features(model, Tensor(baseline), layer, channel).data - clean_features).astype(np.float64)
	ref_norms = np.sqrt(np.sum(ref * ref, axis=1))

	active = np.flatnonzero(ref_norms > DEGENERATE_NORM)
	degenerate = np.flatnonzero(ref_norms <= DEGENERATE_NORM).tolist()

	initial_loss = np.full(len(clean), np.nan)
	final_loss = np.full(len(clean), np.nan)
	refined = baseline.copy()

	if degenerate:
		log.warning("ILA at layer {}{}:  {} degenerate sample(s) passed through unchanged".format(
			layer, "" if channel is None else " channel {}".format(channel), len(degenerate)))

	if not active.size:
		return IlaTrace(refined, degenerate, initial_loss, final_loss)

	anchor = clean[active]
	anchor_features = Tensor(clean_features[active])
	ref, ref_norms = ref[active], ref_norms[active]
	x = baseline[active].copy()

	def objective(batch, tracked):

		leaf = Tensor(batch, requires_grad=tracked)
		current = ops.elementwise("sub", _features(model, leaf, layer, channel), anchor_features)

		return leaf, ila_losses(ref, ref_norms, current, cfg.alpha)

	for iteration in range(cfg.iterations):

		with Tape() as tape:
			leaf, losses = objective(x, True)
			total = ops.reduce("sum", losses)

		backward(tape, total)

		if iteration == 0:
			initial_loss[active] = losses.data

		x = project(x + cfg.step_size * leaf.grad, anchor, cfg.epsilon)
		check_bounds(x, anchor, cfg.epsilon, "ila iteration {}".format(iteration))
		log.debug("ILA layer {} iteration {}:  mean loss {:.4f}".format(layer, iteration, float(np.mean(losses.data))))

	_, losses = objective(x, False)
	final_loss[active] = losses.data

	if cfg.iterations == 0:
		initial_loss[active] = losses.data

	refined[active] = x

	return IlaTrace(refined, degenerate, initial_loss, final_loss)


def ila_attack(model, X, X_adv, labels, cfg):
	"""X'' from ILA at `cfg.target_layer`."""

	return ila_refine(model, X, X_adv, labels, cfg).adversarial


def channel_ila(model, X, X_adv, labels, cfg):
	"""ILA with dY restricted to channel `cfg.target_channel` of the targeted layer."""

	if cfg.target_channel is None:
		raise ConfigError("channel_ila needs target_channel")

	return ila_refine(model, X, X_adv, labels, cfg, channel=cfg.target_channel).adversarial
