#!/usr/bin/env python3
"""Disturbance profiles and latest-peak layer selection.

The disturbance at layer l is ||F_l(X'') - F_l(X)|| / ||F_l(X') - F_l(X)||,
averaged over samples.
"""

import numpy as np

import config
import utils

from attacks.baselines import as_array
from attacks.ila import DEGENERATE_NORM, ila_refine
from attacks.pipeline import chunks, generate
from core.tensor import Tensor
from exceptions import DegenerateBaseline, ShapeError
from records.models import AttackPipeline, DisturbanceProfile, LayerSelection


log = utils.log


def tap_norms(model, reference, shifted, batch_size=128):
	"""Per-layer, per-sample ||F_l(shifted) - F_l(reference)||, shape T x N (float64)."""

	norms = np.empty((model.depth, len(reference)))

	for start in range(0, len(reference), batch_size):

		stop = start + batch_size
		_, base = model.forward(Tensor(reference[start:stop]), record_taps=True)
		_, moved = model.forward(Tensor(shifted[start:stop]), record_taps=True)

		for layer, (a, b) in enumerate(zip(base, moved)):
			delta = (b.data - a.data).reshape(len(a.data), -1).astype(np.float64)
			norms[layer, start:stop] = np.sqrt(np.sum(delta * delta, axis=1))

	return norms


def disturbance_profile(model, X, X_adv, X_refined, target_layer=None):
	"""Mean disturbance f(l) at every tap.

	Samples whose baseline perturbation vanishes at a layer are left out of
	that layer's mean; `excluded[l]` counts them.

	Raises:
		DegenerateBaseline:  every sample is excluded at some layer
	"""

	clean, baseline, refined = as_array(X), as_array(X_adv), as_array(X_refined)

	if not clean.shape == baseline.shape == refined.shape:
		raise ShapeError("Misaligned batches:  {}, {}, {}".format(clean.shape, baseline.shape, refined.shape))

	denominators = tap_norms(model, clean, baseline)
	numerators = tap_norms(model, clean, refined)
	values, excluded = [], []

	for layer in range(model.depth):

		usable = denominators[layer] > DEGENERATE_NORM

		if not usable.any():
			raise DegenerateBaseline("Every sample has a vanishing baseline perturbation at layer {} ({})".format(
				layer, model.taps[layer][1]))

		values.append(float(np.mean(numerators[layer, usable] / denominators[layer, usable])))
		excluded.append(int(np.sum(~usable)))

	return DisturbanceProfile(source=model.name, target_layer=target_layer, values=values, excluded=excluded)


def _values(profile):

	return profile.values if isinstance(profile, DisturbanceProfile) else list(profile)


def has_peak(profile, layer):
	"""Strict local maximum at `layer`; an endpoint only needs to beat its one neighbour."""

	values = _values(profile)

	if not 0 <= layer < len(values):
		raise ShapeError("Layer {} out of range for a profile of length {}".format(layer, len(values)))

	left = layer == 0 or values[layer] > values[layer - 1]
	right = layer == len(values) - 1 or values[layer] > values[layer + 1]

	return left and right


def choose_layer(profiles):
	"""Latest-peak rule over profiles indexed by their targeted layer.

	Returns:
		(layer, used_fallback):  the largest l whose own profile peaks at l, or
			when none does, the l maximizing f_l(l)
	"""

	peaks = [ has_peak(profile, layer) for layer, profile in enumerate(profiles) ]
	peaked = [ layer for layer, peak in enumerate(peaks) if peak ]

	if peaked:
		return peaked[-1], False

	values = [ _values(profile)[layer] for layer, profile in enumerate(profiles) ]
	layer = int(np.argmax(values))
	log.warning("No targeted layer produced a peak at itself; falling back to the largest self-disturbance (layer {})".format(layer))

	return layer, True


def layer_selection(model, X, labels, method, baseline_cfg, ila_cfg, threads=None):
	"""Run ILA at every tap from one shared baseline and apply the latest-peak rule.

	Args:
		model (Network):  source model
		X (ndarray):  calibration batch
		labels (array-like):  its labels
		method (str):  baseline attack, "ifgsm" or "mifgsm"
		baseline_cfg (AttackConfig):  baseline settings (typically 10 iterations)
		ila_cfg (AttackConfig):  ILA settings; target_layer is ignored

	Returns:
		LayerSelection
	"""

	clean = as_array(X)
	labels = np.asarray(labels, dtype=np.int64)
	chunk_size = int(config.ilalab_config.get("Harness.chunk_size", 100))
	baseline = generate(model, clean, labels, AttackPipeline(method=method, baseline=baseline_cfg), threads=threads).baseline

	def profile_for(layer):

		cfg = ila_cfg.copy(update={ "target_layer": layer, "target_channel": None })
		refined = np.concatenate([
			ila_refine(model, clean[start:stop], baseline[start:stop], labels[start:stop], cfg).adversarial
			for start, stop in chunks(len(clean), chunk_size)
		])

		return disturbance_profile(model, clean, baseline, refined, target_layer=layer)

	profiles = utils.thread_map(profile_for, range(model.depth), threads)
	layer, used_fallback = choose_layer(profiles)
	peaks = [ has_peak(profile, index) for index, profile in enumerate(profiles) ]

	log.info("{}:  selected layer {} ({}){}".format(model.name, layer, model.taps[layer][1],
		" by fallback" if used_fallback else ""))

	return LayerSelection(source=model.name, profiles=profiles, peaks=peaks, layer=layer, used_fallback=used_fallback)


def select_layer(model, X, labels, method, baseline_cfg, ila_cfg, threads=None):
	"""The latest-peak choice of target layer (see `layer_selection`)."""

	return layer_selection(model, X, labels, method, baseline_cfg, ila_cfg, threads).layer
