#!/usr/bin/env python3

import numpy as np

import config
import utils

from attacks.baselines import as_array, baseline
from attacks.ila import ila_refine


log = utils.log


class AdversarialTriple():
	"""Clean batch X, baseline batch X', ILA batch X'' (None without ILA) and labels."""

	def __init__(self, clean, baseline, refined, labels, degenerate=None):
		self.clean = clean
		self.baseline = baseline
		self.refined = refined
		self.labels = labels
		self.degenerate = degenerate or []

	@property
	def adversarial(self):
		"""The final output of the pipeline."""
		return self.baseline if self.refined is None else self.refined

	def __len__(self):
		return len(self.labels)


def chunks(count, chunk_size):

	return [ (start, min(count, start + chunk_size)) for start in range(0, count, chunk_size) ]


def _run_chunk(model, clean, labels, pipeline):

	attack = baseline(pipeline.method)
	adversarial = attack(model, clean, labels, pipeline.baseline)

	if pipeline.ila is None:
		return adversarial, None, []

	trace = ila_refine(model, clean, adversarial, labels, pipeline.ila, channel=pipeline.ila.target_channel)

	return adversarial, trace.adversarial, trace.degenerate


def generate(model, X, labels, pipeline, chunk_size=None, threads=None):
	"""Run an AttackPipeline over a batch in fixed-size chunks.

	Chunks are independent, so they go to worker threads; results are joined
	in sample order and do not depend on the thread count.

	Returns:
		AdversarialTriple
	"""

	clean = as_array(X)
	labels = np.asarray(labels, dtype=np.int64)
	chunk_size = chunk_size or int(config.ilalab_config.get("Harness.chunk_size", 100))
	spans = chunks(len(clean), chunk_size)

	results = utils.thread_map(
		lambda span: _run_chunk(model, clean[span[0]:span[1]], labels[span[0]:span[1]], pipeline),
		spans, threads)

	baseline_batch = np.concatenate([ result[0] for result in results ])
	refined = None if pipeline.ila is None else np.concatenate([ result[1] for result in results ])
	degenerate = [ start + index for (start, _), result in zip(spans, results) for index in result[2] ]

	log.debug("{} on {}:  {} samples in {} chunk(s)".format(pipeline.descriptor, model.name, len(clean), len(spans)))

	return AdversarialTriple(clean, baseline_batch, refined, labels, degenerate)
