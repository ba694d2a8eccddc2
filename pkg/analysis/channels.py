#!/usr/bin/env python3

import numpy as np

from attacks.baselines import as_array
from core.tensor import Tensor
from exceptions import DatasetError


def channel_std(model, images, layer, batch_size=128):
	"""Population standard deviation of each channel of tap `layer`.

	Samples and spatial positions are pooled.  Batches are merged with the
	pairwise mean/M2 update, accumulated in float64.
	"""

	images = as_array(images)

	if len(images) == 0:
		raise DatasetError("channel_std needs at least one image")

	model.check_layer(layer)
	count, mean, m2 = 0, None, None

	for start in range(0, len(images), batch_size):

		activations = model.forward_to_layer(Tensor(images[start:start + batch_size]), layer).data
		values = np.moveaxis(activations, 1, 0).reshape(activations.shape[1], -1).astype(np.float64)

		batch_count = values.shape[1]
		batch_mean = values.mean(axis=1)
		batch_m2 = np.sum((values - batch_mean[:, None]) ** 2, axis=1)

		if mean is None:
			count, mean, m2 = batch_count, batch_mean, batch_m2
			continue

		delta = batch_mean - mean
		total = count + batch_count
		mean = mean + delta * batch_count / total
		m2 = m2 + batch_m2 + delta ** 2 * count * batch_count / total
		count = total

	return np.sqrt(np.maximum(m2 / count, 0.0))
