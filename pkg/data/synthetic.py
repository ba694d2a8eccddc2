#!/usr/bin/env python3

import numpy as np

from data.dataset import Dataset, IMAGE_SHAPE


TINT = 70.0
BLOB = 60.0
NOISE = 12.0


def class_template(label, classes):
	"""Mean image of a class:  a colour tint on a circle plus a positioned blob.

	Templates depend only on (label, classes), never on the seed.
	"""

	theta = 2 * np.pi * label / classes
	rows, cols = np.mgrid[0:32, 0:32]
	centre_row, centre_col = 16 + 8 * np.sin(theta), 16 + 8 * np.cos(theta)
	blob = np.exp(-((rows - centre_row) ** 2 + (cols - centre_col) ** 2) / (2 * 4.0 ** 2))

	template = np.full(IMAGE_SHAPE, 128.0)
	template[0] += TINT * np.cos(theta)
	template[1] += TINT * np.sin(theta)
	template[2] += BLOB * (2 * blob - 0.5)

	return template


def synthetic_dataset(seed, n, k=10, split="synthetic"):
	"""`n` noisy class templates with labels drawn from `seed`."""

	if n <= 0 or k <= 0:
		raise ValueError("synthetic_dataset needs n > 0 and k > 0, got n={} k={}".format(n, k))

	rng = np.random.default_rng(seed)
	labels = rng.integers(0, k, size=n)
	templates = np.stack([ class_template(label, k) for label in range(k) ])
	images = templates[labels] + rng.normal(0.0, NOISE, size=(n,) + IMAGE_SHAPE)

	return Dataset(np.clip(np.rint(images), 0, 255), labels, split, classes=max(k, 1))
