#!/usr/bin/env python3

import numpy as np

from exceptions import DatasetError


IMAGE_SHAPE = (3, 32, 32)
CLASSES = 10


class Dataset():
	"""Raw image bytes (N x 3 x 32 x 32, uint8) with uint8 labels."""

	def __init__(self, images, labels, split="train", classes=CLASSES):

		images = np.asarray(images, dtype=np.uint8)
		labels = np.asarray(labels, dtype=np.uint8).reshape(-1)

		if images.ndim != 4 or images.shape[1:] != IMAGE_SHAPE:
			raise DatasetError("Images must be N x 3 x 32 x 32, got {}".format(images.shape))

		if len(images) == 0 or len(images) != len(labels):
			raise DatasetError("Need a non-empty dataset with one label per image, got {} images and {} labels".format(
				len(images), len(labels)))

		if labels.max() >= classes:
			raise DatasetError("Label {} out of range for {} classes".format(labels.max(), classes))

		self.images = images
		self.labels = labels
		self.split = split
		self.classes = classes

	def __len__(self):
		return len(self.labels)

	def subset(self, count, start=0):
		"""The `count` samples from `start`, in file order (all that remain when count is None)."""

		stop = len(self) if count is None else min(len(self), start + count)

		if start >= stop:
			raise DatasetError("Empty slice [{}, {}) of a {}-sample {} split".format(start, stop, len(self), self.split))

		return Dataset(self.images[start:stop], self.labels[start:stop], self.split, self.classes)

	def normalized(self):
		return normalize(self.images)

	def __repr__(self):
		return "Dataset(split={}, N={})".format(self.split, len(self))


def normalize(images):
	"""Bytes to [-1, 1]:  (x / 255 - 0.5) / 0.5, as float32."""

	return ((np.asarray(images, dtype=np.float32) / 255 - 0.5) / 0.5).astype(np.float32)


def denormalize(values):
	"""Inverse of `normalize`, rounded back to bytes."""

	return np.clip(np.rint((np.asarray(values, dtype=np.float64) * 0.5 + 0.5) * 255), 0, 255).astype(np.uint8)
