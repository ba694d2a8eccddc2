#!/usr/bin/env python3

import numpy as np

import utils

from core import ops
from core.tensor import Tape, Tensor, backward
from data.dataset import normalize
from exceptions import NonFiniteError, ShapeError, TrainingDiverged
from records.models import EpochStats, TrainConfig, TrainingHistory
from train.sgd import SGD
from zoo.network import logits


log = utils.log


def evaluate_accuracy(model, images, labels, batch_size=256):
	"""Fraction of samples whose argmax logit (lowest index on ties) equals the label.

	Args:
		model (Network):  classifier
		images (Tensor | ndarray):  normalized N x 3 x 32 x 32 batch
		labels (array-like):  N integer labels
	"""

	values = images.data if isinstance(images, Tensor) else np.asarray(images, dtype=np.float32)
	labels = np.asarray(labels).reshape(-1)

	if len(values) != len(labels):
		raise ShapeError("Got {} images but {} labels".format(len(values), len(labels)))

	predictions = np.argmax(logits(model, values, batch_size), axis=1)

	return float(np.mean(predictions == labels))


def train(model, dataset, cfg=None, test=None):
	"""Train `model` in place with momentum SGD on softmax cross-entropy.

	Batches are drawn from a permutation seeded by `cfg.seed`, so a run is
	reproducible bit for bit.

	Args:
		model (Network):  initialized network
		dataset (Dataset):  training data (raw bytes)
		cfg (TrainConfig):  hyperparameters
		test (Dataset):  optional split evaluated after every epoch

	Returns:
		TrainingHistory

	Raises:
		TrainingDiverged:  the loss or any activation became non-finite
	"""

	cfg = cfg or TrainConfig()

	if cfg.train_subset:
		dataset = dataset.subset(cfg.train_subset)

	if test is not None and cfg.test_subset:
		test = test.subset(cfg.test_subset)

	images = dataset.normalized()
	labels = dataset.labels.astype(np.int64)
	rng = np.random.default_rng(cfg.seed)
	history = TrainingHistory()

	model.trainable(True)
	optimizer = SGD(model.params.values(), cfg.learning_rate, cfg.momentum, cfg.weight_decay)

	try:

		for epoch in range(1, cfg.epochs + 1):

			order = rng.permutation(len(labels))
			total_loss, correct = 0.0, 0

			for step, start in enumerate(range(0, len(order), cfg.batch_size)):

				batch = order[start:start + cfg.batch_size]
				optimizer.zero_grad()

				try:
					with Tape() as tape:
						batch_logits = model.forward(Tensor(images[batch]))
						loss = ops.softmax_cross_entropy(batch_logits, labels[batch])

					backward(tape, loss)

				except NonFiniteError as error:
					raise TrainingDiverged("{} diverged at epoch {} step {}:  {}".format(
						model.name, epoch, step, error))

				optimizer.step()
				total_loss += loss.item() * len(batch)
				correct += int(np.sum(np.argmax(batch_logits.data, axis=1) == labels[batch]))

			stats = EpochStats(
				epoch=epoch,
				loss=total_loss / len(labels),
				train_accuracy=correct / len(labels),
				test_accuracy=None if test is None else evaluate_accuracy(model, test.normalized(), test.labels)
			)

			if not np.isfinite(stats.loss):
				raise TrainingDiverged("{} diverged at epoch {}:  loss {}".format(model.name, epoch, stats.loss))

			history.epochs.append(stats)
			log.info("{} epoch {}/{}:  loss {:.4f}, train acc {:.3f}{}".format(
				model.name, epoch, cfg.epochs, stats.loss, stats.train_accuracy,
				"" if stats.test_accuracy is None else ", test acc {:.3f}".format(stats.test_accuracy)))

	finally:
		model.trainable(False)

	return history
