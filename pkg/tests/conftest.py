import numpy as np
import pytest

from core.tensor import Tensor
from data.synthetic import synthetic_dataset
from records.models import AttackConfig, ModelSpec
from zoo import layers
from zoo.network import Network, build, declarations


def network_from_blocks(blocks, seed=0, name="custom", classes=10):
	"""A Network over hand-written block descriptors, initialized like `build`."""

	spec = ModelSpec(name=name, classes=classes, blocks=blocks)
	rng = np.random.default_rng(seed)

	return Network(spec, [
		(param, Tensor(layers.initialize(shape, fan_in, rng, gain)))
		for param, _, shape, fan_in, gain in declarations(spec)
	])


def linear_network(weight, bias):
	"""Softmax regression on the flattened image:  identity tap, then the classifier."""

	spec = ModelSpec(name="linear", classes=len(bias), blocks=[
		{ "type": "pool", "name": "identity", "mode": "avg", "k": 1, "in": 3 },
		{ "type": "classifier", "name": "linear", "in": 3 * 32 * 32, "classes": len(bias) }
	])

	return Network(spec, [ ("linear.weight", Tensor(weight)), ("linear.bias", Tensor(bias)) ])


@pytest.fixture
def plain_model():
	return build("plain_cnn", 0)


@pytest.fixture
def other_model():
	return build("plain_cnn", 1)


@pytest.fixture
def small_batch():
	"""(images, labels):  six normalized synthetic test images."""

	dataset = synthetic_dataset(1, 6)

	return dataset.normalized(), dataset.labels.astype(np.int64)


@pytest.fixture
def quick_attack():
	return AttackConfig(epsilon=0.1, step_size=0.02, iterations=3)


@pytest.fixture
def quick_ila():
	return AttackConfig(epsilon=0.1, step_size=1.0, iterations=2, alpha=3.0, target_layer=1)
