#!/usr/bin/env python3
"""The four desk-scale architectures, as block lists.

Tap indices follow block order; docs/architectures.md has the tables.
"""

from exceptions import ConfigError


CLASSES = 10


def plain_cnn(classes=CLASSES):

	return [
		{ "type": "conv", "name": "conv1", "in": 3, "out": 16 },
		{ "type": "conv", "name": "conv2", "in": 16, "out": 32, "pool": "max" },
		{ "type": "conv", "name": "conv3", "in": 32, "out": 32, "pool": "max" },
		{ "type": "conv", "name": "conv4", "in": 32, "out": 32, "pool": "max" },
		{ "type": "pool", "name": "avgpool", "mode": "avg", "k": 4, "in": 32 },
		{ "type": "classifier", "name": "linear", "in": 32, "classes": classes }
	]


def mini_resnet(classes=CLASSES):

	return [
		{ "type": "conv", "name": "conv", "in": 3, "out": 8 },
		{ "type": "residual", "name": "layer1", "in": 8, "out": 8 },
		{ "type": "residual", "name": "layer2", "in": 8, "out": 16, "stride": 2 },
		{ "type": "residual", "name": "layer3", "in": 16, "out": 32, "stride": 2 },
		{ "type": "residual", "name": "layer4", "in": 32, "out": 32, "stride": 2 },
		{ "type": "pool", "name": "avgpool", "mode": "avg", "k": 4, "in": 32 },
		{ "type": "classifier", "name": "linear", "in": 32, "classes": classes }
	]


def mini_inception(classes=CLASSES):

	return [
		{ "type": "conv", "name": "pre_layers", "in": 3, "out": 16 },
		{ "type": "inception", "name": "a3", "in": 16, "c1": 8, "r3": 8, "c3": 12, "r5": 4, "c5": 4 },
		{ "type": "inception", "name": "b3", "in": 24, "c1": 8, "r3": 12, "c3": 16, "r5": 4, "c5": 8 },
		{ "type": "pool", "name": "maxpool", "mode": "max", "k": 2, "in": 32 },
		{ "type": "inception", "name": "a4", "in": 32, "c1": 8, "r3": 12, "c3": 16, "r5": 4, "c5": 8 },
		{ "type": "inception", "name": "b4", "in": 32, "c1": 8, "r3": 12, "c3": 16, "r5": 4, "c5": 8 },
		{ "type": "pool", "name": "avgpool", "mode": "avg", "k": 16, "in": 32 },
		{ "type": "classifier", "name": "linear", "in": 32, "classes": classes }
	]


def mini_senet(classes=CLASSES):

	return [
		{ "type": "conv", "name": "conv1", "in": 3, "out": 8 },
		{ "type": "residual", "name": "layer1", "in": 8, "out": 8, "se": 4 },
		{ "type": "residual", "name": "layer2", "in": 8, "out": 16, "stride": 2, "se": 4 },
		{ "type": "residual", "name": "layer3", "in": 16, "out": 32, "stride": 2, "se": 4 },
		{ "type": "pool", "name": "avgpool", "mode": "avg", "k": 8, "in": 32 },
		{ "type": "classifier", "name": "linear", "in": 32, "classes": classes }
	]


ARCHITECTURES = {
	"plain_cnn": plain_cnn,
	"mini_resnet": mini_resnet,
	"mini_inception": mini_inception,
	"mini_senet": mini_senet
}


def blocks_for(arch, classes=CLASSES):

	if arch not in ARCHITECTURES:
		raise ConfigError("Unknown architecture '{}'; expected one of:  {}".format(
			arch, ", ".join(ARCHITECTURES)))

	return ARCHITECTURES[arch](classes)
