#!/usr/bin/env python3

import os

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, validator


ATTACK_METHODS = ( "ifgsm", "mifgsm" )


class Record(BaseModel):

	class Config:
		validate_assignment = True
		extra = "forbid"


##################################################
# Configurations

class TrainConfig(Record):
	epochs: int = Field(10, ge=0)
	batch_size: int = Field(64, gt=0)
	learning_rate: float = Field(0.05, ge=0)
	momentum: float = Field(0.9, ge=0, lt=1)
	weight_decay: float = Field(0.0005, ge=0)
	seed: int = Field(0, ge=0)
	train_subset: Optional[int] = Field(None, gt=0)
	test_subset: Optional[int] = Field(None, gt=0)


class AttackConfig(Record):
	epsilon: float = Field(0.03, gt=0)
	step_size: float = Field(0.002, ge=0)
	iterations: int = Field(20, ge=0)
	alpha: float = Field(3.0, ge=0)
	target_layer: Union[int, Literal["auto"], None] = None
	target_channel: Optional[int] = Field(None, ge=0)
	momentum_decay: float = Field(1.0, ge=0)

	@validator("target_layer")
	def layer_not_negative(cls, value):

		if isinstance(value, int) and value < 0:
			raise ValueError("target_layer must be >= 0 or 'auto'")

		return value


class AttackPipeline(Record):
	"""A baseline attack, optionally refined by ILA.

	`ila.epsilon` must equal `baseline.epsilon`; both constrain the same ball.
	"""

	method: Literal["ifgsm", "mifgsm"] = "ifgsm"
	baseline: AttackConfig = AttackConfig()
	ila: Optional[AttackConfig] = None

	@validator("ila")
	def same_ball(cls, value, values):

		baseline = values.get("baseline")

		if value is not None and baseline is not None and value.epsilon != baseline.epsilon:
			raise ValueError("ILA and its baseline must share epsilon")

		return value

	@property
	def descriptor(self):

		if self.ila is None:
			return "{}-{}".format(self.method, self.baseline.iterations)

		channel = "" if self.ila.target_channel is None else ":c{}".format(self.ila.target_channel)

		return "ila-{}-{}+{}@{}{}".format(self.method, self.baseline.iterations,
			self.ila.iterations, self.ila.target_layer, channel)


class ExperimentConfig(Record):
	source: str
	targets: List[str] = []
	slice: int = Field(1000, gt=0)
	seed: int = Field(0, ge=0)
	output_dir: str = "./results"

	@validator("source")
	def source_exists(cls, value):

		if not os.path.exists(value):
			raise ValueError("Checkpoint does not exist:  {}".format(value))

		return value

	@validator("targets", each_item=True)
	def target_exists(cls, value):

		if not os.path.exists(value):
			raise ValueError("Checkpoint does not exist:  {}".format(value))

		return value


##################################################
# Training records

class EpochStats(Record):
	epoch: int
	loss: float
	train_accuracy: float = Field(..., ge=0, le=1)
	test_accuracy: Optional[float] = Field(None, ge=0, le=1)


class TrainingHistory(Record):
	epochs: List[EpochStats] = []


class CheckpointMetadata(Record):
	arch: str
	seed: int = 0
	epochs: int = 0
	test_accuracy: Optional[float] = None
	classes: int = 10
	extra: Dict[str, Union[str, int, float, bool, None]] = {}


##################################################
# Reports

class TransferRow(Record):
	target: str
	accuracy: float = Field(..., ge=0, le=1)
	self_row: bool = False


class TransferReport(Record):
	source: str
	attack: str
	rows: List[TransferRow] = []
	degenerate: int = Field(0, ge=0)

	@validator("rows")
	def single_self_row(cls, value):

		if sum(row.self_row for row in value) > 1:
			raise ValueError("A report holds at most one self row")

		return value

	def accuracy(self, target):

		for row in self.rows:
			if row.target == target:
				return row.accuracy

		raise KeyError(target)

	@property
	def self_accuracy(self):

		for row in self.rows:
			if row.self_row:
				return row.accuracy

		return None

	@property
	def mean_transfer_accuracy(self):
		"""Mean accuracy over the rows that are not the source model."""

		transfers = [ row.accuracy for row in self.rows if not row.self_row ]

		return sum(transfers) / len(transfers) if transfers else None


class DisturbanceProfile(Record):
	source: str
	target_layer: Optional[int] = None
	values: List[float]
	# Per layer, samples left out of the mean (vanished baseline)
	excluded: List[int] = []

	@validator("values", each_item=True)
	def not_negative(cls, value):

		if value < 0:
			raise ValueError("disturbance values are non-negative")

		return value

	def __len__(self):
		return len(self.values)


class LayerSelection(Record):
	source: str
	profiles: List[DisturbanceProfile]
	peaks: List[bool]
	layer: int
	used_fallback: bool = False


class ChannelStats(Record):
	layer: int
	std: List[float]
	transfer_error: Optional[List[float]] = None
	smoothed_std: Optional[List[float]] = None
	rho: Optional[float] = None

	@validator("std", each_item=True)
	def std_not_negative(cls, value):

		if value < 0:
			raise ValueError("standard deviations are non-negative")

		return value

	@validator("transfer_error", "smoothed_std")
	def one_per_channel(cls, value, values):

		if value is not None and "std" in values and len(value) != len(values["std"]):
			raise ValueError("expected one value per channel ({})".format(len(values["std"])))

		return value


##################################################
# Architectures

class ModelSpec(Record):
	"""Declarative architecture:  block descriptors in forward order."""

	name: str
	classes: int = Field(10, gt=1)
	blocks: List[Dict[str, Union[int, str]]]

	@validator("blocks")
	def ends_with_classifier(cls, value):

		if not value or value[-1].get("type") != "classifier":
			raise ValueError("the last block must be the classifier")

		if len(value) < 2:
			raise ValueError("a model needs at least one tap before the classifier")

		return value

	@property
	def taps(self):
		"""[(l, block name)] for every block before the classifier."""

		return [ (index, block["name"]) for index, block in enumerate(self.blocks[:-1]) ]
