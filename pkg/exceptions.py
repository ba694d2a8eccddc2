#!/usr/bin/env python3


class ILALabError(Exception):
	"""Base class for every error raised by ILALab."""


class ConfigError(ILALabError):
	"""Invalid flags, settings or experiment configuration."""


class ShapeError(ILALabError):
	pass


class NonFiniteError(ILALabError):
	pass


class TapeError(ILALabError):
	pass


class CheckpointError(ILALabError):
	pass


class DatasetError(ILALabError):
	pass


class TrainingDiverged(ILALabError):
	pass


class DegenerateBaseline(ILALabError):
	"""The baseline perturbation vanishes at the targeted layer."""


class DegenerateCurrent(ILALabError):
	"""The refined perturbation vanishes at the targeted layer."""


class ZeroVarianceError(ILALabError):
	pass


class AdversarialFileError(ILALabError):
	pass


class LabelError(ILALabError):
	pass


class BoundsViolation(ILALabError):
	"""An attack iterate left the epsilon ball or the [-1, 1] image range."""
