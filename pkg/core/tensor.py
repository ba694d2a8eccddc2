#!/usr/bin/env python3
"""Dense tensors and the tape that records operations on them.

Operations executed while a `Tape` is active (and with at least one input that
requires a gradient) are appended to that tape in execution order, which makes
the record topological by construction.  Outside a tape nothing is recorded,
the same way code under `torch.no_grad()` behaves.
"""

import threading

from contextlib import contextmanager

import numpy as np

from exceptions import NonFiniteError, ShapeError, TapeError


NORM_GUARD = 1e-12

_state = threading.local()


def default_dtype():

	return getattr(_state, "dtype", np.float32)


@contextmanager
def precision(dtype):
	"""Temporarily change the storage dtype of newly created tensors (per thread)."""

	previous = default_dtype()
	_state.dtype = np.dtype(dtype).type

	try:
		yield

	finally:
		_state.dtype = previous


@contextmanager
def watch_branches():
	"""Collect the branch pattern of every piecewise op run in this thread.

	relu, clamp and max pooling append which side of their kink each element
	lands on; two evaluations share a linear piece when the patterns match.
	"""

	previous = getattr(_state, "branches", None)
	_state.branches = []

	try:
		yield _state.branches

	finally:
		_state.branches = previous


def note_branches(pattern):

	branches = getattr(_state, "branches", None)

	if branches is not None:
		branches.append(np.array(pattern, copy=True))


def _tape_stack():

	if not hasattr(_state, "tapes"):
		_state.tapes = []

	return _state.tapes


class Tensor():

	def __init__(self, values, requires_grad=False):

		self.data = np.asarray(values, dtype=default_dtype())

		if any(dimension < 1 for dimension in self.data.shape):
			raise ShapeError("Tensor dimensions must be positive, got:  {}".format(self.data.shape))

		self.requires_grad = requires_grad
		self.grad = None
		# Tape that produced this tensor; None for leaves and untracked values
		self.tape = None

	@property
	def shape(self):
		return self.data.shape

	@property
	def size(self):
		return self.data.size

	@property
	def ndim(self):
		return self.data.ndim

	@property
	def values(self):
		"""Flat row-major view of the data."""
		return self.data.reshape(-1)

	@property
	def is_leaf(self):
		return self.tape is None

	def item(self):

		if self.size != 1:
			raise ShapeError("Only single-element tensors convert to scalars, got shape {}".format(self.shape))

		return float(self.data.reshape(()))

	def numpy(self):

		return self.data.copy()

	def zero_grad(self):

		self.grad = None

	def __repr__(self):

		return "Tensor(shape={}, requires_grad={})".format(self.shape, self.requires_grad)


class TapeEntry():
	__slots__ = ("op", "inputs", "output", "backward")

	def __init__(self, op, inputs, output, backward):
		self.op = op
		self.inputs = inputs
		self.output = output
		self.backward = backward


class Tape():
	"""Ordered record of executed operations.

	Usage:

		with Tape() as tape:
			loss = ...
		tape.backward(loss)
	"""

	def __init__(self):
		self.entries = []
		self.consumed = False

	def __enter__(self):

		if self.consumed:
			raise TapeError("Cannot record on a tape whose backward pass already ran.")

		_tape_stack().append(self)
		return self

	def __exit__(self, exc_type, exc_value, traceback):

		_tape_stack().remove(self)
		return False

	def __len__(self):
		return len(self.entries)

	@staticmethod
	def current():

		stack = _tape_stack()
		return stack[-1] if stack else None

	def backward(self, loss):

		return backward(self, loss)


def record(op, inputs, data, backward_rule):
	"""Wrap an op result in a Tensor and put it on the active tape when needed.

	Args:
		op (str):  name used in error messages and on the tape
		inputs (tuple):  input Tensors, in the order `backward_rule` returns gradients
		data (ndarray):  forward result
		backward_rule (callable):  maps the output gradient to a tuple of input
			gradients (None for inputs that need none)

	Raises:
		NonFiniteError:  the forward result holds NaN or Inf
	"""

	if not np.all(np.isfinite(data)):
		raise NonFiniteError("{} produced non-finite values".format(op))

	out = Tensor(data)
	tape = Tape.current()

	if tape is not None and any(tensor.requires_grad for tensor in inputs):
		out.requires_grad = True
		out.tape = tape
		tape.entries.append(TapeEntry(op, inputs, out, backward_rule))

	return out


def backward(tape, loss):
	"""Reverse pass over `tape`, seeded at the scalar `loss`.

	Leaf tensors with `requires_grad` receive d(loss)/d(leaf) in `.grad`,
	added to any gradient they already hold.  Contributions from every use of
	a tensor are summed.

	Raises:
		ShapeError:  `loss` is not a scalar
		TapeError:  `loss` was not recorded on `tape`, or the tape was consumed
	"""

	if tape.consumed:
		raise TapeError("backward already ran on this tape; record the forward pass again.")

	if loss.size != 1:
		raise ShapeError("backward needs a scalar loss, got shape {}".format(loss.shape))

	if loss.tape is not tape:
		raise TapeError("The loss was not recorded on this tape.")

	grads = { id(loss): np.ones(loss.shape, dtype=loss.data.dtype) }

	for entry in reversed(tape.entries):

		output_grad = grads.pop(id(entry.output), None)

		if output_grad is None:
			continue

		input_grads = entry.backward(output_grad)

		for tensor, grad in zip(entry.inputs, input_grads):

			if grad is None or not tensor.requires_grad:
				continue

			grad = np.asarray(grad, dtype=tensor.data.dtype).reshape(tensor.shape)

			if tensor.is_leaf:
				tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad

			elif id(tensor) in grads:
				grads[id(tensor)] = grads[id(tensor)] + grad

			else:
				grads[id(tensor)] = grad

	tape.consumed = True
	tape.entries = []
