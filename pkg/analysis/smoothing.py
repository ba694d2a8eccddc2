#!/usr/bin/env python3

import numpy as np

from scipy.signal import savgol_coeffs, savgol_filter

from exceptions import ConfigError


EDGE_MODES = ( "mirror", "interp" )


def _validate(window, degree, length=None):

	if window < 1 or window % 2 == 0:
		raise ConfigError("Savitzky-Golay window must be a positive odd integer, got {}".format(window))

	if not 0 <= degree < window:
		raise ConfigError("Savitzky-Golay degree must lie in [0, window), got {}".format(degree))

	if length is not None and length < window:
		raise ConfigError("Series of length {} is shorter than the window {}".format(length, window))


def savitzky_golay_coefficients(window, degree):
	"""Smoothing weights of one window, ordered from the leftmost sample."""

	_validate(window, degree)

	return savgol_coeffs(window, degree, use="dot")


def savitzky_golay(series, window, degree, mode="mirror"):
	"""Least-squares polynomial smoothing of a 1-D series.

	mode "mirror" reflects the series about its end samples (without repeating
	them) to fill the edge windows; "interp" instead evaluates the polynomial
	fitted to the first and last full windows, so polynomials of degree <=
	`degree` are reproduced at every position.
	"""

	if mode not in EDGE_MODES:
		raise ConfigError("Unknown edge mode '{}'; expected one of:  {}".format(mode, ", ".join(EDGE_MODES)))

	series = np.asarray(series, dtype=np.float64)
	_validate(window, degree, len(series))

	return savgol_filter(series, window, degree, mode=mode)


def fit_window(length, window, degree):
	"""Largest usable (window, degree) for a series of `length` samples.

	The window shrinks to the largest odd value <= length; the degree drops
	below the window when needed.
	"""

	if length < 1:
		raise ConfigError("Cannot smooth an empty series")

	window = min(window, length if length % 2 else length - 1)

	return window, min(degree, window - 1)
