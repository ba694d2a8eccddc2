#!/usr/bin/env python3

import numpy as np

from scipy.stats import rankdata, spearmanr

from exceptions import ShapeError, ZeroVarianceError


def rank_correlation(a, b):
	"""Spearman's rho over average ranks (ties share their mean rank).

	Raises:
		ShapeError:  lengths differ or are below 2
		ZeroVarianceError:  either rank vector is constant
	"""

	a = np.asarray(a, dtype=np.float64).reshape(-1)
	b = np.asarray(b, dtype=np.float64).reshape(-1)

	if len(a) != len(b) or len(a) < 2:
		raise ShapeError("rank_correlation needs equal lengths >= 2, got {} and {}".format(len(a), len(b)))

	if np.ptp(rankdata(a)) == 0 or np.ptp(rankdata(b)) == 0:
		raise ZeroVarianceError("Ranks have zero variance; correlation is undefined")

	rho, _ = spearmanr(a, b)

	return float(np.clip(rho, -1.0, 1.0))


def spread(values):
	"""(min, max, max - min) of a sequence."""

	values = np.asarray(values, dtype=np.float64)

	return float(values.min()), float(values.max()), float(values.max() - values.min())
