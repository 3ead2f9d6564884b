# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

import logging

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    LengthMismatch,
    MissingValue,
    NonpositiveScale,
    ZeroInclusion,
)
from .popmodel import PopulationBounds, outside_units


logger = logging.getLogger(__name__)

# Estimator kinds
KIND_MIDPOINT_HT = "midpoint_ht"
KIND_PLAIN_HT = "plain_ht"
KIND_DIFFERENCED_HT = "differenced_ht"
KIND_CONSTANT = "constant"


class Estimator(object):
    """Rule mapping a sample with observed values to an estimate of the
    population total.
    """

    kind = None
    unbiased = True

    def __init__(self, n_units):
        self.n_units = int(n_units)
        self.diagnostics = ()

    def __repr__(self):
        return "{0}(N={1})".format(type(self).__name__, self.n_units)

    def estimate(self, sample):
        """Estimate the total from one observed sample.

        Args:
            sample (designs.Sample): Sample with values for every
                sampled index.

        Returns:
            float: Estimate of T(y)
        """
        raise NotImplementedError

    def errors(self, indicators, outcomes):
        """Estimation errors for many samples against many outcomes.

        Args:
            indicators (numpy.ndarray): Boolean ``(S, N)`` samples
            outcomes (numpy.ndarray): ``(K, N)`` outcome vectors

        Returns:
            numpy.ndarray: ``(S, K)`` matrix of estimate minus total
        """
        raise NotImplementedError

    def error_function(self, indicators):
        """Bind a fixed set of samples for repeated error evaluation.

        Returns:
            callable: ``f(outcomes)`` equivalent to
                ``self.errors(indicators, outcomes)``
        """
        return lambda outcomes: self.errors(indicators, outcomes)

    def estimates(self, indicators, y):
        """Returns:
            numpy.ndarray: Estimate for each sample row against one
                outcome vector ``y``.
        """
        y = np.asarray(y, dtype=float)
        return self.errors(indicators, y[None, :])[:, 0] + float(np.sum(y))

    def _sample_values(self, sample):
        indices = np.array(sample.indices, dtype=np.int64)
        for i in sample.indices:
            if i < 0 or i >= self.n_units:
                raise IndexOutOfRange(i, self.n_units)
            if i not in sample.values:
                raise MissingValue(i)
        values = np.array([sample.values[i] for i in sample.indices], dtype=float)
        return indices, values


class DifferencedHT(Estimator):
    """Generalized difference estimator with known centers w:

        sum_i w_i + sum_{i in S} (y_i - w_i) / pi_i

    Unbiased for the total under any design with inclusion
    probabilities pi, whatever the centers.
    """

    kind = KIND_DIFFERENCED_HT

    def __init__(self, centers, pi, bounds=None):
        """
        Args:
            centers (list[float]): Known centers w, one per unit
            pi (list[float]): Inclusion probabilities of the design
            bounds (PopulationBounds, optional): When given, centers
                outside the bounds attach a warning diagnostic.
        """
        pi = np.array(pi, dtype=float)
        super(DifferencedHT, self).__init__(pi.shape[0])
        centers = np.array(centers, dtype=float)
        if centers.shape != pi.shape:
            raise LengthMismatch(pi.shape[0], centers.size, what="centers")
        if not np.all(pi > 0.0):
            raise ZeroInclusion(int(np.flatnonzero(~(pi > 0.0))[0]))

        centers.setflags(write=False)
        pi.setflags(write=False)
        self.centers = centers
        self.pi = pi

        if bounds is not None:
            outside = outside_units(bounds, centers, tol=0.0)
            if outside:
                message = "centers outside bounds for units {0}".format(
                    [bounds.unit_ids[i] for i in outside]
                )
                logger.warning(message)
                self.diagnostics = self.diagnostics + (message,)

    def center_total(self):
        """Returns:
            float: sum_i w_i, the estimate from an empty sample.
        """
        return float(np.sum(self.centers))

    def estimate(self, sample):
        indices, values = self._sample_values(sample)
        correction = (values - self.centers[indices]) / self.pi[indices]
        return self.center_total() + float(np.sum(correction))

    def errors(self, indicators, outcomes):
        indicators = np.asarray(indicators, dtype=bool)
        outcomes = np.atleast_2d(np.asarray(outcomes, dtype=float))
        if indicators.shape[1] != self.n_units or outcomes.shape[1] != self.n_units:
            raise DimensionMismatch(
                self.n_units, indicators.shape[1], what="indicator matrix"
            )
        # Error is sum_i (I_i / pi_i - 1)(y_i - w_i); exact zero for
        # units with pi_i == 1.
        weights = indicators / self.pi[None, :] - 1.0
        return weights @ (outcomes - self.centers[None, :]).T

    def error_function(self, indicators):
        indicators = np.asarray(indicators, dtype=bool)
        weights = indicators / self.pi[None, :] - 1.0

        def errors(outcomes):
            outcomes = np.atleast_2d(np.asarray(outcomes, dtype=float))
            return weights @ (outcomes - self.centers[None, :]).T

        return errors


class MidpointHT(DifferencedHT):
    """Midpoint-differenced Horvitz-Thompson estimator, centered on the
    interval midpoints m_i.
    """

    kind = KIND_MIDPOINT_HT

    def __init__(self, bounds, pi):
        """
        Args:
            bounds (PopulationBounds): Population bounds
            pi (list[float]): Inclusion probabilities of the design
        """
        super(MidpointHT, self).__init__(bounds.midpoints, pi)
        self.bounds = bounds


class PlainHT(DifferencedHT):
    """Horvitz-Thompson estimator sum_{i in S} y_i / pi_i."""

    kind = KIND_PLAIN_HT

    def __init__(self, pi):
        pi = np.asarray(pi, dtype=float)
        super(PlainHT, self).__init__(np.zeros(pi.shape[0]), pi)


class ConstantEstimator(Estimator):
    """Ignores the sample and returns a fixed value. Biased; used as a
    known-bias reference by the oracles.
    """

    kind = KIND_CONSTANT
    unbiased = False

    def __init__(self, n_units, value):
        super(ConstantEstimator, self).__init__(n_units)
        self.value = float(value)

    def estimate(self, sample):
        self._sample_values(sample)
        return self.value

    def errors(self, indicators, outcomes):
        indicators = np.asarray(indicators, dtype=bool)
        outcomes = np.atleast_2d(np.asarray(outcomes, dtype=float))
        totals = np.sum(outcomes, axis=1)
        return np.broadcast_to(
            self.value - totals[None, :], (indicators.shape[0], totals.shape[0])
        ).copy()


def midpoint_ht(bounds, pi, sample):
    """Midpoint-differenced HT estimate sum_i m_i + sum_{i in S}
    (y_i - m_i) / pi_i.
    """
    return MidpointHT(bounds, pi).estimate(sample)


def plain_ht(pi, sample):
    """Horvitz-Thompson estimate sum_{i in S} y_i / pi_i."""
    return PlainHT(pi).estimate(sample)


def differenced_ht(centers, pi, sample):
    """Difference estimate sum_i w_i + sum_{i in S} (y_i - w_i) / pi_i."""
    return DifferencedHT(centers, pi).estimate(sample)


def exact_risk_difference(centers, pi, second, y):
    """Closed-form risk of a difference estimator at one outcome vector.

    With z = y - w,

        R = sum_i (1 - pi_i)/pi_i z_i^2
            + 2 sum_{i<j} Delta_ij / (pi_i pi_j) z_i z_j

    Args:
        centers (list[float]): Centers w
        pi (list[float]): Inclusion probabilities
        second (designs.SecondOrderMatrix): Exact second order of the
            design.
        y (list[float]): Outcome vector

    Returns:
        float: Mean squared error of the estimator at y

    Raises:
        DimensionMismatch: If the inputs disagree on N
    """
    centers = np.asarray(centers, dtype=float)
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    n_units = pi.shape[0]
    for what, array in (("centers", centers), ("outcome vector", y)):
        if array.shape != (n_units,):
            raise DimensionMismatch(n_units, array.size, what=what)
    if second.delta.shape != (n_units, n_units):
        raise DimensionMismatch(n_units, second.delta.shape[0], what="Delta matrix")

    z = y - centers
    diagonal = float(np.sum((1.0 - pi) / pi * z ** 2))
    scaled = z / pi
    off = second.delta.copy()
    np.fill_diagonal(off, 0.0)
    return diagonal + float(scaled @ off @ scaled)


def sup_risk_pairwise(bounds, pi):
    """Supremum over the bounds of the midpoint-differenced estimator's
    risk under a pairwise-independent design, sum_i r_i^2 (1-pi_i)/pi_i.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (bounds.size,):
        raise DimensionMismatch(bounds.size, pi.size, what="inclusion probabilities")
    radii = bounds.radii
    return float(np.sum(radii ** 2 * (1.0 - pi) / pi))


def affine_transform(bounds, scale, shift):
    """Map bounds through y -> scale * y + shift.

    Args:
        bounds (PopulationBounds): Population bounds
        scale (float): Positive scale lambda
        shift (list[float]): Per-unit shifts c_i

    Returns:
        PopulationBounds: Bounds [lambda a_i + c_i, lambda b_i + c_i]

    Raises:
        NonpositiveScale: If scale <= 0
    """
    scale = float(scale)
    if not scale > 0.0:
        raise NonpositiveScale("scale must be positive, got {0!r}".format(scale))
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (bounds.size,):
        raise LengthMismatch(bounds.size, shift.size, what="shift vector")
    return PopulationBounds(
        bounds.unit_ids, scale * bounds.lower + shift, scale * bounds.upper + shift
    )


def estimate_report(estimator, sample, bounds=None, known_total=0.0):
    """Estimate with range diagnostics.

    Estimates are never clamped; ``in_range`` reports whether the value
    falls inside [sum a_i, sum b_i].

    Args:
        estimator (Estimator): Estimator to apply
        sample (designs.Sample): Observed sample
        bounds (PopulationBounds, optional): Bounds for the range check
        known_total (float): Known total of units outside the estimator
            (stripped zero-radius units), added to the estimate.

    Returns:
        dict: ``estimate``, ``midpoint_total``, ``in_range``,
            ``warnings``
    """
    warnings = list(getattr(estimator, "diagnostics", []))
    if not sample.indices:
        warnings.append("empty sample")
        logger.warning("Estimating from an empty sample")

    value = estimator.estimate(sample) + known_total
    result = {"estimate": value, "warnings": warnings}
    if bounds is not None:
        low = float(np.sum(bounds.lower)) + known_total
        high = float(np.sum(bounds.upper)) + known_total
        in_range = bool(low <= value <= high)
        if not in_range:
            message = "estimate {0!r} outside feasible range [{1!r}, {2!r}]".format(
                value, low, high
            )
            warnings.append(message)
            logger.warning(message)
        result["midpoint_total"] = bounds.midpoint_total() + known_total
        result["in_range"] = in_range
    return result
