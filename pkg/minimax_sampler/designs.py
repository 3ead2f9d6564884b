# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Sampling designs: distributions over subsets of the unit indices.

Unit indices are 0-based. Samples drawn in bulk are boolean indicator
matrices with one row per sample and one column per unit.
"""

import itertools
import logging
import math

import numpy as np

from .errors import (
    CapabilityError,
    EnumerationTooLarge,
    IndexOutOfRange,
    InvalidProbability,
    LengthMismatch,
    ValidationError,
    ZeroInclusion,
)
from .util import get_max_support, make_rng


logger = logging.getLogger(__name__)

# Design kinds
KIND_ENUMERATED = "enumerated"
KIND_POISSON = "poisson"
KIND_SRSWOR = "srswor"
KIND_SAMPLER = "sampler"

# Tolerance on the total probability mass of an enumerated design
PROBABILITY_MASS_TOLERANCE = 1e-12


class Sample(object):
    """Sampled unit indices, with observed values once known."""

    def __init__(self, indices, values=None):
        """
        Args:
            indices (list[int]): Sampled 0-based unit indices
            values (dict[int, float], optional): Observed value per
                sampled index.
        """
        self.indices = tuple(sorted(set(int(i) for i in indices)))
        self.values = dict(
            (int(k), float(v)) for k, v in (values or {}).items()
        )

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return "Sample(indices={0!r})".format(self.indices)

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return self.indices == other.indices and self.values == other.values

    def observe(self, y):
        """Attach values read from a full outcome vector.

        Args:
            y (list[float]): Outcome vector of the whole population

        Returns:
            Sample: New sample carrying ``y_i`` for each sampled ``i``
        """
        y = np.asarray(y, dtype=float)
        for i in self.indices:
            if i < 0 or i >= y.shape[0]:
                raise IndexOutOfRange(i, y.shape[0])
        return Sample(self.indices, dict((i, y[i]) for i in self.indices))

    def indicator(self, n_units):
        """Returns:
            numpy.ndarray: Boolean inclusion vector of length N.
        """
        row = np.zeros(n_units, dtype=bool)
        for i in self.indices:
            if i < 0 or i >= n_units:
                raise IndexOutOfRange(i, n_units)
            row[i] = True
        return row


class SecondOrderMatrix(object):
    """Pairwise inclusion probabilities and inclusion covariances."""

    def __init__(self, pi, pi2, approximate=False):
        """
        Args:
            pi (numpy.ndarray): First-order probabilities
            pi2 (numpy.ndarray): N x N matrix of pi_ij, diagonal pi_i
            approximate (bool): True for Monte-Carlo estimates
        """
        pi = np.asarray(pi, dtype=float)
        pi2 = np.asarray(pi2, dtype=float)
        pi2 = (pi2 + pi2.T) / 2.0
        np.fill_diagonal(pi2, pi)

        delta = pi2 - np.outer(pi, pi)
        np.fill_diagonal(delta, pi * (1.0 - pi))

        self.pi = pi
        self.pi2 = pi2
        self.delta = delta
        self.approximate = approximate

    @property
    def size(self):
        return self.pi.shape[0]

    def delta_max_offdiag(self):
        """Returns:
            float: max_{i != j} |Delta_ij|, 0 for a single unit.
        """
        if self.size < 2:
            return 0.0
        off = np.abs(self.delta[~np.eye(self.size, dtype=bool)])
        return float(np.max(off))

    def frechet_violation(self):
        """Largest violation of max(0, pi_i + pi_j - 1) <= pi_ij <=
        min(pi_i, pi_j) over off-diagonal pairs.

        Returns:
            float: 0 when the bounds hold, else the worst excess
        """
        if self.size < 2:
            return 0.0
        pi_i = self.pi[:, None]
        pi_j = self.pi[None, :]
        low = np.maximum(0.0, pi_i + pi_j - 1.0)
        high = np.minimum(pi_i, pi_j)
        excess = np.maximum(low - self.pi2, self.pi2 - high)
        excess = excess[~np.eye(self.size, dtype=bool)]
        return float(max(0.0, np.max(excess)))


def _validate_pi(pi, n_units=None):
    pi = np.array(pi, dtype=float)
    if pi.ndim != 1:
        raise InvalidProbability("inclusion probabilities must be a vector")
    if n_units is not None and pi.shape[0] != n_units:
        raise LengthMismatch(n_units, pi.shape[0], what="inclusion probabilities")
    for i, value in enumerate(pi):
        if not np.isfinite(value) or value < 0.0 or value > 1.0:
            raise InvalidProbability(
                "inclusion probability {0!r} of unit index {1} outside "
                "(0, 1]".format(float(value), i),
                index=i,
            )
        if value == 0.0:
            raise ZeroInclusion(i)
    pi.setflags(write=False)
    return pi


class Design(object):
    """Base sampling design. Designs are immutable."""

    kind = None
    exact_second_order = True
    enumerable = True

    def __init__(self, n_units):
        if n_units < 1:
            raise ValidationError("a design needs at least one unit")
        self._n_units = int(n_units)

    @property
    def size(self):
        """int: Population size N."""
        return self._n_units

    def first_order(self):
        """Returns:
            numpy.ndarray: Exact inclusion probabilities pi_i.
        """
        raise NotImplementedError

    def second_order(self):
        """Returns:
            SecondOrderMatrix: Exact pi_ij and Delta_ij.
        """
        raise NotImplementedError

    def expected_size(self):
        """Expected sample size E|S| = sum_i pi_i."""
        return float(np.sum(self.first_order()))

    def support_size(self):
        """Returns:
            int: Number of subsets listed by ``support()``.
        """
        raise NotImplementedError

    def support(self):
        """Enumerate the design.

        Returns:
            tuple[numpy.ndarray, numpy.ndarray]: Boolean ``(S, N)``
                indicator matrix and the length-S probability vector.

        Raises:
            EnumerationTooLarge: If the support exceeds the cap
        """
        raise NotImplementedError

    def draw_indicators(self, rng, rows):
        """Draw independent samples from one generator.

        Args:
            rng (numpy.random.Generator): Generator to consume
            rows (int): Number of samples

        Returns:
            numpy.ndarray: Boolean ``(rows, N)`` indicator matrix
        """
        raise NotImplementedError

    def as_enumerated(self):
        """Returns:
            EnumeratedDesign: Explicit subset listing of this design.
        """
        indicators, probs = self.support()
        return EnumeratedDesign.from_indicators(indicators, probs, validate=False)

    def _check_support_size(self, count):
        cap = get_max_support()
        if count > cap:
            raise EnumerationTooLarge(
                "{0} design support of {1} subsets exceeds cap {2}".format(
                    self.kind, count, cap
                )
            )


class EnumeratedDesign(Design):
    """Design given by an explicit list of subsets and probabilities."""

    kind = KIND_ENUMERATED

    def __init__(self, n_units, support, validate=True):
        """
        Args:
            n_units (int): Population size N
            support (list[tuple[list[int], float]]): ``(subset, p(s))``
                pairs with 0-based unit indices.
            validate (bool): Check probabilities and inclusion
        """
        super(EnumeratedDesign, self).__init__(n_units)
        support = list(support)
        self._check_support_size(len(support))

        indicators = np.zeros((len(support), self._n_units), dtype=bool)
        probs = np.empty(len(support), dtype=float)
        for row, (subset, p) in enumerate(support):
            for i in subset:
                i = int(i)
                if i < 0 or i >= self._n_units:
                    raise IndexOutOfRange(i, self._n_units)
                indicators[row, i] = True
            probs[row] = float(p)

        self._init_arrays(indicators, probs, validate)

    @classmethod
    def from_indicators(cls, indicators, probs, validate=True):
        """Build from an indicator matrix without per-subset parsing.

        Args:
            indicators (numpy.ndarray): Boolean ``(S, N)`` matrix
            probs (numpy.ndarray): Length-S probabilities

        Returns:
            EnumeratedDesign: New design
        """
        indicators = np.asarray(indicators, dtype=bool)
        design = cls.__new__(cls)
        Design.__init__(design, indicators.shape[1])
        design._check_support_size(indicators.shape[0])
        design._init_arrays(indicators, np.asarray(probs, dtype=float), validate)
        return design

    def _init_arrays(self, indicators, probs, validate):
        if probs.shape[0] != indicators.shape[0]:
            raise LengthMismatch(indicators.shape[0], probs.shape[0], "probabilities")
        if validate:
            if probs.size == 0:
                raise InvalidProbability("enumerated design lists no subsets")
            if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
                raise InvalidProbability("subset probabilities must be non-negative")
            mass = float(np.sum(probs))
            if abs(mass - 1.0) > PROBABILITY_MASS_TOLERANCE:
                raise InvalidProbability(
                    "subset probabilities sum to {0!r}, not 1".format(mass)
                )

        indicators.setflags(write=False)
        probs.setflags(write=False)
        self._indicators = indicators
        self._probs = probs

        self._pi = probs @ indicators
        if validate:
            # Rounding can lift a unit present in every subset above 1
            self._pi = np.minimum(self._pi, 1.0)
        self._pi.setflags(write=False)
        if validate:
            _validate_pi(self._pi)

    def first_order(self):
        return self._pi

    def second_order(self):
        weighted = self._indicators * self._probs[:, None]
        pi2 = weighted.T @ self._indicators.astype(float)
        return SecondOrderMatrix(self._pi, pi2)

    def support_size(self):
        return self._indicators.shape[0]

    def support(self):
        return self._indicators, self._probs

    def as_enumerated(self):
        return self

    def subsets(self):
        """Returns:
            list[tuple[tuple[int], float]]: ``(subset, p)`` pairs.
        """
        return [
            (tuple(int(i) for i in np.flatnonzero(row)), float(p))
            for row, p in zip(self._indicators, self._probs)
        ]

    def draw_indicators(self, rng, rows):
        cdf = np.cumsum(self._probs)
        u = rng.random(rows) * cdf[-1]
        picks = np.searchsorted(cdf, u, side="right")
        last = int(np.flatnonzero(self._probs > 0.0)[-1])
        picks = np.minimum(picks, last)
        return self._indicators[picks].copy()


class PoissonDesign(Design):
    """Independent Bernoulli(pi_i) inclusion of every unit."""

    kind = KIND_POISSON

    def __init__(self, pi):
        """
        Args:
            pi (list[float]): Inclusion probabilities in (0, 1]
        """
        pi = _validate_pi(pi)
        super(PoissonDesign, self).__init__(pi.shape[0])
        self._pi = pi

    def first_order(self):
        return self._pi

    def second_order(self):
        pi2 = np.outer(self._pi, self._pi)
        return SecondOrderMatrix(self._pi, pi2)

    def support_size(self):
        return 1 << self._n_units

    def support(self):
        if self._n_units >= 63:
            raise EnumerationTooLarge("Poisson support of 2^{0}".format(self._n_units))
        count = self.support_size()
        self._check_support_size(count)

        codes = np.arange(count, dtype=np.int64)
        indicators = np.empty((count, self._n_units), dtype=bool)
        probs = np.ones(count, dtype=float)
        for i, p in enumerate(self._pi):
            column = ((codes >> i) & 1).astype(bool)
            indicators[:, i] = column
            probs *= np.where(column, p, 1.0 - p)
        return indicators, probs

    def draw_indicators(self, rng, rows):
        return rng.random((rows, self._n_units)) < self._pi[None, :]


class SRSWORDesign(Design):
    """Simple random sampling without replacement of fixed size k."""

    kind = KIND_SRSWOR

    def __init__(self, n_units, sample_size):
        """
        Args:
            n_units (int): Population size N
            sample_size (int): Fixed sample size k, 1 <= k <= N
        """
        super(SRSWORDesign, self).__init__(n_units)
        sample_size = int(sample_size)
        if sample_size < 0 or sample_size > n_units:
            raise InvalidProbability(
                "SRSWOR sample size {0} outside 1..{1}".format(sample_size, n_units)
            )
        if sample_size == 0:
            raise ZeroInclusion(0)
        self._k = sample_size

    @property
    def sample_size(self):
        return self._k

    def first_order(self):
        pi = np.full(self._n_units, self._k / float(self._n_units))
        pi.setflags(write=False)
        return pi

    def second_order(self):
        n, k = self._n_units, self._k
        pi = self.first_order()
        if n > 1:
            joint = k * (k - 1) / float(n * (n - 1))
        else:
            joint = pi[0]
        pi2 = np.full((n, n), joint)
        return SecondOrderMatrix(pi, pi2)

    def expected_size(self):
        return float(self._k)

    def support_size(self):
        return math.comb(self._n_units, self._k)

    def support(self):
        count = self.support_size()
        self._check_support_size(count)
        indicators = np.zeros((count, self._n_units), dtype=bool)
        for row, subset in enumerate(
            itertools.combinations(range(self._n_units), self._k)
        ):
            indicators[row, list(subset)] = True
        probs = np.full(count, 1.0 / count)
        return indicators, probs

    def draw_indicators(self, rng, rows):
        # Partial Fisher-Yates shuffle, vectorized across rows: position j
        # swaps with a uniform position in j..N-1.
        n, k = self._n_units, self._k
        perms = np.tile(np.arange(n), (rows, 1))
        row_index = np.arange(rows)
        for j in range(k):
            picks = j + (rng.random(rows) * (n - j)).astype(np.int64)
            picks = np.minimum(picks, n - 1)
            chosen = perms[row_index, picks]
            perms[row_index, picks] = perms[row_index, j]
            perms[row_index, j] = chosen

        indicators = np.zeros((rows, n), dtype=bool)
        indicators[row_index[:, None], perms[:, :k]] = True
        return indicators


class SamplerDesign(Design):
    """Design known only through a sampling function.

    Inclusion probabilities of such designs are available only as
    Monte-Carlo estimates (``mc.empirical_second_order``).
    """

    kind = KIND_SAMPLER
    exact_second_order = False
    enumerable = False

    def __init__(self, n_units, sampler, name="sampler"):
        """
        Args:
            n_units (int): Population size N
            sampler (callable): ``sampler(rng, rows)`` returning a
                boolean ``(rows, N)`` indicator matrix.
            name (str): Label used in reports
        """
        super(SamplerDesign, self).__init__(n_units)
        self._sampler = sampler
        self.name = name

    def _unsupported(self, what):
        raise CapabilityError(
            "design {0!r} is sampler-only; {1} requires Monte-Carlo "
            "estimation".format(self.name, what)
        )

    def first_order(self):
        self._unsupported("first-order inclusion probabilities")

    def second_order(self):
        self._unsupported("second-order inclusion probabilities")

    def support_size(self):
        self._unsupported("enumeration")

    def support(self):
        self._unsupported("enumeration")

    def draw_indicators(self, rng, rows):
        indicators = np.asarray(self._sampler(rng, rows), dtype=bool)
        if indicators.shape != (rows, self._n_units):
            raise ValidationError(
                "sampler returned shape {0}, expected {1}".format(
                    indicators.shape, (rows, self._n_units)
                )
            )
        return indicators


def first_order(design):
    """Exact first-order inclusion probabilities of ``design``."""
    return design.first_order()


def second_order(design):
    """Exact second-order inclusion probabilities of ``design``."""
    return design.second_order()


def expected_size(design):
    """Expected sample size of ``design``."""
    return design.expected_size()


def draw(design, rng_seed, stream=0):
    """Draw one sample, deterministically given ``(rng_seed, stream)``.

    Args:
        design (Design): Design to sample from
        rng_seed (int): Root seed
        stream (int): Stream index

    Returns:
        Sample: Drawn sample without observed values
    """
    row = draw_streams(design, rng_seed, stream, stream + 1)[0]
    return Sample(np.flatnonzero(row))


def draw_streams(design, rng_seed, start, stop):
    """Draw one sample per stream for a consecutive range of streams.

    Row ``k - start`` is the sample ``draw(design, rng_seed, k)``.

    Args:
        design (Design): Design to sample from
        rng_seed (int): Root seed
        start (int): First stream
        stop (int): One past the last stream

    Returns:
        numpy.ndarray: Boolean ``(stop - start, N)`` indicator matrix
    """
    indicators = np.empty((stop - start, design.size), dtype=bool)
    for row, stream in enumerate(range(start, stop)):
        indicators[row] = design.draw_indicators(make_rng(rng_seed, stream), 1)[0]
    return indicators


def is_pairwise_independent(design, tol=0.0):
    """Check max_{i != j} |Delta_ij| <= tol.

    Args:
        design (Design): Design with exact second order
        tol (float): Non-negative tolerance

    Returns:
        bool: Pairwise-independence verdict
    """
    if tol < 0:
        raise ValidationError("tolerance must be non-negative")
    return design.second_order().delta_max_offdiag() <= tol


def design_audit(design, tol=1e-12):
    """Summarize a design's inclusion structure for reports.

    Args:
        design (Design): Design with exact second order
        tol (float): Pairwise-independence tolerance

    Returns:
        dict: ``pi``, ``pi2``, ``delta_max_offdiag``, ``expected_size``,
            ``pairwise_independent``, ``frechet_violation``
    """
    second = design.second_order()
    delta_max = second.delta_max_offdiag()
    return {
        "kind": design.kind,
        "pi": second.pi,
        "pi2": second.pi2,
        "delta_max_offdiag": delta_max,
        "expected_size": design.expected_size(),
        "pairwise_independent": delta_max <= tol,
        "frechet_violation": second.frechet_violation(),
    }
