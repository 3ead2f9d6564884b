# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Population parameter space: per-unit outcome intervals [a_i, b_i].

Outcome vectors and sign vectors are plain 1-D float arrays ordered like
the bounds they belong to.
"""

import logging
from collections import namedtuple

import numpy as np

from .errors import (
    DegenerateUnit,
    DuplicateId,
    EmptyPopulation,
    InvertedInterval,
    LengthMismatch,
    ValidationError,
)


logger = logging.getLogger(__name__)


def _frozen(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


class PopulationBounds(object):
    """Known per-unit bounds of a finite population. Immutable."""

    def __init__(self, unit_ids, lower, upper):
        """
        Args:
            unit_ids (list[str]): Unique unit ids; their order defines
                the unit index.
            lower (list[float]): Lower bounds a_i
            upper (list[float]): Upper bounds b_i
        """
        self._unit_ids = tuple(str(u) for u in unit_ids)
        self._lower = _frozen(lower)
        self._upper = _frozen(upper)
        self._midpoints = _frozen((self._lower + self._upper) / 2.0)
        self._radii = _frozen((self._upper - self._lower) / 2.0)

    def __len__(self):
        return len(self._unit_ids)

    def __repr__(self):
        return "PopulationBounds(N={0})".format(len(self))

    def __eq__(self, other):
        if not isinstance(other, PopulationBounds):
            return NotImplemented
        return (
            self._unit_ids == other._unit_ids
            and np.array_equal(self._lower, other._lower)
            and np.array_equal(self._upper, other._upper)
        )

    def __hash__(self):
        return hash((self._unit_ids, self._lower.tobytes(), self._upper.tobytes()))

    @property
    def unit_ids(self):
        """tuple[str]: Unit ids in index order."""
        return self._unit_ids

    @property
    def size(self):
        """int: Population size N."""
        return len(self._unit_ids)

    @property
    def lower(self):
        return self._lower

    @property
    def upper(self):
        return self._upper

    @property
    def midpoints(self):
        """numpy.ndarray: m_i = (a_i + b_i) / 2"""
        return self._midpoints

    @property
    def radii(self):
        """numpy.ndarray: r_i = (b_i - a_i) / 2"""
        return self._radii

    def index_of(self, unit_id):
        """Map a unit id to its 0-based index.

        Raises:
            ValidationError: If the id is unknown
        """
        try:
            return self._unit_ids.index(str(unit_id))
        except ValueError:
            raise ValidationError(
                "unknown unit id {0!r}".format(unit_id), unit_id=unit_id
            )

    def degenerate_indices(self):
        """Returns:
            list[int]: Indices of units with zero radius.
        """
        return [int(i) for i in np.flatnonzero(self._radii <= 0.0)]

    def midpoint_total(self):
        """Returns:
            float: Sum of midpoints, the estimate from an empty sample.
        """
        return float(np.sum(self._midpoints))

    def default_tolerance(self):
        """Containment tolerance 1e-9 * max(1, max_i r_i)."""
        return 1e-9 * max(1.0, float(np.max(self._radii)))


# Result of stripping zero-radius units from a population
StrippedPopulation = namedtuple(
    "StrippedPopulation", ["bounds", "known_total", "removed_ids", "kept_indices"]
)


def load_bounds(records):
    """Build population bounds from ``(id, a, b)`` records.

    Args:
        records (list[tuple[str, float, float]]): Unit records in
            population order.

    Returns:
        PopulationBounds: Bounds with derived midpoints and radii

    Raises:
        EmptyPopulation: If ``records`` is empty
        InvertedInterval: If some ``a > b``
        DuplicateId: If an id repeats
    """
    records = list(records)
    if not records:
        raise EmptyPopulation()

    seen = set()
    unit_ids, lower, upper = [], [], []
    for record in records:
        unit_id, a, b = record[0], float(record[1]), float(record[2])
        unit_id = str(unit_id)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValidationError(
                "unit {0!r}: bounds must be finite".format(unit_id), unit_id=unit_id
            )
        if a > b:
            raise InvertedInterval(unit_id, a, b)
        if unit_id in seen:
            raise DuplicateId(unit_id)
        seen.add(unit_id)
        unit_ids.append(unit_id)
        lower.append(a)
        upper.append(b)

    bounds = PopulationBounds(unit_ids, lower, upper)
    degenerate = bounds.degenerate_indices()
    if degenerate:
        logger.debug("Loaded %d zero-radius units", len(degenerate))
    return bounds


def serialize_bounds(bounds):
    """Inverse of ``load_bounds``.

    Returns:
        list[tuple[str, float, float]]: ``(id, a, b)`` records
    """
    return [
        (unit_id, float(a), float(b))
        for unit_id, a, b in zip(bounds.unit_ids, bounds.lower, bounds.upper)
    ]


def _check_length(bounds, values, what):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != bounds.size:
        raise LengthMismatch(bounds.size, values.size, what=what)
    return values


def vertex(bounds, signs):
    """Vertex ``m + r * eps`` of the parameter rectangle.

    Endpoints are taken directly from ``lower``/``upper`` so the result is
    contained in the rectangle with zero tolerance.

    Args:
        bounds (PopulationBounds): Population bounds
        signs (list[int]): Sign vector with entries in {-1, +1}

    Returns:
        numpy.ndarray: Outcome vector

    Raises:
        LengthMismatch: If ``len(signs) != N``
    """
    signs = _check_length(bounds, signs, "sign vector")
    if not np.all(np.abs(signs) == 1.0):
        raise ValidationError("sign vector entries must be -1 or +1")
    return np.where(signs > 0, bounds.upper, bounds.lower)


def contains(bounds, y, tol=None):
    """Check ``a_i - tol <= y_i <= b_i + tol`` for every unit.

    Args:
        bounds (PopulationBounds): Population bounds
        y (list[float]): Outcome vector
        tol (float, optional): Non-negative tolerance; defaults to
            ``bounds.default_tolerance()``

    Returns:
        bool: Containment verdict
    """
    y = _check_length(bounds, y, "outcome vector")
    if tol is None:
        tol = bounds.default_tolerance()
    if tol < 0:
        raise ValidationError("tolerance must be non-negative")
    return bool(np.all((y >= bounds.lower - tol) & (y <= bounds.upper + tol)))


def outside_units(bounds, y, tol=None):
    """Returns:
        list[int]: Indices of units whose value lies outside the bounds
            by more than ``tol``.
    """
    y = _check_length(bounds, y, "outcome vector")
    if tol is None:
        tol = bounds.default_tolerance()
    bad = (y < bounds.lower - tol) | (y > bounds.upper + tol)
    return [int(i) for i in np.flatnonzero(bad)]


def total(y):
    """Population total T(y) = sum_i y_i."""
    return float(np.sum(np.asarray(y, dtype=float)))


def require_nondegenerate(bounds):
    """Raise for the first zero-radius unit.

    Raises:
        DegenerateUnit: If any r_i == 0
    """
    degenerate = bounds.degenerate_indices()
    if degenerate:
        index = degenerate[0]
        raise DegenerateUnit(bounds.unit_ids[index], index=index)


def strip_degenerate(bounds):
    """Remove zero-radius units, which have known outcomes.

    Args:
        bounds (PopulationBounds): Population bounds

    Returns:
        StrippedPopulation: Reduced bounds, the known total of removed
            units (sum of their midpoints), removed ids and the original
            indices of kept units.

    Raises:
        EmptyPopulation: If every unit is degenerate
    """
    degenerate = set(bounds.degenerate_indices())
    kept = [i for i in range(bounds.size) if i not in degenerate]
    if not kept:
        raise EmptyPopulation("every unit has zero radius")

    removed_ids = [bounds.unit_ids[i] for i in sorted(degenerate)]
    known_total = float(sum(bounds.midpoints[i] for i in sorted(degenerate)))
    if removed_ids:
        logger.info(
            "Stripped %d zero-radius units (known total %r)",
            len(removed_ids),
            known_total,
        )

    reduced = PopulationBounds(
        [bounds.unit_ids[i] for i in kept],
        bounds.lower[kept],
        bounds.upper[kept],
    )
    return StrippedPopulation(reduced, known_total, removed_ids, kept)
