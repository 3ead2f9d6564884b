# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Minimax inclusion probabilities under an expected-sample-size budget.

The worst-case risk lower bound of any unbiased estimator under a design
with inclusion probabilities pi is

    D_pi = sum_i r_i^2 (1 - pi_i) / pi_i

and the budgeted minimax design minimizes D_pi subject to
0 < pi_i <= 1, sum_i pi_i <= n. The minimizer is the water-fill
pi_i* = min(1, c r_i) with c solving sum_i min(1, c r_i) = n.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetOutOfRange,
    DegenerateUnit,
    InfeasibleCandidate,
    InvalidProbability,
    LengthMismatch,
)


logger = logging.getLogger(__name__)

# Slack allowed on sum(pi) <= n when validating candidates
BUDGET_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class DesignSolution(object):
    """Minimax design for one radii vector and budget.

    ``c`` is ``inf`` and ``lambda_`` is 0 in the census case n == N;
    neither is meaningful there.
    """

    pi_star: np.ndarray
    c: float
    lambda_: float
    v_n: float
    capped: tuple
    budget: float

    @property
    def census(self):
        return bool(np.isinf(self.c))

    def expected_size(self):
        return float(np.sum(self.pi_star))


@dataclass(frozen=True, eq=False)
class KKTDiagnostics(object):
    """Supporting-inequality check of pi* against one candidate."""

    objective_candidate: float
    objective_optimum: float
    coordinate_gaps: np.ndarray = field(repr=False)
    budget_term: float

    @property
    def min_gap(self):
        return float(np.min(self.coordinate_gaps))


def _radii(r, unit_ids=None):
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise LengthMismatch(max(r.size, 1), r.size, what="radii vector")
    for i, value in enumerate(r):
        if not value > 0.0:
            unit_id = unit_ids[i] if unit_ids is not None else str(i)
            raise DegenerateUnit(unit_id, index=i)
    return r


def _probabilities(pi, n_units):
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n_units,):
        raise LengthMismatch(n_units, pi.size, what="inclusion probabilities")
    bad = np.flatnonzero(~((pi > 0.0) & (pi <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise InvalidProbability(
            "inclusion probability {0!r} of unit index {1} outside (0, 1]".format(
                float(pi[i]), i
            ),
            index=i,
        )
    return pi


def d_pi(r, pi, unit_ids=None):
    """Worst-case risk lower bound D_pi = sum_i r_i^2 (1 - pi_i) / pi_i.

    Args:
        r (list[float]): Positive radii
        pi (list[float]): Inclusion probabilities in (0, 1]
        unit_ids (list[str], optional): Unit ids named in errors

    Returns:
        float: Non-negative bound, 0 iff every pi_i == 1
    """
    r = _radii(r, unit_ids)
    pi = _probabilities(pi, r.size)
    return float(np.sum(r ** 2 * (1.0 - pi) / pi))


def objective(r, pi):
    """f(pi) = sum_i r_i^2 / pi_i, which differs from D_pi by sum r_i^2."""
    r = np.asarray(r, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return float(np.sum(r ** 2 / pi))


def waterfill_level(r, c):
    """H(c) = sum_i min(1, c r_i)."""
    return float(np.sum(np.minimum(1.0, c * np.asarray(r, dtype=float))))


def solve_waterfill(r, n, unit_ids=None):
    """Solve for the minimax inclusion probabilities.

    H(c) is affine between consecutive breakpoints 1/r_i. With radii
    sorted descending, capping the t largest gives
    c_t = (n - t) / sum_{j > t} r_(j); the solution is the first t with
    c_t r_(t+1) <= 1.

    Args:
        r (list[float]): Positive radii
        n (float): Budget on the expected sample size, 0 < n <= N
        unit_ids (list[str], optional): Unit ids named in errors

    Returns:
        DesignSolution: Optimal probabilities and multipliers

    Raises:
        BudgetOutOfRange: If n <= 0 or n > N
        DegenerateUnit: If some r_i <= 0
    """
    r = _radii(r, unit_ids)
    n_units = r.size
    n = float(n)
    if not np.isfinite(n) or n <= 0.0 or n > n_units:
        raise BudgetOutOfRange(n, n_units)

    if n == n_units:
        logger.debug("Budget equals population size; returning census")
        pi_star = np.ones(n_units)
        pi_star.setflags(write=False)
        return DesignSolution(
            pi_star=pi_star,
            c=float("inf"),
            lambda_=0.0,
            v_n=0.0,
            capped=tuple(range(n_units)),
            budget=n,
        )

    order = np.argsort(-r, kind="stable")
    r_sorted = r[order]
    # tail[t] = sum of r_(j) for j >= t (0-based)
    tail = np.cumsum(r_sorted[::-1])[::-1]

    capped_count = np.arange(n_units)
    levels = (n - capped_count) / tail
    feasible = (n - capped_count > 0.0) & (levels * r_sorted <= 1.0)
    t = int(np.argmax(feasible))
    c = float(levels[t])

    pi_star = np.minimum(1.0, c * r)
    # Capped units are exactly the t largest radii
    pi_star[order[:t]] = 1.0
    pi_star.setflags(write=False)

    capped = tuple(int(i) for i in np.flatnonzero(pi_star >= 1.0))
    v_n = float(np.sum(r ** 2 * (1.0 - pi_star) / pi_star))
    logger.debug("Water-fill: c=%r, %d capped units, V_n=%r", c, t, v_n)

    return DesignSolution(
        pi_star=pi_star,
        c=c,
        lambda_=c ** -2,
        v_n=v_n,
        capped=capped,
        budget=n,
    )


def minimax_value(r, n, unit_ids=None):
    """Minimax value V_n = D_{pi*} for radii ``r`` and budget ``n``."""
    return solve_waterfill(r, n, unit_ids).v_n


def _check_candidate(r, n, candidate):
    pi = np.asarray(candidate, dtype=float)
    if pi.shape != r.shape:
        raise LengthMismatch(r.size, pi.size, what="candidate")
    if not np.all((pi > 0.0) & (pi <= 1.0)):
        raise InfeasibleCandidate("candidate probabilities must lie in (0, 1]")
    if np.sum(pi) > n + BUDGET_SLACK * max(1.0, n):
        raise InfeasibleCandidate(
            "candidate expected size {0!r} exceeds budget {1!r}".format(
                float(np.sum(pi)), n
            )
        )
    return pi


def kkt_diagnostics(r, n, candidate):
    """Evaluate the supporting inequality of pi* against a candidate.

    For each i, r_i^2/pi_i - r_i^2/pi_i* + lambda (pi_i - pi_i*) >= 0;
    summing gives f(pi) - f(pi*) >= lambda (n - sum_i pi_i) >= 0.

    Args:
        r (list[float]): Positive radii
        n (float): Budget
        candidate (list[float]): Feasible inclusion probabilities

    Returns:
        KKTDiagnostics: Objective values and per-coordinate gaps

    Raises:
        InfeasibleCandidate: If the candidate violates the constraints
    """
    r = _radii(r)
    solution = solve_waterfill(r, n)
    pi = _check_candidate(r, solution.budget, candidate)
    pi_star = solution.pi_star

    gaps = r ** 2 / pi - r ** 2 / pi_star + solution.lambda_ * (pi - pi_star)
    return KKTDiagnostics(
        objective_candidate=objective(r, pi),
        objective_optimum=objective(r, pi_star),
        coordinate_gaps=gaps,
        budget_term=solution.lambda_ * (solution.budget - float(np.sum(pi))),
    )


def kkt_check(r, n, candidate, tol=1e-9):
    """Certify that pi* is no worse than ``candidate``.

    Args:
        r (list[float]): Positive radii
        n (float): Budget
        candidate (list[float]): Feasible inclusion probabilities
        tol (float): Tolerance relative to max(1, f(pi*))

    Returns:
        bool: True iff f(candidate) >= f(pi*) - tol * max(1, f(pi*))
    """
    diagnostics = kkt_diagnostics(r, n, candidate)
    scale = max(1.0, abs(diagnostics.objective_optimum))
    if diagnostics.min_gap < -tol * scale:
        logger.warning(
            "Supporting inequality violated by %r", -diagnostics.min_gap
        )
    return diagnostics.objective_candidate >= diagnostics.objective_optimum - tol * scale


def allocation_gain(r, n, unit_ids=None):
    """Ratio of the equal-probability design's D_pi to V_n.

    Args:
        r (list[float]): Positive radii
        n (float): Budget, 0 < n < N
        unit_ids (list[str], optional): Unit ids named in errors

    Returns:
        float: Ratio >= 1; 1.0 in the census case
    """
    r = _radii(r, unit_ids)
    solution = solve_waterfill(r, n)
    if solution.v_n == 0.0:
        return 1.0
    uniform = np.full(r.size, solution.budget / r.size)
    return d_pi(r, uniform) / solution.v_n
