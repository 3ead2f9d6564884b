# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Seeded Monte-Carlo estimation of bias and mean squared error.

Replicate ``k`` is the sample ``designs.draw(design, seed, k)``, so a run
of ``reps`` replicates consumes streams ``0..reps-1``. Replicates are
evaluated in fixed-size blocks of consecutive streams and block
statistics are merged in block order, so results do not depend on the
number of worker threads.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import allocator
from .designs import PoissonDesign, SRSWORDesign, SecondOrderMatrix, draw_streams
from .errors import BudgetOutOfRange, DimensionMismatch, ValidationError
from .estimators import MidpointHT, PlainHT, exact_risk_difference
from .popmodel import outside_units, vertex
from .util import chunk_ranges, make_rng, ordered_map, sign_matrix


logger = logging.getLogger(__name__)

# Replicates evaluated together per work item
DEFAULT_BLOCK_SIZE = 4096

# Strategy names used by compare_strategies
STRATEGY_MINIMAX = "minimax"
STRATEGY_UNIFORM = "uniform_poisson"
STRATEGY_SRSWOR = "srswor"
STRATEGY_PLAIN_HT = "minimax_plain_ht"
STRATEGIES = (STRATEGY_MINIMAX, STRATEGY_UNIFORM, STRATEGY_SRSWOR, STRATEGY_PLAIN_HT)

# Stream reserved for drawing random vertices
VERTEX_STREAM = 2 ** 62

# Width of the acceptance band, in standard errors
BAND_STD_ERRORS = 4.0


@dataclass(frozen=True)
class SimulationResult(object):
    """Empirical bias and risk of one (design, estimator, y) triple.

    ``streams`` is the number of generator streams consumed, one per
    replicate. ``block_size`` fixes the merge order of the statistics.
    """

    replicates: int
    empirical_mean: float
    empirical_mse: float
    mean_std_error: float
    mse_std_error: float
    seed: int
    streams: int
    block_size: int
    total: float
    warnings: tuple = field(default=())

    @property
    def bias(self):
        return self.empirical_mean - self.total

    def as_dict(self):
        return {
            "replicates": self.replicates,
            "empirical_mean": self.empirical_mean,
            "empirical_mse": self.empirical_mse,
            "mean_std_error": self.mean_std_error,
            "mse_std_error": self.mse_std_error,
            "seed": self.seed,
            "streams": self.streams,
            "block_size": self.block_size,
            "total": self.total,
        }


class _Moments(object):
    """Running count, means and centered sums of squares of the columns
    of a series of rows.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, count=0, mean=0.0, m2=0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] == 0:
            return cls()
        mean = np.mean(values, axis=0)
        return cls(values.shape[0], mean, np.sum((values - mean) ** 2, axis=0))

    def merge(self, other):
        if other.count == 0:
            return self
        if self.count == 0:
            return _Moments(other.count, other.mean, other.m2)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return _Moments(count, mean, m2)

    def std_error(self):
        if self.count < 2:
            return np.full(np.shape(self.mean), np.nan)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def _check_run(reps, seed):
    reps = int(reps)
    if reps < 2:
        raise ValidationError("reps must be at least 2, got {0}".format(reps))
    seed = int(seed)
    if seed < 0:
        raise ValidationError("seed must be non-negative, got {0}".format(seed))
    return reps, seed


def _run_streams(design, estimator, outcomes, reps, seed, block_size, workers):
    """Simulate every outcome vector on the same replicates.

    Returns:
        list[SimulationResult]: One result per row of ``outcomes``
    """
    blocks = chunk_ranges(reps, block_size)

    def run_block(block):
        start, stop = block
        indicators = draw_streams(design, seed, start, stop)
        errors = estimator.errors(indicators, outcomes)
        return _Moments.of(errors), _Moments.of(errors ** 2)

    logger.debug(
        "Simulating %d replicates of %d outcome vectors in %d blocks",
        reps,
        outcomes.shape[0],
        len(blocks),
    )
    error_moments = _Moments()
    square_moments = _Moments()
    for errors, squares in ordered_map(run_block, blocks, workers):
        error_moments = error_moments.merge(errors)
        square_moments = square_moments.merge(squares)

    mean_std_errors = error_moments.std_error()
    mse_std_errors = square_moments.std_error()
    results = []
    for k, y in enumerate(outcomes):
        total = float(np.sum(y))
        results.append(
            SimulationResult(
                replicates=reps,
                empirical_mean=total + float(error_moments.mean[k]),
                empirical_mse=float(square_moments.mean[k]),
                mean_std_error=float(mean_std_errors[k]),
                mse_std_error=float(mse_std_errors[k]),
                seed=seed,
                streams=reps,
                block_size=int(block_size),
                total=total,
            )
        )
    return results


def simulate_outcomes(
    design,
    estimator,
    y_list,
    reps,
    seed,
    workers=None,
    block_size=DEFAULT_BLOCK_SIZE,
    bounds=None,
):
    """Run ``simulate`` for several outcome vectors on shared replicates.

    Every vector is evaluated on the same samples, streams ``0..reps-1``,
    so each result equals ``simulate`` for that vector alone.

    Returns:
        list[SimulationResult]: One result per vector, in order
    """
    reps, seed = _check_run(reps, seed)
    y_list = [np.asarray(y, dtype=float) for y in y_list]
    if not y_list:
        raise ValidationError("simulation needs at least one outcome vector")
    for y in y_list:
        if y.shape != (design.size,):
            raise DimensionMismatch(design.size, y.size, what="outcome vector")
    outcomes = np.array(y_list)

    if bounds is None:
        bounds = getattr(estimator, "bounds", None)
    warnings = []
    for y in outcomes:
        found = ()
        if bounds is not None:
            outside = outside_units(bounds, y)
            if outside:
                message = "outcome vector outside bounds for units {0}".format(
                    [bounds.unit_ids[i] for i in outside]
                )
                logger.warning(message)
                found = (message,)
        warnings.append(found)

    results = _run_streams(design, estimator, outcomes, reps, seed, block_size, workers)
    return [
        replace(result, warnings=found) for result, found in zip(results, warnings)
    ]


def simulate(
    design,
    estimator,
    y,
    reps,
    seed,
    workers=None,
    block_size=DEFAULT_BLOCK_SIZE,
    bounds=None,
):
    """Estimate the mean and MSE of an estimator by repeated sampling.

    Replicate ``k`` uses the sample ``designs.draw(design, seed, k)`` for
    ``k`` in ``0..reps-1``.

    Args:
        design (designs.Design): Design to draw from
        estimator (estimators.Estimator): Estimator under test
        y (list[float]): Fixed outcome vector
        reps (int): Number of replicates, at least 2
        seed (int): Non-negative root seed
        workers (int, optional): Worker threads
        block_size (int): Replicates evaluated per work item
        bounds (popmodel.PopulationBounds, optional): Bounds for the
            containment warning; defaults to ``estimator.bounds`` when
            the estimator has them.

    Returns:
        SimulationResult: Empirical moments with standard errors
    """
    (result,) = simulate_outcomes(
        design, estimator, [y], reps, seed, workers, block_size, bounds
    )
    return result


def empirical_second_order(design, reps, seed, workers=None, block_size=DEFAULT_BLOCK_SIZE):
    """Monte-Carlo estimate of pi, pi_ij and Delta for any drawable design.

    Draw ``k`` is ``designs.draw(design, seed, k)``.

    Args:
        design (designs.Design): Design with a sampler
        reps (int): Number of draws
        seed (int): Non-negative root seed

    Returns:
        designs.SecondOrderMatrix: Estimates flagged ``approximate``
    """
    reps, seed = _check_run(reps, seed)

    def count_block(block):
        start, stop = block
        indicators = draw_streams(design, seed, start, stop).astype(float)
        return np.sum(indicators, axis=0), indicators.T @ indicators

    counts = np.zeros(design.size)
    joint = np.zeros((design.size, design.size))
    for single, pairs in ordered_map(count_block, chunk_ranges(reps, block_size), workers):
        counts += single
        joint += pairs

    logger.warning(
        "Second-order inclusion probabilities of %s design estimated from "
        "%d draws; results are approximate",
        design.kind,
        reps,
    )
    never = np.flatnonzero(counts == 0)
    if never.size:
        logger.warning("Units never sampled in %d draws: %s", reps, never.tolist())
    return SecondOrderMatrix(counts / reps, joint / reps, approximate=True)


def srswor_size(budget, n_units):
    """Nearest integer sample size to a real budget, kept in 1..N."""
    return int(min(n_units, max(1, math.floor(budget + 0.5))))


def strategy_designs(bounds, budget):
    """Build the compared (design, estimator) pairs for one budget.

    Returns:
        tuple[dict, dict]: Strategy name to ``(design, estimator)``, and
            the SRSWOR rounding record
    """
    n_units = bounds.size
    budget = float(budget)
    if not np.isfinite(budget) or budget <= 0.0 or budget > n_units:
        raise BudgetOutOfRange(budget, n_units)

    solution = allocator.solve_waterfill(bounds.radii, budget, bounds.unit_ids)
    pi_star = solution.pi_star
    uniform = np.full(n_units, budget / n_units)
    size = srswor_size(budget, n_units)
    srswor = SRSWORDesign(n_units, size)

    minimax_design = PoissonDesign(pi_star)
    strategies = {
        STRATEGY_MINIMAX: (minimax_design, MidpointHT(bounds, pi_star)),
        STRATEGY_UNIFORM: (PoissonDesign(uniform), MidpointHT(bounds, uniform)),
        STRATEGY_SRSWOR: (srswor, MidpointHT(bounds, srswor.first_order())),
        STRATEGY_PLAIN_HT: (minimax_design, PlainHT(pi_star)),
    }
    rounding = {
        "budget": budget,
        "srswor_size": size,
        "rounded": float(size) != budget,
    }
    if rounding["rounded"]:
        logger.info("SRSWOR baseline uses sample size %d for budget %r", size, budget)
    return strategies, rounding


def compare_strategies(bounds, budget, y_list, reps, seed, workers=None, strategies=None):
    """Head-to-head Monte-Carlo comparison of the minimax strategy.

    Compared strategies are Poisson(pi*) with the midpoint estimator,
    Poisson(n/N) with the midpoint estimator, SRSWOR(N, round(n)) with
    the midpoint estimator, and Poisson(pi*) with the plain HT
    estimator.

    Args:
        bounds (popmodel.PopulationBounds): Bounds with positive radii
        budget (float): Expected sample size budget n
        y_list (list[list[float]]): Outcome vectors to evaluate
        reps (int): Replicates per (strategy, y)
        seed (int): Root seed; every strategy and vector uses streams
            ``0..reps-1``
        strategies (list[str], optional): Subset of ``STRATEGIES``

    Returns:
        dict: ``rows`` (one per strategy and y), ``worst_case`` per
            strategy, ``minimax_within_band`` and ``rounding``

    Raises:
        BudgetOutOfRange: If n <= 0 or n > N
    """
    pairs, rounding = strategy_designs(bounds, budget)
    names = list(strategies) if strategies else list(STRATEGIES)
    for name in names:
        if name not in pairs:
            raise ValidationError("unknown strategy {0!r}".format(name))

    reps, seed = _check_run(reps, seed)
    y_list = [np.asarray(y, dtype=float) for y in y_list]
    if not y_list:
        raise ValidationError("compare_strategies needs at least one outcome vector")
    for y in y_list:
        if y.shape != (bounds.size,):
            raise DimensionMismatch(bounds.size, y.size, what="outcome vector")
    outcomes = np.array(y_list)

    # Every strategy runs on streams 0..reps-1 of the same seed
    rows = []
    worst = {}
    for name in names:
        design, estimator = pairs[name]
        second = design.second_order()
        results = _run_streams(
            design, estimator, outcomes, reps, seed, DEFAULT_BLOCK_SIZE, workers
        )
        for k, (y, result) in enumerate(zip(y_list, results)):
            exact = exact_risk_difference(estimator.centers, second.pi, second, y)
            row = dict(result.as_dict(), strategy=name, y_index=k, exact_risk=exact)
            rows.append(row)
            current = worst.get(name)
            if current is None or row["empirical_mse"] > current["empirical_mse"]:
                worst[name] = {
                    "empirical_mse": row["empirical_mse"],
                    "mse_std_error": row["mse_std_error"],
                    "exact_risk": exact,
                    "y_index": k,
                }

    within_band = None
    if STRATEGY_MINIMAX in worst:
        minimax = worst[STRATEGY_MINIMAX]
        within_band = all(
            minimax["empirical_mse"]
            <= other["empirical_mse"]
            + BAND_STD_ERRORS
            * math.sqrt(minimax["mse_std_error"] ** 2 + other["mse_std_error"] ** 2)
            for name, other in worst.items()
            if name != STRATEGY_MINIMAX
        )

    return {
        "rows": rows,
        "worst_case": worst,
        "minimax_within_band": within_band,
        "rounding": rounding,
        "v_n": allocator.minimax_value(bounds.radii, budget, bounds.unit_ids),
    }


def all_vertices(bounds):
    """Every vertex of the bounds, in vertex-index order."""
    return [vertex(bounds, signs) for signs in sign_matrix(bounds.size)]


def random_vertices(bounds, count, seed):
    """Draw ``count`` vertices uniformly, from a stream disjoint from the
    simulation streams of the same seed.
    """
    rng = make_rng(seed, VERTEX_STREAM)
    signs = np.where(rng.random((count, bounds.size)) < 0.5, -1.0, 1.0)
    return [vertex(bounds, row) for row in signs]
