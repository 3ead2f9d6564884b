# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Unit tests for the water-fill allocator"""

import math
import unittest

import numpy as np
from hypothesis import example, given, settings
import hypothesis.strategies as st

from minimax_sampler.allocator import (
    allocation_gain,
    d_pi,
    kkt_check,
    kkt_diagnostics,
    minimax_value,
    solve_waterfill,
    waterfill_level,
)
from minimax_sampler.errors import (
    BudgetOutOfRange,
    DegenerateUnit,
    InfeasibleCandidate,
    InvalidProbability,
)


GRID_POINTS = 50

radii_lists = st.lists(st.floats(0.05, 20.0), min_size=2, max_size=5)


def grid_minimum(r, n):
    """Smallest D_pi over a grid of feasible designs using the full budget.

    The first N-1 probabilities range over a GRID_POINTS-per-axis grid of
    (0, 1]; the last takes the remaining budget when that is feasible.
    The grid is scanned one value of the first coordinate at a time.
    """
    r = np.asarray(r, dtype=float)
    axis = np.linspace(1.0 / GRID_POINTS, 1.0, GRID_POINTS)
    inner = r.size - 2
    if inner > 0:
        grids = np.meshgrid(*([axis] * inner), indexing="ij")
        middle = np.stack([g.reshape(-1) for g in grids], axis=1)
    else:
        middle = np.zeros((1, 0))

    best = math.inf
    for first in axis:
        head = np.column_stack([np.full(middle.shape[0], first), middle])
        last = n - head.sum(axis=1)
        feasible = (last > 0.0) & (last <= 1.0)
        if not np.any(feasible):
            continue
        pi = np.concatenate([head[feasible], last[feasible, None]], axis=1)
        values = np.sum(r ** 2 * (1.0 - pi) / pi, axis=1)
        best = min(best, float(values.min()))
    return best


class WaterfillTest(unittest.TestCase):
    """Test case for the budgeted minimax design."""

    def test_worked_instance(self):
        solution = solve_waterfill([0.5, 1.0, 1.5], 2)
        np.testing.assert_allclose(
            solution.pi_star, [1.0 / 3.0, 2.0 / 3.0, 1.0], rtol=0, atol=1e-12
        )
        self.assertAlmostEqual(solution.v_n, 1.0, delta=1e-12)
        self.assertAlmostEqual(solution.c, 2.0 / 3.0, delta=1e-12)
        self.assertAlmostEqual(solution.lambda_, 2.25, delta=1e-12)
        self.assertEqual(solution.capped, (2,))
        self.assertAlmostEqual(solution.expected_size(), 2.0, delta=1e-12)
        self.assertFalse(solution.census)

    def test_large_radius_capped(self):
        solution = solve_waterfill([10.0, 1.0, 1.0], 2)
        np.testing.assert_allclose(solution.pi_star, [1.0, 0.5, 0.5])
        self.assertAlmostEqual(solution.v_n, 2.0, delta=1e-12)
        uniform = d_pi([10.0, 1.0, 1.0], [2.0 / 3.0] * 3)
        self.assertAlmostEqual(uniform, 51.0, delta=1e-9)
        self.assertAlmostEqual(allocation_gain([10.0, 1.0, 1.0], 2), 25.5, delta=1e-9)

    def test_census(self):
        solution = solve_waterfill([1.0, 2.0], 2)
        np.testing.assert_array_equal(solution.pi_star, [1.0, 1.0])
        self.assertTrue(math.isinf(solution.c))
        self.assertEqual(solution.lambda_, 0.0)
        self.assertEqual(solution.v_n, 0.0)
        self.assertTrue(solution.census)
        self.assertEqual(allocation_gain([1.0, 2.0], 2), 1.0)

    def test_single_unit(self):
        solution = solve_waterfill([2.0], 0.4)
        np.testing.assert_allclose(solution.pi_star, [0.4])
        self.assertAlmostEqual(solution.v_n, 4.0 * 0.6 / 0.4, delta=1e-12)

    def test_equal_radii(self):
        solution = solve_waterfill([1.0] * 4, 1.0)
        np.testing.assert_allclose(solution.pi_star, [0.25] * 4)
        self.assertAlmostEqual(allocation_gain([1.0] * 4, 1.0), 1.0, delta=1e-12)

    def test_errors(self):
        for budget in (0, -1, 3.5, float("nan")):
            with self.assertRaises(BudgetOutOfRange):
                solve_waterfill([1.0, 2.0, 3.0], budget)
        with self.assertRaises(DegenerateUnit) as ctx:
            solve_waterfill([1.0, 0.0], 1)
        self.assertEqual(ctx.exception.index, 1)

    def test_degenerate_unit_named_by_id(self):
        with self.assertRaises(DegenerateUnit) as ctx:
            solve_waterfill([1.0, 0.0], 1, unit_ids=("north", "south"))
        self.assertEqual(ctx.exception.unit_id, "south")
        self.assertEqual(ctx.exception.index, 1)
        with self.assertRaises(DegenerateUnit) as ctx:
            d_pi([0.0, 1.0], [0.5, 0.5], unit_ids=("north", "south"))
        self.assertEqual(ctx.exception.unit_id, "north")

    @given(radii_lists, st.floats(0.02, 0.98))
    @settings(max_examples=200)
    def test_level_is_unique(self, r, fraction):
        n = fraction * len(r)
        solution = solve_waterfill(r, n)
        level = waterfill_level(r, solution.c)
        self.assertAlmostEqual(level, n, delta=1e-9)
        # H is strictly increasing below N, so no other level solves H(c) = n
        self.assertGreater(waterfill_level(r, solution.c + 1e-6), level)
        self.assertLess(waterfill_level(r, solution.c - 1e-6), level)

    @given(radii_lists, st.floats(0.05, 1.0), st.floats(0.05, 1.0))
    @settings(max_examples=100)
    def test_value_nonincreasing_in_budget(self, r, first, second):
        low, high = sorted((first * len(r), second * len(r)))
        scale = max(1.0, minimax_value(r, low))
        self.assertGreaterEqual(minimax_value(r, low), minimax_value(r, high) - 1e-9 * scale)
        self.assertEqual(minimax_value(r, len(r)), 0.0)

    def test_scale_property(self):
        r = np.array([0.3, 1.2, 2.0, 0.7])
        self.assertAlmostEqual(
            minimax_value(2.0 * r, 1.5), 4.0 * minimax_value(r, 1.5), delta=1e-9
        )

    def test_d_pi_validation(self):
        self.assertEqual(d_pi([1.0, 2.0], [1.0, 1.0]), 0.0)
        with self.assertRaises(InvalidProbability):
            d_pi([1.0, 2.0], [0.5, 0.0])

    @given(radii_lists, st.floats(0.05, 1.0))
    @settings(max_examples=100, deadline=None)
    @example([0.5, 1.0, 1.5], 2.0 / 3.0)
    def test_optimal_against_grid(self, r, fraction):
        n = fraction * len(r)
        solution = solve_waterfill(r, n)
        self.assertAlmostEqual(float(np.sum(solution.pi_star)), n, delta=1e-9)
        self.assertTrue(np.all(solution.pi_star > 0.0))
        self.assertTrue(np.all(solution.pi_star <= 1.0))
        if not solution.census:
            self.assertAlmostEqual(waterfill_level(r, solution.c), n, delta=1e-9)
        self.assertLessEqual(solution.v_n, grid_minimum(r, n) + 1e-9)


class SupportingInequalityTest(unittest.TestCase):
    """Test case for the optimality certificate against candidates."""

    def test_infeasible_candidates(self):
        with self.assertRaises(InfeasibleCandidate):
            kkt_check([1.0, 2.0], 1.0, [0.9, 0.9])
        with self.assertRaises(InfeasibleCandidate):
            kkt_check([1.0, 2.0], 1.0, [0.0, 0.5])

    def test_optimum_is_its_own_candidate(self):
        solution = solve_waterfill([0.5, 1.0, 1.5], 2)
        diagnostics = kkt_diagnostics([0.5, 1.0, 1.5], 2, solution.pi_star)
        self.assertAlmostEqual(diagnostics.min_gap, 0.0, delta=1e-12)
        self.assertAlmostEqual(diagnostics.budget_term, 0.0, delta=1e-12)

    @given(
        radii_lists,
        st.floats(0.05, 1.0),
        st.lists(st.floats(0.01, 1.0), min_size=5, max_size=5),
    )
    @settings(max_examples=100)
    def test_random_candidates(self, r, fraction, weights):
        n = fraction * len(r)
        weights = np.asarray(weights[: len(r)])
        candidate = np.minimum(1.0, n * weights / weights.sum())
        diagnostics = kkt_diagnostics(r, n, candidate)
        scale = max(1.0, diagnostics.objective_optimum)
        self.assertGreaterEqual(diagnostics.min_gap, -1e-9 * scale)
        self.assertGreaterEqual(diagnostics.budget_term, -1e-9 * scale)
        self.assertTrue(kkt_check(r, n, candidate))


if __name__ == "__main__":
    unittest.main()
