# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Exact brute-force verification for small populations.

Risks are computed by enumerating a design's full support against every
vertex of the parameter rectangle (or every support point of a product
prior). Vertex ``v`` has ``eps_i = -1`` exactly when bit ``i`` of ``v``
is set; see ``util.sign_matrix``.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import allocator
from .designs import SRSWORDesign
from .errors import (
    BiasedChallenger,
    CapabilityError,
    DimensionMismatch,
    IncompleteProfile,
    InvalidPrior,
    PopulationTooLarge,
    PriorTooLarge,
)
from .estimators import DifferencedHT, MidpointHT, PlainHT
from .popmodel import require_nondegenerate
from .util import (
    CHUNK_CELLS,
    DEFAULT_TOLERANCE,
    chunk_ranges,
    get_max_support,
    get_max_units,
    make_rng,
    ordered_map,
    risk_tolerance,
    sign_matrix,
)


logger = logging.getLogger(__name__)

# Largest number of support points per unit in a product prior
MAX_PRIOR_POINTS = 3


def _support(design):
    if not design.enumerable:
        raise CapabilityError(
            "{0} design cannot be enumerated for exact oracles".format(design.kind)
        )
    return design.support()


def _check_sizes(design, n_units, what="bounds"):
    if design.size != n_units:
        raise DimensionMismatch(design.size, n_units, what=what)


def _bias_tolerance(bounds, tol=DEFAULT_TOLERANCE):
    # Biases are differences of totals; scale by the largest attainable total
    scale = float(np.sum(np.maximum(np.abs(bounds.lower), np.abs(bounds.upper))))
    return risk_tolerance(scale, tol)


def _outcome_moments(indicators, probs, estimator, outcomes, workers=None):
    """Exact bias and risk of ``estimator`` at each outcome row.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray]: ``(bias, risk)`` vectors
    """
    per_chunk = max(1, CHUNK_CELLS // max(1, indicators.shape[0]))
    chunks = chunk_ranges(outcomes.shape[0], per_chunk)

    evaluate = estimator.error_function(indicators)

    def moments(bounds_pair):
        start, stop = bounds_pair
        errors = evaluate(outcomes[start:stop])
        return probs @ errors, probs @ errors ** 2

    results = ordered_map(moments, chunks, workers)
    bias = np.concatenate([r[0] for r in results])
    risk = np.concatenate([r[1] for r in results])
    return bias, risk


def exact_risk_enum(design, estimator, y):
    """Exact risk sum_s p(s) (delta_s(y_s) - T(y))^2.

    Args:
        design (designs.Design): Enumerable design
        estimator (estimators.Estimator): Estimator under test
        y (list[float]): Outcome vector

    Returns:
        float: Mean squared error at y
    """
    indicators, probs = _support(design)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    _, risk = _outcome_moments(indicators, probs, estimator, y, workers=1)
    return float(risk[0])


def exact_bias_enum(design, estimator, y):
    """Exact bias sum_s p(s) delta_s(y_s) - T(y)."""
    indicators, probs = _support(design)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    bias, _ = _outcome_moments(indicators, probs, estimator, y, workers=1)
    return float(bias[0])


@dataclass(frozen=True, eq=False)
class VertexRiskProfile(object):
    """Exact risk at all 2^N vertices, indexed by vertex code."""

    n_units: int
    risks: np.ndarray = field(repr=False)
    biases: np.ndarray = field(repr=False)

    @property
    def sup(self):
        return float(np.max(self.risks))

    @property
    def mean(self):
        """Uniform-vertex Bayes risk."""
        return float(np.mean(self.risks))

    def risk_at(self, signs):
        """Risk at the vertex with sign vector ``signs``."""
        signs = np.asarray(signs)
        if signs.shape != (self.n_units,):
            raise DimensionMismatch(self.n_units, signs.size, what="sign vector")
        code = int(np.sum((signs < 0).astype(np.int64) << np.arange(self.n_units)))
        return float(self.risks[code])

    def as_dict(self):
        """Returns:
            dict[tuple[int], float]: Sign vector to risk.
        """
        signs = sign_matrix(self.n_units).astype(int)
        return dict(
            (tuple(row), float(risk)) for row, risk in zip(signs, self.risks)
        )

    def excess(self, d_pi):
        """Mean vertex risk in excess of D_pi, contributed by components
        beyond the first-order projection.
        """
        return self.mean - d_pi

    def max_abs_bias(self):
        return float(np.max(np.abs(self.biases)))

    def is_symmetric(self, tol=DEFAULT_TOLERANCE):
        """Check R(eps) == R(-eps): the vertex code complement."""
        mirrored = self.risks[::-1]
        return bool(np.max(np.abs(self.risks - mirrored)) <= risk_tolerance(self.sup, tol))


def vertex_outcomes(bounds, start=0, stop=None):
    """Outcome vectors of vertices ``start..stop-1`` as a ``(K, N)`` array."""
    signs = sign_matrix(bounds.size, start, stop)
    return np.where(signs > 0, bounds.upper[None, :], bounds.lower[None, :])


def vertex_risk_profile(design, estimator, bounds, workers=None):
    """Exact risk of ``estimator`` at every vertex of the bounds.

    Args:
        design (designs.Design): Enumerable design
        estimator (estimators.Estimator): Estimator under test
        bounds (popmodel.PopulationBounds): Population bounds
        workers (int, optional): Worker threads

    Returns:
        VertexRiskProfile: Risks and biases at all 2^N vertices

    Raises:
        PopulationTooLarge: If N exceeds the vertex cap
        EnumerationTooLarge: If the design support exceeds its cap
    """
    _check_sizes(design, bounds.size)
    max_units = get_max_units()
    if bounds.size > max_units:
        raise PopulationTooLarge(
            "N={0} exceeds the vertex enumeration cap {1}; use Monte-Carlo "
            "estimates instead".format(bounds.size, max_units)
        )

    indicators, probs = _support(design)
    count = 1 << bounds.size
    per_chunk = max(1, CHUNK_CELLS // max(1, indicators.shape[0]))
    logger.debug(
        "Enumerating %d vertices x %d subsets", count, indicators.shape[0]
    )

    evaluate = estimator.error_function(indicators)

    def chunk_moments(bounds_pair):
        start, stop = bounds_pair
        errors = evaluate(vertex_outcomes(bounds, start, stop))
        return probs @ errors, probs @ errors ** 2

    results = ordered_map(chunk_moments, chunk_ranges(count, per_chunk), workers)
    biases = np.concatenate([r[0] for r in results])
    risks = np.concatenate([r[1] for r in results])
    risks.setflags(write=False)
    biases.setflags(write=False)
    return VertexRiskProfile(n_units=bounds.size, risks=risks, biases=biases)


def fwht(values):
    """Unnormalized fast Walsh-Hadamard transform in natural order.

    Output ``u`` is sum_v values[v] * (-1)^popcount(u & v).

    Args:
        values (numpy.ndarray): Length 2^k vector

    Returns:
        numpy.ndarray: Transformed vector
    """
    x = np.array(values, dtype=float)
    size = x.shape[0]
    if size & (size - 1):
        raise IncompleteProfile("Walsh transform needs a power-of-two length")
    h = 1
    while h < size:
        x = x.reshape(-1, 2, h)
        x = np.stack((x[:, 0, :] + x[:, 1, :], x[:, 0, :] - x[:, 1, :]), axis=1)
        x = x.reshape(-1)
        h *= 2
    return x


@dataclass(frozen=True, eq=False)
class WalshRecovery(object):
    """Walsh coefficients of a vertex risk profile.

    ``pairwise[i, j]`` (i != j) is the coefficient of eps_i eps_j and
    ``constant`` is the coefficient of the empty set, the mean risk.
    """

    constant: float
    pairwise: np.ndarray = field(repr=False)
    first_order: np.ndarray = field(repr=False)

    def expected_pairwise(self, pi, second, r):
        """Predicted coefficients 2 Delta_ij r_i r_j / (pi_i pi_j)."""
        pi = np.asarray(pi, dtype=float)
        r = np.asarray(r, dtype=float)
        scaled = r / pi
        expected = 2.0 * second.delta * np.outer(scaled, scaled)
        np.fill_diagonal(expected, 0.0)
        return expected

    def residual_max(self, pi, second, r, d_pi):
        """Largest deviation from the predicted coefficients, including
        the constant term against D_pi.
        """
        residual = np.abs(self.pairwise - self.expected_pairwise(pi, second, r))
        pairwise_max = float(np.max(residual)) if residual.size else 0.0
        return max(pairwise_max, abs(self.constant - d_pi))


def walsh_delta_recovery(profile, pi, r):
    """Recover pairwise Walsh coefficients from a complete profile.

    c_ij = 2^-N sum_eps R(eps) eps_i eps_j, which for the
    midpoint-differenced estimator equals 2 Delta_ij r_i r_j / (pi_i pi_j).

    Args:
        profile (VertexRiskProfile): Full 2^N risk profile
        pi (list[float]): Inclusion probabilities
        r (list[float]): Radii

    Returns:
        WalshRecovery: Constant, first-order and pairwise coefficients

    Raises:
        IncompleteProfile: If the profile does not cover all vertices
    """
    n_units = profile.n_units
    if profile.risks.shape != (1 << n_units,):
        raise IncompleteProfile(
            "profile has {0} risks, expected {1}".format(
                profile.risks.size, 1 << n_units
            )
        )
    if np.asarray(pi).shape != (n_units,) or np.asarray(r).shape != (n_units,):
        raise DimensionMismatch(n_units, np.asarray(pi).size, what="pi or radii")

    coefficients = fwht(profile.risks) / float(1 << n_units)
    pairwise = np.zeros((n_units, n_units))
    for i, j in itertools.combinations(range(n_units), 2):
        value = coefficients[(1 << i) | (1 << j)]
        pairwise[i, j] = pairwise[j, i] = value
    first = np.array([coefficients[1 << i] for i in range(n_units)])
    return WalshRecovery(
        constant=float(coefficients[0]), pairwise=pairwise, first_order=first
    )


class ProductPrior(object):
    """Independent discrete prior on each unit's interval, centered on the
    midpoint.
    """

    def __init__(self, bounds, supports, weights):
        """
        Args:
            bounds (popmodel.PopulationBounds): Population bounds
            supports (list[list[float]]): Support points per unit
            weights (list[list[float]]): Matching probabilities per unit

        Raises:
            InvalidPrior: If a marginal has the wrong mean, zero
                variance or support outside the bounds.
            PriorTooLarge: If a marginal has too many points or the
                product support exceeds the enumeration cap.
        """
        if len(supports) != bounds.size or len(weights) != bounds.size:
            raise DimensionMismatch(bounds.size, len(supports), what="prior marginals")

        self.bounds = bounds
        self.supports = []
        self.weights = []
        variances = []
        total_points = 1
        for i, (points, probs) in enumerate(zip(supports, weights)):
            points = np.asarray(points, dtype=float)
            probs = np.asarray(probs, dtype=float)
            unit_id = bounds.unit_ids[i]
            if points.shape != probs.shape or points.ndim != 1 or points.size == 0:
                raise InvalidPrior("unit {0!r}: malformed marginal".format(unit_id))
            if points.size > MAX_PRIOR_POINTS:
                raise PriorTooLarge(
                    "unit {0!r}: {1} support points, at most {2} allowed".format(
                        unit_id, points.size, MAX_PRIOR_POINTS
                    )
                )
            if np.any(probs < 0.0) or abs(float(np.sum(probs)) - 1.0) > 1e-12:
                raise InvalidPrior("unit {0!r}: weights must sum to 1".format(unit_id))
            if np.any(points < bounds.lower[i]) or np.any(points > bounds.upper[i]):
                raise InvalidPrior("unit {0!r}: support outside bounds".format(unit_id))

            midpoint = bounds.midpoints[i]
            mean = float(probs @ points)
            if abs(mean - midpoint) > 1e-12 * max(1.0, abs(midpoint)):
                raise InvalidPrior(
                    "unit {0!r}: mean {1!r} differs from midpoint {2!r}".format(
                        unit_id, mean, float(midpoint)
                    )
                )
            variance = float(probs @ (points - midpoint) ** 2)
            if not variance > 0.0:
                raise InvalidPrior("unit {0!r}: zero prior variance".format(unit_id))

            self.supports.append(points)
            self.weights.append(probs)
            variances.append(variance)
            total_points *= points.size

        cap = get_max_support()
        if total_points > cap:
            raise PriorTooLarge(
                "product prior has {0} support points, cap is {1}".format(
                    total_points, cap
                )
            )
        self.variances = np.array(variances)
        self.support_size = total_points

    @classmethod
    def vertex(cls, bounds):
        """Uniform prior over the vertices: m_i +- r_i with weight 1/2."""
        return cls(
            bounds,
            [[a, b] for a, b in zip(bounds.lower, bounds.upper)],
            [[0.5, 0.5] for _ in range(bounds.size)],
        )

    @classmethod
    def three_point(cls, bounds, q=0.25):
        """Prior on {a_i, m_i, b_i} with weights (q, 1 - 2q, q).

        Args:
            q (float): Endpoint weight, 0 < q <= 1/2
        """
        if not 0.0 < q <= 0.5:
            raise InvalidPrior("endpoint weight q must lie in (0, 1/2]")
        return cls(
            bounds,
            [
                [a, m, b]
                for a, m, b in zip(bounds.lower, bounds.midpoints, bounds.upper)
            ],
            [[q, 1.0 - 2.0 * q, q] for _ in range(bounds.size)],
        )

    def outcomes(self):
        """Enumerate the product support.

        Returns:
            tuple[numpy.ndarray, numpy.ndarray]: ``(K, N)`` outcome rows
                and their length-K probabilities.
        """
        rows = np.array(list(itertools.product(*self.supports)), dtype=float)
        probs = np.array(
            [np.prod(combo) for combo in itertools.product(*self.weights)],
            dtype=float,
        )
        return rows.reshape(-1, self.bounds.size), probs

    def midpoint_bayes_risk(self, pi):
        """Closed form sum_i sigma_i^2 (1/pi_i - 1)."""
        pi = np.asarray(pi, dtype=float)
        return float(np.sum(self.variances * (1.0 / pi - 1.0)))


def product_prior_moments(design, estimator, prior, workers=None):
    """Exact biases and risks at every prior support point.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray, numpy.ndarray]: Biases,
            risks and prior probabilities per support point
    """
    _check_sizes(design, prior.bounds.size, what="prior")
    indicators, probs = _support(design)
    outcomes, weights = prior.outcomes()
    bias, risk = _outcome_moments(indicators, probs, estimator, outcomes, workers)
    return bias, risk, weights


def product_prior_bayes_risk(design, estimator, prior, workers=None):
    """Exact Bayes risk under a product prior, by double enumeration.

    Args:
        design (designs.Design): Enumerable design
        estimator (estimators.Estimator): Estimator under test
        prior (ProductPrior): Centered product prior

    Returns:
        float: Prior-weighted mean of the exact risk
    """
    _, risk, weights = product_prior_moments(design, estimator, prior, workers)
    return float(weights @ risk)


@dataclass(frozen=True)
class DominanceRecord(object):
    challenger: str
    challenger_risk: float
    midpoint_risk: float
    max_abs_bias: float
    holds: bool

    @property
    def margin(self):
        return self.challenger_risk - self.midpoint_risk


def bayes_dominance_audit(design, prior, challenger, tol=DEFAULT_TOLERANCE, workers=None):
    """Compare a challenger's Bayes risk with the midpoint-differenced
    estimator's under the same design and prior.

    Args:
        design (designs.Design): Enumerable design
        prior (ProductPrior): Centered product prior
        challenger (estimators.Estimator): Unbiased estimator
        tol (float): Absolute tolerance on bias and risk

    Returns:
        DominanceRecord: Both Bayes risks and the verdict

    Raises:
        BiasedChallenger: If the challenger is biased at a support point
    """
    bias, risk, weights = product_prior_moments(design, challenger, prior, workers)
    max_bias = float(np.max(np.abs(bias)))
    if max_bias > _bias_tolerance(prior.bounds, tol):
        raise BiasedChallenger(
            "challenger {0} has bias {1!r} at a prior support point".format(
                challenger.kind, max_bias
            )
        )

    midpoint = MidpointHT(prior.bounds, design.first_order())
    midpoint_risk = product_prior_bayes_risk(design, midpoint, prior, workers)
    challenger_risk = float(weights @ risk)
    holds = challenger_risk >= midpoint_risk - risk_tolerance(midpoint_risk, tol)
    if not holds:
        logger.error(
            "Challenger %s beats the midpoint estimator's Bayes risk: %r < %r",
            challenger.kind,
            challenger_risk,
            midpoint_risk,
        )
    return DominanceRecord(
        challenger=challenger.kind,
        challenger_risk=challenger_risk,
        midpoint_risk=midpoint_risk,
        max_abs_bias=max_bias,
        holds=holds,
    )


@dataclass(frozen=True)
class SharpnessVerdict(object):
    d_pi: float
    sup_vertex_risk: float
    mean_vertex_risk: float
    delta_max: float
    attains: bool
    pairwise_independent: bool
    walsh_residual_max: float
    tolerance: float

    @property
    def equivalence_holds(self):
        """Attainment of D_pi coincides with pairwise independence."""
        return self.attains == self.pairwise_independent

    def as_dict(self):
        return {
            "d_pi": self.d_pi,
            "sup_vertex_risk": self.sup_vertex_risk,
            "mean_vertex_risk": self.mean_vertex_risk,
            "delta_max": self.delta_max,
            "attains": self.attains,
            "pairwise_independent": self.pairwise_independent,
            "equivalence_holds": self.equivalence_holds,
            "walsh_residual_max": self.walsh_residual_max,
            "tolerance": self.tolerance,
        }


def sharpness_audit(design, bounds, tol=None, delta_tol=DEFAULT_TOLERANCE, workers=None):
    """Decide whether the midpoint-differenced estimator attains D_pi.

    Args:
        design (designs.Design): Enumerable design with exact second
            order.
        bounds (popmodel.PopulationBounds): Bounds with positive radii
        tol (float, optional): Attainment tolerance on risks; defaults
            to 1e-9 * max(1, D_pi).
        delta_tol (float): Pairwise-independence tolerance on Delta

    Returns:
        SharpnessVerdict: Risks, D_pi, Delta summary and verdicts
    """
    _check_sizes(design, bounds.size)
    require_nondegenerate(bounds)
    pi = design.first_order()
    second = design.second_order()
    bound = allocator.d_pi(bounds.radii, pi, bounds.unit_ids)
    if tol is None:
        tol = risk_tolerance(bound)

    estimator = MidpointHT(bounds, pi)
    profile = vertex_risk_profile(design, estimator, bounds, workers)
    recovery = walsh_delta_recovery(profile, pi, bounds.radii)
    delta_max = second.delta_max_offdiag()

    verdict = SharpnessVerdict(
        d_pi=bound,
        sup_vertex_risk=profile.sup,
        mean_vertex_risk=profile.mean,
        delta_max=delta_max,
        attains=abs(profile.sup - bound) <= tol,
        pairwise_independent=delta_max <= delta_tol,
        walsh_residual_max=recovery.residual_max(pi, second, bounds.radii, bound),
        tolerance=tol,
    )
    if not verdict.equivalence_holds:
        logger.error(
            "Attainment (%s) disagrees with pairwise independence (%s): "
            "sup=%r, D_pi=%r, delta_max=%r",
            verdict.attains,
            verdict.pairwise_independent,
            verdict.sup_vertex_risk,
            bound,
            delta_max,
        )
    return verdict


def lower_bound_certificate(design, bounds, estimators, tol=None, workers=None):
    """Check mean vertex risk >= D_pi for each unbiased estimator.

    The uniform-vertex Bayes risk of any unbiased estimator is at least
    D_pi, so its supremum over the bounds is too.

    Args:
        design (designs.Design): Enumerable design
        bounds (popmodel.PopulationBounds): Bounds with positive radii
        estimators (list[estimators.Estimator]): Estimators to certify
        tol (float, optional): Tolerance; defaults to
            1e-9 * max(1, D_pi).

    Returns:
        list[dict]: Per estimator ``kind``, ``mean_vertex_risk``,
            ``sup_vertex_risk``, ``d_pi``, ``max_abs_bias``,
            ``unbiased`` and ``holds``
    """
    require_nondegenerate(bounds)
    pi = design.first_order()
    bound = allocator.d_pi(bounds.radii, pi, bounds.unit_ids)
    if tol is None:
        tol = risk_tolerance(bound)

    records = []
    for estimator in estimators:
        profile = vertex_risk_profile(design, estimator, bounds, workers)
        max_bias = profile.max_abs_bias()
        unbiased = max_bias <= _bias_tolerance(bounds)
        holds = profile.mean >= bound - tol
        if unbiased and not holds:
            logger.error(
                "Lower bound violated by %s: mean %r < D_pi %r",
                estimator.kind,
                profile.mean,
                bound,
            )
        records.append(
            {
                "kind": estimator.kind,
                "mean_vertex_risk": profile.mean,
                "sup_vertex_risk": profile.sup,
                "d_pi": bound,
                "max_abs_bias": max_bias,
                "unbiased": unbiased,
                "holds": holds,
            }
        )
    return records


def fixed_size_gap(bounds, sample_size, workers=None):
    """Excess of SRSWOR's sup-vertex risk over D_pi.

    Positive whenever 1 < k < N, since fixed-size designs have negative
    inclusion covariances.

    Args:
        bounds (popmodel.PopulationBounds): Bounds with positive radii
        sample_size (int): Fixed sample size k

    Returns:
        float: sup_vertex_risk - D_pi
    """
    design = SRSWORDesign(bounds.size, sample_size)
    verdict = sharpness_audit(design, bounds, workers=workers)
    return verdict.sup_vertex_risk - verdict.d_pi


def random_centers(bounds, count, seed):
    """Draw ``count`` center vectors uniformly inside the bounds."""
    rng = make_rng(seed, 0)
    return [
        bounds.lower + rng.random(bounds.size) * (bounds.upper - bounds.lower)
        for _ in range(count)
    ]


def run_oracle_suite(design, bounds, seed=0, center_count=10, prior=None, workers=None):
    """Full exact certification of one (design, bounds) instance.

    Covers the lower-bound certificate for the midpoint, plain and
    random-center difference estimators, the sharpness verdict, Walsh
    recovery, the product-prior Bayes-risk identity and Bayes dominance
    of the midpoint estimator over the same challengers.

    Args:
        design (designs.Design): Enumerable design
        bounds (popmodel.PopulationBounds): Bounds with positive radii
        seed (int): Seed for the random challenger centers
        center_count (int): Number of random-center challengers
        prior (ProductPrior, optional): Prior; defaults to the vertex
            prior.

    Returns:
        dict: Verdict record
    """
    _check_sizes(design, bounds.size)
    require_nondegenerate(bounds)
    pi = design.first_order()

    challengers = [MidpointHT(bounds, pi), PlainHT(pi)]
    challengers.extend(
        DifferencedHT(centers, pi) for centers in random_centers(bounds, center_count, seed)
    )

    sharpness = sharpness_audit(design, bounds, workers=workers)
    certificate = lower_bound_certificate(design, bounds, challengers, workers=workers)

    if prior is None:
        prior = ProductPrior.vertex(bounds)
    midpoint_bayes = product_prior_bayes_risk(design, challengers[0], prior, workers)
    identity = prior.midpoint_bayes_risk(pi)
    dominance = [
        bayes_dominance_audit(design, prior, challenger, workers=workers)
        for challenger in challengers[1:]
    ]

    return dict(
        sharpness.as_dict(),
        lower_bound=certificate,
        lower_bound_holds=all(r["holds"] for r in certificate if r["unbiased"]),
        bayes_risk_midpoint=midpoint_bayes,
        bayes_risk_identity=identity,
        bayes_identity_holds=abs(midpoint_bayes - identity)
        <= risk_tolerance(identity),
        dominance_holds=all(record.holds for record in dominance),
        dominance_min_margin=min(
            (record.margin for record in dominance), default=0.0
        ),
    )
