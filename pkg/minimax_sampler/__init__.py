# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

import logging
import os

# Public interface access
from .adapter import read_bounds_csv, write_bounds_csv, write_report
from .allocator import (
    DesignSolution,
    allocation_gain,
    d_pi,
    kkt_check,
    kkt_diagnostics,
    minimax_value,
    solve_waterfill,
)
from .designs import (
    EnumeratedDesign,
    PoissonDesign,
    SRSWORDesign,
    SamplerDesign,
    Sample,
    SecondOrderMatrix,
    design_audit,
    draw,
    expected_size,
    first_order,
    is_pairwise_independent,
    second_order,
)
from .errors import MinimaxSamplerError, ValidationError
from .estimators import (
    ConstantEstimator,
    DifferencedHT,
    MidpointHT,
    PlainHT,
    affine_transform,
    differenced_ht,
    estimate_report,
    exact_risk_difference,
    midpoint_ht,
    plain_ht,
    sup_risk_pairwise,
)
from .hooks import HOOK_POST_REPORT
from .mc import (
    SimulationResult,
    compare_strategies,
    empirical_second_order,
    simulate,
    simulate_outcomes,
)
from .oracle import (
    ProductPrior,
    bayes_dominance_audit,
    exact_bias_enum,
    exact_risk_enum,
    fixed_size_gap,
    lower_bound_certificate,
    product_prior_bayes_risk,
    run_oracle_suite,
    sharpness_audit,
    vertex_risk_profile,
    walsh_delta_recovery,
)
from .popmodel import (
    PopulationBounds,
    contains,
    load_bounds,
    serialize_bounds,
    strip_degenerate,
    total,
    vertex,
)

if os.getenv("MINIMAX_SAMPLER_REGISTER_HOOKS", "1") == "1":
    # Install report hooks named in MINIMAX_SAMPLER_HOOKS
    from . import hooks

    try:
        hooks.load_from_env()
    except ValidationError as exc:
        logging.getLogger(__name__).warning("Report hooks not installed: %s", exc)
