# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Command-line front end.

Every subcommand resolves its flags into a ``RunConfig``, runs it through
``run`` and writes the resulting report. ``run`` never raises: bad input
maps to exit code 1 and unexpected failures to exit code 2.
"""

import logging
import os
import sys
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import adapter, allocator, designs, estimators, mc, oracle, popmodel
from .errors import (
    BudgetOutOfRange,
    DegenerateUnit,
    DimensionMismatch,
    DuplicateId,
    InputFormatError,
    InvertedInterval,
    ValidationError,
)
from .util import ENV_LOG_LEVEL, SCHEMA_VERSION, digest_inputs, get_worker_count


logger = logging.getLogger(__name__)

# Subcommands
CMD_DESIGN = "design"
CMD_ESTIMATE = "estimate"
CMD_AUDIT = "audit"
CMD_ORACLE = "oracle"
CMD_SIMULATE = "simulate"
CMD_VALIDATE = "validate"
SUBCOMMANDS = (CMD_DESIGN, CMD_ESTIMATE, CMD_AUDIT, CMD_ORACLE, CMD_SIMULATE, CMD_VALIDATE)

# Subcommands that need positive radii for every unit
MINIMAX_SUBCOMMANDS = (CMD_DESIGN, CMD_AUDIT, CMD_ORACLE, CMD_SIMULATE)

# Design kinds accepted by --design
DESIGN_SRSWOR = "srswor"
DESIGN_POISSON = "poisson"
DESIGN_ENUMERATED = "enumerated"
DESIGN_WATERFILL = "waterfill"
DESIGN_KINDS = (DESIGN_SRSWOR, DESIGN_POISSON, DESIGN_ENUMERATED, DESIGN_WATERFILL)

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTERNAL = 2

# Diagnostic levels
LEVEL_ERROR = "error"
LEVEL_WARNING = "warning"

# Without --y-file, simulate evaluates every vertex up to this many units
# and this many random vertices beyond it.
MAX_ALL_VERTEX_UNITS = 10
RANDOM_VERTEX_COUNT = 20


@dataclass
class RunConfig(object):
    """Resolved inputs of one command run."""

    subcommand: str
    bounds: str = None
    budget: float = None
    seed: int = 0
    reps: int = 10000
    output: str = None
    fmt: str = "json"
    strip_degenerate: bool = False
    threads: int = None
    tolerance: float = None
    delta_tolerance: float = 1e-9
    design: str = None
    design_file: str = None
    size: int = None
    sample_size: int = 1
    of: int = None
    pi_from: str = None
    pi_csv: str = None
    sample_file: str = None
    y_file: str = None
    estimator: str = estimators.KIND_MIDPOINT_HT
    strategies: tuple = field(default=())
    center_count: int = 10

    def input_paths(self):
        """Returns:
            dict[str, str]: Input file path by role, None when unused.
        """
        return {
            "bounds": self.bounds,
            "design": self.design_file,
            "pi_from": self.pi_from,
            "pi": self.pi_csv,
            "sample": self.sample_file,
            "y": self.y_file,
        }


@dataclass(frozen=True)
class Diagnostic(object):
    """Input problem found before computation."""

    level: str
    code: str
    message: str
    unit_id: str = None

    @classmethod
    def from_error(cls, exc, level=LEVEL_ERROR):
        return cls(level, exc.code, str(exc), exc.unit_id)

    def as_dict(self):
        return asdict(self)


def _error_report_entry(exc):
    entry = {"code": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    for name in ("unit_id", "index", "path", "line"):
        value = getattr(exc, name, None)
        if value is not None:
            entry[name] = value
    return entry


def validate_inputs(config):
    """Check a run's inputs without computing anything.

    Args:
        config (RunConfig): Run to check

    Returns:
        list[Diagnostic]: Problems found, errors first in file order
    """
    found = []

    if config.subcommand not in SUBCOMMANDS:
        found.append(
            Diagnostic(
                LEVEL_ERROR,
                "UnknownSubcommand",
                "unknown subcommand {0!r}".format(config.subcommand),
            )
        )
    for role, path in sorted(config.input_paths().items()):
        if path is not None and not os.path.isfile(path):
            found.append(
                Diagnostic(
                    LEVEL_ERROR,
                    "MissingFile",
                    "{0} file {1!r} does not exist".format(role, path),
                )
            )
    if config.bounds is None:
        found.append(Diagnostic(LEVEL_ERROR, "MissingFile", "no bounds file given"))
    if found:
        return found

    try:
        records = adapter.read_bounds_rows(config.bounds)
    except InputFormatError as exc:
        return [Diagnostic.from_error(exc)]
    if not records:
        return [Diagnostic(LEVEL_ERROR, "EmptyPopulation", "population has no units")]

    seen = set()
    degenerate = []
    tol = 1e-9 * max(1.0, max((r["b"] - r["a"]) / 2.0 for r in records))
    for record in records:
        unit_id = record["id"]
        if record["a"] > record["b"]:
            found.append(
                Diagnostic.from_error(
                    InvertedInterval(unit_id, record["a"], record["b"])
                )
            )
            continue
        if unit_id in seen:
            found.append(Diagnostic.from_error(DuplicateId(unit_id)))
        seen.add(unit_id)
        if record["a"] == record["b"]:
            degenerate.append(unit_id)

        if record["y"] is not None:
            radius = (record["b"] - record["a"]) / 2.0
            if not record["a"] - tol <= record["y"] <= record["b"] + tol:
                found.append(
                    Diagnostic(
                        LEVEL_WARNING,
                        "OutOfBounds",
                        "unit {0!r}: observed value {1!r} outside [{2!r}, {3!r}] "
                        "(radius {4!r})".format(
                            unit_id, record["y"], record["a"], record["b"], radius
                        ),
                        unit_id,
                    )
                )

    level = LEVEL_WARNING
    if config.subcommand in MINIMAX_SUBCOMMANDS and not config.strip_degenerate:
        level = LEVEL_ERROR
    for unit_id in degenerate:
        found.append(Diagnostic.from_error(DegenerateUnit(unit_id), level=level))

    size = len(records) - (len(degenerate) if config.strip_degenerate else 0)
    needs_budget = config.subcommand in (CMD_DESIGN, CMD_SIMULATE) or (
        config.design == DESIGN_WATERFILL
    )
    if config.budget is not None or needs_budget:
        budget = config.budget
        if budget is None:
            found.append(
                Diagnostic(
                    LEVEL_ERROR,
                    BudgetOutOfRange.code,
                    "subcommand {0!r} needs --budget".format(config.subcommand),
                )
            )
        elif not (np.isfinite(budget) and 0.0 < budget <= size):
            found.append(Diagnostic.from_error(BudgetOutOfRange(budget, size)))

    if config.subcommand == CMD_SIMULATE and config.reps < 2:
        found.append(
            Diagnostic(LEVEL_ERROR, "ValidationError", "--reps must be at least 2")
        )

    found.sort(key=lambda d: d.level != LEVEL_ERROR)
    return found


class _Population(object):
    """Bounds of one run after the degenerate-unit policy."""

    def __init__(self, config):
        self.file = adapter.read_bounds_csv(config.bounds)
        full = self.file.bounds
        self.known_total = 0.0
        self.removed_ids = []
        self.kept = list(range(full.size))
        if config.strip_degenerate:
            stripped = popmodel.strip_degenerate(full)
            self.bounds = stripped.bounds
            self.known_total = stripped.known_total
            self.removed_ids = list(stripped.removed_ids)
            self.kept = list(stripped.kept_indices)
        else:
            self.bounds = full
        self._position = dict((old, new) for new, old in enumerate(self.kept))

    def reindex(self, indices):
        """Map full-file indices to working indices, dropping removed units."""
        return [self._position[i] for i in indices if i in self._position]

    def observed(self):
        return dict(
            (self._position[i], y)
            for i, y in self.file.observed.items()
            if i in self._position
        )

    def summary(self):
        return {"removed_ids": self.removed_ids, "known_total": self.known_total}


def _inclusion_probabilities(config, bounds):
    if config.pi_from is not None:
        return adapter.read_pi_report(config.pi_from, bounds)
    if config.pi_csv is not None:
        return adapter.read_pi_csv(config.pi_csv, bounds)
    if config.budget is not None:
        solution = allocator.solve_waterfill(bounds.radii, config.budget, bounds.unit_ids)
        return solution.pi_star
    return None


def build_design(config, bounds):
    """Build the design named by ``--design`` and its companion flags.

    Without ``--design`` the kind is inferred: a design file means
    enumerated, explicit probabilities mean Poisson and a budget means
    the water-fill Poisson design.

    Returns:
        designs.Design: Design over ``bounds``' units
    """
    kind = config.design
    if kind is None:
        if config.design_file is not None:
            kind = DESIGN_ENUMERATED
        elif config.pi_from is not None or config.pi_csv is not None:
            kind = DESIGN_POISSON
        elif config.budget is not None:
            kind = DESIGN_WATERFILL
        else:
            raise ValidationError(
                "no design given; use --design or a design, pi or budget input"
            )

    if config.of is not None and config.of != bounds.size:
        raise DimensionMismatch(config.of, bounds.size, what="bounds file")

    if kind == DESIGN_SRSWOR:
        # SRSWOR(N, k): --size is N and --sample-size is k
        if config.size is not None and config.size != bounds.size:
            raise DimensionMismatch(config.size, bounds.size, what="bounds file")
        return designs.SRSWORDesign(bounds.size, config.sample_size)
    if kind == DESIGN_ENUMERATED:
        if config.design_file is None:
            raise ValidationError("--design enumerated needs --design-file")
        return adapter.read_design_json(config.design_file, bounds.size)
    if kind == DESIGN_WATERFILL:
        if config.budget is None:
            raise ValidationError("--design waterfill needs --budget")
        solution = allocator.solve_waterfill(bounds.radii, config.budget, bounds.unit_ids)
        pi = solution.pi_star
        return designs.PoissonDesign(pi)
    if kind == DESIGN_POISSON:
        pi = _inclusion_probabilities(config, bounds)
        if pi is None:
            raise ValidationError("--design poisson needs --pi, --pi-from or --budget")
        return designs.PoissonDesign(pi)
    raise ValidationError("unknown design kind {0!r}".format(kind))


def _run_design(config, population, warnings):
    bounds = population.bounds
    popmodel.require_nondegenerate(bounds)
    solution = allocator.solve_waterfill(bounds.radii, config.budget, bounds.unit_ids)
    capped = [bounds.unit_ids[i] for i in solution.capped]
    units = [
        {
            "id": unit_id,
            "radius": float(radius),
            "pi_star": float(p),
            "capped": p >= 1.0,
        }
        for unit_id, radius, p in zip(bounds.unit_ids, bounds.radii, solution.pi_star)
    ]
    results = population.summary()
    results.update(
        pi_star=solution.pi_star,
        unit_ids=list(bounds.unit_ids),
        c=solution.c,
        v_n=solution.v_n,
        capped=capped,
        expected_size=solution.expected_size(),
        allocation_gain=allocator.allocation_gain(
            bounds.radii, config.budget, bounds.unit_ids
        ),
        units=units,
    )
    # "inf" and 0.0 for a census
    results["lambda"] = solution.lambda_
    return results


def _run_estimate(config, population, warnings):
    bounds = population.bounds
    pi = _inclusion_probabilities(config, bounds)
    if pi is None:
        raise ValidationError("estimate needs --pi-from, --pi or --budget")

    observed = population.observed()
    if config.sample_file is not None:
        full_indices = adapter.read_sample_file(config.sample_file, population.file.bounds)
        indices = population.reindex(full_indices)
    elif population.file.sampled is not None:
        indices = population.reindex(population.file.sampled)
    else:
        indices = sorted(observed)
    sample = designs.Sample(
        indices, dict((i, observed[i]) for i in indices if i in observed)
    )

    if config.estimator == estimators.KIND_PLAIN_HT:
        estimator = estimators.PlainHT(pi)
    else:
        estimator = estimators.MidpointHT(bounds, pi)
    result = estimators.estimate_report(
        estimator, sample, bounds=bounds, known_total=population.known_total
    )
    warnings.extend(result.pop("warnings"))
    result.update(population.summary())
    return dict(
        result,
        estimator=estimator.kind,
        sample_ids=[bounds.unit_ids[i] for i in sample.indices],
        sample_size=len(sample),
    )


def _run_audit(config, population, warnings):
    bounds = population.bounds
    design = build_design(config, bounds)
    audit = designs.design_audit(design)
    verdict = oracle.sharpness_audit(
        design,
        bounds,
        tol=config.tolerance,
        delta_tol=config.delta_tolerance,
        workers=config.threads,
    )
    results = population.summary()
    results.update(audit)
    results.update(verdict.as_dict())
    return results


def _run_oracle(config, population, warnings):
    bounds = population.bounds
    design = build_design(config, bounds)
    suite = oracle.run_oracle_suite(
        design,
        bounds,
        seed=config.seed,
        center_count=config.center_count,
        workers=config.threads,
    )
    for check in ("equivalence_holds", "lower_bound_holds", "bayes_identity_holds"):
        if not suite[check]:
            warnings.append("oracle check {0} failed".format(check))
    return dict(population.summary(), kind=design.kind, **suite)


def _outcome_vectors(config, population):
    bounds = population.bounds
    if config.y_file is not None:
        return adapter.read_outcomes_csv(config.y_file, bounds)
    observed = population.observed()
    if len(observed) == bounds.size:
        return [np.array([observed[i] for i in range(bounds.size)])]
    if bounds.size <= MAX_ALL_VERTEX_UNITS:
        return mc.all_vertices(bounds)
    return mc.random_vertices(bounds, RANDOM_VERTEX_COUNT, config.seed)


def _run_simulate(config, population, warnings):
    bounds = population.bounds
    popmodel.require_nondegenerate(bounds)
    y_list = _outcome_vectors(config, population)
    comparison = mc.compare_strategies(
        bounds,
        config.budget,
        y_list,
        config.reps,
        config.seed,
        workers=config.threads,
        strategies=config.strategies or None,
    )
    rounding = comparison["rounding"]
    if rounding["rounded"] and mc.STRATEGY_SRSWOR in (
        config.strategies or mc.STRATEGIES
    ):
        warnings.append(
            "SRSWOR baseline rounds budget {0!r} to sample size {1}".format(
                rounding["budget"], rounding["srswor_size"]
            )
        )
    return dict(population.summary(), y_count=len(y_list), **comparison)


def _run_validate(config, population, warnings):
    return dict(population.summary(), population_size=population.bounds.size)


_RUNNERS = {
    CMD_DESIGN: _run_design,
    CMD_ESTIMATE: _run_estimate,
    CMD_AUDIT: _run_audit,
    CMD_ORACLE: _run_oracle,
    CMD_SIMULATE: _run_simulate,
    CMD_VALIDATE: _run_validate,
}


def _digest(config):
    existing = dict(
        (role, path)
        for role, path in config.input_paths().items()
        if path is not None and os.path.isfile(path)
    )
    return digest_inputs(existing)


def run(config):
    """Execute one subcommand.

    Args:
        config (RunConfig): Resolved run inputs

    Returns:
        tuple[int, dict]: Exit code (0 success, 1 validation error,
            2 internal error) and the report
    """
    report = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": config.subcommand,
        "inputs_digest": _digest(config),
        "results": {},
        "warnings": [],
    }

    diagnostics = validate_inputs(config)
    errors = [d for d in diagnostics if d.level == LEVEL_ERROR]
    report["warnings"].extend(d.message for d in diagnostics if d.level != LEVEL_ERROR)
    if errors or config.subcommand == CMD_VALIDATE:
        report["results"]["diagnostics"] = [d.as_dict() for d in diagnostics]
    if errors:
        for diagnostic in errors:
            logger.error(diagnostic.message)
        return EXIT_VALIDATION, report

    try:
        population = _Population(config)
        results = _RUNNERS[config.subcommand](config, population, report["warnings"])
    except ValidationError as exc:
        logger.error(str(exc))
        report["results"]["error"] = _error_report_entry(exc)
        return EXIT_VALIDATION, report
    except Exception as exc:
        logger.exception("Internal error running %s", config.subcommand)
        report["results"]["error"] = {"code": "InternalError", "message": str(exc)}
        return EXIT_INTERNAL, report

    report["results"].update(results)
    return EXIT_OK, report


def configure_logging(verbosity=0):
    """Configure root logging once, to stderr.

    ``-v`` selects INFO and ``-vv`` DEBUG; otherwise the level comes from
    ``MINIMAX_SAMPLER_LOG_LEVEL`` (default WARNING).
    """
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        name = os.getenv(ENV_LOG_LEVEL, "WARNING").upper()
        level = getattr(logging, name, None)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _emit(ctx, config):
    code, report = run(config)
    try:
        _, text = adapter.write_report(config.output, report, config.fmt)
    except ValidationError as exc:
        logger.error(str(exc))
        ctx.exit(EXIT_VALIDATION)
    if config.output in (None, "-"):
        click.echo(text, nl=False)
    ctx.exit(code)


def _common_options(func):
    options = [
        click.option(
            "--bounds",
            "bounds",
            type=click.Path(dir_okay=False),
            required=True,
            help="Bounds CSV with columns id,a,b and optional y, sampled.",
        ),
        click.option(
            "--strip-degenerate",
            is_flag=True,
            help="Treat zero-radius units as known and remove them.",
        ),
        click.option(
            "--format",
            "fmt",
            type=click.Choice(["json", "csv"]),
            default="json",
            show_default=True,
        ),
        click.option(
            "--output",
            "-o",
            type=click.Path(dir_okay=False),
            default=None,
            help="Report path; stdout when omitted.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _design_options(func):
    options = [
        click.option("--design", type=click.Choice(DESIGN_KINDS), default=None),
        click.option(
            "--size", type=int, default=None, help="SRSWOR population size N."
        ),
        click.option(
            "--sample-size",
            "-k",
            type=int,
            default=1,
            show_default=True,
            help="SRSWOR fixed sample size k.",
        ),
        click.option("--of", type=int, default=None, help="Expected population size N."),
        click.option(
            "--design-file",
            type=click.Path(dir_okay=False),
            default=None,
            help="Enumerated design JSON with 1-based subsets.",
        ),
        click.option("--budget", type=float, default=None),
        click.option("--pi", "pi_csv", type=click.Path(dir_okay=False), default=None),
        click.option("--pi-from", type=click.Path(dir_okay=False), default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(ctx, subcommand, **kwargs):
    kwargs["threads"] = ctx.obj.get("threads")
    return RunConfig(subcommand=subcommand, **kwargs)


@click.group()
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG.")
@click.option(
    "--threads",
    type=int,
    default=None,
    help="Worker threads, capped by MINIMAX_SAMPLER_THREADS.",
)
@click.pass_context
def main(ctx, verbose, threads):
    """Minimax sampling designs and estimators for bounded populations."""
    configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["threads"] = get_worker_count(threads) if threads is not None else None


@main.command(CMD_DESIGN)
@_common_options
@click.option("--budget", type=float, required=True, help="Expected sample size n.")
@click.pass_context
def design_command(ctx, **kwargs):
    """Compute minimax inclusion probabilities for a budget."""
    _emit(ctx, _config(ctx, CMD_DESIGN, **kwargs))


@main.command(CMD_ESTIMATE)
@_common_options
@click.option("--pi-from", type=click.Path(dir_okay=False), default=None)
@click.option("--pi", "pi_csv", type=click.Path(dir_okay=False), default=None)
@click.option("--budget", type=float, default=None)
@click.option("--sample", "sample_file", type=click.Path(dir_okay=False), default=None)
@click.option(
    "--estimator",
    type=click.Choice([estimators.KIND_MIDPOINT_HT, estimators.KIND_PLAIN_HT]),
    default=estimators.KIND_MIDPOINT_HT,
    show_default=True,
)
@click.pass_context
def estimate_command(ctx, **kwargs):
    """Estimate the population total from an observed sample."""
    _emit(ctx, _config(ctx, CMD_ESTIMATE, **kwargs))


@main.command(CMD_AUDIT)
@_common_options
@_design_options
@click.option("--tolerance", type=float, default=None)
@click.option("--delta-tolerance", type=float, default=1e-9, show_default=True)
@click.pass_context
def audit_command(ctx, **kwargs):
    """Audit a design's inclusion structure and attainment of D_pi."""
    _emit(ctx, _config(ctx, CMD_AUDIT, **kwargs))


@main.command(CMD_ORACLE)
@_common_options
@_design_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--centers", "center_count", type=int, default=10, show_default=True)
@click.pass_context
def oracle_command(ctx, **kwargs):
    """Run the exact certification suite on a small population."""
    _emit(ctx, _config(ctx, CMD_ORACLE, **kwargs))


@main.command(CMD_SIMULATE)
@_common_options
@click.option("--budget", type=float, required=True)
@click.option("--reps", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--strategy",
    "strategies",
    type=click.Choice(mc.STRATEGIES),
    multiple=True,
    help="Strategy to simulate; repeat for several. Default: all.",
)
@click.option("--y-file", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def simulate_command(ctx, **kwargs):
    """Compare strategies by Monte-Carlo simulation."""
    _emit(ctx, _config(ctx, CMD_SIMULATE, **kwargs))


@main.command(CMD_VALIDATE)
@_common_options
@click.option("--budget", type=float, default=None)
@click.pass_context
def validate_command(ctx, **kwargs):
    """Check input files without computing anything."""
    _emit(ctx, _config(ctx, CMD_VALIDATE, **kwargs))
