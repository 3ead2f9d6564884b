# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


logger = logging.getLogger(__name__)

# Report schema version written to every CLI report
SCHEMA_VERSION = "1.0"

# Absolute tolerance on risk values, scaled by max(1, D_pi)
DEFAULT_TOLERANCE = 1e-9

# Hard ceilings on exact enumeration. Environment overrides may only lower
# these.
MAX_UNITS_CEILING = 20
MAX_SUPPORT_CEILING = 2 ** 20

# Environment variables
ENV_THREADS = "MINIMAX_SAMPLER_THREADS"
ENV_MAX_UNITS = "MINIMAX_SAMPLER_MAX_UNITS"
ENV_MAX_SUPPORT = "MINIMAX_SAMPLER_MAX_SUPPORT"
ENV_LOG_LEVEL = "MINIMAX_SAMPLER_LOG_LEVEL"

# Upper bound on matrix cells materialized per enumeration chunk
CHUNK_CELLS = 2 ** 22


def _env_int(name, default, ceiling=None):
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        parsed = int(value)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r", name, value)
        return default
    if parsed < 1:
        logger.warning("Ignoring non-positive %s=%r", name, value)
        return default
    if ceiling is not None and parsed > ceiling:
        logger.warning("%s=%d exceeds ceiling %d", name, parsed, ceiling)
        return ceiling
    return parsed


def get_worker_count(requested=None):
    """Resolve the number of worker threads.

    Args:
        requested (int, optional): Explicit request, e.g. from a CLI
            flag. Still capped by ``MINIMAX_SAMPLER_THREADS``.

    Returns:
        int: Worker count, at least 1
    """
    cap = _env_int(ENV_THREADS, os.cpu_count() or 1)
    if requested is None:
        return cap
    return max(1, min(int(requested), cap))


def get_max_units():
    """Returns:
        int: Largest population size the vertex oracles will enumerate.
    """
    return _env_int(ENV_MAX_UNITS, MAX_UNITS_CEILING, MAX_UNITS_CEILING)


def get_max_support():
    """Returns:
        int: Largest enumerated design support accepted.
    """
    return _env_int(ENV_MAX_SUPPORT, MAX_SUPPORT_CEILING, MAX_SUPPORT_CEILING)


def risk_tolerance(scale=1.0, tol=DEFAULT_TOLERANCE):
    """Absolute tolerance for comparing risks of magnitude ``scale``.

    Args:
        scale (float): Reference magnitude, typically D_pi
        tol (float): Base absolute tolerance

    Returns:
        float: ``tol * max(1, |scale|)``
    """
    return tol * max(1.0, abs(scale))


def make_rng(seed, stream=0):
    """Build the counter-based generator for one ``(seed, stream)`` pair.

    Distinct streams of the same seed are statistically independent, and
    the sequence for a given pair is bit-reproducible across runs and
    platforms for a fixed numpy release.

    Args:
        seed (int): Non-negative root seed
        stream (int): Non-negative stream index

    Returns:
        numpy.random.Generator: Philox-backed generator
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


def sign_matrix(n_units, start=0, stop=None):
    """Build rows of the sign cube {-1,+1}^N in vertex-index order.

    Vertex ``v`` has ``eps_i = -1`` exactly when bit ``i`` of ``v`` is set,
    so row ``v`` is the Walsh character table column for ``v``.

    Args:
        n_units (int): Population size N
        start (int): First vertex index
        stop (int, optional): One past the last vertex index; defaults
            to ``2**N``

    Returns:
        numpy.ndarray: ``(stop - start, N)`` float array of signs
    """
    if stop is None:
        stop = 1 << n_units
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n_units, dtype=np.int64)[None, :]) & 1
    return 1.0 - 2.0 * bits


def chunk_ranges(total, chunk_size):
    """Split ``range(total)`` into consecutive ``(start, stop)`` pairs."""
    chunk_size = max(1, int(chunk_size))
    return [(i, min(i + chunk_size, total)) for i in range(0, total, chunk_size)]


def ordered_map(func, items, workers=None):
    """Apply ``func`` to every item, preserving input order.

    Results are always returned in input order, so reductions over them
    are identical between serial and threaded execution.

    Args:
        func (callable): Function of one argument
        items (list): Work items
        workers (int, optional): Worker threads; 1 runs serially

    Returns:
        list: ``[func(item) for item in items]``
    """
    workers = get_worker_count(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def to_jsonable(value):
    """Convert numpy containers and scalars to plain JSON types.

    Non-finite floats are encoded as the strings ``"inf"``, ``"-inf"``
    and ``"nan"``.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def dumps_report(payload):
    """Serialize a report deterministically.

    Keys are sorted and floats use Python's shortest round-trip repr, so
    identical inputs produce byte-identical output.

    Args:
        payload (dict): Report payload

    Returns:
        str: JSON text terminated by a newline
    """
    return (
        json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    )


def digest_inputs(paths_by_role):
    """Content hash over a set of input files.

    Args:
        paths_by_role (dict[str, str]): Role name (e.g. ``"bounds"``) to
            file path. Roles mapped to None are skipped.

    Returns:
        str: sha256 hex digest, stable across reruns of identical inputs
    """
    digest = hashlib.sha256()
    for role in sorted(paths_by_role):
        path = paths_by_role[role]
        if path is None:
            continue
        digest.update(role.encode("utf-8"))
        digest.update(b"\0")
        with open(path, "rb") as handle:
            digest.update(handle.read())
        digest.update(b"\0")
    return digest.hexdigest()
