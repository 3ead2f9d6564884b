# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Reading and writing of input files and reports.

Bounds files are CSV with header ``id,a,b`` and optional ``y`` and
``sampled`` columns. Lines whose first character is ``#`` are comments.
Unit indices written to files are 1-based.
"""

import csv
import io
import json
import logging
import os
from collections import namedtuple

import numpy as np

from .designs import EnumeratedDesign
from .errors import InputFormatError, ValidationError
from .hooks import run_post_report_hook
from .popmodel import load_bounds, serialize_bounds
from .util import dumps_report, to_jsonable


logger = logging.getLogger(__name__)

REQUIRED_BOUNDS_COLUMNS = ("id", "a", "b")
TRUE_VALUES = ("1", "true", "yes", "y")
FALSE_VALUES = ("", "0", "false", "no", "n")

# Result keys rendered as CSV tables, in order of preference
TABLE_KEYS = ("rows", "units")

# Contents of a bounds CSV file
BoundsFile = namedtuple("BoundsFile", ["bounds", "observed", "sampled", "rows"])


def _read_rows(path):
    """Yield ``(line_number, row)`` pairs of a CSV file, skipping comments
    and blank lines.
    """
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputFormatError("cannot read file: {0}".format(exc), path=path)

    numbered = [
        (number, line)
        for number, line in enumerate(lines, start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    reader = csv.reader([line for _, line in numbered])
    for (number, _), row in zip(numbered, reader):
        yield number, [cell.strip() for cell in row]


def _read_table(path, required):
    rows = _read_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise InputFormatError("file has no header row", path=path)
    header = [name.lower() for name in header]
    missing = [name for name in required if name not in header]
    if missing:
        raise InputFormatError(
            "missing required column(s) {0}".format(", ".join(missing)),
            path=path,
            line=1,
        )
    return header, rows


def _parse_float(text, path, line, column):
    try:
        return float(text)
    except ValueError:
        raise InputFormatError(
            "column {0!r}: {1!r} is not a number".format(column, text),
            path=path,
            line=line,
        )


def _parse_flag(text, path, line):
    lowered = text.lower()
    if lowered in TRUE_VALUES:
        return True
    if lowered in FALSE_VALUES:
        return False
    raise InputFormatError(
        "column 'sampled': {0!r} is not a boolean".format(text), path=path, line=line
    )


def read_bounds_rows(path):
    """Parse a bounds CSV without validating the intervals.

    Returns:
        list[dict]: Per data row ``line``, ``id``, ``a``, ``b``, ``y``
            (float or None) and ``sampled`` (bool or None)
    """
    header, rows = _read_table(path, REQUIRED_BOUNDS_COLUMNS)
    position = dict((name, header.index(name)) for name in header)

    records = []
    for line, row in rows:
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        record = {
            "line": line,
            "id": row[position["id"]],
            "a": _parse_float(row[position["a"]], path, line, "a"),
            "b": _parse_float(row[position["b"]], path, line, "b"),
            "y": None,
            "sampled": None,
        }
        if not record["id"]:
            raise InputFormatError("empty unit id", path=path, line=line)
        if "y" in position and row[position["y"]]:
            record["y"] = _parse_float(row[position["y"]], path, line, "y")
        if "sampled" in position:
            record["sampled"] = _parse_flag(row[position["sampled"]], path, line)
        records.append(record)
    return records


def read_bounds_csv(path):
    """Read population bounds and any observations from a CSV file.

    Args:
        path (str): Path to a bounds CSV

    Returns:
        BoundsFile: Bounds, observed values by 0-based index, sampled
            indices from the ``sampled`` column (None without the
            column) and the raw rows.

    Raises:
        InputFormatError: If the file cannot be parsed
        ValidationError: If the bounds are invalid
    """
    records = read_bounds_rows(path)
    try:
        bounds = load_bounds((r["id"], r["a"], r["b"]) for r in records)
    except ValidationError as exc:
        # Attach the file location of the offending row
        for record in records:
            if exc.unit_id is not None and record["id"] == str(exc.unit_id):
                exc.args = (
                    "{0}:{1}: {2}".format(path, record["line"], exc.args[0]),
                )
                break
        raise

    observed = dict(
        (index, record["y"])
        for index, record in enumerate(records)
        if record["y"] is not None
    )
    sampled = None
    if records and records[0]["sampled"] is not None:
        sampled = [index for index, record in enumerate(records) if record["sampled"]]
    logger.debug("Read %d units from %s", bounds.size, path)
    return BoundsFile(bounds, observed, sampled, records)


def write_bounds_csv(path, bounds, y=None, dry_run=False):
    """Write bounds, and optionally one outcome vector, as a bounds CSV.

    Args:
        path (str): Destination path
        bounds (popmodel.PopulationBounds): Bounds to write
        y (list[float], optional): Values for the ``y`` column
        dry_run (bool, optional): Set to True to build the text without
            writing it.

    Returns:
        str: CSV text
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["id", "a", "b"] + (["y"] if y is not None else [])
    writer.writerow(header)
    for index, (unit_id, a, b) in enumerate(serialize_bounds(bounds)):
        row = [unit_id, repr(a), repr(b)]
        if y is not None:
            row.append(repr(float(y[index])))
        writer.writerow(row)

    text = buffer.getvalue()
    if not dry_run:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(text)
    return text


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise InputFormatError("cannot read file: {0}".format(exc), path=path)
    except ValueError as exc:
        raise InputFormatError("invalid JSON: {0}".format(exc), path=path)


def read_design_json(path, n_units):
    """Read an enumerated design: a JSON array of
    ``{"subset": [1-based indices], "p": real}`` objects.

    Args:
        path (str): Path to the design file
        n_units (int): Population size N

    Returns:
        designs.EnumeratedDesign: Validated design
    """
    data = _load_json(path)
    if not isinstance(data, list):
        raise InputFormatError("design file must hold a JSON array", path=path)

    support = []
    for position, entry in enumerate(data):
        if not isinstance(entry, dict) or "subset" not in entry or "p" not in entry:
            raise InputFormatError(
                "entry {0} must have 'subset' and 'p'".format(position), path=path
            )
        try:
            subset = [int(i) - 1 for i in entry["subset"]]
            p = float(entry["p"])
        except (TypeError, ValueError):
            raise InputFormatError(
                "entry {0} has a malformed subset or probability".format(position),
                path=path,
            )
        support.append((subset, p))
    return EnumeratedDesign(n_units, support)


def write_design_json(path, design, dry_run=False):
    """Write an enumerated design in the format read by
    ``read_design_json``.

    Returns:
        str: JSON text
    """
    payload = [
        {"subset": [i + 1 for i in subset], "p": p}
        for subset, p in design.as_enumerated().subsets()
    ]
    text = json.dumps(payload, indent=2) + "\n"
    if not dry_run:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    return text


def _align_by_id(values_by_id, bounds, path, what):
    missing = [u for u in bounds.unit_ids if u not in values_by_id]
    if missing:
        raise InputFormatError(
            "no {0} for unit(s) {1}".format(what, ", ".join(missing)), path=path
        )
    extra = sorted(set(values_by_id) - set(bounds.unit_ids))
    if extra:
        logger.info("%s: ignoring %s for unit(s) %s", path, what, ", ".join(extra))
    return np.array([values_by_id[u] for u in bounds.unit_ids], dtype=float)


def read_pi_csv(path, bounds):
    """Read inclusion probabilities from a CSV with header ``id,pi``.

    Returns:
        numpy.ndarray: Probabilities in the bounds' unit order
    """
    _, rows = _read_table(path, ("id", "pi"))
    values = {}
    for line, row in rows:
        if len(row) < 2:
            raise InputFormatError("expected id,pi", path=path, line=line)
        values[row[0]] = _parse_float(row[1], path, line, "pi")
    return _align_by_id(values, bounds, path, "inclusion probability")


def read_pi_report(path, bounds):
    """Read ``pi_star`` from a report written by the ``design`` command.

    Returns:
        numpy.ndarray: Probabilities in the bounds' unit order
    """
    data = _load_json(path)
    try:
        results = data["results"]
        pi_star = results["pi_star"]
        unit_ids = results["unit_ids"]
    except (KeyError, TypeError):
        raise InputFormatError(
            "not a design report (missing results.pi_star)", path=path
        )
    if len(pi_star) != len(unit_ids):
        raise InputFormatError("pi_star and unit_ids differ in length", path=path)
    values = dict((str(u), float(p)) for u, p in zip(unit_ids, pi_star))
    return _align_by_id(values, bounds, path, "inclusion probability")


def read_sample_file(path, bounds):
    """Read sampled units, one per line, as unit ids or 1-based indices.

    A line matching a unit id names that unit; otherwise an integer line
    is a 1-based index.

    Returns:
        list[int]: Sorted 0-based indices
    """
    indices = set()
    for line, row in _read_rows(path):
        token = row[0] if row else ""
        if not token:
            continue
        if token in bounds.unit_ids:
            indices.add(bounds.unit_ids.index(token))
            continue
        try:
            position = int(token)
        except ValueError:
            raise InputFormatError(
                "unknown unit {0!r}".format(token), path=path, line=line
            )
        if position < 1 or position > bounds.size:
            raise InputFormatError(
                "unit index {0} outside 1..{1}".format(position, bounds.size),
                path=path,
                line=line,
            )
        indices.add(position - 1)
    return sorted(indices)


def read_outcomes_csv(path, bounds):
    """Read outcome vectors: header ``id`` followed by one column per
    vector, one row per unit.

    Returns:
        list[numpy.ndarray]: Outcome vectors in the bounds' unit order
    """
    header, rows = _read_table(path, ("id",))
    if len(header) < 2:
        raise InputFormatError("no outcome columns after 'id'", path=path, line=1)
    id_column = header.index("id")
    columns = [i for i in range(len(header)) if i != id_column]

    values = dict((header[i], {}) for i in columns)
    for line, row in rows:
        if len(row) != len(header):
            raise InputFormatError(
                "expected {0} columns, found {1}".format(len(header), len(row)),
                path=path,
                line=line,
            )
        for i in columns:
            values[header[i]][row[id_column]] = _parse_float(
                row[i], path, line, header[i]
            )
    return [
        _align_by_id(values[header[i]], bounds, path, "value of " + header[i])
        for i in columns
    ]


def _flatten(prefix, value, rows):
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten("{0}.{1}".format(prefix, key) if prefix else key, value[key], rows)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for position, item in enumerate(value):
            _flatten("{0}.{1}".format(prefix, position), item, rows)
    elif isinstance(value, list):
        rows.append((prefix, " ".join(repr(v) if isinstance(v, float) else str(v) for v in value)))
    else:
        rows.append((prefix, repr(value) if isinstance(value, float) else str(value)))


def format_report(report, fmt="json"):
    """Render a report as JSON or CSV text.

    CSV output writes the first result table found under
    ``TABLE_KEYS``, and ``key,value`` rows otherwise.

    Args:
        report (dict): Report
        fmt (str): ``"json"`` or ``"csv"``

    Returns:
        str: Rendered text
    """
    if fmt == "json":
        return dumps_report(report)
    if fmt != "csv":
        raise ValidationError("unknown output format {0!r}".format(fmt))

    payload = to_jsonable(report)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    results = payload.get("results")
    table = None
    if isinstance(results, dict):
        table = next((results[key] for key in TABLE_KEYS if results.get(key)), None)
    if table:
        columns = sorted(set().union(*(row.keys() for row in table)))
        writer.writerow(columns)
        for row in table:
            writer.writerow(
                [
                    repr(row.get(c)) if isinstance(row.get(c), float) else row.get(c, "")
                    for c in columns
                ]
            )
    else:
        rows = []
        _flatten("", payload, rows)
        writer.writerow(["key", "value"])
        writer.writerows(rows)
    return buffer.getvalue()


def write_report(path, report, fmt="json", dry_run=False):
    """Run the post-report hook, render the report and write it.

    Args:
        path (str, optional): Destination path; None or ``"-"`` skips
            writing and only returns the text.
        report (dict): Report
        fmt (str): ``"json"`` or ``"csv"``
        dry_run (bool, optional): Set to True to render without writing

    Returns:
        tuple[dict, str]: Final report and its rendered text
    """
    # Implementation-defined amendments, e.g. site metadata
    report = run_post_report_hook(report)
    text = format_report(report, fmt)
    if path not in (None, "-") and not dry_run:
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            raise InputFormatError("output directory does not exist", path=path)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(text)
        logger.info("Wrote %s report to %s", fmt, path)
    return report, text
