"""CSV and JSON readers and writers.

Every CSV starts with a comment line ``# schema: <name>`` optionally followed
by ``key=value`` metadata, then a header row. Floats are written with
``repr`` so files round-trip exactly and are byte-identical across runs.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .estimators import EstimateTable
from .process import Trajectory

TRAJECTORY_SCHEMA = "switchkit/trajectory/v1"
ESTIMATE_SCHEMA = "switchkit/estimate/v1"
TABLE_SCHEMA = "switchkit/table/v1"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _comment(schema: str, meta: dict) -> str:
    extra = "".join(f" {k}={_fmt(v) if not isinstance(v, str) else v}" for k, v in meta.items())
    return f"# schema: {schema}{extra}\n"


def _parse_comment(line: str, schema: str) -> dict:
    if not line.startswith("# schema:"):
        raise ParameterError(f"missing schema comment line, expected '# schema: {schema}'")
    parts = line[len("# schema:"):].split()
    if not parts or parts[0] != schema:
        raise ParameterError(f"schema {parts[0] if parts else ''!r} does not match {schema!r}")
    meta = {}
    for item in parts[1:]:
        key, _, value = item.partition("=")
        meta[key] = value
    return meta


def _open_text(target):
    if hasattr(target, "read"):
        return target.read()
    return Path(target).read_text()


def _emit(text: str, target):
    if target is None:
        return text
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    return text


def write_table(columns: dict, target=None, schema: str = TABLE_SCHEMA, meta=None) -> str:
    """Write equal-length columns as CSV; returns the text."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    buf = io.StringIO()
    buf.write(_comment(schema, meta or {}))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([_fmt(v) for v in row])
    return _emit(buf.getvalue(), target)


def read_table(source, schema: str = TABLE_SCHEMA):
    """Inverse of :func:`write_table`: ``(columns, meta)``."""
    lines = _open_text(source).splitlines()
    meta = _parse_comment(lines[0], schema)
    rows = list(csv.reader(lines[1:]))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}, meta


def write_trajectory(traj: Trajectory, target=None) -> str:
    """Header ``initial_sign,t_start`` with its values, then ``epoch`` rows."""
    buf = io.StringIO()
    buf.write(_comment(TRAJECTORY_SCHEMA, {"horizon": traj.horizon}))
    buf.write("initial_sign,t_start\n")
    buf.write(f"{traj.initial_sign},{_fmt(traj.t_start)}\n")
    buf.write("epoch\n")
    for e in traj.epochs:
        buf.write(_fmt(e) + "\n")
    return _emit(buf.getvalue(), target)


def read_trajectory(source) -> Trajectory:
    lines = _open_text(source).splitlines()
    meta = _parse_comment(lines[0], TRAJECTORY_SCHEMA)
    if lines[1].strip() != "initial_sign,t_start" or lines[3].strip() != "epoch":
        raise ParameterError("malformed trajectory file")
    sign, t_start = lines[2].split(",")
    epochs = np.array([float(x) for x in lines[4:] if x.strip()])
    return Trajectory(int(sign), epochs, float(t_start), float(meta["horizon"]))


def write_estimate(table: EstimateTable, target=None) -> str:
    """Columns ``t, mean, se, n_paths``; the kind goes into the schema line."""
    return write_table(
        {"t": table.grid, "mean": table.mean, "se": table.se, "n_paths": np.full(table.grid.size, table.n_paths)},
        target,
        schema=ESTIMATE_SCHEMA,
        meta={"kind": table.kind},
    )


def read_estimate(source) -> EstimateTable:
    cols, meta = read_table(source, ESTIMATE_SCHEMA)
    for name in ("t", "mean", "se", "n_paths"):
        if name not in cols:
            raise ParameterError(f"estimate file lacks column {name!r}")
    return EstimateTable(cols["t"], cols["mean"], cols["se"], int(cols["n_paths"][0]), meta.get("kind", "E"))


def dump_json(obj, target=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    return _emit(text, target)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
