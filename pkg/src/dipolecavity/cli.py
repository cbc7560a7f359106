"""Command line front end: scenario sweeps, acceptance checks and plot data.

Usage::

    dipolecavity run config.json [-o results.csv]
    dipolecavity verify [--full]
    dipolecavity plot results.csv --x media.eps2 --y Gamma_P_over_Gamma0 -o curve.txt

Configs are JSON objects::

    {
      "scenario": "molecule-in-vacuum",
      "emitter": {"k0": 1.0, "alpha0": 1e-3},
      "geometry": {"R0": 0.05, "R1": 0.2},
      "media": {"eps1": 1.05},
      "sweep": [{"path": "media.eps1", "values": [1.01, 1.02]}],
      "numerics": {"method": "full-pipeline", "k_max_factor": 2000},
      "output": {"path": "results.csv", "format": "csv"}
    }

``emitter`` also accepts ``{"k0", "mu"}`` (SI dipole moment, ``k0`` in 1/m),
``geometry`` accepts the dimensionless ``kR0``/``kR1`` (products with ``k0``)
and a sweep entry may give ``start``/``stop``/``num`` instead of ``values``.
Sweeps over several paths form the Cartesian product, first path outermost.

Exit codes: 0 success, 1 at least one row failed, 2 configuration error.
The worker count comes from the ``DIPOLECAVITY_WORKERS`` environment variable
(default 1); rows are always written in input order.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime
import io
import itertools
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .correlations import CavityGeometry
from .emission import (
    DEFAULT_K_MAX_FACTOR,
    FULL_PIPELINE,
    PAPER_EXPANSION,
    EmitterSpec,
    bare_cavity_rate,
    molecule_in_medium_rate,
    molecule_in_vacuum_emission,
)
from .errors import ColumnNotFound, ConfigError, DipoleCavityError
from .propagators import MediumSpec

SCHEMA_VERSION = "dipolecavity-results/1"
SCHEMA_TAG = "# schema: "
TIMESTAMP_TAG = "# generated: "
WORKERS_ENV = "DIPOLECAVITY_WORKERS"

SCENARIOS = ("bare-cavity", "molecule-in-vacuum", "molecule-in-medium")
PARAMETERS = ("emitter.k0", "emitter.alpha0", "geometry.R0", "geometry.R1", "media.eps1",
              "media.eps2")
INPUT_COLUMNS = ("scenario",) + PARAMETERS + ("numerics.method", "numerics.k_max_factor")
OUTPUT_COLUMNS = ("k_res", "alpha0_prime", "Gamma_over_Gamma0", "Gamma_P_over_Gamma0",
                  "re_two_gamma_perp", "im_two_gamma_perp", "re_gamma_par", "im_gamma_par",
                  "re_gamma_P", "im_gamma_P", "re_gamma_NP", "im_gamma_NP", "iterations",
                  "max_quad_error", "warnings", "error")
COLUMNS = INPUT_COLUMNS + OUTPUT_COLUMNS
NUMERIC_COLUMNS = tuple(c for c in COLUMNS
                        if c not in ("scenario", "numerics.method", "warnings", "error"))

_TOP_KEYS = {"scenario", "emitter", "geometry", "media", "sweep", "numerics", "output"}
_SECTION_KEYS = {
    "emitter": {"k0", "alpha0", "mu"},
    "geometry": {"R0", "R1", "kR0", "kR1"},
    "media": {"eps1", "eps2"},
    "numerics": {"method", "k_max_factor"},
    "output": {"path", "format"},
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a real number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(key, f"must be finite, got {value!r}")
    return v


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected an object")
    for k in sec:
        if k not in _SECTION_KEYS[name]:
            raise ConfigError(f"{name}.{k}", "unknown key")
    return sec


def _sweep_values(entry, i: int) -> tuple:
    where = f"sweep[{i}]"
    if not isinstance(entry, dict):
        raise ConfigError(where, "expected an object with 'path' and 'values'")
    path = entry.get("path")
    if path not in PARAMETERS:
        raise ConfigError(f"{where}.path", f"unknown parameter {path!r}; expected one of "
                          f"{', '.join(PARAMETERS)}")
    if "values" in entry:
        vals = entry["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{where}.values", "expected a non-empty list")
        vals = [_number(v, f"{where}.values[{j}]") for j, v in enumerate(vals)]
    elif {"start", "stop", "num"} <= set(entry):
        num = entry["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError(f"{where}.num", "expected a positive integer")
        vals = np.linspace(_number(entry["start"], f"{where}.start"),
                           _number(entry["stop"], f"{where}.stop"), num).tolist()
    else:
        raise ConfigError(where, "needs 'values' or 'start'/'stop'/'num'")
    return path, vals


def _validate_point(point: dict) -> None:
    """Scenario-specific checks on one fully resolved parameter point."""
    scen = point["scenario"]
    for key in ("emitter.k0", "emitter.alpha0", "geometry.R0"):
        if not point[key] > 0:
            raise ConfigError(key, f"must be positive, got {point[key]!r}")
    if scen in ("molecule-in-vacuum", "molecule-in-medium"):
        if point["geometry.R1"] is None:
            raise ConfigError("geometry.R1", f"required for scenario {scen!r}")
        if point["geometry.R1"] < point["geometry.R0"]:
            raise ConfigError("geometry.R1", f"must be >= geometry.R0 "
                              f"({point['geometry.R1']!r} < {point['geometry.R0']!r})")
        if point["media.eps1"] is None:
            raise ConfigError("media.eps1", f"required for scenario {scen!r}")
    if scen in ("bare-cavity", "molecule-in-medium"):
        if point["media.eps2"] is None:
            raise ConfigError("media.eps2", f"required for scenario {scen!r}")
        if point["media.eps2"] < 1:
            raise ConfigError("media.eps2", f"must be >= 1, got {point['media.eps2']!r}")
    if point["media.eps1"] is not None and point["media.eps1"] <= 0:
        raise ConfigError("media.eps1", f"must be positive, got {point['media.eps1']!r}")


def load_config(source) -> dict:
    """Parse and validate a scenario config.

    Parameters
    ----------
    source : str, Path or dict
        Path to a JSON file, or an already parsed mapping.

    Returns
    -------
    dict
        ``{"points": [...], "output": {...}, "base_dir": Path}``; every point
        is a flat mapping over :data:`INPUT_COLUMNS`.

    Raises
    ------
    ConfigError
        Naming the dotted path of the offending key.
    """
    base_dir = Path(".")
    if isinstance(source, dict):
        cfg = copy.deepcopy(source)
    else:
        path = Path(source)
        base_dir = path.parent
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "expected a JSON object")
    for k in cfg:
        if k not in _TOP_KEYS:
            raise ConfigError(k, "unknown key")
    scen = cfg.get("scenario")
    if scen not in SCENARIOS:
        raise ConfigError("scenario", f"expected one of {', '.join(SCENARIOS)}, got {scen!r}")

    em = _section(cfg, "emitter")
    if "k0" not in em:
        raise ConfigError("emitter.k0", "required")
    k0 = _number(em["k0"], "emitter.k0")
    if k0 <= 0:
        raise ConfigError("emitter.k0", "must be positive")
    if "alpha0" in em and "mu" in em:
        raise ConfigError("emitter.mu", "give either alpha0 or mu, not both")
    if "mu" in em:
        mu = _number(em["mu"], "emitter.mu")
        if mu == 0:
            raise ConfigError("emitter.mu", "must be non-zero")
        alpha0 = EmitterSpec.from_dipole(mu, k0).alpha0
    elif "alpha0" in em:
        alpha0 = _number(em["alpha0"], "emitter.alpha0")
    else:
        raise ConfigError("emitter.alpha0", "required (or emitter.mu)")

    geo = _section(cfg, "geometry")
    radii = {}
    for name in ("R0", "R1"):
        if name in geo and "k" + name in geo:
            raise ConfigError(f"geometry.k{name}", f"give either {name} or k{name}, not both")
        if name in geo:
            radii[name] = _number(geo[name], f"geometry.{name}")
        elif "k" + name in geo:
            radii[name] = _number(geo["k" + name], f"geometry.k{name}") / k0
        else:
            radii[name] = None
    if radii["R0"] is None:
        raise ConfigError("geometry.R0", "required")

    med = _section(cfg, "media")
    eps = {n: (_number(med[n], f"media.{n}") if n in med else None) for n in ("eps1", "eps2")}

    num = _section(cfg, "numerics")
    method = num.get("method", FULL_PIPELINE)
    if method not in (FULL_PIPELINE, PAPER_EXPANSION):
        raise ConfigError("numerics.method", f"expected {FULL_PIPELINE!r} or {PAPER_EXPANSION!r}")
    if method == PAPER_EXPANSION and scen != "molecule-in-vacuum":
        raise ConfigError("numerics.method", "paper-expansion only applies to molecule-in-vacuum")
    kmf = _number(num.get("k_max_factor", DEFAULT_K_MAX_FACTOR), "numerics.k_max_factor")
    if kmf <= 0:
        raise ConfigError("numerics.k_max_factor", "must be positive")

    out = _section(cfg, "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format", f"expected 'csv' or 'json', got {fmt!r}")
    out_path = out.get("path", f"results.{fmt}")
    if not isinstance(out_path, str) or not out_path:
        raise ConfigError("output.path", "expected a non-empty string")

    base = {"scenario": scen, "emitter.k0": k0, "emitter.alpha0": alpha0,
            "geometry.R0": radii["R0"], "geometry.R1": radii["R1"],
            "media.eps1": eps["eps1"], "media.eps2": eps["eps2"],
            "numerics.method": method, "numerics.k_max_factor": kmf}

    sweep = cfg.get("sweep", [])
    if not isinstance(sweep, list):
        raise ConfigError("sweep", "expected a list")
    axes = [_sweep_values(entry, i) for i, entry in enumerate(sweep)]
    paths = [p for p, _ in axes]
    if len(set(paths)) != len(paths):
        raise ConfigError("sweep", "a parameter path appears twice")
    points = []
    for combo in itertools.product(*[v for _, v in axes]):
        pt = dict(base)
        pt.update(zip(paths, combo))
        _validate_point(pt)
        points.append(pt)
    return {"points": points, "output": {"path": out_path, "format": fmt}, "base_dir": base_dir}


def config_from_row(row: dict) -> dict:
    """Single-point config that reproduces a result row."""
    def val(c):
        v = row.get(c)
        if v in (None, ""):
            return None
        return float(v)

    cfg = {"scenario": row["scenario"],
           "emitter": {"k0": val("emitter.k0"), "alpha0": val("emitter.alpha0")},
           "geometry": {"R0": val("geometry.R0")},
           "media": {},
           "numerics": {"method": row["numerics.method"],
                        "k_max_factor": val("numerics.k_max_factor")}}
    if val("geometry.R1") is not None:
        cfg["geometry"]["R1"] = val("geometry.R1")
    for n in ("eps1", "eps2"):
        if val(f"media.{n}") is not None:
            cfg["media"][n] = val(f"media.{n}")
    return cfg


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate_point(point: dict) -> dict:
    """Compute one result row; computation errors are stored in the ``error`` column."""
    row = {c: point.get(c) for c in INPUT_COLUMNS}
    row.update({c: None for c in OUTPUT_COLUMNS})
    scen = point["scenario"]
    spec = EmitterSpec(point["emitter.k0"], point["emitter.alpha0"])
    geom_r1 = point["geometry.R1"] if scen != "bare-cavity" else None
    kmf = point["numerics.k_max_factor"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            geom = CavityGeometry(point["geometry.R0"], geom_r1)
            if scen == "bare-cavity":
                res = bare_cavity_rate(geom, point["media.eps2"], spec)
            elif scen == "molecule-in-vacuum":
                res = molecule_in_vacuum_emission(geom, point["media.eps1"], spec,
                                                  point["numerics.method"], kmf)
            else:
                media = MediumSpec(point["media.eps1"], point["media.eps2"])
                res = molecule_in_medium_rate(geom, media, spec, kmf)
        except (DipoleCavityError, ArithmeticError) as exc:
            res = None
            row["error"] = f"{type(exc).__name__}: {exc}"
    seen = []
    for w in caught:
        msg = f"{w.category.__name__}: {w.message}"
        if msg not in seen:
            seen.append(msg)
    row["warnings"] = " | ".join(seen)
    if res is None:
        return row
    row.update({"k_res": res.k_res, "alpha0_prime": res.alpha0_prime,
                "Gamma_over_Gamma0": res.Gamma_total_over_Gamma0,
                "Gamma_P_over_Gamma0": res.Gamma_P_over_Gamma0,
                "iterations": res.root_diagnostics.get("iterations", math.nan)})
    g = res.gamma
    if g is not None:
        for name, z in (("two_gamma_perp", g.two_gamma_perp), ("gamma_par", g.gamma_par),
                        ("gamma_P", g.gamma_P), ("gamma_NP", g.gamma_NP)):
            row[f"re_{name}"] = z.real
            row[f"im_{name}"] = z.imag
        errs = [g.diagnostics.get(k) for k in ("quad_err_perp", "quad_err_par")]
        errs = [e for e in errs if e is not None]
        row["max_quad_error"] = max(errs) if errs else 0.0
    else:
        for c in ("re_two_gamma_perp", "im_two_gamma_perp", "re_gamma_par", "im_gamma_par",
                  "re_gamma_P", "im_gamma_P", "re_gamma_NP", "im_gamma_NP", "max_quad_error"):
            row[c] = math.nan
    return row


def worker_count() -> int:
    """Worker processes from ``DIPOLECAVITY_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {raw!r}")
    return n


def evaluate_points(points, workers: Optional[int] = None) -> list:
    """Rows for ``points`` in input order, optionally across worker processes."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(points) <= 1:
        return [evaluate_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
        return list(pool.map(evaluate_point, points))


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    """Full-precision text: 17 significant digits for floats, empty for missing."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return f"{f:.16e}"


def write_results(rows, path, fmt: str = "csv", timestamp: Optional[str] = None) -> None:
    """Write rows with a schema tag and a timestamp line (the only varying line)."""
    timestamp = timestamp or datetime.datetime.now(datetime.timezone.utc).isoformat()
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"{SCHEMA_TAG}{SCHEMA_VERSION}\n")
        buf.write(f"{TIMESTAMP_TAG}{timestamp}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([format_value(r.get(c)) for c in COLUMNS])
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "json":
        body = [{c: (r.get(c) if not isinstance(r.get(c), float) or math.isfinite(r.get(c))
                     else format_value(r.get(c))) for c in COLUMNS} for r in rows]
        lines = ["{", f'"schema": {json.dumps(SCHEMA_VERSION)},',
                 f'"generated": {json.dumps(timestamp)},',
                 f'"rows": {json.dumps(body, indent=1)}', "}"]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ConfigError("output.format", f"expected 'csv' or 'json', got {fmt!r}")


def _parse_cell(column: str, text: str):
    if column not in NUMERIC_COLUMNS:
        return text
    if text == "":
        return None
    return float(text)


def read_results(path) -> list:
    """Rows of a CSV result file as dicts (numeric columns parsed to float)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    if not lines:
        return []
    reader = csv.DictReader(lines)
    return [{k: _parse_cell(k, v) for k, v in r.items()} for r in reader]


def strip_timestamp(text: str) -> str:
    """Result text without the timestamp line, for determinism comparisons."""
    return "\n".join(ln for ln in text.splitlines()
                     if not ln.startswith(TIMESTAMP_TAG) and not ln.startswith('"generated"'))


def run(config_path, output: Optional[str] = None, stream=None) -> int:
    """Evaluate a config and write its result file; returns the exit status."""
    stream = stream or sys.stdout
    t0 = time.perf_counter()
    cfg = load_config(config_path)
    out = Path(output) if output else cfg["base_dir"] / cfg["output"]["path"]
    rows = evaluate_points(cfg["points"])
    write_results(rows, out, cfg["output"]["format"])
    failed = sum(1 for r in rows if r["error"])
    n_warn = sum(len(r["warnings"].split(" | ")) for r in rows if r["warnings"])
    print(f"rows: {len(rows)}  failed: {failed}  warnings: {n_warn}  "
          f"wall time: {time.perf_counter() - t0:.2f} s  output: {out}", file=stream)
    for i, r in enumerate(rows):
        if r["error"]:
            print(f"  row {i}: {r['error']}", file=stream)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def emit_plot_data(results_path, x: str, y: str, output) -> int:
    """Write ``x y`` pairs sorted by ``x`` (stable); returns the number of rows written.

    Raises
    ------
    ColumnNotFound
        If ``x`` or ``y`` is not a column of the result file.
    """
    rows = read_results(results_path)
    if not rows:
        warnings.warn(f"{results_path} holds no result rows", UserWarning, stacklevel=2)
        Path(output).write_text("", encoding="utf-8")
        return 0
    for col in (x, y):
        if col not in rows[0]:
            raise ColumnNotFound(col)
    pairs = []
    for r in rows:
        xv, yv = r[x], r[y]
        if not isinstance(xv, float) or not isinstance(yv, float):
            continue
        pairs.append((xv, yv))
    pairs.sort(key=lambda p: p[0])
    text = "".join(f"{format_value(a)} {format_value(b)}\n" for a, b in pairs)
    Path(output).write_text(text, encoding="utf-8")
    return len(pairs)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dipolecavity",
                                description="Emission of a point dipole in a cavity or molecule.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evaluate a scenario config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="result file (overrides output.path)")
    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--full", action="store_true", help="include the coefficient fits")
    pl = sub.add_parser("plot", help="two-column plot data from a result file")
    pl.add_argument("results")
    pl.add_argument("--x", required=True)
    pl.add_argument("--y", required=True)
    pl.add_argument("-o", "--output", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.output)
        if args.command == "verify":
            from .verification import run_checks

            results = run_checks(full=args.full, stream=sys.stdout)
            return 0 if all(r.passed for r in results) else 1
        n = emit_plot_data(args.results, args.x, args.y, args.output)
        print(f"{n} points written to {args.output}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ColumnNotFound as exc:
        print(f"column not found: {exc.args[0]}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
