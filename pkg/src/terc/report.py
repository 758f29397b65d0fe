"""Analysis reports: construction, serialisation and rendering.

A report is a plain JSON document (schema ``terc-report/1``) holding the
per-variable Phi statistics, the null-model bound, significance flags, the
selected subset with its decision log, optional per-quartile tables and an
optional permutation-importance comparison, plus provenance.  The renderers
turn it into CSV, DOT or long-format plot data.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from pathlib import Path

import numpy as np

from terc import __version__, _accel
from terc.estimators import EstimatorDiverged
from terc.selection import PhiEvaluator, run_selection, to_dot

SCHEMA = "terc-report/1"
CSV_FIELDS = ("variable", "phi_mean", "phi_std", "lower", "upper", "null_bound", "significant")
PLOT_FIELDS = ("quartile",) + CSV_FIELDS
FORMATS = ("csv", "json", "dot", "plotdata")


class AnalysisFailure(RuntimeError):
    """Raised after writing a report in which some estimate failed."""


def file_digest(path) -> str:
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(config_hash, seeds):
    return {
        "config_hash": config_hash,
        "seeds": seeds,
        "versions": {
            "terc": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": _accel.backend(),
        },
    }


def phi_table(ev: PhiEvaluator):
    """Full-context Phi of every variable; failures are recorded, not raised."""
    rows, failures = [], []
    full = ev.variables
    null_bound = ev.null.bound
    for v in full:
        try:
            est = ev.phi([v], full)
        except EstimatorDiverged as err:
            failures.append({"variable": v, "error": str(err)})
            rows.append({"variable": v, "failed": True, "error": str(err), "null_bound": null_bound})
            continue
        rows.append({
            "variable": v,
            "phi_mean": est.mean,
            "phi_std": est.std,
            "lower": est.lower,
            "upper": est.upper,
            "null_bound": null_bound,
            "significant": bool(ev.positive(est)),
            "runs": [float(x) for x in est.values],
        })
    return rows, failures


def analyze_table(table, settings, seed=0, quartile_tables=None):
    """Phi table, null model, selection, optional quartiles and baseline for one table."""
    ev = PhiEvaluator(
        table, settings["estimator"], settings["tolerance"], settings["mine"], settings["runs"], seed,
    )
    out = {
        "estimator": settings["estimator"],
        "algorithm": settings["algorithm"],
        "tolerance": {"mode": ev.tol.mode, "epsilon": ev.tol.epsilon},
        "rows": table.n,
    }
    try:
        null = ev.null
    except EstimatorDiverged as err:
        out.update(variables=[], null=None, null_bound=None, selection=None,
                   failures=[{"variable": "null", "error": str(err)}])
        return out
    rows, failures = phi_table(ev)
    out["variables"] = rows
    out["null"] = null.to_dict()
    out["null_bound"] = null.bound
    out["significant"] = [r["variable"] for r in rows if r.get("significant")]
    if failures:
        out["selection"] = None
    else:
        try:
            res = run_selection(settings["algorithm"], ev)
            out["selection"] = {"selected": res.selected, "decisions": res.decisions}
        except EstimatorDiverged as err:
            failures.append({"variable": "selection", "error": str(err)})
            out["selection"] = None
    if quartile_tables is not None:
        out["quartiles"] = []
        for q, qt in enumerate(quartile_tables, start=1):
            qev = PhiEvaluator(
                qt, settings["estimator"], settings["tolerance"], settings["mine"], settings["runs"], seed,
            )
            qrows, qfail = phi_table(qev)
            failures.extend({**f, "quartile": q} for f in qfail)
            out["quartiles"].append({"quartile": q, "rows": qt.n, "null_bound": qev.null.bound,
                                     "variables": qrows})
    if settings.get("baseline") == "pi":
        from terc.baselines import permutation_importance, pi_significance

        pi = permutation_importance(table, runs=settings["pi_runs"], alpha=settings["pi_alpha"], seed=seed)
        pi_significance(table, pi, reps=settings["runs"], seed=seed)
        out["baseline"] = pi.to_dict()
    out["failures"] = failures
    return out


def make_report(analysis: dict, source: dict, prov: dict) -> dict:
    return {"schema": SCHEMA, "input": source, **analysis, "provenance": prov}


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=1, allow_nan=False) + "\n"


def load_report(path) -> dict:
    path = Path(path)
    if path.suffix == ".csv":
        return report_from_csv(path.read_text())
    rep = json.loads(path.read_text())
    if rep.get("schema") != SCHEMA:
        raise ValueError(f"{path}: not a {SCHEMA} document")
    return rep


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def _write_rows(fields, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def to_csv(report) -> str:
    return _write_rows(CSV_FIELDS, report["variables"])


def report_from_csv(text) -> dict:
    """Inverse of :func:`to_csv` for the variable table (numbers are exact)."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {"variable": rec["variable"]}
        for f in CSV_FIELDS[1:]:
            v = rec.get(f, "")
            if f == "significant":
                row[f] = v == "true"
            else:
                row[f] = float(v) if v != "" else None
        rows.append(row)
    bounds = {r["null_bound"] for r in rows}
    return {
        "schema": SCHEMA,
        "variables": rows,
        "null_bound": bounds.pop() if len(bounds) == 1 else None,
        "significant": [r["variable"] for r in rows if r["significant"]],
    }


def to_plotdata(report) -> str:
    quarts = report.get("quartiles")
    if not quarts:
        raise ValueError("report has no quartile analysis; rerun analyze with --quartiles")
    rows = []
    for q in quarts:
        for r in q["variables"]:
            rows.append({"quartile": q["quartile"], **r})
    return _write_rows(PLOT_FIELDS, rows)


def render(report, fmt) -> str:
    if fmt == "csv":
        return to_csv(report)
    if fmt == "json":
        return dumps(report)
    if fmt == "dot":
        return to_dot(report.get("significant", []))
    if fmt == "plotdata":
        return to_plotdata(report)
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
