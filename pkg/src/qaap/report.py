"""Deterministic JSON/CSV rendering of reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .classify import ClassReport


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _clean(x.item())
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def dumps(obj) -> str:
    """Sorted keys, fixed indentation, no timestamps: identical input gives identical bytes."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def report_render(reports: Iterable, meta: dict | None = None) -> dict:
    """Summary of ClassReports and/or acceptance CriterionResults.

    Class reports are counted by verdict; criteria contribute per-claim
    pass/fail entries.
    """
    counts = {"supported": 0, "falsified": 0, "inconclusive": 0}
    claims = []
    for r in reports:
        if isinstance(r, ClassReport):
            counts[r.verdict] += 1
            claims.append({"kind": "class", "class": r.cls, "verdict": r.verdict,
                           "epsilon": r.epsilon, "resolution": r.resolution,
                           "witnesses": len(r.witnesses)})
        else:
            d = r.to_dict()
            claims.append({"kind": "criterion", **d})
    n_crit = sum(1 for c in claims if c["kind"] == "criterion")
    n_pass = sum(1 for c in claims if c["kind"] == "criterion" and c["passed"])
    return _clean({"meta": dict(meta or {}), "counts": counts, "n_claims": len(claims),
                   "criteria_passed": n_pass, "criteria_total": n_crit, "claims": claims})


def write_curve_csv(report: ClassReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "M", "residual"])
        for tau, M, r in report.curve_rows():
            w.writerow([repr(tau), repr(M), repr(r)])


def write_trajectory_csv(times, values, path: str | Path, prefix: str = "v") -> None:
    values = np.asarray(values, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{prefix}{j}" for j in range(values.shape[1])])
        for t, row in zip(times, values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
