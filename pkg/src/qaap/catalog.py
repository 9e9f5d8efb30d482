"""Closed-form generators for the concrete functions used as test cases.

Each entry carries the class memberships asserted for it in the
literature as inert ``labels``; classifiers never read them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .signal import DomainError, DomainKind, Grid, NormTag, SampledSignal

ALPHA = math.pi
BETA = math.sqrt(2.0) * math.pi


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    generator: Callable[[np.ndarray], np.ndarray]
    domain: DomainKind
    labels: dict
    params: dict = field(default_factory=dict)
    bound: float = 1.0
    norm: NormTag = "sup"
    # window used by the acceptance battery when nothing else is given
    window: tuple[float, float] = (0.0, 400.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.generator(np.atleast_1d(t))
        return out[0] if t.ndim == 0 else out

    def render(self, t_start: float, t_end: float, step: float) -> SampledSignal:
        grid = Grid.from_range(t_start, t_end, step)
        domain = self.domain
        if domain == "half_line" and t_start < 0:
            domain = "full_line"
        vals = self.generator(grid.times)
        return SampledSignal(grid, vals, domain, self.norm,
                             {"name": self.name, **self.labels})


def _half_line(t: np.ndarray, name: str) -> None:
    if np.any(t < -1e-12):
        raise DomainError(f"{name} is defined for t >= 0 only")


def step(t):
    """0 for t <= -1, 1 for t >= 0, linear bridge on [-1, 0]."""
    return np.clip(np.asarray(t, dtype=float) + 1.0, 0.0, 1.0)


def sin_log(t):
    t = np.asarray(t, dtype=float)
    _half_line(t, "sin_log")
    return np.sin(np.log1p(t))


def c0_truncation_dim(t_end: float, tol: float = 1e-6) -> int:
    """Coordinates needed so the dropped tail of the c0 sequence stays below ``tol``."""
    return max(1, int(math.ceil(2.0 * t_end / math.sqrt(tol))))


def c0_sequence(t, n_dim: int):
    """Truncated c0-valued function, coordinates n = 1..n_dim."""
    t = np.asarray(t, dtype=float)
    _half_line(t, "c0_sequence")
    n = np.arange(1, n_dim + 1, dtype=float)[None, :]
    tt = t[:, None] ** 2
    return 4.0 * n**2 * tt / (tt + n**2) ** 2


def reciprocal_cos(t, alpha: float = ALPHA, beta: float = BETA):
    t = np.asarray(t, dtype=float)
    return np.cos(1.0 / (2.0 + np.cos(alpha * t) + np.cos(beta * t)))


def reciprocal_sin(t, alpha: float = ALPHA, beta: float = BETA):
    t = np.asarray(t, dtype=float)
    return np.sin(1.0 / (2.0 + np.cos(alpha * t) + np.cos(beta * t)))


def _spikes(t, centers, half_widths):
    """Sum of disjoint unit triangles; evaluated only near each centre."""
    out = np.zeros_like(t)
    for c, w in zip(centers, half_widths):
        lo = np.searchsorted(t, c - w)
        hi = np.searchsorted(t, c + w, side="right")
        seg = t[lo:hi]
        out[lo:hi] = np.maximum(out[lo:hi], 1.0 - np.abs(seg - c) / w)
    return out


def xie_zhang_ramp(t):
    """Zero on [0, 2], unit spikes at odd integers 2n+1 (n >= 1) of half-width 1/(n+1).

    Extended by zero to negative times.
    """
    t = np.asarray(t, dtype=float)
    order = np.argsort(t, kind="stable")
    ts = t[order]
    if ts.size == 0 or ts[-1] < 2.0:
        return np.zeros_like(t)
    n_max = int(math.ceil((ts[-1] - 1.0) / 2.0)) + 1
    n = np.arange(1, n_max + 1)
    vals = _spikes(ts, 2.0 * n + 1.0, 1.0 / (n + 1.0))
    out = np.empty_like(t)
    out[order] = vals
    return out


def sign_sin(t):
    t = np.asarray(t, dtype=float)
    _half_line(t, "sign_sin")
    s = np.sin(t)
    # zeros of sine at multiples of pi come out as round-off, not exact zeros
    return np.where(np.abs(s) < 1e-12, 0.0, np.sign(s))


def sap4_plateau(t):
    """1 on [4n+1/2, 4n+3/2] (n >= 1), ramps of width 1/(4n+1) on both sides, else 0."""
    t = np.asarray(t, dtype=float)
    _half_line(t, "sap4_plateau")
    out = np.zeros_like(t)
    if t.size == 0:
        return out
    n_max = int(math.ceil(np.max(t) / 4.0)) + 1
    for n in range(1, n_max + 1):
        a, b = 4 * n + 0.5, 4 * n + 1.5
        w = 1.0 / (4 * n + 1)
        m = (t > a - w) & (t < b + w)
        if not np.any(m):
            continue
        seg = t[m]
        ramp = np.clip(np.minimum((seg - (a - w)) / w, ((b + w) - seg) / w), 0.0, 1.0)
        out[m] = np.where((seg >= a) & (seg <= b), 1.0, ramp)
    return out


def plateau_times_sign(t):
    return sap4_plateau(t) * sign_sin(t)


def plateau_plus_sign(t):
    return sap4_plateau(t) + sign_sin(t)


# anchor points used by the counterexample scans --------------------------------

def odd_integer_anchors(t0: float, t1: float) -> np.ndarray:
    """Odd integers 2n+1 inside [t0, t1]."""
    lo = int(math.ceil((t0 - 1) / 2.0))
    hi = int(math.floor((t1 - 1) / 2.0))
    return 2.0 * np.arange(max(lo, 0), hi + 1) + 1.0


def plateau_anchors(t0: float, t1: float) -> np.ndarray:
    """Left plateau ends 4n+1/2 inside [t0, t1]."""
    lo = int(math.ceil((t0 - 0.5) / 4.0))
    hi = int(math.floor((t1 - 0.5) / 4.0))
    return 4.0 * np.arange(max(lo, 1), hi + 1) + 0.5


CATALOG: dict[str, CatalogEntry] = {
    "step": CatalogEntry(
        "step", step, "full_line",
        {"QAAP": True, "AAP": False, "equi_Weyl_ap": False, "AP": False},
        window=(-200.0, 200.0)),
    "sin_log": CatalogEntry(
        "sin_log", sin_log, "half_line",
        {"QAAP": True, "AAP": False},
        params={"derivative_bound": "1/(1+t)"}),
    "c0_sequence": CatalogEntry(
        "c0_sequence", lambda t: c0_sequence(t, c0_truncation_dim(float(np.max(t)) if np.size(t) else 1.0)),
        "half_line",
        {"bounded": True, "uniformly_continuous": True, "relatively_compact_range": False},
        params={"lipschitz": 8.0}, window=(0.0, 10.0)),
    "reciprocal_cos": CatalogEntry(
        "reciprocal_cos", reciprocal_cos, "full_line",
        {"Stepanov_p_AP": True, "AP": False, "QAAP": False, "AA": True},
        params={"alpha": ALPHA, "beta": BETA}, window=(0.0, 400.0)),
    "reciprocal_sin": CatalogEntry(
        "reciprocal_sin", reciprocal_sin, "full_line",
        {"Stepanov_p_AP": True, "AP": False, "QAAP": False, "AA": True},
        params={"alpha": ALPHA, "beta": BETA}, window=(0.0, 400.0)),
    "xie_zhang_ramp": CatalogEntry(
        "xie_zhang_ramp", xie_zhang_ramp, "half_line",
        {"SAP_2": True, "QAAP": True, "uniformly_continuous": False},
        params={"omega": 2.0}),
    "sign_sin": CatalogEntry(
        "sign_sin", sign_sin, "half_line",
        {"Stepanov_p_AP": True}),
    "sap4_plateau": CatalogEntry(
        "sap4_plateau", sap4_plateau, "half_line",
        {"SAP_4": True, "QAAP": True},
        params={"omega": 4.0}),
    "plateau_times_sign": CatalogEntry(
        "plateau_times_sign", plateau_times_sign, "half_line",
        {"SP_QAAP": False}),
    "plateau_plus_sign": CatalogEntry(
        "plateau_plus_sign", plateau_plus_sign, "half_line",
        {"SP_QAAP": False}, bound=2.0),
}


def get(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; known: {sorted(CATALOG)}") from None


def render(name: str, t_start: float | None = None, t_end: float | None = None,
           step_size: float = 0.01) -> SampledSignal:
    entry = get(name)
    w0, w1 = entry.window
    return entry.render(w0 if t_start is None else t_start,
                        w1 if t_end is None else t_end, step_size)


def render_c0(t_end: float, step_size: float, n_dim: int | None = None,
              tol: float = 1e-6) -> SampledSignal:
    """c0 entry on [0, t_end] with an explicit truncation dimension."""
    n_dim = c0_truncation_dim(t_end, tol) if n_dim is None else n_dim
    grid = Grid.from_range(0.0, t_end, step_size)
    entry = CATALOG["c0_sequence"]
    return SampledSignal(grid, c0_sequence(grid.times, n_dim), "half_line", "sup",
                         {"name": "c0_sequence", "truncation_dim": n_dim, **entry.labels})
