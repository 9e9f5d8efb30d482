"""Uniform grids, sampled vector-valued signals and the pointwise algebra on them.

Every signal lives on a uniform grid and stores its node values as an
``(count, dim)`` float array.  Off-node evaluation is linear interpolation.
Sups and integrals elsewhere in the package are grid-level estimates.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

NormTag = Literal["sup", "euclidean"]
DomainKind = Literal["half_line", "full_line"]

# relative slack used when deciding whether a time sits on a grid node
NODE_RTOL = 1e-9


class DomainError(ValueError):
    """Raised when a time or window falls outside the sampled range."""


class GridMismatch(ValueError):
    """Raised when two signals that must share a grid do not."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    t_start: float
    step: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.count}")
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")

    @classmethod
    def from_range(cls, t_start: float, t_end: float, step: float) -> "Grid":
        count = int(round((t_end - t_start) / step)) + 1
        got = t_start + (count - 1) * step
        if abs(got - t_end) > NODE_RTOL * max(1.0, abs(t_end)) + 1e-9 * step:
            raise ValueError(f"[{t_start}, {t_end}] is not a multiple of step {step}")
        return cls(float(t_start), float(step), count)

    @property
    def t_end(self) -> float:
        return self.t_start + (self.count - 1) * self.step

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.step * np.arange(self.count)

    @property
    def span(self) -> float:
        return (self.count - 1) * self.step

    def steps_in(self, length: float) -> int:
        """Number of grid steps making up ``length``; it must be an exact multiple."""
        m = int(round(length / self.step))
        if m < 1 or abs(m * self.step - length) > 1e-7 * self.step:
            raise ValueError(f"length {length} is not a positive multiple of step {self.step}")
        return m

    def shift_steps(self, tau: float) -> int | None:
        """``tau / step`` if that is an integer (to node tolerance), else None."""
        k = round(tau / self.step)
        if abs(k * self.step - tau) <= 1e-7 * self.step:
            return int(k)
        return None

    def index_at_least(self, t: float) -> int:
        """First node index with time >= t (with node tolerance)."""
        x = (t - self.t_start) / self.step
        return max(0, int(math.ceil(x - 1e-7)))

    def index_at_most(self, t: float) -> int:
        """Last node index with time <= t (with node tolerance)."""
        x = (t - self.t_start) / self.step
        return min(self.count - 1, int(math.floor(x + 1e-7)))

    def sub(self, i0: int, i1: int) -> "Grid":
        """Sub-grid of nodes ``i0..i1`` inclusive."""
        return Grid(self.t_start + i0 * self.step, self.step, i1 - i0 + 1)


def node_norms(values: np.ndarray, norm: NormTag = "sup") -> np.ndarray:
    """Vector norm of each row of an ``(n, d)`` array."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.abs(values)
    if norm == "sup":
        return np.max(np.abs(values), axis=1)
    if norm == "euclidean":
        return np.sqrt(np.sum(values * values, axis=1))
    raise ValueError(f"unknown norm tag {norm!r}")


def vector_norm(v, norm: NormTag = "sup") -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return float(node_norms(v[None, :], norm)[0])


@dataclass(frozen=True, eq=False)
class SampledSignal:
    grid: Grid
    values: np.ndarray
    domain: DomainKind = "half_line"
    norm: NormTag = "sup"
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.count:
            raise ValueError(
                f"values shape {vals.shape} does not match grid count {self.grid.count}")
        if self.domain == "half_line" and self.grid.t_start < -1e-12:
            raise DomainError("half-line signal must start at t >= 0")
        if self.domain not in ("half_line", "full_line"):
            raise ValueError(f"unknown domain kind {self.domain!r}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def scalar(self) -> np.ndarray:
        if self.dim != 1:
            raise PreconditionError("signal is not scalar")
        return self.values[:, 0]

    def norms(self) -> np.ndarray:
        return node_norms(self.values, self.norm)

    def with_values(self, values, grid: Grid | None = None, **kw) -> "SampledSignal":
        grid = self.grid if grid is None else grid
        domain = kw.pop("domain", self.domain)
        if domain == "half_line" and grid.t_start < -1e-12:
            domain = "full_line"
        return SampledSignal(grid, values, domain, kw.pop("norm", self.norm),
                             kw.pop("labels", dict(self.labels)))

    def restrict(self, t0: float, t1: float) -> "SampledSignal":
        """Sub-signal on the nodes inside ``[t0, t1]``."""
        i0 = self.grid.index_at_least(t0)
        i1 = self.grid.index_at_most(t1)
        if i1 - i0 < 1:
            raise DomainError(f"window [{t0}, {t1}] holds fewer than two nodes")
        return self.with_values(self.values[i0:i1 + 1], self.grid.sub(i0, i1))

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SampledSignal") -> "SampledSignal":
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> "SampledSignal":
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__


def require_same_grid(*signals: SampledSignal) -> Grid:
    g = signals[0].grid
    for s in signals[1:]:
        if s.grid != g:
            raise GridMismatch(f"grids differ: {g} vs {s.grid}")
    return g


def from_function(fn, grid: Grid, domain: DomainKind = "half_line",
                  norm: NormTag = "sup", labels: dict | None = None) -> SampledSignal:
    """Sample a vectorised rule ``fn(times) -> (n,) or (n, d)`` on ``grid``."""
    vals = np.asarray(fn(grid.times), dtype=float)
    return SampledSignal(grid, vals, domain, norm, dict(labels or {}))


def constant(value, grid: Grid, domain: DomainKind = "half_line",
             norm: NormTag = "sup") -> SampledSignal:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return SampledSignal(grid, np.tile(v, (grid.count, 1)), domain, norm)


def _interp_rows(signal: SampledSignal, t: np.ndarray) -> np.ndarray:
    g = signal.grid
    t = np.asarray(t, dtype=float)
    x = (t - g.t_start) / g.step
    lo, hi = -1e-9, g.count - 1 + 1e-9
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"time outside [{g.t_start}, {g.t_end}]")
    x = np.clip(x, 0.0, g.count - 1)
    i = np.floor(x).astype(int)
    i = np.minimum(i, g.count - 2)
    frac = x - i
    # snap to nodes so that on-node evaluation is exact
    on_node = np.abs(frac - np.round(frac)) < 1e-9
    frac = np.where(on_node, np.round(frac), frac)
    v = signal.values
    return v[i] * (1.0 - frac)[:, None] + v[i + 1] * frac[:, None]


def evaluate(signal: SampledSignal, t: float) -> np.ndarray:
    """Value at time ``t`` by linear interpolation between adjacent nodes."""
    return _interp_rows(signal, np.array([t]))[0]


def sample_at(signal: SampledSignal, times) -> np.ndarray:
    return _interp_rows(signal, np.asarray(times, dtype=float))


def sup_norm(signal: SampledSignal) -> float:
    return float(np.max(signal.norms()))


def shifted_values(signal: SampledSignal, tau: float) -> tuple[Grid, np.ndarray, np.ndarray]:
    """Overlap grid of nodes t with t+tau in range, plus f(t) and f(t+tau) there.

    Exact node shifts when tau is a multiple of the step, interpolation otherwise.
    """
    g = signal.grid
    i0 = g.index_at_least(g.t_start - tau)
    i1 = g.index_at_most(g.t_end - tau)
    if i1 - i0 < 1:
        raise DomainError(f"shift {tau} leaves fewer than two overlap nodes")
    sub = g.sub(i0, i1)
    base = signal.values[i0:i1 + 1]
    k = g.shift_steps(tau)
    if k is not None:
        moved = signal.values[i0 + k:i1 + k + 1]
    else:
        moved = _interp_rows(signal, sub.times + tau)
    return sub, base, moved


def _subgrid_where(g: Grid, mapped: np.ndarray, lo: float, hi: float) -> tuple[int, int]:
    tol = 1e-9 * g.step
    ok = np.nonzero((mapped >= lo - tol) & (mapped <= hi + tol))[0]
    if ok.size < 2:
        raise DomainError("transform leaves fewer than two nodes in range")
    # the admissible set is an interval for affine maps
    return int(ok[0]), int(ok[-1])


def transform(signal: SampledSignal, kind: str, param: float | None = None) -> SampledSignal:
    """Apply one of the elementary transforms.

    ``kind`` is one of ``scale``, ``translate``, ``dilate``, ``reciprocal``,
    ``shift_difference``, ``anti_sum``.  Translations and dilations keep the
    original step and sample at the nodes where the moved argument is in range.
    """
    g = signal.grid
    if kind == "scale":
        return signal.with_values(float(param) * signal.values)
    if kind == "reciprocal":
        vals = signal.scalar
        m = float(np.min(np.abs(vals)))
        if m <= 1e-12:
            raise PreconditionError(f"reciprocal needs inf |f| > 0, got {m:g}")
        return signal.with_values(1.0 / vals)
    if kind in ("shift_difference", "anti_sum"):
        sub, base, moved = shifted_values(signal, float(param))
        vals = moved - base if kind == "shift_difference" else moved + base
        return signal.with_values(vals, sub)
    if kind == "translate":
        a = float(param)
        sub, _, moved = shifted_values(signal, a)
        return signal.with_values(moved, sub)
    if kind == "dilate":
        b = float(param)
        if b == 0:
            raise PreconditionError("dilation factor must be nonzero")
        mapped = b * g.times
        i0, i1 = _subgrid_where(g, mapped, g.t_start, g.t_end)
        sub = g.sub(i0, i1)
        return signal.with_values(_interp_rows(signal, np.clip(b * sub.times, g.t_start, g.t_end)), sub)
    raise ValueError(f"unknown transform {kind!r}")


def pointwise_product(f: SampledSignal, g: SampledSignal) -> SampledSignal:
    """Node-wise product of a scalar signal ``f`` with a (vector) signal ``g``."""
    require_same_grid(f, g)
    return g.with_values(f.scalar[:, None] * g.values, labels={})


# ---------------------------------------------------------------------------
# CSV I/O

def write_csv(signal: SampledSignal, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"v{j}" for j in range(signal.dim)])
        for t, row in zip(signal.times, signal.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def read_csv(path: str | Path, domain: DomainKind | None = None,
             norm: NormTag = "sup") -> SampledSignal:
    """Read a signal CSV, validating header and equispacing (rtol 1e-9)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty signal file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t" or header[1:] != [f"v{j}" for j in range(len(header) - 1)]:
        raise ValueError(f"{path}: header must be t,v0,...,v{{d-1}}, got {header}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: need at least two rows of {len(header)} columns")
    t = data[:, 0]
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError(f"{path}: times must be strictly increasing")
    h = (t[-1] - t[0]) / (len(t) - 1)
    if not np.allclose(dt, h, rtol=1e-9, atol=0.0):
        raise ValueError(f"{path}: times are not equispaced to rtol 1e-9")
    grid = Grid(float(t[0]), float(h), len(t))
    if domain is None:
        domain = "half_line" if t[0] >= 0 else "full_line"
    return SampledSignal(grid, data[:, 1:], domain, norm)


def stack(signals: Sequence[SampledSignal]) -> SampledSignal:
    """Concatenate components of signals sharing one grid."""
    require_same_grid(*signals)
    return signals[0].with_values(np.hstack([s.values for s in signals]))


def max_abs_diff(a: SampledSignal, b: SampledSignal) -> float:
    return sup_norm(a - b)


