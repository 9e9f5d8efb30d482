"""Stepanov metric and norm, and finite-window Weyl distance estimates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .signal import (DomainError, NormTag, SampledSignal, node_norms,
                     require_same_grid, transform)

Quadrature = Literal["trapezoid", "midpoint"]


@dataclass(frozen=True)
class StepanovParams:
    p: float = 1.0
    l: float = 1.0
    quadrature: Quadrature = "trapezoid"

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"Stepanov exponent must be >= 1, got {self.p}")
        if not self.l > 0:
            raise ValueError(f"window length must be positive, got {self.l}")
        if self.quadrature not in ("trapezoid", "midpoint"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")


def cell_integrals(values: np.ndarray, step: float, p: float,
                   norm: NormTag = "sup", quadrature: Quadrature = "trapezoid") -> np.ndarray:
    """Integral of ``||values||^p`` over each grid cell, length ``n - 1``.

    Trapezoid integrates the node powers; midpoint takes the power of the
    interpolated midpoint value.  Both are nonnegative weighted sums of
    ``||x||^p`` so power-mean and Minkowski inequalities survive discretisation.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if quadrature == "trapezoid":
        w = node_norms(values, norm) ** p
        return 0.5 * step * (w[:-1] + w[1:])
    if quadrature == "midpoint":
        mid = 0.5 * (values[:-1] + values[1:])
        return step * node_norms(mid, norm) ** p
    raise ValueError(f"unknown quadrature {quadrature!r}")


def window_sums(cells: np.ndarray, m: int) -> np.ndarray:
    """Sums of ``m`` consecutive cells; entry i covers cells i..i+m-1.

    Cells are cut into blocks of length m; each window is a block suffix plus
    the next block's prefix, so no large prefix sums are ever subtracted.
    Nonnegative input gives nonnegative output and exact zeros stay zero.
    """
    n = cells.shape[0]
    if m > n:
        raise DomainError(f"window of {m} cells does not fit {n} cells")
    nb = -(-n // m) + 1
    padded = np.zeros(nb * m)
    padded[:n] = cells
    blocks = padded.reshape(nb, m)
    prefix = np.cumsum(blocks, axis=1)
    suffix = np.cumsum(blocks[:, ::-1], axis=1)[:, ::-1]
    out = suffix.copy()
    out[:-1, 1:] += prefix[1:, :-1]
    return out.reshape(-1)[:n - m + 1]


def window_means(values: np.ndarray, step: float, p: float, l: float,
                 norm: NormTag = "sup", quadrature: Quadrature = "trapezoid") -> np.ndarray:
    """``((1/l) * int_x^{x+l} ||v||^p)^(1/p)`` for every admissible grid start x."""
    m = int(round(l / step))
    if m < 1 or abs(m * step - l) > 1e-7 * step:
        raise ValueError(f"window length {l} is not a multiple of the step {step}")
    cells = cell_integrals(values, step, p, norm, quadrature)
    return (window_sums(cells, m) / l) ** (1.0 / p)


def stepanov_metric(f: SampledSignal, g: SampledSignal,
                    params: StepanovParams = StepanovParams()) -> float:
    """Sup over window starts of the l-window L^p mean of ``||f - g||``."""
    grid = require_same_grid(f, g)
    if params.l > grid.span + 1e-9 * grid.step:
        raise DomainError(f"window l={params.l} longer than the grid span {grid.span}")
    vals = window_means(f.values - g.values, grid.step, params.p, params.l,
                        f.norm, params.quadrature)
    return float(np.max(vals))


def stepanov_norm(f: SampledSignal, p: float = 1.0,
                  quadrature: Quadrature = "trapezoid") -> float:
    """Unit-window Stepanov norm ``sup_t (int_t^{t+1} ||f||^p)^(1/p)``."""
    if f.grid.span < 1.0 - 1e-9:
        raise DomainError("Stepanov norm needs a grid spanning at least one unit")
    vals = window_means(f.values, f.grid.step, p, 1.0, f.norm, quadrature)
    return float(np.max(vals))


@dataclass(frozen=True)
class WeylEstimate:
    tau: float
    p: float
    windows: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def estimate(self) -> float:
        """Value at the largest window; the l -> infinity limit is never extrapolated."""
        return self.values[-1]


def shifted_pair(f: SampledSignal, tau: float) -> tuple[SampledSignal, SampledSignal]:
    """``f(. + tau)`` and ``f`` restricted to their common overlap grid."""
    moved = transform(f, "translate", tau)
    i0 = int(round((moved.grid.t_start - f.grid.t_start) / f.grid.step))
    base = f.with_values(f.values[i0:i0 + moved.grid.count], moved.grid)
    return moved, base


def weyl_distance(f: SampledSignal, tau: float, p: float,
                  l_list: Sequence[float],
                  quadrature: Quadrature = "trapezoid") -> WeylEstimate:
    l_list = [float(l) for l in l_list]
    if any(b <= a for a, b in zip(l_list, l_list[1:])):
        raise ValueError("window lengths must be strictly increasing")
    moved, base = shifted_pair(f, tau)
    vals = tuple(stepanov_metric(moved, base, StepanovParams(p, l, quadrature))
                 for l in l_list)
    return WeylEstimate(float(tau), float(p), tuple(l_list), vals)


def weyl_window_for(epsilon: float, cutoff: float, s_norm: float, p: float) -> float:
    """Window length past which the S^p residual bound forces a small Weyl mean."""
    return 2.0**p * (cutoff + 2.0) * (s_norm / epsilon) ** p
