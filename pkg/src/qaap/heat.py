"""Spectral model of the nonautonomous Dirichlet heat equation on [0, pi].

State vectors are coefficients in the orthonormal basis ``sqrt(2/pi) sin(n x)``,
n = 1..N, so their Euclidean norm is the L^2 norm.  Grid samples live on the
interior nodes ``x_j = j pi / (N_x - 1)``, j = 1..N_x-2; the Dirichlet end
values are zero.  Mode/grid maps are the orthonormal type-I DST.

The evolution family is ``U(t,s) = T(t-s) exp(int_s^t q(r, .) dr)`` with
``q(t,x) = -gamma0 - 3t^2 - f(x)``: first a multiplication on the grid, then
the diagonal semigroup ``exp(-n^2 (t-s))`` in mode space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft
from scipy.special import logsumexp

from .dichotomy import EXP_FLOOR, clamped_exp

_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class HeatSystem:
    gamma0: float
    potential: Callable[[np.ndarray], np.ndarray]
    N: int = 64
    N_x: int = 257
    cubic: bool = True
    x: np.ndarray = field(init=False, repr=False)
    fx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        K = self.N_x - 2
        if self.N > K:
            raise ValueError(f"{self.N} modes need at least {self.N + 2} grid points")
        x = np.arange(1, K + 1) * math.pi / (K + 1)
        fx = np.broadcast_to(np.asarray(self.potential(x), dtype=float), x.shape).copy()
        if np.any(fx < 0):
            raise ValueError("potential must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "fx", fx)

    # certificate of the exponentially stable family (P = I)
    M_prime = 1.0

    @property
    def omega(self) -> float:
        return 1.0 + self.gamma0

    exponentially_stable = True

    @property
    def K(self) -> int:
        return self.N_x - 2

    @property
    def eigen(self) -> np.ndarray:
        n = np.arange(1, self.N + 1, dtype=float)
        return n * n

    def to_grid(self, modes: np.ndarray) -> np.ndarray:
        modes = np.asarray(modes, dtype=float)
        pad = np.zeros(modes.shape[:-1] + (self.K,))
        pad[..., :self.N] = modes
        return math.sqrt((self.K + 1) / math.pi) * fft.dst(pad, type=1, norm="ortho", axis=-1)

    def to_modes(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        c = math.sqrt(math.pi / (self.K + 1)) * fft.dst(values, type=1, norm="ortho", axis=-1)
        return c[..., :self.N]

    def semigroup(self, sigma, modes: np.ndarray) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        return modes * clamped_exp(-np.multiply.outer(sigma, self.eigen))

    def q_integral(self, t, s) -> np.ndarray:
        """``int_s^t q(r, x_j) dr`` for paired times, shape (n, K)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        d = t - s
        out = -self.gamma0 * d
        if self.cubic:
            out = out - (t ** 3 - s ** 3)
        return out[:, None] - np.multiply.outer(d, self.fx)

    def apply_U(self, t, s, modes: np.ndarray) -> np.ndarray:
        """``U(t,s) a`` for paired time arrays; modes (N,) or (n, N)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t, s = np.broadcast_arrays(t, s)
        if np.any(t < s - 1e-14):
            raise ValueError("U(t, s) needs t >= s")
        a = np.broadcast_to(modes, (t.size, self.N))
        v = self.to_grid(a) * clamped_exp(self.q_integral(t, s))
        return self.semigroup(t - s, self.to_modes(v))

    def U_matrix(self, t: float, s: float) -> np.ndarray:
        """``U(t,s)`` as an N x N matrix in mode coordinates."""
        return self.apply_U(np.full(self.N, t), np.full(self.N, s), np.eye(self.N)).T


@dataclass
class SpectralField:
    modes: np.ndarray
    system: HeatSystem

    def grid_values(self) -> np.ndarray:
        return self.system.to_grid(self.modes)

    def with_boundary(self) -> tuple[np.ndarray, np.ndarray]:
        """Full grid including the zero Dirichlet end values."""
        x = np.concatenate([[0.0], self.system.x, [math.pi]])
        v = np.concatenate([[0.0], self.grid_values(), [0.0]])
        return x, v

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.modes))


def heat_build(gamma0: float = 1.0, potential: Callable | None = None, N: int = 64,
               N_x: int = 257, cubic: bool = True) -> HeatSystem:
    pot = potential if potential is not None else (lambda x: np.zeros_like(x))
    return HeatSystem(gamma0, pot, N, N_x, cubic)


def semigroup_norm(sys: HeatSystem, t: float) -> float:
    """Spectral norm of ``T(t)`` on the truncation."""
    M = sys.semigroup(np.full(sys.N, t), np.eye(sys.N))
    return float(np.linalg.norm(M, 2))


def heat_cocycle_defect(sys: HeatSystem, triples: np.ndarray) -> float:
    worst = 0.0
    for s, r, t in triples:
        d = sys.U_matrix(t, s) - sys.U_matrix(t, r) @ sys.U_matrix(r, s)
        worst = max(worst, float(np.linalg.norm(d, 2)))
    return worst


def heat_stability_ratio(sys: HeatSystem, pairs: np.ndarray) -> float:
    """Max of ``||U(t,s)|| / (e^{-(1+gamma0)(t-s)} e^{-(t^3-s^3)})`` over (s, t)."""
    worst = 0.0
    for s, t in pairs:
        n = np.linalg.norm(sys.U_matrix(t, s), 2)
        logb = -(1.0 + sys.gamma0) * (t - s) - (t ** 3 - s ** 3 if sys.cubic else 0.0)
        if n == 0.0:
            continue
        worst = max(worst, float(math.exp(math.log(n) - logb)))
    return worst


# ---------------------------------------------------------------------------
# the shift condition of the heat example

def _lag_nodes(k: int, per_block: int) -> np.ndarray:
    s = np.linspace(k, k + 1.0, per_block)
    if k == 0:
        s = np.union1d(s, np.geomspace(1e-10, 1.0, per_block))
    return s


def _log_multiplier(sys: HeatSystem, u: float, s: np.ndarray) -> np.ndarray:
    """Log of ``e^{-s} sup_x exp(int_{u-s}^u q(r,x) dr)``."""
    fmin = float(np.min(sys.fx))
    out = -(1.0 + sys.gamma0 + fmin) * s
    if sys.cubic:
        out = out - (u ** 3 - (u - s) ** 3)
    return out


def zagrebin_integrand(sys: HeatSystem, t: float, tau: float, s: np.ndarray) -> np.ndarray:
    """``e^{-s} sup_x | exp(int_{t+tau-s}^{t+tau} q) - exp(int_{t-s}^{t} q) |``.

    The x-dependence is the common factor ``exp(-s f(x))``, maximised at min f.
    """
    a = _log_multiplier(sys, t + tau, s)
    b = _log_multiplier(sys, t, s)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    # |e^a - e^b| = e^hi (1 - e^{lo - hi}); clamp tiny values to 0
    val = -np.expm1(lo - hi)
    return np.where(hi < EXP_FLOOR, 0.0, np.exp(np.maximum(hi, EXP_FLOOR)) * val)


def zagrebin_blocks(sys: HeatSystem, t: float, tau: float, q: float = math.inf,
                    k_max: int = 10, per_block: int = 2001) -> np.ndarray:
    """Block norms ``||.||_{L^q[k,k+1]}`` of the integrand, k = 0..k_max."""
    out = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        s = _lag_nodes(k, per_block)
        v = zagrebin_integrand(sys, t, tau, s)
        out[k] = np.max(v) if math.isinf(q) else np.trapezoid(v ** q, s) ** (1.0 / q)
    return out


def claimed_profile(t, tau: float, c: float) -> np.ndarray:
    """Dominating profile ``|tau| e^{-3ct^2} (1+t+tau)``."""
    t = np.asarray(t, dtype=float)
    return abs(tau) * np.exp(-3.0 * c * t * t) * (1.0 + t + tau)


def chain_log_rhs(t: float, tau: float, k: int) -> float:
    """Log of the first per-block bound (with constant 1) at block k."""
    u = t + tau
    terms = [3 * k * t * (k - t), 3 * (k + 1) * t * (k + 1 - t),
             3 * k * u * (k - u), 3 * (k + 1) * u * (k + 1 - u)]
    poly = 3 * (k + 1) ** 2 + 6 * (k + 1) * u
    if tau == 0:
        return -math.inf
    return math.log(abs(tau)) + float(logsumexp(terms)) + math.log(poly)


@dataclass
class ZagrebinReport:
    tau: float
    q: float
    c: float
    t_values: np.ndarray
    residual: np.ndarray
    shape: np.ndarray
    calibration: tuple[float, float]
    fitted_const: float
    dominated: bool
    worst_ratio: float
    chain_ok: bool
    chain_worst_log_margin: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "q": None if math.isinf(self.q) else self.q, "c": self.c,
                "t": self.t_values.tolist(), "residual": self.residual.tolist(),
                "shape": self.shape.tolist(), "calibration": list(self.calibration),
                "fitted_const": self.fitted_const, "dominated": self.dominated,
                "worst_ratio_over_fit": self.worst_ratio, "chain_ok": self.chain_ok,
                "chain_worst_log_margin": self.chain_worst_log_margin,
                "notes": list(self.notes)}


def heat_zagrebin_check(sys: HeatSystem, tau: float, t_values: Sequence[float],
                        q: float = math.inf, c: float = 0.9,
                        calibration: tuple[float, float] = (1.0, 1.5),
                        rtol: float = 1e-9, k_max: int = 10) -> ZagrebinReport:
    """Residual curve of the block sum and its comparison with the claimed profile.

    The constant is fitted as the largest ratio residual/shape on the
    calibration segment; domination is then required on every t value.
    The per-block bound is checked with constant 1 for q = inf.
    """
    if not 0.75 < c < 1:
        raise ValueError("c must lie in (3/4, 1)")
    t_values = np.asarray(t_values, dtype=float)
    res = np.zeros(t_values.size)
    chain_ok, worst = True, math.inf
    for i, t in enumerate(t_values):
        blocks = zagrebin_blocks(sys, t, tau, q, k_max)
        res[i] = float(np.sum(blocks))
        if math.isinf(q) and tau != 0:
            for k, b in enumerate(blocks):
                if b <= 0:
                    continue
                margin = chain_log_rhs(t, tau, k) - math.log(b)
                worst = min(worst, margin)
                chain_ok &= margin >= -1e-12
    shape = claimed_profile(t_values, tau, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(shape > 0, res / shape, np.where(res > 0, np.inf, 0.0))
    cal = (t_values >= calibration[0]) & (t_values <= calibration[1])
    if not np.any(cal):
        raise ValueError("no t value inside the calibration segment")
    const = float(np.max(ratio[cal]))
    dominated = bool(np.all(res <= const * shape * (1.0 + rtol) + 1e-300))
    worst_ratio = float(np.max(ratio) / const) if const > 0 else (0.0 if np.all(res == 0) else math.inf)
    rep = ZagrebinReport(tau, q, c, t_values, res, shape, calibration, const, dominated,
                         worst_ratio, bool(chain_ok), worst)
    if not dominated:
        rep.notes.append("residual is not dominated by the fitted profile")
    return rep


# ---------------------------------------------------------------------------
# forced problem

@dataclass
class HeatTrajectory:
    times: np.ndarray
    modes: np.ndarray                 # mild formula path, (n_out, N)
    split_modes: np.ndarray | None    # splitting path
    discrepancy: float | None
    system: HeatSystem
    dt_split: float | None = None

    def field_at(self, i: int) -> SpectralField:
        return SpectralField(self.modes[i], self.system)

    def grid_values(self) -> np.ndarray:
        return self.system.to_grid(self.modes)

    def truncation_indicator(self) -> np.ndarray:
        """Decay factor ``exp(-N^2 t)`` of the highest retained mode."""
        return np.exp(-(self.system.N ** 2) * self.times)


def _panels(t: float, breaks: Sequence[float], max_width: float, depth: float) -> np.ndarray:
    """Edges on [0, t], graded geometrically toward s = t (width down to ``depth``)."""
    if t <= 0:
        return np.array([0.0])
    edges = [0.0, t]
    w = t / 2.0
    while w > depth:
        edges.append(t - w)
        w /= 2.0
    if t > depth:
        edges.append(t - depth)
    edges.extend(b for b in breaks if 0 < b < t)
    e = np.unique(np.array(edges))
    fine = [e[0]]
    for a, b in zip(e[:-1], e[1:]):
        n = max(1, int(math.ceil((b - a) / max_width)))
        fine.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(fine)


def mild_heat(sys: HeatSystem, forcing_modes: Callable[[np.ndarray], np.ndarray],
              u0_modes: np.ndarray, t: float, breaks: Sequence[float] = (),
              max_width: float = 0.25, depth: float = 1e-9) -> np.ndarray:
    """``U(t,0)u0 + int_0^t U(t,s) f(s) ds`` with panelled Gauss-Legendre in s."""
    out = sys.apply_U(np.array([t]), np.array([0.0]), u0_modes)[0]
    edges = _panels(t, breaks, max_width, depth)
    if edges.size < 2:
        return out
    a, b = edges[:-1], edges[1:]
    s = (0.5 * (b - a)[:, None] * _GL16_X[None, :] + 0.5 * (a + b)[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * _GL16_W[None, :]).ravel()
    Fm = forcing_modes(s)
    Us = sys.apply_U(np.full(s.size, t), s, Fm)
    return out + w @ Us


def split_heat(sys: HeatSystem, forcing_modes: Callable[[np.ndarray], np.ndarray],
               u0_modes: np.ndarray, out_times: np.ndarray, dt: float) -> np.ndarray:
    """Strang splitting: half reaction, exact diffusion with midpoint forcing, half reaction."""
    n2 = sys.eigen
    out = np.zeros((out_times.size, sys.N))
    a = np.array(u0_modes, dtype=float)
    t = 0.0
    j = 0
    while j < out_times.size and out_times[j] <= 1e-14:
        out[j] = a
        j += 1
    for target_idx in range(j, out_times.size):
        T = out_times[target_idx]
        n_steps = max(1, int(math.ceil((T - t) / dt - 1e-9)))
        h = (T - t) / n_steps
        e = np.exp(-n2 * h)
        phi = -np.expm1(-n2 * h) / n2
        for _ in range(n_steps):
            tm = t + 0.5 * h
            v = sys.to_grid(a) * clamped_exp(sys.q_integral(np.array([tm]), np.array([t]))[0])
            a = sys.to_modes(v)
            a = e * a + phi * forcing_modes(np.array([tm]))[0]
            v = sys.to_grid(a) * clamped_exp(sys.q_integral(np.array([t + h]), np.array([tm]))[0])
            a = sys.to_modes(v)
            t += h
        out[target_idx] = a
    return out


def heat_solve(sys: HeatSystem, forcing: Callable[[np.ndarray, np.ndarray], np.ndarray] | None,
               u0: Callable[[np.ndarray], np.ndarray] | np.ndarray | None, T_end: float,
               n_out: int = 41, cross_validate: bool = True, dt_split: float = 1e-3,
               breaks: Sequence[float] = ()) -> HeatTrajectory:
    """Mild solution at ``n_out`` equispaced times on [0, T_end].

    ``forcing(s, x)`` maps (m,) times and (K,) nodes to (m, K) values; it is
    projected onto the retained modes.  ``u0`` is a rule on x or a mode array.
    With ``cross_validate`` a splitting stepper recomputes the trajectory and
    the sup over output times of the L^2 gap is reported.
    """
    if u0 is None:
        a0 = np.zeros(sys.N)
    elif callable(u0):
        a0 = sys.to_modes(np.asarray(u0(sys.x), dtype=float))
    else:
        a0 = np.asarray(u0, dtype=float)
    if forcing is None:
        fm = lambda s: np.zeros((np.size(s), sys.N))
    else:
        fm = lambda s: sys.to_modes(np.asarray(forcing(np.atleast_1d(s), sys.x), dtype=float)
                                    .reshape(np.size(s), sys.K))
    times = np.linspace(0.0, T_end, n_out)
    modes = np.stack([mild_heat(sys, fm, a0, float(t), breaks) for t in times])
    split, gap = None, None
    if cross_validate:
        split = split_heat(sys, fm, a0, times, dt_split)
        gap = float(np.max(np.linalg.norm(split - modes, axis=1)))
    return HeatTrajectory(times, modes, split, gap, sys, dt_split if cross_validate else None)
