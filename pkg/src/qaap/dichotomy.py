"""Evolution families with exponential dichotomy, Green's functions and mild solutions.

Systems are given explicitly by vectorised matrix rules: ``forward(t, s)``
is ``U(t, s)`` for ``t >= s``, ``backward(t, s)`` is ``U_Q(t, s) Q(s)`` for
``t < s`` and ``projection(t)`` is ``P(t)``.  All take time arrays of equal
length and return stacks of shape ``(n, d, d)``.  Operator norms are those
induced by the sup norm on the state space.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import linalg

from .signal import DomainError, Grid, SampledSignal, node_norms, sup_norm

EXP_FLOOR = -700.0

MatrixRule = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ContractionError(ValueError):
    """The Lipschitz constant is too large for the contraction argument."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


def clamped_exp(x) -> np.ndarray:
    """``exp`` with exponents below -700 mapped to exactly 0."""
    x = np.asarray(x, dtype=float)
    return np.where(x < EXP_FLOOR, 0.0, np.exp(np.maximum(x, EXP_FLOOR)))


def op_norm(mats: np.ndarray) -> np.ndarray:
    """Sup-norm operator norm (max absolute row sum) of each matrix in a stack."""
    return np.max(np.sum(np.abs(mats), axis=-1), axis=-1)


@dataclass(frozen=True)
class DichotomySystem:
    dim: int
    forward: MatrixRule
    projection: Callable[[np.ndarray], np.ndarray]
    backward: MatrixRule | None
    M_prime: float
    omega: float
    exponentially_stable: bool = False
    autonomous: bool = False
    name: str = "system"

    def U(self, t, s) -> np.ndarray:
        t, s = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                                   np.atleast_1d(np.asarray(s, float)))
        return self.forward(t, s)

    def P(self, t) -> np.ndarray:
        return self.projection(np.atleast_1d(np.asarray(t, dtype=float)))

    def Q(self, t) -> np.ndarray:
        return np.eye(self.dim)[None] - self.P(t)

    def green_bound(self, t, s) -> np.ndarray:
        return self.M_prime * np.exp(-self.omega * np.abs(np.asarray(t) - np.asarray(s)))


def greens_function(sys: DichotomySystem, t, s) -> np.ndarray:
    """``U(t,s)P(s)`` for t >= s and ``-U_Q(t,s)Q(s)`` for t < s, shape (n, d, d)."""
    t, s = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                               np.atleast_1d(np.asarray(s, float)))
    out = np.zeros((t.size, sys.dim, sys.dim))
    fw = t >= s
    if np.any(fw):
        out[fw] = sys.forward(t[fw], s[fw]) @ sys.projection(s[fw])
    if np.any(~fw):
        if sys.backward is None:
            raise ValueError("system has no backward flow; Green's function needs t >= s")
        out[~fw] = -sys.backward(t[~fw], s[~fw])
    return out


# ---------------------------------------------------------------------------
# model systems

def diagonal_system(primitive: Callable[[np.ndarray], np.ndarray], stable: Sequence[bool],
                    M_prime: float = 1.0, omega: float = 1.0, autonomous: bool = False,
                    name: str = "diagonal") -> DichotomySystem:
    """``U(t,s) = diag(exp(Phi(t) - Phi(s)))`` with ``Phi' = a`` the diagonal rates.

    ``stable`` marks the coordinates in the range of P (constant projection).
    The caller vouches for ``(M_prime, omega)``.
    """
    mask = np.asarray(stable, dtype=bool)
    d = mask.size
    Pm = np.diag(mask.astype(float))

    def diag_stack(x):
        out = np.zeros((x.shape[0], d, d))
        idx = np.arange(d)
        out[:, idx, idx] = x
        return out

    def fw(t, s):
        return diag_stack(clamped_exp(primitive(t) - primitive(s)))

    def bw(t, s):
        return diag_stack(clamped_exp(primitive(t) - primitive(s)) * (~mask)[None, :])

    proj = lambda t: np.broadcast_to(Pm, (t.size, d, d)).copy()
    return DichotomySystem(d, fw, proj, bw if not mask.all() else None, M_prime, omega,
                           bool(mask.all()), autonomous, name)


def constant_diagonal(rates: Sequence[float]) -> DichotomySystem:
    """Autonomous ``x' = diag(rates) x``; M' = 1 and omega = min |rate|."""
    a = np.asarray(rates, dtype=float)
    if np.any(a == 0):
        raise ValueError("hyperbolic rates must be nonzero")
    return diagonal_system(lambda t: np.multiply.outer(t, a), a < 0, 1.0,
                           float(np.min(np.abs(a))), True, "diag(" + ", ".join(repr(x) for x in a.tolist()) + ")")


def saddle_nonautonomous() -> DichotomySystem:
    """Rates ``-(1 + 1/(1+t^2))`` and ``+(1 + 1/(1+t^2))``; M' = 1, omega = 1."""
    def prim(t):
        g = t + np.arctan(t)
        return np.stack([-g, g], axis=-1)
    return diagonal_system(prim, [True, False], 1.0, 1.0, False, "saddle_nonautonomous")


def stable_scalar(rate: float = 1.0) -> DichotomySystem:
    """``U(t,s) = exp(-rate (t-s))``, P = I."""
    return diagonal_system(lambda t: -rate * np.asarray(t)[:, None], [True], 1.0, rate,
                           True, f"stable_scalar:{rate:g}")


def autonomous_system(A) -> DichotomySystem:
    """``U(t,s) = exp((t-s)A)`` for diagonalisable hyperbolic A.

    P is the spectral projection onto the stable eigenvectors; the certified
    constants are ``M' = ||V|| ||V^-1||`` (sup norm) and ``omega = min |Re eig|``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam, V = np.linalg.eig(A)
    re = lam.real
    if np.any(np.abs(re) < 1e-12):
        raise ValueError("matrix has spectrum on the imaginary axis")
    Vi = np.linalg.inv(V)
    stab = (re < 0).astype(float)
    Pm = np.real(V @ np.diag(stab) @ Vi)
    Qm = np.eye(A.shape[0]) - Pm
    d = A.shape[0]

    def flow(dt):
        e = np.exp(np.multiply.outer(dt, lam))
        return np.real(np.einsum("ij,nj,jk->nik", V, e, Vi))

    fw = lambda t, s: flow(t - s)
    bw = lambda t, s: flow(t - s) @ Qm
    proj = lambda t: np.broadcast_to(Pm, (t.size, d, d)).copy()
    Mp = float(np.linalg.norm(V, np.inf) * np.linalg.norm(Vi, np.inf))
    return DichotomySystem(d, fw, proj, bw if np.any(re > 0) else None, Mp,
                           float(np.min(np.abs(re))), bool(np.all(re < 0)), True, "autonomous")


# ---------------------------------------------------------------------------
# invariant diagnostics

def cocycle_defect(sys: DichotomySystem, triples: np.ndarray) -> float:
    """Max over (s, r, t) rows, s <= r <= t, of ``||U(t,s) - U(t,r)U(r,s)||``."""
    s, r, t = triples.T
    lhs = sys.U(t, s)
    rhs = sys.U(t, r) @ sys.U(r, s)
    scale = np.maximum(1.0, op_norm(lhs))
    return float(np.max(op_norm(lhs - rhs) / scale))


def green_bound_ratio(sys: DichotomySystem, t, s) -> float:
    """Max of ``||Gamma(t,s)|| / (M' exp(-omega |t-s|))`` over the pairs."""
    G = op_norm(greens_function(sys, t, s))
    return float(np.max(G / sys.green_bound(t, s)))


def projection_defect(sys: DichotomySystem, t) -> float:
    P = sys.P(t)
    return float(np.max(op_norm(P @ P - P)))


# ---------------------------------------------------------------------------
# mild solutions

def _trap_weights(m: int, h: float) -> np.ndarray:
    w = np.full(m + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass
class MildCertificate:
    T_cut: float
    tail_bound: float
    step: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"T_cut": self.T_cut, "tail_bound": self.tail_bound, "step": self.step,
                "notes": list(self.notes)}


def line_cutoff(sys: DichotomySystem, f_sup: float, tail_tol: float) -> float:
    """Half-width T with both Green tails ``M' ||f|| e^{-omega T}/omega`` summing to tail_tol."""
    if f_sup == 0:
        return 0.0
    return max(0.0, math.log(2.0 * sys.M_prime * f_sup / (sys.omega * tail_tol)) / sys.omega)


def mild_solution_line(sys: DichotomySystem, f: SampledSignal, tail_tol: float = 1e-6,
                       stride: int = 1) -> tuple[SampledSignal, MildCertificate]:
    """``u(t) = int Gamma(t,s) f(s) ds`` truncated to ``|s - t| <= T_cut``.

    Trapezoid rule on each side of the jump of Gamma at s = t.  The output
    holds every ``stride``-th node whose two-sided window fits in f's grid.
    """
    if f.dim != sys.dim:
        raise ValueError(f"signal dimension {f.dim} != system dimension {sys.dim}")
    g = f.grid
    h = g.step
    T = line_cutoff(sys, sup_norm(f), tail_tol)
    m = max(1, int(math.ceil(T / h - 1e-9)))
    idx = np.arange(m, g.count - m, stride)
    if idx.size < 2:
        raise DomainError(f"grid span {g.span} cannot hold two-sided windows of {m * h:g}")
    t = g.times
    w = _trap_weights(m, h)
    out = np.zeros((idx.size, sys.dim))
    k = np.arange(m + 1)
    for n, i in enumerate(idx):
        ti = np.full(m + 1, t[i])
        left = i - k                      # s <= t
        Gl = sys.forward(ti, t[left]) @ sys.projection(t[left])
        acc = np.einsum("k,kij,kj->i", w, Gl, f.values[left])
        if sys.backward is not None:
            right = i + k                 # s >= t, Gamma(t, t+) = -Q(t)
            Gr = sys.backward(ti, t[right])
            acc -= np.einsum("k,kij,kj->i", w, Gr, f.values[right])
        out[n] = acc
    grid = Grid(t[idx[0]], h * stride, idx.size)
    sig = f.with_values(out, grid, labels={"op": "mild_solution_line", "system": sys.name})
    tail = 2.0 * sys.M_prime * sup_norm(f) * math.exp(-sys.omega * m * h) / sys.omega
    return sig, MildCertificate(m * h, tail, h)


def mild_solution_halfline(sys: DichotomySystem, x0, f: SampledSignal,
                           stride: int = 1) -> SampledSignal:
    """``u(t) = U(t,0) x0 + int_0^t U(t,s) f(s) ds`` by the trapezoid rule."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    g = f.grid
    if abs(g.t_start) > 1e-12:
        raise DomainError("half-line mild solution expects a signal starting at 0")
    P0 = sys.P(0.0)[0]
    if np.max(np.abs(P0 @ x0 - x0)) > 1e-10:
        warnings.warn("initial value is not in the range of P(0); formula evaluated anyway",
                      stacklevel=2)
    t = g.times
    idx = np.arange(0, g.count, stride)
    out = np.zeros((idx.size, sys.dim))
    for n, i in enumerate(idx):
        ti = np.full(i + 1, t[i])
        acc = sys.forward(ti[:1], np.zeros(1))[0] @ x0
        if i > 0:
            Us = sys.forward(ti, t[:i + 1])
            acc = acc + np.einsum("k,kij,kj->i", _trap_weights(i, g.step), Us, f.values[:i + 1])
        out[n] = acc
    return f.with_values(out, Grid(0.0, g.step * stride, idx.size),
                         labels={"op": "mild_solution_halfline", "system": sys.name})


def integral_identity_residual(sys: DichotomySystem, u: SampledSignal, f: SampledSignal,
                               pairs: np.ndarray) -> float:
    """Max over (s, t) of ``||u(t) - U(t,s)u(s) - int_s^t U(t,r) f(r) dr||``.

    s and t must be nodes of u's grid; the integral uses f's grid (trapezoid).
    """
    worst = 0.0
    for s, t in pairs:
        i_s = u.grid.shift_steps(s - u.grid.t_start)
        i_t = u.grid.shift_steps(t - u.grid.t_start)
        j_s = f.grid.shift_steps(s - f.grid.t_start)
        j_t = f.grid.shift_steps(t - f.grid.t_start)
        if None in (i_s, i_t, j_s, j_t):
            raise DomainError(f"pair ({s}, {t}) is not on the grids")
        r = f.times[j_s:j_t + 1]
        Ur = sys.forward(np.full(r.size, t), r)
        integ = np.einsum("k,kij,kj->i", _trap_weights(r.size - 1, f.grid.step), Ur,
                          f.values[j_s:j_t + 1])
        lhs = u.values[i_t]
        rhs = sys.forward(np.array([t]), np.array([s]))[0] @ u.values[i_s] + integ
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# shift condition on the Green's function

def _lag_nodes(k: int, per_block: int) -> np.ndarray:
    s = np.linspace(k, k + 1.0, per_block)
    if k == 0:
        s = np.union1d(s, np.geomspace(1e-9, 1.0, per_block))
    elif k == -1:
        s = np.union1d(s, -np.geomspace(1e-9, 1.0, per_block))
    return s


def block_norm(vals: np.ndarray, s: np.ndarray, q: float) -> float:
    if math.isinf(q):
        return float(np.max(vals))
    return float(np.trapezoid(vals ** q, s) ** (1.0 / q))


def gamma_shift_condition(sys: DichotomySystem, tau: float, t_values: Sequence[float],
                          q: float = math.inf, domain: Literal["half_line", "full_line"] = "half_line",
                          k_max: int | None = None, per_block: int = 801) -> np.ndarray:
    """``sum_k || Gamma(t+tau, t+tau-.) - Gamma(t, t-.) ||_{L^q[k,k+1]}`` at each t.

    Lags run over k >= 0 on the half line and over all integers on the line.  Blocks beyond
    ``k_max`` are bounded by the Green estimate, which is added as a tail.
    """
    if k_max is None:
        k_max = max(4, int(math.ceil(40.0 / sys.omega)))
    ks = range(0, k_max + 1) if domain == "half_line" else range(-k_max - 1, k_max + 1)
    tail = 2.0 * sys.M_prime * math.exp(-sys.omega * (k_max + 1)) / (1.0 - math.exp(-sys.omega))
    if domain == "full_line":
        tail *= 2.0
    out = np.zeros(len(t_values))
    for n, t in enumerate(t_values):
        total = 0.0
        for k in ks:
            s = _lag_nodes(k, per_block)
            a = np.full(s.size, t + tau)
            b = np.full(s.size, float(t))
            G1 = greens_function(sys, a, a - s)
            G2 = greens_function(sys, b, b - s)
            total += block_norm(op_norm(G1 - G2), s, q)
        out[n] = total + (tail if tau != 0 else 0.0)
    return out


# ---------------------------------------------------------------------------
# semilinear problems

@dataclass
class PicardResult:
    solution: SampledSignal
    iterations: int
    contraction_estimate: float
    theoretical_factor: float
    ratios: list[float]
    changes: list[float]
    fixed_point_residual: float

    def to_dict(self) -> dict:
        return {"iterations": self.iterations,
                "contraction_estimate": self.contraction_estimate,
                "theoretical_factor": self.theoretical_factor,
                "ratios": list(self.ratios), "changes": list(self.changes),
                "fixed_point_residual": self.fixed_point_residual}


def green_operator(sys: DichotomySystem, grid: Grid, domain: str) -> np.ndarray:
    """Dense quadrature matrix W with ``(W v)_i ~ int Gamma(t_i, s) v(s) ds`` over the grid.

    Line: trapezoid on both sides of s = t_i.  Half line: ``int_0^{t_i} U(t_i, s)``.
    Shape ``(n, d, n, d)``.
    """
    t = grid.times
    n, d, h = grid.count, sys.dim, grid.step
    W = np.zeros((n, d, n, d))
    for i in range(n):
        if domain == "full_line":
            left = np.arange(0, i + 1)
            wl = _trap_weights(i, h) if i > 0 else np.zeros(1)
            Gl = sys.forward(np.full(left.size, t[i]), t[left]) @ sys.projection(t[left])
            W[i, :, left, :] += wl[:, None, None] * Gl
            if sys.backward is not None and i < n - 1:
                right = np.arange(i, n)
                wr = _trap_weights(right.size - 1, h)
                Gr = sys.backward(np.full(right.size, t[i]), t[right])
                W[i, :, right, :] -= wr[:, None, None] * Gr
        else:
            if i == 0:
                continue
            left = np.arange(0, i + 1)
            Ul = sys.forward(np.full(left.size, t[i]), t[left])
            W[i, :, left, :] += _trap_weights(i, h)[:, None, None] * Ul
    return W


def picard_semilinear(sys: DichotomySystem, F: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      L: float, grid: Grid, domain: Literal["half_line", "full_line"] = "full_line",
                      x0=None, max_iter: int = 50, tol: float = 1e-10,
                      lipschitz_samples: int = 200, seed: int = 0) -> PicardResult:
    """Fixed point of the mild map ``u -> int Gamma(., s) F(s, u(s)) ds`` from u0 = 0.

    Refuses unless ``L * 2M'/omega < 1`` (line) or ``L * M'/omega < 1`` (half
    line).  F is vectorised: ``F(t (n,), x (n, d)) -> (n, d)``.
    """
    factor = L * (2.0 if domain == "full_line" else 1.0) * sys.M_prime / sys.omega
    if not factor < 1.0:
        raise ContractionError(f"L = {L} gives contraction factor {factor:.4g} >= 1")
    if domain == "half_line" and sys.backward is not None and x0 is None:
        warnings.warn("half-line problem on a system with an unstable part", stacklevel=2)
    from .classify import lipschitz_check, random_pairs
    rng = np.random.default_rng(seed)
    pairs = random_pairs(rng, lipschitz_samples, sys.dim, (grid.t_start, grid.t_end))
    if not lipschitz_check(F, L, pairs):
        raise ContractionError("F violates the stated Lipschitz constant on sampled pairs")

    t = grid.times
    n, d = grid.count, sys.dim
    W = green_operator(sys, grid, domain).reshape(n * d, n * d)
    base = np.zeros((n, d))
    if domain == "half_line" and x0 is not None:
        base = sys.forward(t, np.zeros(n)) @ np.asarray(x0, dtype=float)
    step = lambda u: base + (W @ np.asarray(F(t, u), dtype=float).reshape(-1)).reshape(n, d)
    u = np.zeros((n, d))
    changes, ratios = [], []
    for it in range(1, max_iter + 1):
        nxt = step(u)
        ch = float(np.max(node_norms(nxt - u)))
        if changes and changes[-1] > 0:
            ratios.append(ch / changes[-1])
        changes.append(ch)
        u = nxt
        if ch <= tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last change "
                               f"{changes[-1]:.3g})", changes)
    resid = float(np.max(node_norms(step(u) - u)))
    sig = SampledSignal(grid, u, domain, "sup", {"op": "picard", "system": sys.name})
    est = max(ratios) if ratios else 0.0
    return PicardResult(sig, it, est, factor, ratios, changes, resid)
