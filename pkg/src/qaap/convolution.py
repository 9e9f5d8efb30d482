"""Finite and infinite convolution against operator kernels, with summability checks.

``finite_convolution`` computes ``F(t) = int_0^t R(t-s) f(s) ds`` and
``infinite_convolution`` the line version with lower limit ``-inf``.  Both use
the trapezoid rule on the kernel grid except for the first cell, where an
open midpoint rule keeps R(0) out of the sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import linalg, signal as sps

from .classify import ClassReport, Profile, ScanConfig, classify, residual_profile
from .signal import DomainError, NormTag, SampledSignal, sup_norm
from .stepanov import stepanov_norm

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


class CertificationRefused(RuntimeError):
    """The kernel summability diagnostic failed, so no invariance claim is made."""


@dataclass(frozen=True)
class KernelFamily:
    """``t -> R(t)`` for t > 0; scalar (dim 1) or d x d matrices.

    ``eval`` maps an array of times of shape (n,) to (n,) for scalars or
    (n, d, d) for matrices.
    """
    eval: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    closed_form_l1: float | None = None
    decay_hint: tuple[float, float] | None = None   # ||R(t)|| <= C exp(-lam t)
    name: str = "kernel"

    def matrices(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r = np.asarray(self.eval(t), dtype=float)
        return r.reshape(t.size, self.dim, self.dim)

    def op_norms(self, t, norm: NormTag = "sup") -> np.ndarray:
        """Operator norm of R(t) induced by the vector norm tag."""
        r = self.matrices(t)
        if self.dim == 1:
            return np.abs(r[:, 0, 0])
        if norm == "sup":
            return np.max(np.sum(np.abs(r), axis=2), axis=1)
        return np.linalg.norm(r, ord=2, axis=(1, 2))

    def tail_bound(self, T: float) -> float | None:
        """Bound on ``int_T^inf ||R||`` from the decay hint."""
        if self.decay_hint is None:
            return None
        C, lam = self.decay_hint
        return C * math.exp(-lam * T) / lam


def exp_kernel(lam: float = 1.0, scale: float = 1.0) -> KernelFamily:
    """Scalar ``scale * exp(-lam t)``."""
    if lam <= 0:
        raise ValueError("decay rate must be positive")
    return KernelFamily(lambda t: scale * np.exp(-lam * t), 1, abs(scale) / lam,
                        (abs(scale), lam), f"exp:{lam:g}")


def zero_kernel(dim: int = 1) -> KernelFamily:
    return KernelFamily(lambda t: np.zeros((np.size(t), dim, dim)), dim, 0.0, (0.0, 1.0), "zero")


def matexp_kernel(A, norm: NormTag = "sup") -> KernelFamily:
    """``R(t) = exp(tA)`` for a matrix with spectrum in the open left half plane.

    Diagonalisable A gives the hint ``C = ||V|| ||V^-1||`` and ``lam = -max Re(eig)``;
    otherwise the kernel is evaluated by ``expm`` without a hint.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    lam_, V = np.linalg.eig(A)
    mu = float(np.max(lam_.real))
    if mu >= 0:
        raise ValueError(f"matrix exponential kernel needs a stable matrix, max Re = {mu}")
    cond = np.linalg.cond(V)
    if np.isfinite(cond) and cond < 1e8:
        Vi = np.linalg.inv(V)
        ordn = np.inf if norm == "sup" else 2

        def ev(t):
            e = np.exp(np.multiply.outer(t, lam_))           # (n, d)
            return np.real(np.einsum("ij,nj,jk->nik", V, e, Vi))

        C = float(np.linalg.norm(V, ordn) * np.linalg.norm(Vi, ordn))
        return KernelFamily(ev, d, None, (C, -mu), "matexp")

    def ev_expm(t):
        return np.stack([linalg.expm(s * A) for s in np.atleast_1d(t)])

    return KernelFamily(ev_expm, d, None, None, "matexp")


# ---------------------------------------------------------------------------
# summability diagnostics

def _gl_block_integral(fn, a: float, b: float) -> float:
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.dot(_GL_W, fn(x)))


def kernel_l1_norm(R: KernelFamily, t_max: float = 40.0, tail_estimate: bool = True,
                   norm: NormTag = "sup", cauchy_rtol: float = 1e-6) -> float | None:
    """Gauss-Legendre integral of ``||R||`` over unit blocks of (0, t_max], plus the tail.

    With a decay hint the hint tail is added.  Without one, the partial
    integrals must pass a Cauchy test on the last half of the range, else
    None (unverifiable) is returned.
    """
    fn = lambda s: R.op_norms(s, norm)
    edges = np.arange(0.0, math.floor(t_max) + 1.0)
    if edges[-1] < t_max:
        edges = np.append(edges, t_max)
    blocks = np.array([_gl_block_integral(fn, a, b) for a, b in zip(edges[:-1], edges[1:])])
    total = float(np.sum(blocks))
    tail = R.tail_bound(t_max) if tail_estimate else None
    if tail is not None:
        return total + tail
    half = float(np.sum(blocks[edges[:-1] >= t_max / 2.0]))
    if half > cauchy_rtol * max(total, 1.0):
        return None
    return total


def _block_lq(R: KernelFamily, q: float, k: int, norm: NormTag, n_sup: int) -> float:
    if math.isinf(q):
        s = np.linspace(k, k + 1.0, n_sup)
        if k == 0:
            s[0] = 1e-14
        return float(np.max(R.op_norms(s, norm)))
    return _gl_block_integral(lambda s: R.op_norms(s, norm) ** q, k, k + 1.0) ** (1.0 / q)


def kernel_lq_blocks(R: KernelFamily, q: float, k_max: int = 60,
                     norm: NormTag = "sup", n_sup: int = 1001) -> np.ndarray:
    """``||R||_{L^q[k,k+1]}`` for k = 0..k_max."""
    if not q >= 1:
        raise ValueError("q must lie in [1, inf]")
    return np.array([_block_lq(R, q, k, norm, n_sup) for k in range(k_max + 1)])


def block_tail(R: KernelFamily, k_max: int) -> float | None:
    """Geometric bound on the block norms beyond k_max (sup bound works for every q)."""
    if R.decay_hint is None:
        return None
    C, lam = R.decay_hint
    return C * math.exp(-lam * (k_max + 1)) / (1.0 - math.exp(-lam))


def kernel_lq_block_sum(R: KernelFamily, q: float, k_max: int = 60,
                        norm: NormTag = "sup") -> float | None:
    """Sum over unit blocks of ``||R||_{L^q[k,k+1]}`` plus the geometric tail.

    None when there is no decay hint and the last block is not negligible.
    """
    blocks = kernel_lq_blocks(R, q, k_max, norm)
    tail = block_tail(R, k_max)
    if tail is None:
        if blocks[-1] > 1e-12 * max(float(np.sum(blocks)), 1.0):
            return None
        tail = 0.0
    return float(np.sum(blocks) + tail)


def conjugate_exponent(p: float) -> float:
    return math.inf if p == 1 else p / (p - 1.0)


# ---------------------------------------------------------------------------
# quadrature

@dataclass
class ConvolutionCertificate:
    mode: Literal["finite", "infinite"]
    kernel: str
    step: float
    kernel_l1: float | None
    T_cut: float | None = None
    tail_bound: float | None = None
    tail_certified: bool = True
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "kernel": self.kernel, "step": self.step,
                "kernel_l1": self.kernel_l1, "T_cut": self.T_cut,
                "tail_bound": self.tail_bound, "tail_certified": self.tail_certified,
                "notes": list(self.notes)}


def _apply(Rk: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Row-wise ``R_k @ f_k`` for (n, d, d) and (n, d)."""
    return np.einsum("nij,nj->ni", Rk, f)


def _causal_sum(Rk: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``c_i = sum_{k=0}^{m} R_k f_{i-k}`` (f zero before index 0), i = 0..n-1."""
    n, d = f.shape
    out = np.zeros((n, d))
    for a in range(d):
        for b in range(d):
            kab = Rk[:, a, b]
            if not np.any(kab):
                continue
            out[:, a] += sps.convolve(f[:, b], kab, method="auto")[:n]
    return out


def _convolve_nodes(R: KernelFamily, f: SampledSignal, m: int | None) -> np.ndarray:
    """Quadrature of ``int_0^{u_max} R(u) f(t_i - u) du`` at every node i.

    ``m=None`` integrates back to the first node (finite convolution), else
    over ``m`` cells (rows i < m are left incomplete).
    """
    h = f.grid.step
    n, d = f.values.shape
    if R.dim != d and R.dim != 1:
        raise ValueError(f"kernel dimension {R.dim} does not match signal dimension {d}")
    kd = d if R.dim == d else 1
    span = n - 1 if m is None else m
    u = h * np.arange(1, span + 1)
    Rk = np.zeros((span + 1, kd, kd))
    Rk[1:] = R.matrices(u)
    if kd == 1 and d > 1:
        Rk = np.einsum("n,ij->nij", Rk[:, 0, 0], np.eye(d))
    Rhalf = (R.matrices(np.array([0.5 * h]))[0] if kd == d else
             R.matrices(np.array([0.5 * h]))[0, 0, 0] * np.eye(d))
    fv = np.asarray(f.values)
    C = _causal_sum(Rk, fv)
    F = np.zeros((n, d))
    prev = np.vstack([np.zeros((1, d)), fv[:-1]])             # f_{i-1}
    F[1:] = C[1:] - 0.5 * (prev[1:] @ Rk[1].T) + 0.5 * ((fv[1:] + prev[1:]) @ Rhalf.T)
    # trapezoid end correction at the far edge of the kernel range
    idx = np.arange(1, n)
    if m is None:
        far = _apply(Rk[np.minimum(idx, span)], np.tile(fv[0], (n - 1, 1)))
        F[1:] -= 0.5 * far
        # i = 1 has a single (midpoint) cell: undo the trapezoid bits
        F[1] = 0.5 * (Rhalf @ (fv[1] + fv[0]))
    else:
        sl = idx >= m
        j = idx[sl]
        F[j] -= 0.5 * (fv[j - m] @ Rk[m].T)
        if m == 1:
            F[j] = 0.5 * ((fv[j] + fv[j - 1]) @ Rhalf.T)
    return h * F


def finite_convolution(R: KernelFamily, f: SampledSignal) -> SampledSignal:
    """``F(t) = int_0^t R(t-s) f(s) ds`` on f's grid; f must start at 0."""
    if abs(f.grid.t_start) > 1e-12:
        raise DomainError("finite convolution expects a signal starting at t = 0")
    vals = _convolve_nodes(R, f, None)
    return f.with_values(vals, labels={"op": "finite_convolution", "kernel": R.name})


def truncation_time(R: KernelFamily, f_sup: float, tail_tol: float,
                    norm: NormTag = "sup", T0: float = 1.0,
                    T_max: float = 1e4) -> tuple[float, float, bool]:
    """(T_cut, tail bound, certified) with ``f_sup * int_T^inf ||R|| <= tail_tol``."""
    if f_sup == 0:
        return 0.0, 0.0, True
    if R.decay_hint is not None:
        C, lam = R.decay_hint
        if C == 0:
            return 0.0, 0.0, True
        T = max(0.0, math.log(f_sup * C / (lam * tail_tol)) / lam)
        # nudge past the rounding in exp(log(.)) so the bound is <= tail_tol
        T *= 1.0 + 1e-12
        return T, f_sup * R.tail_bound(T), True
    T = T0
    while T < T_max:
        inc = sum(_gl_block_integral(lambda s: R.op_norms(s, norm), a, a + T / 8.0)
                  for a in np.linspace(T, 2 * T, 9)[:-1])
        if f_sup * inc <= tail_tol / 2.0:
            return 2.0 * T, f_sup * inc, False
        T *= 2.0
    raise DomainError("kernel tail does not fall below the tolerance")


def infinite_convolution(R: KernelFamily, f: SampledSignal, tail_tol: float = 1e-6
                         ) -> tuple[SampledSignal, ConvolutionCertificate]:
    """``F(t) = int_{-inf}^t R(t-s) f(s) ds`` truncated to ``s >= t - T_cut``.

    The output lives on the nodes t with ``t - T_cut`` inside f's grid.
    """
    h = f.grid.step
    T, tail, certified = truncation_time(R, sup_norm(f), tail_tol, f.norm)
    m = max(1, int(math.ceil(T / h - 1e-9)))
    if m > f.grid.count - 2:
        raise DomainError(f"signal span {f.grid.span} is shorter than T_cut={m * h:g}")
    vals = _convolve_nodes(R, f, m)
    if certified:
        tail = sup_norm(f) * R.tail_bound(m * h)
    sub = f.grid.sub(m, f.grid.count - 1)
    out = f.with_values(vals[m:], sub, labels={"op": "infinite_convolution", "kernel": R.name})
    cert = ConvolutionCertificate("infinite", R.name, h, kernel_l1_norm(R, norm=f.norm),
                                  m * h, tail, certified)
    if not certified:
        cert.notes.append("no decay hint: truncation chosen by doubling, tail estimated")
    return out, cert


def convolve(R: KernelFamily, f: SampledSignal, tail_tol: float = 1e-6
             ) -> tuple[SampledSignal, ConvolutionCertificate]:
    """Finite convolution for half-line signals starting at 0, infinite otherwise."""
    if f.domain == "half_line" and abs(f.grid.t_start) < 1e-12:
        out = finite_convolution(R, f)
        return out, ConvolutionCertificate("finite", R.name, f.grid.step,
                                           kernel_l1_norm(R, norm=f.norm))
    return infinite_convolution(R, f, tail_tol)


# ---------------------------------------------------------------------------
# invariance of the q-aap classes

@dataclass
class TransferCheck:
    """Residual-transfer inequality at each evaluated (tau, M)."""
    rows: list[tuple[float, float, float, float]]      # tau, M, output residual, bound
    tolerance: float

    @property
    def holds(self) -> bool:
        return all(out <= bound + self.tolerance for _, _, out, bound in self.rows)

    @property
    def worst_margin(self) -> float:
        if not self.rows:
            return math.inf
        return min(bound + self.tolerance - out for _, _, out, bound in self.rows)


@dataclass
class InvarianceReport:
    route: str
    output: SampledSignal
    certificate: ConvolutionCertificate
    classification: ClassReport
    transfer: TransferCheck
    diagnostic: float

    def to_dict(self) -> dict:
        return {"route": self.route, "diagnostic": self.diagnostic,
                "certificate": self.certificate.to_dict(),
                "classification": self.classification.to_dict(include_curves=False),
                "transfer_holds": self.transfer.holds,
                "transfer_worst_margin": self.transfer.worst_margin,
                "transfer_tolerance": self.transfer.tolerance,
                "transfer_points": len(self.transfer.rows)}


def _kernel_tail_fn(R: KernelFamily, norm: NormTag) -> Callable[[float], float]:
    l1 = kernel_l1_norm(R, norm=norm)

    def tail(T: float) -> float:
        T = max(T, 0.0)
        b = R.tail_bound(T)
        if b is not None:
            return min(b, l1)
        return max(0.0, l1 - (kernel_l1_norm(R, T, False, norm) if T > 0 else 0.0))
    return tail


def _input_curve(prof: Profile, Ms: np.ndarray) -> np.ndarray:
    """Input tail sup at each M; M below the first start means the whole profile."""
    c = prof.tail_curve(np.maximum(Ms, 0.0))
    full = float(np.max(prof.values)) if prof.values.size else math.nan
    return np.where(np.isnan(c), full, c)


def invariance_check(R: KernelFamily, f: SampledSignal, route: Literal["sup", "stepanov"],
                     config: ScanConfig | None = None, epsilon: float = 0.1,
                     p: float = 1.0, tail_tol: float = 1e-6, n_check_taus: int = 40,
                     tolerance: float | None = None) -> InvarianceReport:
    """Convolve, classify the output for QAAP and test the residual-transfer bound.

    ``route="sup"`` needs an integrable kernel and bounds output residuals by
    input sup residuals (``K * in(tau, M - M0) + 2 ||f|| tail(M0)``, plus
    ``||f|| tail(M)`` for the finite product).  ``route="stepanov"`` needs
    summable L^q block norms (1/p + 1/q = 1) and uses unit-window L^p input
    residuals.  In both cases M0 is optimised per (tau, M).
    """
    norm = f.norm
    if route == "sup":
        diag = kernel_l1_norm(R, norm=norm)
        if diag is None or not math.isfinite(diag):
            raise CertificationRefused("kernel L1 norm could not be verified")
    elif route == "stepanov":
        q = conjugate_exponent(p)
        diag = kernel_lq_block_sum(R, q, norm=norm)
        if diag is None or not math.isfinite(diag):
            raise CertificationRefused("kernel L^q block sum could not be verified")
    else:
        raise ValueError(f"unknown route {route!r}")

    out, cert = convolve(R, f, tail_tol)
    cfg = config if config is not None else ScanConfig.default(out, epsilon)
    report = classify(out, cfg, "QAAP")

    finite = cert.mode == "finite"
    h = f.grid.step
    tol = tolerance
    if tol is None:
        # quadrature error of the trapezoid sums plus the truncation tail, twice
        tol = 2.0 * (cert.tail_bound or 0.0) + 1e-3 * h * max(1.0, sup_norm(f)) * diag
    taus = np.asarray(cfg.tau_grid)
    pick = np.unique(np.linspace(0, taus.size - 1, min(n_check_taus, taus.size)).astype(int))
    Ms = np.asarray(cfg.M_grid)
    rows = []
    if route == "sup":
        K = diag
        tail = _kernel_tail_fn(R, norm)
        fs = sup_norm(f)
        for k in pick:
            tau = float(taus[k])
            out_c = residual_profile(out, tau).tail_curve(Ms)
            prof = residual_profile(f, tau)
            for M, o in zip(Ms, out_c):
                if math.isnan(o):
                    continue
                M0s = np.linspace(0.0, M, 41)
                bounds = (K * _input_curve(prof, M - M0s)
                          + 2.0 * fs * np.array([tail(x) for x in M0s]))
                b = float(np.min(bounds)) + (fs * tail(M) if finite else 0.0)
                rows.append((tau, float(M), float(o), b))
    else:
        q = conjugate_exponent(p)
        k_max = 60
        blocks = kernel_lq_blocks(R, q, k_max, norm)
        extra = block_tail(R, k_max) or 0.0
        suffix = np.append(np.cumsum(blocks[::-1])[::-1], 0.0) + extra
        BT = lambda k: float(suffix[min(max(int(k), 0), k_max + 1)])
        B = BT(0)
        fS = stepanov_norm(f, p)
        for k in pick:
            tau = float(taus[k])
            out_c = residual_profile(out, tau).tail_curve(Ms)
            prof = residual_profile(f, tau, stepanov=True, p=p)
            for M, o in zip(Ms, out_c):
                if math.isnan(o):
                    continue
                Mps = np.linspace(0.0, max(M - 1.0, 0.0), 41)
                bounds = (B * _input_curve(prof, Mps)
                          + 2.0 * fS * np.array([BT(math.floor(M - 1.0 - x)) for x in Mps]))
                b = float(np.min(bounds)) + fS * BT(math.floor(M))
                rows.append((tau, float(M), float(o), b))
    return InvarianceReport(route, out, cert, report, TransferCheck(rows, tol), float(diag))
