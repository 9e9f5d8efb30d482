import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaap import catalog as cat
from qaap.convolution import (CertificationRefused, KernelFamily, conjugate_exponent,
                              convolve, exp_kernel, finite_convolution, infinite_convolution,
                              invariance_check, kernel_l1_norm, kernel_lq_block_sum,
                              kernel_lq_blocks, matexp_kernel, truncation_time, zero_kernel)
from qaap.signal import DomainError, Grid, SampledSignal, constant, from_function, sup_norm
from qaap.stepanov import stepanov_norm

H = 0.01
half = Grid.from_range(0.0, 20.0, H)
line = Grid.from_range(-40.0, 20.0, H)
E1 = exp_kernel(1.0)


# --- finite -----------------------------------------------------------------

def test_finite_zero():
    out = finite_convolution(E1, constant(0.0, half))
    assert np.all(out.values == 0.0)


def test_finite_closed_forms():
    t = half.times
    out = finite_convolution(E1, constant(1.0, half))
    assert np.max(np.abs(out.scalar - (1 - np.exp(-t)))) < 1e-4
    out = finite_convolution(E1, from_function(lambda s: np.exp(-s), half))
    assert np.max(np.abs(out.scalar - t * np.exp(-t))) < 1e-4


def test_finite_needs_zero_start():
    with pytest.raises(Exception):
        finite_convolution(E1, constant(1.0, Grid.from_range(1.0, 5.0, H)))


def test_finite_matrix_kernel():
    A = np.array([[-1.0, 0.5], [0.0, -2.0]])
    R = matexp_kernel(A)
    g = Grid.from_range(0.0, 15.0, H)
    out = finite_convolution(R, constant([1.0, 1.0], g))
    # F(t) = A^{-1} (e^{tA} - I) (1, 1)
    from scipy.linalg import expm
    Ainv = np.linalg.inv(A)
    for i in (100, 700, 1500):
        ref = Ainv @ (expm(g.times[i] * A) - np.eye(2)) @ np.ones(2)
        assert np.max(np.abs(out.values[i] - ref)) < 1e-4


# --- infinite ---------------------------------------------------------------

def test_infinite_constant():
    out, cert = infinite_convolution(E1, constant(1.0, line, "full_line"), 1e-6)
    assert np.max(np.abs(out.scalar - 1.0)) < 1e-4 + 1e-6
    assert cert.tail_bound <= 1e-6 and cert.tail_certified
    assert out.grid.t_start >= line.t_start + cert.T_cut - 1e-9


def test_infinite_sine():
    out, _ = infinite_convolution(E1, from_function(np.sin, line, "full_line"), 1e-6)
    t = out.times
    assert np.max(np.abs(out.scalar - (np.sin(t) - np.cos(t)) / 2)) < 1e-4


def test_infinite_zero():
    out, _ = infinite_convolution(E1, constant(0.0, line, "full_line"))
    assert np.all(out.values == 0.0)


def test_infinite_short_window():
    g = Grid.from_range(-5.0, 5.0, H)
    with pytest.raises(DomainError):
        infinite_convolution(exp_kernel(0.1), constant(1.0, g, "full_line"), 1e-8)


def test_convolve_picks_mode():
    _, c1 = convolve(E1, constant(1.0, half))
    _, c2 = convolve(E1, constant(1.0, line, "full_line"))
    assert (c1.mode, c2.mode) == ("finite", "infinite")


def test_truncation_time_formula():
    T, tail, ok = truncation_time(E1, 2.0, 1e-6)
    assert ok and tail <= 1e-6 and T == pytest.approx(math.log(2.0 / 1e-6))


def test_truncation_without_hint():
    R = KernelFamily(lambda t: np.exp(-t), 1, None, None, "nohint")
    T, tail, ok = truncation_time(R, 1.0, 1e-6)
    assert not ok and math.exp(-T) <= 1e-5


# --- diagnostics ------------------------------------------------------------

def test_l1_norms():
    assert kernel_l1_norm(E1) == pytest.approx(1.0, abs=1e-10)
    assert kernel_l1_norm(exp_kernel(2.0)) == pytest.approx(0.5, abs=1e-10)
    assert kernel_l1_norm(zero_kernel()) == 0.0


def test_l1_unverifiable():
    R = KernelFamily(lambda t: 1.0 / (1.0 + t), 1, None, None, "harmonic")
    assert kernel_l1_norm(R) is None


def test_l1_matexp():
    A = np.diag([-1.0, -3.0])
    assert kernel_l1_norm(matexp_kernel(A)) == pytest.approx(1.0, abs=1e-9)


def test_block_sums():
    geo = 1.0 / (1.0 - math.exp(-1.0))
    assert kernel_lq_block_sum(E1, math.inf) == pytest.approx(geo, abs=1e-8)
    assert kernel_lq_block_sum(E1, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert kernel_lq_block_sum(zero_kernel(), 2.0) == 0.0


def test_blocks_validate_q():
    with pytest.raises(ValueError):
        kernel_lq_blocks(E1, 0.5)


def test_conjugate():
    assert conjugate_exponent(1.0) == math.inf
    assert conjugate_exponent(2.0) == 2.0


def test_matexp_requires_stable():
    with pytest.raises(ValueError):
        matexp_kernel(np.array([[0.1]]))


# --- invariance -------------------------------------------------------------

def test_invariance_step():
    f = cat.render("step", -60.0, 60.0, 0.05)
    rep = invariance_check(E1, f, "sup", n_check_taus=10)
    assert rep.classification.verdict == "supported"
    assert rep.transfer.holds


def test_invariance_ramp_stepanov():
    f = cat.render("xie_zhang_ramp", -20.0, 120.0, 0.01)
    rep = invariance_check(E1, f, "stepanov", p=2.0, n_check_taus=8)
    assert rep.classification.verdict == "supported"
    assert rep.transfer.holds


def test_invariance_zero():
    rep = invariance_check(E1, constant(0.0, Grid.from_range(-30.0, 30.0, 0.05), "full_line"),
                           "sup", n_check_taus=5)
    assert np.all(rep.output.values == 0.0)
    assert rep.classification.verdict == "supported"


def test_invariance_refuses():
    R = KernelFamily(lambda t: 1.0 / (1.0 + t), 1, None, None, "harmonic")
    with pytest.raises(CertificationRefused):
        invariance_check(R, constant(1.0, line, "full_line"), "sup")


# --- properties -------------------------------------------------------------

small = Grid.from_range(0.0, 5.0, 0.05)
arr = st.lists(st.floats(-3, 3, allow_nan=False), min_size=small.count, max_size=small.count)


@given(arr, arr, st.floats(-4, 4))
def test_linearity(a, b, c):
    fa = SampledSignal(small, np.array(a))
    fb = SampledSignal(small, np.array(b))
    lhs = finite_convolution(E1, fa + c * fb).values
    rhs = finite_convolution(E1, fa).values + c * finite_convolution(E1, fb).values
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(c)) * 10)


@given(arr)
def test_bounded_by_l1(a):
    f = SampledSignal(small, np.array(a))
    out = finite_convolution(E1, f)
    assert sup_norm(out) <= sup_norm(f) * kernel_l1_norm(E1) * (1 + 1e-9) + 1e-12


@given(arr, st.sampled_from([1.0, 2.0]))
def test_stepanov_boundedness(a, p):
    f = SampledSignal(small, np.array(a))
    out = finite_convolution(E1, f)
    bound = stepanov_norm(f, p) * kernel_lq_block_sum(E1, conjugate_exponent(p))
    # trapezoid against the block sums: allow one cell of quadrature slack
    assert sup_norm(out) <= bound + 0.05 * sup_norm(f)
