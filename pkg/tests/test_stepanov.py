import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaap import catalog as cat
from qaap.classify import sp_qaap_residual
from qaap.signal import DomainError, Grid, SampledSignal, constant, from_function, sup_norm
from qaap.stepanov import (StepanovParams, cell_integrals, shifted_pair, stepanov_metric,
                           stepanov_norm, weyl_distance, weyl_window_for, window_sums)


def grid(t0=0.0, t1=10.0, h=0.01):
    return Grid.from_range(t0, t1, h)


def test_metric_identical_is_zero():
    f = from_function(np.sin, grid())
    assert stepanov_metric(f, f, StepanovParams(2.0, 3.0)) == 0.0


@pytest.mark.parametrize("p,l", [(1, 1), (2, 0.5), (3.5, 4)])
def test_metric_constants(p, l):
    g = grid()
    assert stepanov_metric(constant(1.0, g), constant(0.0, g), StepanovParams(p, l)) == pytest.approx(1.0)


def test_metric_linear():
    g = grid(h=0.01)
    f = from_function(lambda t: t, g)
    val = stepanov_metric(f, constant(0.0, g), StepanovParams(1.0, 1.0))
    assert abs(val - 9.5) <= 0.01


def test_metric_window_too_long():
    g = grid()
    with pytest.raises(DomainError):
        stepanov_metric(constant(1.0, g), constant(0.0, g), StepanovParams(1.0, 11.0))


def test_window_not_multiple():
    g = Grid(0.0, 0.03, 400)
    with pytest.raises(ValueError):
        stepanov_metric(constant(1.0, g), constant(0.0, g), StepanovParams(1.0, 1.0))


def test_params_validation():
    with pytest.raises(ValueError):
        StepanovParams(0.5, 1.0)
    with pytest.raises(ValueError):
        StepanovParams(1.0, 0.0)


def test_norm_examples():
    g = grid(0.0, 30.0)
    assert stepanov_norm(constant(0.0, g)) == 0.0
    assert stepanov_norm(constant(-2.5, g), 3.0) == pytest.approx(2.5)
    s = cat.render("sign_sin", 0.0, 30.0, 0.01)
    assert abs(stepanov_norm(s, 1.0) - 1.0) <= 0.01


def test_norm_short_grid():
    with pytest.raises(DomainError):
        stepanov_norm(constant(1.0, grid(0.0, 0.5)))


def test_weyl_examples():
    f = from_function(lambda t: np.sin(2 * np.pi * t), grid(0.0, 50.0))
    assert weyl_distance(f, 0.0, 1.0, [1, 5, 10]).values == (0.0, 0.0, 0.0)
    assert max(weyl_distance(f, 1.0, 2.0, [1, 5, 10]).values) < 1e-10
    step = cat.render("step", -200.0, 200.0, 0.01)
    w = weyl_distance(step, 5.0, 1.0, [100.0])
    assert w.estimate <= 0.06 + 0.01


def test_weyl_windows_increasing():
    f = constant(1.0, grid())
    with pytest.raises(ValueError):
        weyl_distance(f, 1.0, 1.0, [2.0, 1.0])


def test_weyl_empty_overlap():
    with pytest.raises(DomainError):
        weyl_distance(constant(1.0, grid()), 20.0, 1.0, [1.0])


def test_weyl_is_stepanov_bitwise():
    f = cat.render("sin_log", 0.0, 100.0, 0.01)
    for tau, l, p in ((0.5, 3.0, 1.0), (2.0, 10.0, 2.0)):
        moved, base = shifted_pair(f, tau)
        assert weyl_distance(f, tau, p, [l]).values[0] == stepanov_metric(moved, base,
                                                                          StepanovParams(p, l))


def test_window_sums_matches_convolution(rng):
    cells = rng.uniform(0, 1, 503)
    for m in (1, 7, 100, 503):
        ref = np.convolve(cells, np.ones(m), "valid")
        assert np.allclose(window_sums(cells, m), ref, rtol=1e-13, atol=0)


def test_window_sums_keeps_zeros():
    cells = np.concatenate([np.full(50, 1e8), np.zeros(300)])
    out = window_sums(cells, 20)
    assert np.all(out[50:] == 0.0)


def test_weyl_window_echo():
    g = Grid.from_range(0.0, 400.0, 0.01)
    f = from_function(lambda t: np.sin(2 * np.pi * t) + 2.0 * np.exp(-t), g)
    eps, p, tau = 0.1, 1.0, 1.0
    M = next(M for M in (1.0, 2.0, 4.0, 8.0) if sp_qaap_residual(f, tau, M, p) <= eps)
    l = weyl_window_for(eps, M, stepanov_norm(f, p), p)
    l = math.ceil(l / 0.01) * 0.01
    assert l < 399
    w = weyl_distance(f, tau, p, [l]).estimate
    assert w <= 2 ** (1 / p) * eps + 0.01


# --- properties -------------------------------------------------------------

vals = st.floats(-5, 5, allow_nan=False)


@st.composite
def triples(draw):
    n = draw(st.integers(12, 80))
    g = Grid(0.0, 0.25, n)
    return [SampledSignal(g, np.array(draw(st.lists(vals, min_size=n, max_size=n))))
            for _ in range(3)]


ps = st.sampled_from([1.0, 1.5, 2.0, 3.0])
ls = st.sampled_from([0.25, 1.0, 2.0])


@given(triples(), ps, ls)
def test_metric_axioms(tr, p, l):
    f, g, k = tr
    pr = StepanovParams(p, l)
    assert stepanov_metric(f, g, pr) == pytest.approx(stepanov_metric(g, f, pr), rel=1e-12, abs=1e-300)
    assert stepanov_metric(f, f, pr) == 0.0
    assert stepanov_metric(f, k, pr) <= stepanov_metric(f, g, pr) + stepanov_metric(g, k, pr) + 1e-9


@given(triples(), ls, st.tuples(ps, ps))
def test_monotone_in_p(tr, l, pp):
    f, g, _ = tr
    p, q = sorted(pp)
    a = stepanov_metric(f, g, StepanovParams(p, l))
    b = stepanov_metric(f, g, StepanovParams(q, l))
    assert a <= b * (1 + 1e-12) + 1e-12


@given(triples(), ps, st.sampled_from(["trapezoid", "midpoint"]))
def test_norm_below_sup(tr, p, quad):
    f = tr[0]
    assert stepanov_norm(f, p, quad) <= sup_norm(f) * (1 + 1e-12)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=200), st.sampled_from([1.0, 2.0]))
def test_cell_integrals_nonnegative(v, p):
    c = cell_integrals(np.array(v), 0.1, p)
    assert np.all(c >= 0)
