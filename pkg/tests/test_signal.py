import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaap.signal import (DomainError, Grid, GridMismatch, PreconditionError, SampledSignal,
                         constant, evaluate, from_function, pointwise_product, read_csv,
                         sup_norm, transform, write_csv)
from qaap import catalog as cat


def grid(t0=0.0, t1=10.0, h=0.01):
    return Grid.from_range(t0, t1, h)


# --- evaluate ---------------------------------------------------------------

def test_evaluate_constant():
    s = constant(3.5, grid())
    for t in (0.0, 0.123, 7.77, 10.0):
        assert evaluate(s, t)[0] == 3.5


def test_evaluate_linear_exact():
    s = from_function(lambda t: t, Grid.from_range(0.0, 5.0, 0.5))
    assert evaluate(s, 0.25)[0] == pytest.approx(0.25, abs=1e-15)


def test_evaluate_square_node_average():
    s = from_function(lambda t: t * t, Grid.from_range(0.0, 1.0, 0.1))
    assert evaluate(s, 0.05)[0] == pytest.approx(0.005, abs=1e-15)


def test_evaluate_out_of_range():
    with pytest.raises(DomainError):
        evaluate(constant(1.0, grid()), 10.5)


def test_evaluate_exact_at_nodes():
    s = from_function(np.sin, grid())
    for i in (0, 17, 999, 1000):
        assert evaluate(s, s.times[i])[0] == s.values[i, 0]


# --- sup_norm ---------------------------------------------------------------

def test_sup_norm_zero():
    assert sup_norm(constant(0.0, grid())) == 0.0


def test_sup_norm_sine():
    s = from_function(lambda t: np.sin(2 * np.pi * t), grid())
    assert sup_norm(s) == pytest.approx(1.0, abs=1e-3)


def test_sup_norm_euclidean_345():
    s = constant([3.0, -4.0], grid(), norm="euclidean")
    assert sup_norm(s) == pytest.approx(5.0)


# --- transform --------------------------------------------------------------

def test_scale_zero():
    s = from_function(np.cos, grid())
    assert sup_norm(transform(s, "scale", 0.0)) == 0.0


def test_shift_difference_period():
    s = from_function(lambda t: np.sin(2 * np.pi * t), grid())
    d = transform(s, "shift_difference", 1.0)
    assert sup_norm(d) < 1e-12
    assert d.grid.t_end == pytest.approx(9.0)


def test_reciprocal_constant():
    s = transform(constant(2.0, grid()), "reciprocal")
    assert np.all(s.values == 0.5)


def test_reciprocal_precondition():
    with pytest.raises(PreconditionError):
        transform(from_function(np.sin, grid()), "reciprocal")


def test_empty_overlap():
    with pytest.raises(DomainError):
        transform(constant(1.0, grid()), "shift_difference", 20.0)


def test_anti_sum_of_antiperiodic():
    s = from_function(np.sin, Grid(0.0, math.pi / 100, 2001))
    assert sup_norm(transform(s, "anti_sum", math.pi)) < 1e-12


# --- pointwise_product ------------------------------------------------------

def test_product_identity_and_zero():
    f = from_function(np.sin, grid())
    one = constant(1.0, grid())
    zero = constant(0.0, grid())
    assert np.array_equal(pointwise_product(one, f).values, f.values)
    assert sup_norm(pointwise_product(zero, f)) == 0.0


def test_product_grid_mismatch():
    with pytest.raises(GridMismatch):
        pointwise_product(constant(1.0, grid()), constant(1.0, grid(h=0.02)))


def test_product_sign_times_plateau():
    ts = np.array([4.0 * n + 1.0 for n in range(1, 8)])
    g = cat.get("sign_sin")(ts)
    f = cat.get("sap4_plateau")(ts)
    assert np.all(f == 1.0)
    assert np.array_equal(f * g, np.sign(np.sin(ts)))


# --- properties -------------------------------------------------------------

finite = st.floats(-10, 10, allow_nan=False)


@st.composite
def signal_pairs(draw):
    n = draw(st.integers(5, 60))
    a = draw(st.lists(finite, min_size=n, max_size=n))
    b = draw(st.lists(finite, min_size=n, max_size=n))
    g = Grid(0.0, 0.1, n)
    return SampledSignal(g, np.array(a)), SampledSignal(g, np.array(b))


@given(signal_pairs(), finite)
def test_sup_homogeneous_and_triangle(pair, c):
    f, g = pair
    assert sup_norm(c * f) == abs(c) * sup_norm(f)
    node = np.abs(f.values + g.values)[:, 0]
    assert np.all(node <= np.abs(f.values[:, 0]) + np.abs(g.values[:, 0]))
    assert sup_norm(f + g) <= sup_norm(f) + sup_norm(g)


@given(signal_pairs())
def test_shift_difference_zero_is_zero(pair):
    f, _ = pair
    assert np.all(transform(f, "shift_difference", 0.0).values == 0.0)


@given(signal_pairs(), st.integers(0, 4))
def test_product_shift_inequality(pair, k):
    f, g = pair
    tau = 0.1 * k
    fg = pointwise_product(g, f)
    d_fg = transform(fg, "shift_difference", tau).values[:, 0]
    df = transform(f, "shift_difference", tau).values[:, 0]
    dg = transform(g, "shift_difference", tau).values[:, 0]
    n = d_fg.size
    g_shift = g.values[k:k + n, 0]
    rhs = np.abs(g_shift) * np.abs(df) + np.abs(f.values[:n, 0]) * np.abs(dg)
    assert np.all(np.abs(d_fg) <= rhs + 1e-12)


@given(st.integers(-30, 30))
def test_translate_round_trip_exact_on_multiples(k):
    s = from_function(np.cos, grid(0.0, 10.0, 0.05))
    a = 0.05 * k
    back = transform(transform(s, "translate", a), "translate", -a)
    i0 = int(round((back.grid.t_start - s.grid.t_start) / s.grid.step))
    assert np.allclose(back.values, s.values[i0:i0 + back.grid.count], atol=1e-12)


@given(st.floats(0.001, 0.049))
def test_translate_round_trip_off_grid(a):
    s = from_function(np.cos, grid(0.0, 10.0, 0.05))
    back = transform(transform(s, "translate", a), "translate", -a)
    i0 = int(round((back.grid.t_start - s.grid.t_start) / s.grid.step))
    # one interpolation step of a 1-Lipschitz function
    assert np.max(np.abs(back.values - s.values[i0:i0 + back.grid.count])) <= 0.05


# --- CSV --------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    s = from_function(lambda t: np.stack([np.sin(t), np.cos(t)], axis=1), grid(-1.0, 1.0, 0.1),
                      domain="full_line")
    write_csv(s, tmp_path / "s.csv")
    r = read_csv(tmp_path / "s.csv")
    assert np.array_equal(r.values, s.values)
    assert r.grid.count == s.grid.count and r.domain == "full_line"


@pytest.mark.parametrize("text", ["", "x,v0\n0,1\n1,2\n", "t,v0\n0,1\n1,2\n3,4\n", "t,v0\n0,a\n1,2\n"])
def test_csv_rejects_bad_files(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_csv(p)
