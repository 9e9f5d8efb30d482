import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaap.dichotomy import (EXP_FLOOR, ContractionError, ConvergenceError, autonomous_system,
                            clamped_exp, cocycle_defect, constant_diagonal, gamma_shift_condition,
                            green_bound_ratio, greens_function, integral_identity_residual,
                            mild_solution_halfline, mild_solution_line, picard_semilinear,
                            projection_defect, saddle_nonautonomous, stable_scalar)
from qaap.signal import DomainError, Grid, constant, from_function, sup_norm

SADDLE = constant_diagonal([-1.0, 1.0])


def test_greens_diagonal():
    G = greens_function(SADDLE, [3.0, 1.0], [1.0, 3.0])
    assert np.allclose(G[0], math.exp(-2.0) * np.diag([1.0, 0.0]))
    assert np.allclose(G[1], -math.exp(-2.0) * np.diag([0.0, 1.0]))


def test_greens_diagonal_at_equal_times():
    G = greens_function(SADDLE, [2.0], [2.0])
    assert np.array_equal(G[0], SADDLE.P(2.0)[0])


def test_green_norm_and_bound():
    t = np.linspace(-5, 5, 41)
    T, S = np.meshgrid(t, t)
    T, S = T.ravel(), S.ravel()
    assert green_bound_ratio(SADDLE, T, S) == pytest.approx(1.0, abs=1e-12)
    for sys in (saddle_nonautonomous(), autonomous_system([[-1.0, 2.0], [0.0, 1.5]])):
        assert green_bound_ratio(sys, T, S) <= 1.0 + 1e-9


def test_projection_idempotent():
    sys = autonomous_system([[-1.0, 2.0], [0.0, 1.5]])
    assert projection_defect(sys, np.linspace(0, 3, 7)) < 1e-12


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_cocycle(x):
    s, r, t = sorted(x)
    tr = np.array([[s, r, t]])
    for sys in (SADDLE, saddle_nonautonomous(), stable_scalar(2.0),
                autonomous_system([[-1.0, 0.3], [0.2, 2.0]])):
        assert cocycle_defect(sys, tr) < 1e-12


def test_clamped_exp():
    assert clamped_exp(np.array([EXP_FLOOR - 1.0]))[0] == 0.0
    assert clamped_exp(np.array([0.0]))[0] == 1.0


# --- mild solutions ---------------------------------------------------------

LINE = Grid.from_range(-30.0, 30.0, 0.01)


def test_mild_line_zero():
    u, _ = mild_solution_line(SADDLE, constant([0.0, 0.0], LINE, "full_line"))
    assert np.all(u.values == 0.0)


def test_mild_line_constant():
    u, cert = mild_solution_line(SADDLE, constant([1.0, 1.0], LINE, "full_line"), 1e-6)
    assert np.max(np.abs(u.values - np.array([1.0, -1.0]))) < 1e-4 + 1e-6
    assert cert.tail_bound <= 1e-6 * (1 + 1e-9)


def test_mild_line_identity(rng):
    f = from_function(lambda t: np.stack([np.sin(t), np.cos(0.7 * t)], axis=1), LINE,
                      "full_line")
    u, _ = mild_solution_line(SADDLE, f, 1e-6)
    nodes = u.times[::50]
    pairs = []
    for _ in range(20):
        a, b = sorted(rng.choice(nodes, 2, replace=False))
        pairs.append((a, b))
    # stable coordinate over long pairs
    assert integral_identity_residual(stable_scalar(1.0), u.with_values(u.values[:, :1]),
                                      f.with_values(f.values[:, :1]), pairs) < 1e-4
    # whole system over short pairs (the forward flow grows like e^{t-s} on the Q-range)
    short = [(a, a + 2.0) for a in nodes[:20]]
    assert integral_identity_residual(SADDLE, u, f, short) < 1e-4


def test_mild_line_coverage():
    with pytest.raises(DomainError):
        mild_solution_line(SADDLE, constant([1.0, 1.0], Grid.from_range(-5, 5, 0.01), "full_line"))


def test_mild_halfline():
    g = Grid.from_range(0.0, 10.0, 0.01)
    u = mild_solution_halfline(stable_scalar(), [0.0], constant(0.0, g))
    assert np.all(u.values == 0.0)
    stable = constant_diagonal([-1.0, -2.0])
    u = mild_solution_halfline(stable, [1.0, 0.0], constant([0.0, 0.0], g))
    assert np.allclose(u.values[:, 0], np.exp(-g.times), atol=1e-12)
    x0 = 0.5
    u = mild_solution_halfline(stable_scalar(), [x0], constant(1.0, g))
    ref = math.e ** 0 * np.exp(-g.times) * x0 + 1 - np.exp(-g.times)
    assert np.max(np.abs(u.scalar - ref)) < 1e-4


def test_mild_halfline_warns_outside_range():
    g = Grid.from_range(0.0, 5.0, 0.01)
    with pytest.warns(UserWarning):
        mild_solution_halfline(SADDLE, [0.0, 1.0], constant([0.0, 0.0], g))


# --- shift condition --------------------------------------------------------

def test_gamma_shift_autonomous():
    for sys in (SADDLE, autonomous_system([[-2.0, 1.0], [0.0, 1.0]])):
        for dom in ("half_line", "full_line"):
            r = gamma_shift_condition(sys, 0.0, [0.0, 5.0], 1.0, dom, k_max=4, per_block=51)
            assert np.all(r == 0.0)
        r = gamma_shift_condition(sys, 1.5, [3.0], 1.0, "full_line", k_max=4, per_block=51)
        # only the analytic tail bound remains
        assert r[0] < 0.25


def test_gamma_shift_nonautonomous_decays():
    sys = saddle_nonautonomous()
    r = gamma_shift_condition(sys, 1.0, [2.0, 10.0, 40.0], 1.0, "full_line", k_max=30,
                              per_block=201)
    assert r[0] > r[1] > r[2]


# --- Picard -----------------------------------------------------------------

PG = Grid.from_range(-10.0, 10.0, 0.1)


def test_picard_zero():
    res = picard_semilinear(SADDLE, lambda t, x: np.zeros_like(x), 0.1, PG)
    assert res.iterations == 1 and np.all(res.solution.values == 0.0)


def test_picard_constant():
    c = np.array([0.7, -0.3])
    res = picard_semilinear(SADDLE, lambda t, x: np.tile(c, (t.size, 1)), 0.1, PG)
    u = res.solution.values
    mid = np.abs(PG.times) < 3
    assert np.max(np.abs(u[mid] - np.array([c[0], -c[1]]))) < 1e-3


def test_picard_ratio_bound():
    L = 0.3
    F = lambda t, x: L * np.sin(x) + np.stack([np.cos(t), np.sign(np.sin(t))], axis=1)
    res = picard_semilinear(SADDLE, F, L, PG, tol=1e-11)
    assert res.contraction_estimate <= res.theoretical_factor + 1e-6
    assert res.fixed_point_residual < 1e-9


def test_picard_refuses():
    with pytest.raises(ContractionError):
        picard_semilinear(SADDLE, lambda t, x: x, 0.6, PG)


def test_picard_lipschitz_mismatch():
    with pytest.raises(ContractionError):
        picard_semilinear(SADDLE, lambda t, x: 2.0 * x, 0.1, PG)


def test_picard_nonconvergence():
    F = lambda t, x: 0.45 * np.sin(x) + 1.0
    with pytest.raises(ConvergenceError) as e:
        picard_semilinear(SADDLE, F, 0.45, PG, max_iter=2, tol=1e-14)
    assert len(e.value.history) == 2


def test_picard_halfline():
    g = Grid.from_range(0.0, 10.0, 0.05)
    sys = stable_scalar(1.0)
    res = picard_semilinear(sys, lambda t, x: np.ones_like(x), 0.5, g, "half_line", x0=[0.0])
    assert np.max(np.abs(res.solution.scalar - (1 - np.exp(-g.times)))) < 1e-3
