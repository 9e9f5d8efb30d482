import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaap import catalog as cat
from qaap.classify import (CLASSES, ConfigError, ScanConfig, anti_residual, classify,
                           compose_two_parameter, composition_exponent, extract_periodic_limit,
                           lipschitz_check, qaap_residual, random_pairs, relative_density,
                           sp_qaap_residual, test_sap_omega, test_sp_sap_omega)
from qaap.signal import Grid, SampledSignal, constant, from_function, sup_norm


@pytest.fixture(scope="module")
def step():
    return cat.render("step", -200.0, 200.0, 0.01)


# --- residuals --------------------------------------------------------------

def test_residual_tau_zero(step):
    assert qaap_residual(step, 0.0, 3.0) == 0.0
    assert sp_qaap_residual(step, 0.0, 3.0, 2.0) == 0.0


def test_residual_step_tails(step):
    assert qaap_residual(step, 5.0, 6.0) == 0.0
    half = cat.render("step", 0.0, 200.0, 0.01)
    for p in (1.0, 2.0, 4.0):
        assert sp_qaap_residual(half, 5.0, 6.0, p) == 0.0
        # on the line the window [t, t+1] must clear the bridge: t <= -7
        assert sp_qaap_residual(step, 5.0, 7.0, p) == 0.0


def test_sp_residual_step_window_at_cutoff(step):
    # the window starting at t = -6 sees f(s + 5) on the bridge [-1, 0]
    assert sp_qaap_residual(step, 5.0, 6.0, 1.0) == pytest.approx(0.5, abs=1e-4)
    assert sp_qaap_residual(step, 5.0, 6.0, 2.0) == pytest.approx(3 ** -0.5, abs=1e-4)


@pytest.mark.xfail(strict=True, reason="on the full line the unit window at t = -6 overlaps "
                   "the bridge, so the residual at M = 6 is 0.5 for p = 1")
def test_sp_residual_step_full_line_zero_at_six(step):
    assert sp_qaap_residual(step, 5.0, 6.0, 1.0) == 0.0


def test_residual_sin_log():
    f = cat.render("sin_log", 0.0, 500.0, 0.01)
    r = qaap_residual(f, 1.0, 99.0)
    t, v = f.times, f.scalar
    brute = max(abs(v[i + 100] - v[i]) for i in range(len(t) - 100) if t[i] >= 99.0 - 1e-9)
    assert r == brute
    assert r <= 0.01


def test_sp_residual_sign_sin():
    h = 0.01
    f = cat.render("sign_sin", 0.0, 200.0, h)
    tau = round(2 * math.pi / h) * h
    assert sp_qaap_residual(f, tau, 10.0, 1.0) <= 2 * h


def test_residual_empty_is_none(step):
    assert qaap_residual(step, 5.0, 1000.0) is None
    assert anti_residual(step, 5.0, 1000.0) is None


# --- classify ---------------------------------------------------------------

def test_classify_step_qaap(step):
    rep = classify(step, ScanConfig.default(step, 0.1), "QAAP")
    assert rep.verdict == "supported"
    assert rep.chosen_L is not None
    assert relative_density(rep.accepted_taus, rep.chosen_L, (0.0, max(rep.per_tau[-1].tau, 0)))


def test_classify_step_ap(step):
    rep = classify(step, ScanConfig.default(step, 0.1), "AP")
    assert rep.verdict == "falsified"
    assert rep.witnesses
    a_tau, t, r = rep.witnesses[-1]
    assert r > 0.1 and -1.0 - a_tau <= t <= 0.0


def test_classify_product_falsified():
    f = cat.render("plateau_times_sign", 0.0, 400.0, 0.01)
    conf = ScanConfig.default(f, 0.2, p=1.0)
    rep = classify(f, conf, "SP_QAAP", anchors=cat.plateau_anchors(0.0, 400.0))
    assert rep.verdict == "falsified"
    assert len(rep.witnesses) > 0


def test_classify_unknown_class(step):
    with pytest.raises(ConfigError):
        classify(step, ScanConfig.default(step, 0.1), "BOHR")


def test_config_errors():
    with pytest.raises(ConfigError):
        ScanConfig(0.1, (), (1.0,), (1.0,))
    with pytest.raises(ConfigError):
        ScanConfig(0.1, (0.0,), (1.0,), (2.0, 1.0))
    with pytest.raises(ConfigError):
        ScanConfig(-1.0, (0.0,), (1.0,), (1.0,))


def test_hybrid_class():
    g = Grid.from_range(0.0, 200.0, 0.01)
    f = from_function(lambda t: 1.0 / (1.0 + t), g)
    rep = classify(f, ScanConfig.default(f, 0.1), "QAAP_H")
    assert rep.verdict == "supported"
    s = from_function(np.sin, g)
    rep = classify(s, ScanConfig.default(s, 0.1), "QAAP_H")
    assert rep.verdict != "supported"


def test_anti_class():
    g = Grid(0.0, math.pi / 100, 6001)
    f = from_function(np.sin, g)
    rep = classify(f, ScanConfig.default(f, 0.1), "ANTI_QAAP")
    assert rep.verdict == "supported"


def test_report_dict_and_curves(step):
    rep = classify(step, ScanConfig.default(step, 0.1, max_taus=30), "QAAP")
    d = rep.to_dict()
    assert d["verdict"] == "supported" and d["resolution"]["step"] == 0.01
    rows = rep.curve_rows()
    assert len(rows) == len(rep.per_tau) * len(rep.M_grid) or len(rows) > 0


# --- relative density -------------------------------------------------------

def test_relative_density_examples():
    omega = 2.0
    acc = omega * np.arange(0, 51)
    assert relative_density(acc, 2 * omega, (0.0, 100.0))
    assert not relative_density([], 5.0, (0.0, 100.0))
    assert not relative_density([10.0], 50.0, (0.0, 100.0))


@given(st.lists(st.floats(0, 100), max_size=40), st.floats(0.5, 60))
def test_relative_density_brute(acc, L):
    acc = sorted(acc)
    starts = np.linspace(0, 100 - L, 400) if L < 100 else np.array([0.0])
    # every window [a, a+L] hit; sampled a gives a necessary condition
    res = relative_density(acc, L, (0.0, 100.0))
    if res:
        a = np.asarray(acc)
        for s in starts:
            assert np.any((a >= s - 1e-9) & (a <= s + L + 1e-9))


# --- SAP --------------------------------------------------------------------

Ms = np.geomspace(1.0, 300.0, 20)


def test_sap_ramp_and_plateau():
    r = cat.render("xie_zhang_ramp", 0.0, 400.0, 0.01)
    assert test_sap_omega(r, 2.0, 0.1, Ms).verdict == "supported"
    p = cat.render("sap4_plateau", 0.0, 400.0, 0.01)
    assert test_sap_omega(p, 4.0, 0.1, Ms).verdict == "supported"
    assert test_sp_sap_omega(p, 4.0, 2.0, 0.1, Ms).verdict == "supported"


def test_sap_sine_falsified():
    s = from_function(lambda t: np.sin(2 * np.pi * t), Grid.from_range(0.0, 400.0, 0.01))
    assert test_sap_omega(s, 0.5, 0.1, Ms).verdict == "falsified"


# --- periodic limit ---------------------------------------------------------

def test_periodic_limit_of_periodic():
    g = Grid.from_range(0.0, 100.0, 0.01)
    f = from_function(lambda t: np.sin(2 * np.pi * t), g)
    prof, q = extract_periodic_limit(f, 1.0)
    assert q < 1e-9
    assert np.allclose(prof.scalar, np.sin(2 * np.pi * prof.times), atol=1e-9)


def test_periodic_limit_recovers_part():
    g = Grid.from_range(0.0, 60.0, 0.01)
    f = from_function(lambda t: np.cos(np.pi * t) + np.exp(-t) * 3.0, g)
    prof, q = extract_periodic_limit(f, 2.0)
    assert np.allclose(prof.scalar, np.cos(np.pi * prof.times), atol=1e-12)
    assert q <= 3 * math.exp(-40) * 2 + 1e-12


def test_periodic_limit_step():
    f = cat.render("step", 0.0, 100.0, 0.01)
    prof, q = extract_periodic_limit(f, 1.0)
    assert np.all(prof.scalar == 1.0) and q == 0.0


def test_periodic_limit_too_short():
    f = constant(1.0, Grid.from_range(0.0, 6.0, 0.01))
    with pytest.raises(ConfigError):
        extract_periodic_limit(f, 1.0)


# --- composition ------------------------------------------------------------

def test_composition_exponent():
    assert composition_exponent(2.0, 2.0) == 1.0
    assert composition_exponent(3.0, 6.0) == 2.0
    with pytest.raises(ValueError):
        composition_exponent(1.0, 5.0)
    with pytest.raises(ValueError):
        composition_exponent(2.0, 1.5)


def test_compose_identity():
    f = cat.render("sin_log", 0.0, 50.0, 0.01)
    out = compose_two_parameter(lambda t, x: x, f)
    assert np.array_equal(out.values, f.values)


def test_compose_step_qaap():
    step = cat.render("step", -200.0, 200.0, 0.01)
    F = lambda t, x: cat.step(t)[:, None] + np.sin(x)
    assert lipschitz_check(F, 1.0, random_pairs(np.random.default_rng(0), 200, 1))
    out = compose_two_parameter(F, step)
    assert classify(out, ScanConfig.default(out, 0.1), "QAAP").verdict == "supported"


def test_lipschitz_check_rejects():
    F = lambda t, x: 3.0 * x
    assert not lipschitz_check(F, 1.0, random_pairs(np.random.default_rng(1), 20, 2))


# --- invariants -------------------------------------------------------------

sig_f = cat.render("sin_log", 0.0, 60.0, 0.05)
sig_g = cat.render("reciprocal_cos", 0.0, 60.0, 0.05)
taus = st.integers(0, 100).map(lambda k: 0.05 * k)
cuts = st.floats(0.0, 50.0)


@given(taus, cuts, st.floats(-5, 5))
def test_scaling(tau, M, c):
    a = qaap_residual(c * sig_f, tau, M)
    b = qaap_residual(sig_f, tau, M)
    assert a == pytest.approx(abs(c) * b, rel=1e-12, abs=1e-300)


@given(taus, cuts, st.floats(0.0, 0.5))
def test_uniform_limit(tau, M, delta):
    g = sig_f + delta * sig_g
    d = sup_norm(g - sig_f)
    assert abs(qaap_residual(g, tau, M) - qaap_residual(sig_f, tau, M)) <= 2 * d + 1e-12


@given(taus, cuts)
def test_anti_doubling(tau, M):
    for f in (sig_f, sig_g):
        lhs = qaap_residual(f, 2 * tau, M + tau)
        rhs = anti_residual(f, tau, M)
        if lhs is not None and rhs is not None:
            assert lhs <= 2 * rhs + 1e-12


@given(taus, cuts, st.tuples(st.sampled_from([1.0, 1.5, 2, 3]), st.sampled_from([1.0, 2, 4])))
def test_exponent_monotone(tau, M, pp):
    p, q = sorted(pp)
    a = sp_qaap_residual(sig_g, tau, M, p)
    b = sp_qaap_residual(sig_g, tau, M, q)
    if a is not None:
        assert a <= b * (1 + 1e-12) + 1e-12


@given(taus, cuts, st.sampled_from([1.0, 2.0]))
def test_sup_dominates_stepanov(tau, M, p):
    a = sp_qaap_residual(sig_g, tau, M, p)
    b = qaap_residual(sig_g, tau, M)
    if a is not None:
        assert a <= b + 1e-12


def test_classes_listed():
    assert set(CLASSES) == {"AP", "QAAP", "SP_QAAP", "QAAP_H", "SP_QAAP_H", "ANTI_QAAP"}
