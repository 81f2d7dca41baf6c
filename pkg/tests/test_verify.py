import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plap_hartree.model import ProblemParams, Variant, decay_roots, exponents
from plap_hartree.radial import RadialGrid, RadialProfile
from plap_hartree.verify import (VerifyOptions, check_monotone, check_sharp_asymptotics,
                                 doubling_check, doubling_ratios, fit_decay_exponent,
                                 moving_plane_deficit, run_battery, scaling_form_check)

GRID = RadialGrid(1e-4, 1e4, 2048)
R = GRID.nodes


def prof(values, N=5):
    return RadialProfile(GRID, values, N)


def blend(g1, g2):
    return prof(R ** -g1 * (1 + R) ** (g1 - g2))


# ---------------------------------------------------------------------------
# exponent fits


@pytest.mark.parametrize("gamma", [0.0, 0.38, 1.5, 3.0])
def test_fit_exact_power(gamma):
    fit, err = fit_decay_exponent(prof(R ** -gamma), (1e-2, 1e1))
    assert fit == pytest.approx(gamma, abs=1e-12)
    assert err <= 1e-12


def test_fit_perturbed_power():
    g = 0.7
    fit, _ = fit_decay_exponent(prof(2.5 * R ** -g * (1 + 0.01 * R)), (1e-3, 1e-2))
    assert abs(fit - g) <= 0.01


def test_fit_analytic_tail():
    fit, _ = fit_decay_exponent(prof((1 + R * R) ** -1.5), (1e2, 1e3))
    assert fit == pytest.approx(3.0, abs=0.01)


@pytest.mark.parametrize("window,msg", [((1.0, 5.0), "decade"), ((1e-5, 1e-3), "outside"),
                                        ((2.0, 1.0), "bad window")])
def test_fit_window_errors(window, msg):
    with pytest.raises(ValueError, match=msg):
        fit_decay_exponent(prof(R ** -1.0), window)


def test_fit_rejects_nonpositive():
    with pytest.raises(ValueError, match="positive"):
        fit_decay_exponent(prof(np.where(R < 1, 1.0, 0.0)), (1.0, 100.0))


# ---------------------------------------------------------------------------
# sharp asymptotics


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
def test_asymptotics_blend_passes(mu):
    params = ProblemParams(5, 2.0, mu)
    g1, g2 = decay_roots(params)
    rep = check_sharp_asymptotics(blend(g1, g2), exponents(params), tol=0.05)
    assert rep.passed, rep.passes
    assert rep.near_window == (2e-4, 2e-3) and rep.far_window == (5e2, 5e3)


def test_asymptotics_mu0_gradient_near_is_smooth():
    # for γ₁ = 0 the blend is C¹ at the origin: |u'| → const, so the gradient
    # exponent measured near 0 is 0 rather than γ₁ + 1 = 1
    rep = check_sharp_asymptotics(blend(0.0, 3.0), (0.0, 3.0), tol=0.05)
    assert rep.passes["gamma_near"] and rep.passes["gamma_far"] and rep.passes["grad_far"]
    assert rep.grad_near_fit == pytest.approx(0.0, abs=0.01)
    assert not rep.passes["grad_near"]


def test_asymptotics_gaussian_fails_far():
    rep = check_sharp_asymptotics(prof(np.exp(-R ** 2) + 1e-300), (0.38, 2.62))
    assert not rep.passes["gamma_far"]
    assert not rep.passed


def test_asymptotics_offset_fails():
    params = ProblemParams(5, 2.0, 1.0)
    g1, g2 = decay_roots(params)
    assert not check_sharp_asymptotics(blend(g1, g2), (g1, g2), offset=0.5).passed


def test_asymptotics_on_solved_profile(hartree_mu1):
    params, u, _ = hartree_mu1
    assert check_sharp_asymptotics(u, exponents(params), tol=0.1).passed


# ---------------------------------------------------------------------------
# doubling estimates


@pytest.mark.parametrize("gamma", [0.382, 1.5, 2.618])
def test_doubling_ratios_constant_on_power(gamma):
    params = ProblemParams(5, 2.0, 1.0)
    u = prof(R ** -gamma)
    for pbar in (10 / 3, 20 / 3):
        rat = doubling_ratios(u, params, 0.25 * 2.0 ** np.arange(5), pbar)
        assert np.max(np.abs(rat / rat[0] - 1)) <= 1e-6


def test_doubling_on_solved_profile(hartree_mu1):
    params, u, _ = hartree_mu1
    rep = doubling_check(u, params)
    assert rep.passed, rep.passes
    assert rep.small_exponent > 0 and rep.large_exponent < 0


def test_doubling_inadmissible_tail_fails():
    # tail r^{-1} < (N-p)/p: the complement norm grows with R
    params = ProblemParams(5, 2.0, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rep = doubling_check(prof((1 + R) ** -1.0), params)
    assert not rep.passes["complement_exponent_large"]


def test_doubling_range_error():
    params = ProblemParams(5, 2.0, 1.0)
    with pytest.raises(ValueError, match="leaves the grid"):
        doubling_ratios(prof(R ** -1.0), params, [1e-4], 10 / 3)


# ---------------------------------------------------------------------------
# monotonicity, scaling form, moving planes


def test_monotone_blend_and_bump():
    assert check_monotone(blend(0.38, 2.62))
    v = R ** -0.38 * (1 + R) ** -2.24
    i0 = int(GRID.index_of(3.0))
    v = v + 0.5 * v[i0] * np.exp(-((np.log(R) - np.log(3.0)) / 0.1) ** 2)
    res = check_monotone(prof(v))
    assert not res.monotone and res.worst_ratio > 1
    assert abs(R[res.worst_index] - 3.0) < 1.0


def test_monotone_solved(hartree_mu1, talenti_solution):
    for _, u, _ in (hartree_mu1, talenti_solution):
        assert check_monotone(u)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.4), st.floats(1.6, 4.0), st.floats(0.3, 3.0))
def test_scaling_identity(a, b, rho):
    # ρ near 1 keeps u(1), hence λ, moderate so the rescaled profile stays on the grid
    params = ProblemParams(5, 2.0, 0.0, variant=Variant.HARDY_SOBOLEV)
    u = prof((R / rho) ** -a * (1 + R / rho) ** (a - b))
    res = scaling_form_check(u, params)
    assert res.identity_error <= 1e-8


def test_scaling_quotient_invariance(hartree_mu1, kernels):
    params, u, _ = hartree_mu1
    res = scaling_form_check(u, params, kernels)
    assert res.passed and res.quotient_drift <= 1e-6


def test_scaling_zero_profile():
    with pytest.raises(ValueError):
        scaling_form_check(prof(np.zeros(GRID.M)), ProblemParams(5, 2.0, 1.0))


def test_moving_plane_decreasing_profile():
    u = blend(0.38, 2.62)
    scale = u.values.max()
    d = moving_plane_deficit(u, [-5.0, -2.0, -0.5, -1e-6], 64, 128, seed=1)
    assert np.all(d <= 1e-8 * scale)


def test_moving_plane_detects_bump():
    v = R ** -0.38 * (1 + R) ** -2.24
    v = v + 0.3 * np.exp(-((R - 4.0) / 0.5) ** 2)
    d = moving_plane_deficit(prof(v), [-0.5], 64, 128, seed=1)
    assert d[0] > 1e-3


def test_moving_plane_rejects_nonnegative_lambda():
    with pytest.raises(ValueError):
        moving_plane_deficit(blend(0.38, 2.62), [0.0])


# ---------------------------------------------------------------------------
# battery


def test_battery_deterministic_and_csv(tmp_path, hartree_mu1, kernels):
    params, u, _ = hartree_mu1
    opts = VerifyOptions(seed=3)
    a = run_battery(u, params, exponents(params), opts, kernels)
    b = run_battery(u, params, exponents(params), opts, kernels)
    assert [(r.check, r.measured) for r in a.rows] == [(r.check, r.measured) for r in b.rows]
    assert a.passed, a.failures()
    path = tmp_path / "rep.csv"
    a.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["check", "target", "measured", "tolerance", "pass"]
    assert all(r[4] == "true" for r in rows[1:])
    assert len(rows) == 1 + len(a.rows)


def test_battery_gaussian_fails_without_crashing(kernels):
    params = ProblemParams(5, 2.0, 1.0)
    rep = run_battery(prof(np.exp(-R ** 2) + 1e-300), params, exponents(params),
                      VerifyOptions(), kernels)
    assert not rep.passed
    assert "asymptotics_gamma_far" in rep.failures()
