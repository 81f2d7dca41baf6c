import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plap_hartree.convolution import KernelStore
from plap_hartree.energy import (inequality_suite, multiplier_scale, numerator_parts,
                                 rayleigh, el_residual, sobolev_best_constant)
from plap_hartree.model import ProblemParams, Variant
from plap_hartree.oracles import radial_quad, sobolev_constant, talenti
from plap_hartree.radial import RadialGrid, RadialProfile, rescale
from plap_hartree.suite import cutoff_family

GRID = RadialGrid(1e-4, 1e4, 2048)
SMALL = RadialGrid(1e-4, 1e4, 512)
_store = KernelStore()

HS0 = ProblemParams(5, 2.0, 0.0, variant=Variant.HARDY_SOBOLEV)

VARIANTS = (
    ProblemParams(5, 2.0, 1.0),
    ProblemParams(5, 2.0, 0.5, s=0.5, variant=Variant.HARDY_SOBOLEV),
    ProblemParams(5, 2.0, 0.5, s=0.5, sigma=2.0, variant=Variant.WEIGHTED_HARTREE),
    ProblemParams(4, 1.5, 0.1),
    ProblemParams(5, 2.0, 0.5, variant=Variant.GENERAL_V),
)


def _bubble(grid, N=5):
    return RadialProfile(grid, talenti(grid.nodes, N), N, 2.0)


def _general_v(grid):
    return RadialProfile(grid, (1 + grid.nodes) ** -2.0, 5)


def test_scaling_invariance_of_all_fields(kernels):
    params = ProblemParams(5, 2.0, 1.0)
    u = _bubble(GRID)
    base = rayleigh(u, params, kernels)
    for lam in (1.7, 0.37):
        sc = rayleigh(rescale(u, lam, 1.5), params, kernels)
        for f in ("grad_term", "hardy_term", "pairing_norm", "quotient"):
            assert getattr(sc, f) == pytest.approx(getattr(base, f), rel=1e-6), f


def test_zero_profile_rejected():
    with pytest.raises(ValueError, match="zero profile"):
        rayleigh(RadialProfile(SMALL, np.zeros(SMALL.M), 5), HS0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_talenti_quotient_is_sobolev_constant():
    # oracle: adaptive quadrature of the closed form u = (1+r²)^{-3/2}
    N = 5
    grad = radial_quad(lambda r: (3 * r * (1 + r * r) ** -2.5) ** 2, N)
    l2s = radial_quad(lambda r: (1 + r * r) ** (-1.5 * 10 / 3), N) ** (3 / 5)
    oracle = grad / l2s
    assert oracle == pytest.approx(sobolev_constant(N), rel=1e-9)
    assert sobolev_best_constant(N) == pytest.approx(sobolev_constant(N), rel=1e-12)
    q = rayleigh(_bubble(GRID), HS0).quotient
    assert q ** 2 == pytest.approx(oracle, rel=1e-3)


def test_el_residual_talenti_and_bump():
    u = _bubble(GRID)
    assert el_residual(u, HS0) <= 1e-3
    bump = RadialProfile(GRID, np.exp(-np.log(GRID.nodes) ** 2)
                        + 1e-3 * (1 + GRID.nodes ** 2) ** -2.0, 5)
    assert el_residual(bump, HS0) > 0.1


def test_el_residual_invariant_under_scalar_multiple():
    u = RadialProfile(GRID, (1 + GRID.nodes ** 2) ** -1.7, 5)
    r0 = el_residual(u, HS0)
    for c in (1e-3, 4.2, 1e3):
        assert el_residual(u * c, HS0) == pytest.approx(r0, rel=1e-8)


def test_multiplier_scale_removes_multiplier():
    u = RadialProfile(GRID, (1 + GRID.nodes ** 2) ** -1.7, 5)
    lam = rayleigh(u, HS0).multiplier
    c = multiplier_scale(HS0, lam)
    assert rayleigh(u * c, HS0).multiplier == pytest.approx(1.0, rel=1e-10)
    assert multiplier_scale(ProblemParams(5, 2.0, 0.0, variant=Variant.GENERAL_V), lam) is None


def test_hardy_cutoff_family_approaches_bound_from_below():
    params = ProblemParams(5, 2.0, 0.0)
    bound = 1.0 / params.mu_bar
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3):
        g, h = numerator_parts(cutoff_family(GRID, eps, 1.5, 3.0), GRID, 5, 2.0, 1.0)
        ratios.append(h / g)
    assert all(x < bound for x in ratios)
    assert np.all(np.diff(ratios) > 0)


def test_inequality_suite_random_bumps(tmp_path, kernels):
    params = ProblemParams(5, 2.0, 0.0)
    rng = np.random.default_rng(5)
    r = GRID.nodes
    trials = {}
    for k in range(20):
        c, w = rng.uniform(-1.5, 1.5), rng.uniform(0.5, 2.0)
        # smooth log-space bump with an admissible r^{-4} tail
        trials[f"bump{k}"] = RadialProfile(
            GRID, np.exp(-((np.log(r) - c) / w) ** 2) + 1e-3 * (1 + r * r) ** -2.0, 5)
    rep = inequality_suite(trials, params, kernels, jobs=2)
    assert rep.passed
    for name in ("hardy", "hardy_sobolev", "pairing"):
        vals = [row.ratio for row in rep.rows if row.inequality == name]
        assert len(vals) == 20 and all(math.isfinite(v) and v > 0 for v in vals)
        assert rep.max_ratio(name) == max(vals)
    assert rep.max_ratio("hardy") < 1.0 / params.mu_bar
    assert rep.max_ratio("hardy_sobolev") <= 1.0 / sobolev_constant(5)
    path = tmp_path / "ineq.csv"
    rep.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["trial", "inequality", "ratio", "bound", "pass"]
    assert len(rows) == 1 + len(rep.rows)


def _random_profile(grid, a, b, rho, wiggle):
    r = grid.nodes
    x = r / rho
    return x ** -a * (1 + x) ** (a - b) * (1 + wiggle * np.exp(-np.log(x) ** 2))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.2), st.floats(1.8, 5.0), st.floats(0.05, 20.0),
       st.floats(0.0, 3.0), st.floats(0.0, 0.999))
def test_numerator_positive_below_mu_bar(a, b, rho, wiggle, frac):
    # head exponent a < (N-p)/p = 1.5 and tail b > 1.5 keep ∇u in L^p
    params = ProblemParams(5, 2.0, frac * 2.25, variant=Variant.HARDY_SOBOLEV)
    u = RadialProfile(SMALL, _random_profile(SMALL, a, b, rho, wiggle), 5)
    g, h = numerator_parts(u.values, SMALL, 5, 2.0, params.mu)
    assert g - h > 0


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(range(len(VARIANTS))), st.floats(0.0, 0.5), st.floats(3.0, 4.5),
       st.floats(0.2, 5.0), st.floats(1e-4, 1e4))
def test_quotient_homogeneous_of_degree_zero(idx, a, b, rho, c):
    params = VARIANTS[idx]
    u = RadialProfile(SMALL, _random_profile(SMALL, a, b, rho, 0.5), params.N)
    V = _general_v(SMALL) if params.variant is Variant.GENERAL_V else None
    q0 = rayleigh(u, params, _store, V).quotient
    q1 = rayleigh(u * c, params, _store, V).quotient
    assert abs(q1 / q0 - 1) <= 1e-10
