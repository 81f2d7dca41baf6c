import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plap_hartree.errors import ParameterError, RootDegeneracyError
from plap_hartree.model import (ProblemParams, Variant, critical_exponents, decay_roots,
                                exponents, root_polynomial)
from plap_hartree.oracles import quadratic_roots


def hs(N, p, mu=0.0, s=0.0):
    return ProblemParams(N, p, mu, s, variant=Variant.HARDY_SOBOLEV)


@st.composite
def instances(draw, mu_zero=None):
    N = draw(st.integers(2, 12))
    p = draw(st.floats(1.05, N - 0.05))
    mb = ((N - p) / p) ** p
    zero = draw(st.booleans()) if mu_zero is None else mu_zero
    mu = 0.0 if zero else draw(st.floats(0.001, 0.999)) * mb
    return N, p, mu


def test_critical_exponents_examples():
    assert critical_exponents(ProblemParams(6, 2.0))[0] == pytest.approx(3.0, abs=1e-14)
    assert critical_exponents(hs(5, 2.0, s=1.0))[1] == pytest.approx(8 / 3, abs=1e-14)
    wh = ProblemParams(5, 2.0, 0.0, 0.0, 4.0, Variant.WEIGHTED_HARTREE)
    assert critical_exponents(wh)[2] == pytest.approx(2.0, abs=1e-14)
    assert critical_exponents(ProblemParams(5, 2.0))[2] is None


def test_mu_bar():
    assert ProblemParams(5, 2.0).mu_bar == pytest.approx(2.25)


def test_decay_roots_mu_zero_exact():
    for N, p in [(3, 1.2), (5, 2.0), (7, 3.3), (10, 1.01 + 1e-9)]:
        assert decay_roots(hs(N, p)) == (0.0, (N - p) / (p - 1))


def test_decay_roots_quadratic_example():
    g1, g2 = decay_roots(ProblemParams(5, 2.0, 1.0))
    assert g1 == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
    assert g2 == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)
    assert round(g1, 7) == 0.381966
    assert round(g2, 7) == 2.618034


def test_decay_roots_near_degenerate():
    g1, g2 = decay_roots(ProblemParams(5, 2.0, 2.25 * (1 - 1e-10)))
    assert abs(g1 - 1.5) < 1e-4 and abs(g2 - 1.5) < 1e-4
    assert g1 < 1.5 < g2


def test_decay_roots_rejects_mu_bar():
    with pytest.raises(ParameterError):
        ProblemParams(5, 2.0, 2.25)
    object_params = ProblemParams(5, 2.0, 2.0)
    object.__setattr__(object_params, "mu", 2.25)
    with pytest.raises(RootDegeneracyError):
        decay_roots(object_params)


def test_validation_messages():
    with pytest.raises(ParameterError, match="1 < p < N"):
        ProblemParams(5, 5.0)
    with pytest.raises(ParameterError, match="p < N/2"):
        ProblemParams(5, 2.5)
    with pytest.raises(ParameterError, match="sigma"):
        ProblemParams(5, 2.0, 0.0, 0.5, 4.0, Variant.WEIGHTED_HARTREE)
    with pytest.raises(ParameterError):
        hs(5, 2.0, s=2.0)
    with pytest.raises(ParameterError):
        ProblemParams(5, 2.0, -0.1)


def test_variant_parse():
    assert Variant.parse("hardy_sobolev") is Variant.HARDY_SOBOLEV
    assert Variant.parse("WeightedHartree") is Variant.WEIGHTED_HARTREE
    with pytest.raises(ParameterError):
        Variant.parse("Choquard")


def test_exponents_bundle():
    ex = exponents(ProblemParams(5, 2.0, 1.0))
    assert ex.mu_bar == pytest.approx(2.25)
    assert ex.p_star == pytest.approx(10 / 3)
    assert ex.gamma1 + ex.gamma2 == pytest.approx(3.0, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_ordering_chain(inst):
    N, p, mu = inst
    g1, g2 = decay_roots(hs(N, p, mu))
    assert 0 <= g1 < (N - p) / p < g2 <= (N - p) / (p - 1)
    assert (g2 == (N - p) / (p - 1)) == (mu == 0.0)


@settings(max_examples=300, deadline=None)
@given(instances(mu_zero=False))
def test_root_residual(inst):
    N, p, mu = inst
    mb = ((N - p) / p) ** p
    for g in decay_roots(hs(N, p, mu)):
        assert abs(root_polynomial(g, N, p, mu)) <= 1e-12 * mb


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 12), st.floats(0.0, 0.999))
def test_quadratic_closed_form(N, frac):
    mu = frac * ((N - 2) / 2) ** 2
    got = decay_roots(hs(N, 2.0, mu))
    want = quadratic_roots(N, mu)
    for a, b in zip(got, want):
        assert abs(a - b) <= 1e-12 * max(abs(b), 1e-300) or abs(a - b) <= 1e-13


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 10), st.floats(1.1, 2.9))
def test_roots_monotone_in_mu(N, p):
    p = min(p, N - 0.1)
    mb = ((N - p) / p) ** p
    ladder = [mb * k / 20 for k in range(20)]
    g = np.array([decay_roots(hs(N, p, mu)) for mu in ladder])
    assert np.all(np.diff(g[:, 0]) > 0)
    assert np.all(np.diff(g[:, 1]) < 0)
