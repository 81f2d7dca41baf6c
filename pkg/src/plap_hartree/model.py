"""Equation instances and their closed-form / root-found exponents.

Four equation variants share one parameter record:

* ``Hartree``          -Δ_p u - μ u^{p-1}/|x|^p = (|x|^{-2p} * u^p) u^{p-1}
* ``HardySobolev``     -Δ_p u - μ u^{p-1}/|x|^p = |x|^{-s} u^{p_s-1}
* ``WeightedHartree``  -Δ_p u - μ u^{p-1}/|x|^p = |x|^{-s} (|x|^{-σ} * u^{p_{s,σ}}) u^{p_{s,σ}-1}
* ``GeneralV``         -Δ_p u - μ u^{p-1}/|x|^p = V(x) |x|^{-s} u^{p-1}
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import NonConvergenceError, ParameterError, RootDegeneracyError


class Variant(str, enum.Enum):
    HARTREE = "Hartree"
    HARDY_SOBOLEV = "HardySobolev"
    WEIGHTED_HARTREE = "WeightedHartree"
    GENERAL_V = "GeneralV"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for v in cls:
            if v.value.lower() == key:
                return v
        raise ParameterError(f"unknown variant {text!r}; expected one of "
                             + ", ".join(v.value for v in cls))


@dataclass(frozen=True)
class ProblemParams:
    """One equation instance.

    ``sigma`` is the Riesz exponent of the nonlocal term. For the Hartree
    variant it is forced to ``2p`` and ``s`` to 0; pass ``sigma=None`` to get
    that default.
    """

    N: int
    p: float
    mu: float = 0.0
    s: float = 0.0
    sigma: float | None = None
    variant: Variant = Variant.HARTREE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.sigma is None and self.variant is Variant.HARTREE:
            object.__setattr__(self, "sigma", 2.0 * self.p)
        self.validate()

    @property
    def mu_bar(self) -> float:
        return ((self.N - self.p) / self.p) ** self.p

    @property
    def nu(self) -> float:
        """Riesz exponent used by the nonlocal term (``2p`` or ``sigma``)."""
        if self.variant is Variant.HARTREE:
            return 2.0 * self.p
        return float(self.sigma)

    def validate(self) -> None:
        N, p, mu, s = self.N, self.p, self.mu, self.s
        if int(N) != N or N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {N}")
        if not (1.0 < p < N):
            raise ParameterError(f"need 1 < p < N, got p={p}, N={N}")
        if not (0.0 <= mu < self.mu_bar):
            raise ParameterError(
                f"need 0 <= mu < mu_bar = ((N-p)/p)^p = {self.mu_bar:.12g}, got mu={mu}")
        v = self.variant
        if v is Variant.HARTREE:
            if N < 3 or not (p < N / 2.0):
                raise ParameterError(f"Hartree needs N >= 3 and 1 < p < N/2, got N={N}, p={p}")
            if s != 0.0:
                raise ParameterError("Hartree needs s = 0")
            if not math.isclose(self.sigma, 2.0 * p, rel_tol=0, abs_tol=1e-14):
                raise ParameterError("Hartree needs sigma = 2p")
        elif v in (Variant.HARDY_SOBOLEV, Variant.GENERAL_V):
            if not (0.0 <= s < p):
                raise ParameterError(f"need 0 <= s < p, got s={s}")
        elif v is Variant.WEIGHTED_HARTREE:
            sig = self.sigma
            if sig is None:
                raise ParameterError("WeightedHartree needs sigma")
            if not (0.0 <= s < p):
                raise ParameterError(f"need 0 <= s < p, got s={s}")
            if not (s < sig < N):
                raise ParameterError(f"need s < sigma < N, got s={s}, sigma={sig}")
            if not (0.0 < sig + s <= 2.0 * p + 1e-14):
                raise ParameterError(f"need 0 < sigma + s <= 2p, got {sig + s}")

    def as_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "mu": self.mu, "s": self.s,
                "sigma": self.sigma, "variant": self.variant.value}


@dataclass(frozen=True)
class Exponents:
    mu_bar: float
    p_star: float
    p_s: float
    p_s_sigma: float | None
    gamma1: float
    gamma2: float


def hardy_best_constant(params: ProblemParams) -> float:
    """((N-p)/p)^p, the sharp constant of the L^p Hardy inequality."""
    N, p = params.N, params.p
    if not (1.0 < p < N):
        raise ParameterError(f"need 1 < p < N, got p={p}, N={N}")
    return ((N - p) / p) ** p


def critical_exponents(params: ProblemParams):
    """Return ``(p_star, p_s, p_s_sigma)``; the last is None unless WeightedHartree."""
    N, p, s = params.N, params.p, params.s
    p_star = N * p / (N - p)
    p_s = p * (N - s) / (N - p)
    p_s_sigma = None
    if params.variant is Variant.WEIGHTED_HARTREE:
        p_s_sigma = (2 * N - params.sigma - s) * p / (2.0 * (N - p))
    return p_star, p_s, p_s_sigma


def pairing_power(params: ProblemParams) -> float:
    """Exponent q of the density u^q fed to the Riesz potential."""
    if params.variant is Variant.HARTREE:
        return params.p
    if params.variant is Variant.WEIGHTED_HARTREE:
        return critical_exponents(params)[2]
    raise ParameterError(f"{params.variant.value} has no nonlocal term")


def root_polynomial(gamma, N, p, mu):
    """(p-1) γ^p - (N-p) γ^{p-1} + μ, the cleared form of the decay-rate equation."""
    if gamma == 0.0:
        return mu
    return (p - 1.0) * gamma ** p - (N - p) * gamma ** (p - 1.0) + mu


def _bisect(f, lo, hi, max_iter):
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def decay_roots(params: ProblemParams, tol: float = 1e-12, max_iter: int = 400):
    """Return the decay exponents ``(gamma1, gamma2)``.

    Bisection on the brackets ``[0, (N-p)/p]`` and ``[(N-p)/p, (N-p)/(p-1)]``
    where the cleared root polynomial changes sign. ``mu = 0`` returns the
    exact pair ``(0, (N-p)/(p-1))``.
    """
    N, p, mu = params.N, params.p, params.mu
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu_bar = hardy_best_constant(params)
    if mu >= mu_bar:
        raise RootDegeneracyError(f"mu={mu} >= mu_bar={mu_bar}: roots collapse")
    if mu < 0:
        raise ParameterError("mu must be nonnegative")
    g_mid = (N - p) / p
    g_hi = (N - p) / (p - 1.0)
    if mu == 0.0:
        return 0.0, g_hi

    def f(g):
        return root_polynomial(g, N, p, mu)

    g1 = _bisect(f, 0.0, g_mid, max_iter)
    g2 = _bisect(f, g_mid, g_hi, max_iter)
    for g in (g1, g2):
        if abs(f(g)) > tol * mu_bar:
            raise NonConvergenceError(
                f"bisection residual {abs(f(g)):.3e} exceeds {tol * mu_bar:.3e} at gamma={g}")
    return g1, g2


def exponents(params: ProblemParams, tol: float = 1e-12) -> Exponents:
    p_star, p_s, p_s_sigma = critical_exponents(params)
    g1, g2 = decay_roots(params, tol)
    return Exponents(hardy_best_constant(params), p_star, p_s, p_s_sigma, g1, g2)
