"""Discrete variational objects: Rayleigh numerator, pairing norms, EL residual.

All functionals share one discretization on the log grid ``s = log r``:

* gradient term ``Σ_m h r_m^{N-p} |D_m|^p`` with ``D_m = (u_{i+1} - u_i)/h``
  on the staggered midpoints ``r_m = sqrt(r_i r_{i+1})``;
* zero-order terms by the trapezoid rule in ``s``;
* contributions of ``(0, r_min)`` and ``(r_max, ∞)`` in closed form from the
  boundary power laws (fitted from the two outermost nodes unless given).

The solver descends exactly this functional, so its stationary points have
a vanishing discrete residual.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .convolution import KernelStore, hartree_potential, riesz_convolve
from .errors import DivergenceError
from .model import ProblemParams, Variant, critical_exponents, pairing_power
from .radial import RadialGrid, RadialProfile, power_tails, rescale, sphere_area


@dataclass(frozen=True)
class EnergyBreakdown:
    grad_term: float
    hardy_term: float
    numerator: float
    pairing_norm: float
    quotient: float
    # ∫ W |x|^{-s} u^p, the integral the EL multiplier is measured against
    denominator: float = math.nan
    multiplier: float = math.nan


def trapezoid_weights(grid: RadialGrid) -> np.ndarray:
    w = np.full(grid.M, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def stagger(values, grid: RadialGrid):
    """Midpoint radii and ``du/ds`` on the staggered cells."""
    r = grid.nodes
    return np.sqrt(r[:-1] * r[1:]), np.diff(values) / grid.h


def fitted_end_exponents(values, h):
    """Decay exponents ``a, b`` with ``u ~ r^{-a}`` at the head, ``r^{-b}`` at the tail.

    ``None`` marks an end where the profile vanishes.
    """
    v = np.asarray(values, float)
    a = -math.log(v[1] / v[0]) / h if v[0] > 0 and v[1] > 0 else None
    b = -math.log(v[-1] / v[-2]) / h if v[-1] > 0 and v[-2] > 0 else None
    return a, b


def _head_coeff(a, N, p):
    den = N - p - p * a
    if den <= 0:
        raise DivergenceError(f"head exponent {a:.4f} >= (N-p)/p: gradient not integrable at 0")
    return 1.0 / den


def _tail_coeff(b, N, p):
    den = p * b + p - N
    if den <= 0:
        raise DivergenceError(f"tail exponent {b:.4f} <= (N-p)/p: gradient not integrable at infinity")
    return 1.0 / den


def numerator_parts(values, grid: RadialGrid, N: int, p: float, mu: float,
                    head_exp=None, tail_exp=None):
    """Return ``(grad_term, hardy_term)`` including the exterior contributions.

    ``head_exp``/``tail_exp`` are the decay exponents used beyond the grid;
    when omitted they are fitted from the boundary nodes.
    """
    v = np.asarray(values, float)
    r, h = grid.nodes, grid.h
    S = sphere_area(N)
    rm, D = stagger(v, grid)
    grad = h * np.sum(rm ** (N - p) * np.abs(D) ** p)
    hardy = np.sum(trapezoid_weights(grid) * r ** (N - p) * v ** p)
    a_fit, b_fit = fitted_end_exponents(v, h)
    a = head_exp if head_exp is not None else a_fit
    b = tail_exp if tail_exp is not None else b_fit
    if v[0] > 0 and a is not None:
        base = v[0] ** p * r[0] ** (N - p) * _head_coeff(a, N, p)
        grad += abs(a) ** p * base
        hardy += base
    if v[-1] > 0 and b is not None:
        base = v[-1] ** p * r[-1] ** (N - p) * _tail_coeff(b, N, p)
        grad += abs(b) ** p * base
        hardy += base
    return S * grad, S * mu * hardy


def weighted_sum(F, grid: RadialGrid, N: int) -> float:
    """|S^{N-1}| ∫ F ds with trapezoid weights plus power-law exterior parts.

    ``F`` is the integrand in ``s`` (already carrying the ``r^N`` Jacobian).
    """
    F = np.asarray(F, float)
    head, tail = power_tails(F, grid.h)
    if math.isinf(head) or math.isinf(tail):
        raise DivergenceError("pairing integral diverges beyond the grid")
    return sphere_area(N) * (float(np.sum(trapezoid_weights(grid) * F)) + head + tail)


def frozen_weight(u: RadialProfile, params: ProblemParams, kernels=None, V=None,
                  form: str = "variational"):
    """Weight ``W`` with ``rhs = W |x|^{-s} u^{p-1}`` in the Euler-Lagrange equation.

    HardySobolev: ``u^{p_s - p}``; GeneralV: the supplied ``V``; Hartree and
    WeightedHartree: ``K u^{q-p}`` with ``K = |x|^{-σ} * u^q``.

    For WeightedHartree with ``s > 0`` the derivative of the double integral
    carries the weight on both factors; ``form="variational"`` returns the
    symmetrized ``(K + |x|^s (|x|^{-σ} * |x|^{-s} u^q)) u^{q-p} / 2`` whose
    equation is the true stationarity condition of the quotient, while
    ``form="written"`` keeps ``K u^{q-p}`` alone. Both agree when ``s = 0``.
    """
    if form not in ("variational", "written"):
        raise ValueError(f"unknown form {form!r}")
    var = params.variant
    if var is Variant.HARDY_SOBOLEV:
        p_s = critical_exponents(params)[1]
        return u.values ** (p_s - params.p)
    if var is Variant.GENERAL_V:
        if V is None:
            raise ValueError("GeneralV needs a supplied V profile")
        Vv = V.values if isinstance(V, RadialProfile) else np.asarray(V, float)
        if Vv.shape != u.values.shape:
            raise ValueError("V must live on the profile grid")
        return Vv
    if kernels is None:
        kernels = KernelStore()
    q = pairing_power(params)
    K = hartree_potential(u, params, kernels).values
    if form == "variational" and params.s > 0:
        kern = kernels.get(u.grid, params.nu, params.N)
        r = u.r
        Ks = riesz_convolve(u.with_values(r ** (-params.s) * u.values ** q), kern).values
        K = 0.5 * (K + r ** params.s * Ks)
    with np.errstate(divide="ignore"):
        return K * np.where(u.values > 0, u.values, 0.0) ** (q - params.p)


def pairing_degree(params: ProblemParams) -> float:
    """Homogeneity degree of ``∫ W |x|^{-s} u^p`` in ``u``."""
    var = params.variant
    if var is Variant.HARDY_SOBOLEV:
        return critical_exponents(params)[1]
    if var is Variant.GENERAL_V:
        return params.p
    return 2.0 * pairing_power(params)


def multiplier_scale(params: ProblemParams, multiplier: float):
    """Factor ``c`` such that ``c·u`` solves the multiplier-free equation.

    If ``u`` satisfies the equation with right-hand side scaled by
    ``multiplier``, then ``c·u`` satisfies it with multiplier 1. Returns
    None for GeneralV, whose multiplier is an eigenvalue and cannot be
    scaled away.
    """
    deg = pairing_degree(params) - params.p
    if deg == 0:
        return None
    return multiplier ** (1.0 / deg)


def rayleigh(u: RadialProfile, params: ProblemParams, kernels=None, V=None,
             end_exponents=None) -> EnergyBreakdown:
    """Rayleigh numerator, pairing norm and quotient of ``u``.

    The quotient is ``numerator^{1/p} / pairing_norm``, homogeneous of
    degree 0, so no prior normalization of ``u`` is needed.
    """
    if u.N != params.N:
        raise ValueError(f"profile dimension {u.N} != N = {params.N}")
    if not np.any(u.values > 0):
        raise ValueError("zero profile: the Rayleigh quotient is undefined")
    N, p, s = params.N, params.p, params.s
    head, tail = end_exponents if end_exponents is not None else (None, None)
    grad, hardy = numerator_parts(u.values, u.grid, N, p, params.mu, head, tail)
    num = grad - hardy
    W = frozen_weight(u, params, kernels, V)
    den = weighted_sum(W * u.values ** p * u.r ** (N - s), u.grid, N)
    if den <= 0:
        raise ValueError("pairing integral vanishes")
    deg = pairing_degree(params)
    norm = den ** (1.0 / deg)
    quotient = max(num, 0.0) ** (1.0 / p) / norm
    return EnergyBreakdown(grad, hardy, num, norm, quotient, den, num / den)


def bump_family(grid: RadialGrid, count: int = 12):
    """Centre indices and half-width (in nodes) of the log-space test hats."""
    if count < 1:
        raise ValueError("need at least one test function")
    lo = grid.index_of(10.0 * grid.r_min)
    hi = grid.index_of(grid.r_max / 10.0)
    centres = np.unique(np.rint(np.linspace(lo, hi, count)).astype(int))
    width = max(1, int(round((hi - lo) / max(count - 1, 1))))
    return centres, width


def hat_values(grid: RadialGrid, centre: int, width: int) -> np.ndarray:
    i = np.arange(grid.M)
    return np.clip(1.0 - np.abs(i - centre) / width, 0.0, None)


def el_residual(u: RadialProfile, params: ProblemParams, kernels=None,
                test_bumps: int = 12, V=None, end_exponents=None,
                return_all: bool = False, form: str = "variational"):
    """Normalized weak Euler-Lagrange residual, maximized over the test hats.

    For each hat ψ_k computes
    ``a(u, ψ) - μ ∫ u^{p-1} ψ |x|^{-p} - Λ ∫ W |x|^{-s} u^{p-1} ψ`` where
    ``Λ = numerator / ∫ W |x|^{-s} u^p`` is the multiplier of the constrained
    problem, and divides by ``‖∇u‖_{L^p(supp ψ_k)}^{p-1} ‖∇ψ_k‖_p``, the
    Hölder bound of the flux term on the support of ψ_k. ``form`` selects
    the WeightedHartree right-hand side (see :func:`frozen_weight`).
    """
    if np.any(u.values <= 0):
        raise ValueError("EL residual needs u > 0 on the grid")
    grid, N, p, s, mu = u.grid, params.N, params.p, params.s, params.mu
    en = rayleigh(u, params, kernels, V, end_exponents)
    W = frozen_weight(u, params, kernels, V, form)
    r, h = grid.nodes, grid.h
    rm, D = stagger(u.values, grid)
    cell_grad = rm ** (N - p) * np.abs(D) ** p
    flux = rm ** (N - p) * np.abs(D) ** (p - 2) * D
    omega = trapezoid_weights(grid)
    zero = omega * u.values ** (p - 1) * (mu * r ** (N - p) + en.multiplier * W * r ** (N - s))
    S = sphere_area(N)
    centres, width = bump_family(grid, test_bumps)
    res = []
    for c in centres:
        psi = hat_values(grid, c, width)
        _, Dpsi = stagger(psi, grid)
        supp = Dpsi != 0
        a = h * np.sum(flux * Dpsi)
        b = np.sum(zero * psi)
        psi_norm = (S * h * np.sum(rm ** (N - p) * np.abs(Dpsi) ** p)) ** (1.0 / p)
        u_norm = (S * h * np.sum(cell_grad[supp])) ** ((p - 1) / p)
        res.append(abs(S * (a - b)) / (u_norm * psi_norm) if u_norm > 0 else math.inf)
    res = np.array(res)
    return res if return_all else float(res.max())


# ---------------------------------------------------------------------------
# inequality checks


@dataclass
class InequalityRow:
    trial: str
    inequality: str
    ratio: float
    bound: float
    passed: bool


@dataclass
class InequalityReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def max_ratio(self, inequality: str) -> float:
        vals = [r.ratio for r in self.rows if r.inequality == inequality]
        return max(vals) if vals else math.nan

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "inequality", "ratio", "bound", "pass"])
            for r in self.rows:
                w.writerow([r.trial, r.inequality, repr(float(r.ratio)), repr(float(r.bound)),
                            "true" if r.passed else "false"])


def sobolev_best_constant(N: int) -> float:
    """S with S ‖u‖_{2*}^2 ≤ ‖∇u‖_2^2."""
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)


def _ratios(u, params, kernels):
    N, p, s = params.N, params.p, params.s
    grad, hardy = numerator_parts(u.values, u.grid, N, p, 1.0)
    out = {"hardy": hardy / grad}
    p_s = critical_exponents(params)[1]
    hs = weighted_sum(u.values ** p_s * u.r ** (N - s), u.grid, N)
    out["hardy_sobolev"] = hs ** (p / p_s) / grad
    if 2 * p < N:
        kern = kernels.get(u.grid, 2.0 * p, N)
        V1 = riesz_convolve(u.with_values(u.values ** p), kern)
        pair = weighted_sum(V1.values * u.values ** p * u.r ** N, u.grid, N)
        out["pairing"] = pair / grad ** 2
    return out


def inequality_suite(trials, params: ProblemParams, kernels=None, jobs: int = 1,
                     scale: float = 2.0, scale_tol: float = 1e-3) -> InequalityReport:
    """Evaluate Hardy, Hardy-Sobolev and Riesz pairing ratios on trial profiles.

    ``trials`` is a mapping ``name -> RadialProfile`` (or a sequence, named by
    position). Checks, per trial:

    * hardy: ``∫ u^p |x|^{-p} / ‖∇u‖_p^p < 1/μ̄``;
    * hardy_sobolev: ratio finite, and below ``1/S`` for ``p = 2, s = 0``;
    * pairing (when ``2p < N``): ``∫ V_1 u^p / ‖∇u‖_p^{2p}`` finite;
    * *_scaling: each ratio unchanged, to ``scale_tol``, on the rescaled
      profile ``λ^{(N-p)/p} u(λ r)`` with ``λ = scale``.
    """
    if kernels is None:
        kernels = KernelStore()
    if not isinstance(trials, dict):
        trials = {f"trial{i}": u for i, u in enumerate(trials)}
    names = list(trials)
    a = (params.N - params.p) / params.p

    def work(name):
        u = trials[name]
        base = _ratios(u, params, kernels)
        scaled = _ratios(rescale(u, scale, a), params, kernels)
        return name, base, scaled

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(work, names))
    else:
        results = [work(n) for n in names]

    hardy_bound = 1.0 / ((params.N - params.p) / params.p) ** params.p
    hs_bound = math.inf
    if params.p == 2 and params.s == 0:
        hs_bound = 1.0 / sobolev_best_constant(params.N)
    rep = InequalityReport()
    for name, base, scaled in results:
        for key, val in base.items():
            if key == "hardy":
                bound, ok = hardy_bound, val < hardy_bound
            elif key == "hardy_sobolev":
                bound = hs_bound
                ok = math.isfinite(val) and val <= hs_bound * (1 + 1e-3)
            else:
                bound, ok = math.inf, math.isfinite(val)
            rep.rows.append(InequalityRow(name, key, val, bound, bool(ok)))
            drift = abs(scaled[key] / val - 1.0)
            rep.rows.append(InequalityRow(name, key + "_scaling", drift, scale_tol,
                                          bool(drift <= scale_tol)))
    return rep
