"""Radial extremals of the critical Rayleigh quotients.

The discrete quotient ``J(u) = Num(u)^{1/p} / P(u)`` (see :mod:`.energy`)
is minimized by a preconditioned projected descent. At an iterate ``u``
the flux weights ``r_m^{N-p} |D_m|^{p-2}`` are frozen into a tridiagonal
M-matrix ``L`` and

    v = L^{-1} (μ H u^{p-1} + Λ B(u)),     Λ = Num(u) / ∫ W |x|^{-s} u^p,

is a positive candidate; ``u`` moves toward ``v`` by backtracking halving
until ``J`` decreases, then is renormalized to ``P = 1``. The fixed points
are exactly the discrete Euler-Lagrange solutions and ``v - u`` is
``-L^{-1}∇J`` up to a positive factor, so every accepted step descends.

For the nonlocal variants an outer loop freezes the Riesz potential ``W``
from the current iterate; the inner phase descends the quotient with that
``W`` held fixed.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import KernelStore
from .energy import (el_residual, frozen_weight, multiplier_scale, numerator_parts,
                     pairing_degree, rayleigh, stagger, trapezoid_weights, weighted_sum)
from .errors import DivergenceError, NonConvergenceError, ParameterError, PositivityLossError
from .model import ProblemParams, Variant, decay_roots
from .radial import RadialGrid, RadialProfile, read_profile_csv
from .verify import check_monotone, default_windows, fit_decay_exponent

log = logging.getLogger(__name__)

CLIP_LIMIT = 0.10
MIN_STEP = 2.0 ** -40


class SeedKind(str, enum.Enum):
    TWO_POWER_BLEND = "TwoPowerBlend"
    GAUSSIANLIKE = "Gaussianlike"
    FILE = "File"

    @classmethod
    def parse(cls, text) -> "SeedKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for k in cls:
            if k.value.lower() == key:
                return k
        raise ParameterError(f"unknown seed kind {text!r}")


@dataclass
class SolveOptions:
    max_outer: int = 200
    max_inner: int = 5
    step0: float = 1.0
    energy_tol: float = 1e-10
    residual_tol: float = 1e-4
    seed_profile: SeedKind = SeedKind.TWO_POWER_BLEND
    seed_path: str | None = None
    test_bumps: int = 12

    def __post_init__(self):
        self.seed_profile = SeedKind.parse(self.seed_profile)
        self.validate()

    def validate(self) -> None:
        if int(self.max_outer) < 1 or int(self.max_inner) < 1:
            raise ParameterError("iteration caps must be >= 1")
        if not (self.energy_tol > 0 and self.residual_tol > 0):
            raise ParameterError("tolerances must be positive")
        if not (0 < self.step0 <= 1):
            raise ParameterError("step0 must lie in (0, 1]")
        if self.seed_profile is SeedKind.FILE and not self.seed_path:
            raise ParameterError("File seed needs seed_path")


@dataclass
class SolveReport:
    quotient_history: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    pairing_history: list = field(default_factory=list)
    outer_quotients: list = field(default_factory=list)
    outer_residuals: list = field(default_factory=list)
    final_quotient: float = math.nan
    el_residual: float = math.nan
    outer_iters: int = 0
    inner_iters: int = 0
    fitted_gamma_near: float = math.nan
    fitted_gamma_far: float = math.nan
    monotone_flag: bool = False
    converged: bool = False
    clip_events: int = 0
    multiplier: float = math.nan
    multiplier_scale: float | None = None

    def summary(self) -> dict:
        return {
            "final_quotient": self.final_quotient,
            "el_residual": self.el_residual,
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "fitted_gamma_near": self.fitted_gamma_near,
            "fitted_gamma_far": self.fitted_gamma_far,
            "monotone_flag": self.monotone_flag,
            "converged": self.converged,
            "clip_events": self.clip_events,
            "multiplier": self.multiplier,
            "multiplier_scale": self.multiplier_scale,
            "normalization": "pairing_norm=1",
        }

    def history_monotone(self) -> bool:
        """Quotient history nonincreasing within every phase."""
        q, ph = np.asarray(self.quotient_history), np.asarray(self.phase)
        same = ph[1:] == ph[:-1]
        return bool(np.all(np.diff(q)[same] <= 0))

    def write(self, history_path, summary_path) -> None:
        with open(history_path, "w", newline="\n") as fh:
            fh.write("step,phase,quotient,pairing\n")
            for i, (q, ph, pn) in enumerate(zip(self.quotient_history, self.phase,
                                                self.pairing_history)):
                fh.write(f"{i},{ph},{float(q)!r},{float(pn)!r}\n")
        with open(summary_path, "w", newline="\n") as fh:
            for k, v in self.summary().items():
                fh.write(f"{k} = {v}\n")


def seed_profile(params: ProblemParams, grid: RadialGrid, kind="TwoPowerBlend",
                 path=None) -> RadialProfile:
    """Initial profile: ``r^{-γ₁}(1+r)^{γ₁-γ₂}``, ``exp(-r²)`` or a CSV file."""
    kind = SeedKind.parse(kind)
    r = grid.nodes
    if kind is SeedKind.TWO_POWER_BLEND:
        g1, g2 = decay_roots(params)
        vals = r ** (-g1) * (1.0 + r) ** (g1 - g2)
    elif kind is SeedKind.GAUSSIANLIKE:
        vals = np.exp(-r ** 2)
    else:
        u = read_profile_csv(path)
        if u.grid.digest() != grid.digest():
            vals = u(r, extrapolate=True)
        else:
            vals = u.values
    return RadialProfile(grid, vals, params.N, params.p)


class _Problem:
    """Discrete functional with the decay exponents fixed at the boundary."""

    def __init__(self, params, grid, kernels, V):
        self.params, self.grid, self.kernels, self.V = params, grid, kernels, V
        self.g1, self.g2 = decay_roots(params)
        self.omega = trapezoid_weights(grid)
        N, p, s = params.N, params.p, params.s
        r = grid.nodes
        self.rN_p = r ** (N - p)
        self.rN_s = r ** (N - s)
        self.rm = stagger(np.zeros(grid.M), grid)[0]
        self.head_c = r[0] ** (N - p) / (N - p - p * self.g1)
        self.tail_c = r[-1] ** (N - p) / (p * self.g2 + p - N)

    def numerator(self, v):
        p = self.params
        g, h = numerator_parts(v, self.grid, p.N, p.p, p.mu, self.g1, self.g2)
        return g - h

    def pairing(self, v, W, degree):
        """``∫ W |x|^{-s} u^p`` (frozen W) or the true pairing when ``W`` is None."""
        if W is None:
            W = frozen_weight(self._profile(v), self.params, self.kernels, self.V)
        return weighted_sum(W * v ** self.params.p * self.rN_s, self.grid, self.params.N)

    def _profile(self, v):
        return RadialProfile(self.grid, v, self.params.N, self.params.p)

    def candidate(self, v, W, num, den):
        """Positive solve ``L v_new = μ H v^{p-1} + Λ B(v)`` with frozen flux weights."""
        par = self.params
        N, p, mu, h = par.N, par.p, par.mu, self.grid.h
        _, D = stagger(v, self.grid)
        # |D|^{p-2} floored at the local amplitude scale: D spans many decades
        # on the grid, so a single global epsilon would flatten the tail
        eps = 1e-12 * np.maximum(np.maximum(v[:-1], v[1:]), 1e-300)
        c = self.rm ** (N - p) * (D * D + eps * eps) ** ((p - 2) / 2) / h
        # exterior energies with the decay exponents fixed give Robin terms at
        # both ends, regularized like the flux weights so they stay positive
        vmax = float(np.max(v))
        ends = []
        for x in (v[0], v[-1]):
            ev = 1e-12 * (x if x > 0 else vmax)
            ends.append((x * x + ev * ev) ** ((p - 2) / 2))
        e0 = abs(self.g1) ** p * self.head_c * ends[0]
        e1 = abs(self.g2) ** p * self.tail_c * ends[1]
        vp = v ** (p - 1)
        rhs = mu * self.omega * self.rN_p * vp + (num / den) * self.omega * W * self.rN_s * vp
        rhs[0] += mu * self.head_c * vp[0]
        rhs[-1] += mu * self.tail_c * vp[-1]
        return flux_solve(c, e0, e1, rhs)


def flux_solve(c, e0, e1, f):
    """Solve the weighted path Laplacian with Robin ends, ``L V = f``.

    Row ``i`` reads ``c_{i-1}(V_i - V_{i-1}) + c_i(V_i - V_{i+1}) = f_i`` with
    ``e0 V_0`` and ``e1 V_{M-1}`` added on the end rows. Written through the
    cell fluxes ``F_m = c_m (V_m - V_{m+1})`` the solution needs only sums of
    nonnegative terms when ``f >= 0``, so every component keeps full relative
    accuracy even when the values span many decades (a banded LU would lose
    the small tail values to cancellation). Requires ``e1 > 0``.
    """
    c = np.asarray(c, float)
    f = np.asarray(f, float)
    if e1 <= 0:
        raise ValueError("the tail Robin coefficient must be positive")
    S = np.cumsum(f)
    total = S[-1]
    inv = 1.0 / c
    after = np.cumsum(f[::-1])[::-1][1:]        # Σ_{k>m} f_k without cancellation
    den = 1.0 + e0 * float(np.sum(inv)) + e0 / e1
    V0 = (total / e1 + float(np.sum(S[:-1] * inv))) / den
    VM = (total + e0 * float(np.sum(after * inv))) / (e1 * den)
    F = S[:-1] - e0 * V0
    inc = F * inv
    V = np.empty(len(f))
    V[-1] = VM
    V[:-1] = VM + np.cumsum(inc[::-1])[::-1]
    return V


def _clip(v, report):
    neg = v < 0
    n = int(neg.sum())
    if n:
        report.clip_events += 1
        log.info("clipped %d negative nodes", n)
        if n > CLIP_LIMIT * len(v):
            raise PositivityLossError(f"{n} of {len(v)} nodes went negative")
        v = np.where(neg, 0.0, v)
        # re-smooth clipped nodes from their neighbours
        idx = np.flatnonzero(neg)
        left = v[np.maximum(idx - 1, 0)]
        right = v[np.minimum(idx + 1, len(v) - 1)]
        v[idx] = 0.5 * (left + right)
    return v


def solve_ground_state(params: ProblemParams, grid: RadialGrid, opts: SolveOptions | None = None,
                       kernels: KernelStore | None = None, V=None, seed: RadialProfile | None = None):
    """Minimize the critical Rayleigh quotient over radial profiles.

    Returns ``(profile, report)`` with the profile normalized to pairing
    norm 1. Raises :class:`NonConvergenceError` (carrying the partial report
    and profile) when the iteration caps are hit first.
    """
    opts = opts or SolveOptions()
    opts.validate()
    kernels = kernels or KernelStore()
    if params.variant is Variant.GENERAL_V and V is None:
        raise ParameterError("GeneralV needs a supplied V profile")
    prob = _Problem(params, grid, kernels, V)
    p = params.p
    deg = pairing_degree(params)
    nonlocal_ = params.variant in (Variant.HARTREE, Variant.WEIGHTED_HARTREE)
    u0 = seed if seed is not None else seed_profile(params, grid, opts.seed_profile, opts.seed_path)
    if np.any(u0.values < 0) or not np.any(u0.values > 0):
        raise ParameterError("seed profile must be nonnegative and nontrivial")
    v = np.array(u0.values, float)
    report = SolveReport()

    def true_den(x):
        return prob.pairing(x, None, deg)

    # the phase functional: frozen W (nonlocal) or the true pairing
    v = v * true_den(v) ** (-1.0 / deg)
    prev_q = None
    for outer in range(int(opts.max_outer)):
        report.outer_iters = outer + 1
        if nonlocal_:
            W = frozen_weight(prob._profile(v), params, kernels, V)
            d_phase = p
        else:
            W, d_phase = None, deg

        def phase_den(x):
            return prob.pairing(x, W, d_phase)

        den = phase_den(v)
        v = v * den ** (-1.0 / d_phase)
        num = prob.numerator(v)
        J = num ** (1.0 / p)
        for _ in range(int(opts.max_inner)):
            Wcur = W if W is not None else frozen_weight(prob._profile(v), params, kernels, V)
            cand = prob.candidate(v, Wcur, num, 1.0)
            tau = opts.step0
            accepted = False
            while tau >= MIN_STEP:
                trial = _clip((1 - tau) * v + tau * cand, report)
                try:
                    d = phase_den(trial)
                    if d > 0:
                        trial = trial * d ** (-1.0 / d_phase)
                        n_t = prob.numerator(trial)
                        if n_t > 0 and n_t ** (1.0 / p) <= J:
                            accepted = True
                            break
                except DivergenceError:
                    # the step spoilt a boundary power law; shorten it
                    pass
                tau *= 0.5
            if not accepted:
                break
            v, num, J = trial, n_t, n_t ** (1.0 / p)
            report.inner_iters += 1
            report.quotient_history.append(J)
            report.phase.append(outer)
            report.pairing_history.append(phase_den(v) ** (1.0 / d_phase))
        prof = prob._profile(v)
        en = rayleigh(prof, params, kernels, V, (prob.g1, prob.g2))
        res = el_residual(prof, params, kernels, opts.test_bumps, V, (prob.g1, prob.g2)) \
            if np.all(v > 0) else math.inf
        report.outer_quotients.append(en.quotient)
        report.outer_residuals.append(res)
        change = math.inf if prev_q is None else abs(en.quotient - prev_q) / en.quotient
        prev_q = en.quotient
        log.debug("outer %d: Q=%.12g change=%.3e residual=%.3e", outer, en.quotient, change, res)
        if change < opts.energy_tol and res < opts.residual_tol:
            report.converged = True
            break
    # final normalization on the true pairing
    v = v * true_den(v) ** (-1.0 / deg)
    prof = prob._profile(v)
    _finish(report, prof, params, kernels, V, prob, opts)
    if not report.converged:
        raise NonConvergenceError(
            f"no convergence after {report.outer_iters} outer / {report.inner_iters} inner "
            f"iterations (residual {report.el_residual:.3e})", report, prof)
    return prof, report


def _finish(report, prof, params, kernels, V, prob, opts):
    en = rayleigh(prof, params, kernels, V, (prob.g1, prob.g2))
    report.final_quotient = en.quotient
    report.multiplier = en.multiplier
    report.multiplier_scale = multiplier_scale(params, en.multiplier)
    if np.all(prof.values > 0):
        report.el_residual = el_residual(prof, params, kernels, opts.test_bumps, V,
                                         (prob.g1, prob.g2))
        near, far = default_windows(prof.grid)
        report.fitted_gamma_near = fit_decay_exponent(prof, near)[0]
        report.fitted_gamma_far = fit_decay_exponent(prof, far)[0]
    report.monotone_flag = check_monotone(prof).monotone
