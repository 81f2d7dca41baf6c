"""Post-hoc checks on computed profiles.

Decay-exponent fits, gradient asymptotics, annulus doubling estimates,
radial monotonicity, the scaling-form identity and a moving-plane
reflection deficit. Every check returns plain numbers plus pass flags;
:class:`VerifyReport` collects them as ``(check, target, measured,
tolerance, pass)`` rows.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import rayleigh
from .model import Exponents, ProblemParams, critical_exponents
from .radial import RadialProfile, annulus_integral, derivative, power_tails, rescale, sphere_area

log = logging.getLogger(__name__)

SIGN_MARGIN = 0.02
MONOTONE_SLACK = 1e-8


def default_windows(grid):
    near = (2.0 * grid.r_min, 20.0 * grid.r_min)
    far = (grid.r_max / 20.0, grid.r_max / 2.0)
    return near, far


def fit_decay_exponent(u: RadialProfile, window):
    """Negated least-squares slope of log u against log r over ``window``.

    Returns ``(gamma, stderr)``. The window must span at least one decade
    and lie inside the grid; ``u`` must be positive on it.
    """
    lo, hi = float(window[0]), float(window[1])
    g = u.grid
    if not (0 < lo < hi):
        raise ValueError(f"bad window {window}")
    if hi / lo < 10.0 * (1 - 1e-9):
        raise ValueError(f"window {window} spans less than one decade")
    if lo < g.r_min * (1 - 1e-9) or hi > g.r_max * (1 + 1e-9):
        raise ValueError(f"window {window} outside grid [{g.r_min}, {g.r_max}]")
    r = u.r
    sel = (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    v = np.abs(u.values[sel]) if u.signed else u.values[sel]
    if np.any(v <= 0):
        raise ValueError("profile not positive on the fit window")
    x, y = np.log(r[sel]), np.log(v)
    n = len(x)
    if n < 3:
        raise ValueError("fewer than three nodes in the fit window")
    xm = x - x.mean()
    sxx = float(np.sum(xm ** 2))
    slope = float(np.sum(xm * (y - y.mean())) / sxx)
    resid = y - y.mean() - slope * xm
    stderr = math.sqrt(float(np.sum(resid ** 2)) / (n - 2) / sxx)
    return -slope, stderr


@dataclass
class AsymptoticsReport:
    gamma_near_fit: float
    gamma_near_err: float
    gamma_far_fit: float
    gamma_far_err: float
    grad_near_fit: float
    grad_far_fit: float
    near_window: tuple
    far_window: tuple
    targets: dict
    tol: float
    passes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def check_sharp_asymptotics(u: RadialProfile, exponents, tol: float = 0.1,
                            near=None, far=None, offset: float = 0.0) -> AsymptoticsReport:
    """Compare fitted near/far exponents of ``u`` and ``|u'|`` with γ₁, γ₂.

    ``exponents`` is an :class:`Exponents` or a ``(gamma1, gamma2)`` pair.
    ``offset`` shifts every target (used to confirm the check can fail).
    """
    if isinstance(exponents, Exponents):
        g1, g2 = exponents.gamma1, exponents.gamma2
    else:
        g1, g2 = exponents
    dn, df = default_windows(u.grid)
    near = tuple(near or dn)
    far = tuple(far or df)
    du = derivative(u)
    grad = du.with_values(np.abs(du.values), signed=False)
    fits = {}
    for key, prof, win in (("gamma_near", u, near), ("gamma_far", u, far),
                           ("grad_near", grad, near), ("grad_far", grad, far)):
        try:
            fits[key] = fit_decay_exponent(prof, win)
        except ValueError:
            fits[key] = (math.nan, math.nan)
    targets = {"gamma_near": g1 + offset, "gamma_far": g2 + offset,
               "grad_near": g1 + 1 + offset, "grad_far": g2 + 1 + offset}
    passes = {k: bool(abs(fits[k][0] - targets[k]) <= tol) for k in targets}
    return AsymptoticsReport(fits["gamma_near"][0], fits["gamma_near"][1],
                             fits["gamma_far"][0], fits["gamma_far"][1],
                             fits["grad_near"][0], fits["grad_far"][0],
                             near, far, targets, tol, passes)


# ---------------------------------------------------------------------------
# doubling estimates


def ball_integral(u: RadialProfile, q: float, R: float) -> float:
    """∫_{|x|<R} u^q dx including the power-law head below r_min."""
    F = u.values ** q * u.r ** u.N
    head, _ = power_tails(F, u.grid.h, warn=False)
    inner = annulus_integral(u, q, u.grid.r_min, R) if R > u.grid.r_min else 0.0
    return sphere_area(u.N) * head + inner


def complement_integral(u: RadialProfile, q: float, R: float) -> float:
    """∫_{|x|>R} u^q dx including the power-law tail beyond r_max."""
    F = u.values ** q * u.r ** u.N
    _, tail = power_tails(F, u.grid.h, warn=False)
    outer = annulus_integral(u, q, R, u.grid.r_max) if R < u.grid.r_max else 0.0
    return sphere_area(u.N) * tail + outer


def default_dyadic_lists(grid):
    """Three dyadic lists (factor 16 each) near the origin, at r ~ 1 and far out."""
    k = 2.0 ** np.arange(5)
    return [100.0 * grid.r_min * k, 0.25 * k, grid.r_max / 200.0 * k]


def _log_slope(R, vals):
    R, vals = np.asarray(R), np.asarray(vals)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        return math.inf
    return float(np.polyfit(np.log(R), np.log(vals), 1)[0])


@dataclass
class DoublingReport:
    ratio_spread: dict          # (pbar label, list index) -> max/min ratio
    small_exponent: float
    large_exponent: float
    spread_limit: float
    margin: float

    @property
    def passes(self) -> dict:
        out = {f"doubling_{k[0]}_{k[1]}": bool(v <= self.spread_limit)
               for k, v in self.ratio_spread.items()}
        out["ball_exponent_small"] = bool(self.small_exponent >= self.margin)
        out["complement_exponent_large"] = bool(self.large_exponent <= -self.margin)
        return out

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def doubling_ratios(u: RadialProfile, params: ProblemParams, R_list, pbar: float):
    """Ratios ‖u‖_{p̄}(R/4, 4R) / (R^{-(N-p)/p + N/p̄} ‖u‖_{p*}(R/8, 8R))."""
    N, p = params.N, params.p
    p_star = critical_exponents(params)[0]
    g = u.grid
    out = []
    for R in R_list:
        if R / 8 < g.r_min * (1 - 1e-12) or 8 * R > g.r_max * (1 + 1e-12):
            raise ValueError(f"R={R}: annulus (R/8, 8R) leaves the grid")
        num = annulus_integral(u, pbar, R / 4, 4 * R) ** (1 / pbar)
        den = R ** (-(N - p) / p + N / pbar) * annulus_integral(u, p_star, R / 8, 8 * R) ** (1 / p_star)
        out.append(num / den)
    return np.array(out)


def doubling_check(u: RadialProfile, params: ProblemParams, dyadic_R_lists=None,
                   spread_limit: float = 10.0, margin: float = SIGN_MARGIN,
                   small_window=None, large_window=None) -> DoublingReport:
    """Bounded-constant annulus estimates and the signs of the ball-norm exponents.

    (ii) for p̄ ∈ {p*, 2p*} the doubling ratio varies by at most
    ``spread_limit`` along each dyadic list; (iii) the log-log slope of
    ‖u‖_{p*}(B_R) over the small window is ≥ ``margin`` and that of
    ‖u‖_{p*}(ℝ^N \\ B_R) over the large window is ≤ ``-margin``.
    """
    g = u.grid
    lists = dyadic_R_lists if dyadic_R_lists is not None else default_dyadic_lists(g)
    if isinstance(lists, np.ndarray) and lists.ndim == 1:
        lists = [lists]
    p_star = critical_exponents(params)[0]
    spread = {}
    for label, pbar in (("pstar", p_star), ("2pstar", 2 * p_star)):
        for j, R_list in enumerate(lists):
            rat = doubling_ratios(u, params, R_list, pbar)
            spread[(label, j)] = float(rat.max() / rat.min())
    sw = small_window or (10 * g.r_min, 100 * g.r_min)
    lw = large_window or (g.r_max / 100, g.r_max / 10)
    Rs = np.geomspace(sw[0], sw[1], 9)
    Rl = np.geomspace(lw[0], lw[1], 9)
    small = _log_slope(Rs, [ball_integral(u, p_star, R) ** (1 / p_star) for R in Rs])
    large = _log_slope(Rl, [complement_integral(u, p_star, R) ** (1 / p_star) for R in Rl])
    return DoublingReport(spread, small, large, spread_limit, margin)


# ---------------------------------------------------------------------------
# monotonicity, scaling form, moving planes


@dataclass
class MonotoneResult:
    monotone: bool
    worst_ratio: float
    worst_index: int

    def __bool__(self):
        return self.monotone


def check_monotone(u: RadialProfile, slack: float = MONOTONE_SLACK) -> MonotoneResult:
    """Strict decrease ``u_{i+1} < u_i`` up to relative ``slack``.

    Returns the largest adjacent ratio ``u_{i+1}/u_i`` and the index ``i``
    where it occurs.
    """
    v = u.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v[:-1] > 0, v[1:] / v[:-1], np.where(v[1:] > 0, np.inf, 1.0))
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    return MonotoneResult(bool(worst <= 1.0 + slack), worst, i)


@dataclass
class ScalingFormResult:
    lam: float
    identity_error: float
    quotient_drift: float
    identity_tol: float = 1e-8
    quotient_tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.identity_error <= self.identity_tol and self.quotient_drift <= self.quotient_tol


def scaling_form_check(u: RadialProfile, params: ProblemParams, kernels=None, V=None,
                       quotient_tol: float = 1e-6) -> ScalingFormResult:
    """Check ``u = λ^{(N-p)/p} U(λ x)`` with ``λ = u(1)^{p/(N-p)}``.

    ``Û(r) = λ^{-(N-p)/p} u(r/λ)`` must satisfy ``Û(λ) = 1`` and carry the
    same Rayleigh quotient as ``u`` (compared on the resampled profile).
    """
    if not np.any(u.values > 0):
        raise ValueError("zero profile")
    a = (params.N - params.p) / params.p
    u1 = float(u([1.0])[0])
    if u1 <= 0:
        raise ValueError("u(1) must be positive")
    lam = u1 ** (1.0 / a)
    identity = lam ** (-a) * float(u([lam / lam])[0])
    U = rescale(u, 1.0 / lam, -a)
    q0 = rayleigh(u, params, kernels, V).quotient
    q1 = rayleigh(U, params, kernels, V).quotient
    return ScalingFormResult(lam, abs(identity - 1.0), abs(q1 / q0 - 1.0),
                             quotient_tol=quotient_tol)


def moving_plane_deficit(u: RadialProfile, lambda_list, ray_count: int = 64,
                         points: int = 128, seed: int = 0):
    """Largest reflection deficit ``max(0, u(|x|) - u(|x_λ|))`` on Σ_λ per λ.

    Points lie on ``ray_count`` random rays leaving ``(λ, 0)`` into the
    half-space ``x₁ < λ`` of the ``(x₁, |x'|)`` half-plane, at ``points``
    log-spaced distances spanning the grid. ``x_λ = (2λ - x₁, x')``.
    Returns an array aligned with ``lambda_list``.
    """
    g = u.grid
    rng = np.random.default_rng(seed)
    out = []
    for lam in lambda_list:
        if lam >= 0:
            raise ValueError("moving-plane positions must be negative")
        theta = rng.uniform(0.5 * math.pi, math.pi, ray_count)
        t = np.geomspace(g.r_min, g.r_max, points)
        x1 = lam + np.outer(np.cos(theta), t)
        rho = np.outer(np.sin(theta), t)
        rx = np.hypot(x1, rho).ravel()
        rl = np.hypot(2 * lam - x1, rho).ravel()
        ok = (rx >= g.r_min) & (rx <= g.r_max) & (rl >= g.r_min) & (rl <= g.r_max)
        if not np.any(ok):
            out.append(0.0)
            continue
        d = u(rx[ok]) - u(rl[ok])
        out.append(float(max(0.0, d.max())))
    return np.array(out)


# ---------------------------------------------------------------------------
# aggregate report


@dataclass
class CheckRow:
    check: str
    target: float
    measured: float
    tolerance: float
    passed: bool


@dataclass
class VerifyReport:
    rows: list = field(default_factory=list)

    def add(self, check, target, measured, tolerance, passed):
        self.rows.append(CheckRow(check, float(target), float(measured), float(tolerance),
                                  bool(passed)))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r.check for r in self.rows if not r.passed]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "target", "measured", "tolerance", "pass"])
            for r in self.rows:
                w.writerow([r.check, repr(float(r.target)), repr(float(r.measured)), repr(float(r.tolerance)),
                            "true" if r.passed else "false"])


@dataclass
class VerifyOptions:
    tol: float = 0.1
    near_window: tuple | None = None
    far_window: tuple | None = None
    lambdas: tuple = (-5.0, -2.0, -0.5)
    ray_count: int = 64
    ray_points: int = 128
    deficit_tol: float = 1e-8
    spread_limit: float = 10.0
    sign_margin: float = SIGN_MARGIN
    monotone_slack: float = MONOTONE_SLACK
    quotient_tol: float = 1e-6
    gamma_offset: float = 0.0
    seed: int = 0


def run_battery(u: RadialProfile, params: ProblemParams, exponents,
                opts: VerifyOptions | None = None, kernels=None, V=None) -> VerifyReport:
    """All checks on one profile, one report row per assertion."""
    opts = opts or VerifyOptions()
    rep = VerifyReport()
    # a section that cannot be evaluated (zero tail, divergent integral)
    # fails its rows instead of aborting the battery
    errors = (ValueError, ArithmeticError)
    try:
        asy = check_sharp_asymptotics(u, exponents, opts.tol, opts.near_window,
                                      opts.far_window, opts.gamma_offset)
        fits = {"gamma_near": asy.gamma_near_fit, "gamma_far": asy.gamma_far_fit,
                "grad_near": asy.grad_near_fit, "grad_far": asy.grad_far_fit}
        for k, target in asy.targets.items():
            rep.add(f"asymptotics_{k}", target, fits[k], opts.tol, asy.passes[k])
    except errors as exc:
        log.warning("asymptotics not evaluable: %s", exc)
        rep.add("asymptotics", 0.0, math.nan, opts.tol, False)
    mono = check_monotone(u, opts.monotone_slack)
    rep.add("monotone", 1.0, mono.worst_ratio, opts.monotone_slack, mono.monotone)
    scale = float(u.values.max())
    deficits = moving_plane_deficit(u, opts.lambdas, opts.ray_count, opts.ray_points, opts.seed)
    for lam, d in zip(opts.lambdas, deficits):
        rep.add(f"moving_plane_{lam:g}", 0.0, d / scale, opts.deficit_tol,
                d <= opts.deficit_tol * scale)
    try:
        with np.errstate(invalid="ignore", divide="ignore"):
            dbl = doubling_check(u, params, spread_limit=opts.spread_limit,
                                 margin=opts.sign_margin)
        for (label, j), v in dbl.ratio_spread.items():
            rep.add(f"doubling_{label}_{j}", 1.0, v, opts.spread_limit, v <= opts.spread_limit)
        rep.add("ball_exponent_small", opts.sign_margin, dbl.small_exponent, opts.sign_margin,
                dbl.small_exponent >= opts.sign_margin)
        rep.add("complement_exponent_large", -opts.sign_margin, dbl.large_exponent,
                opts.sign_margin, dbl.large_exponent <= -opts.sign_margin)
    except errors as exc:
        log.warning("doubling check not evaluable: %s", exc)
        rep.add("doubling", 1.0, math.nan, opts.spread_limit, False)
    try:
        sf = scaling_form_check(u, params, kernels, V, opts.quotient_tol)
        rep.add("scaling_identity", 1.0, 1.0 + sf.identity_error, sf.identity_tol,
                sf.identity_error <= sf.identity_tol)
        rep.add("scaling_quotient", 0.0, sf.quotient_drift, sf.quotient_tol,
                sf.quotient_drift <= sf.quotient_tol)
    except errors as exc:
        log.warning("scaling check not evaluable: %s", exc)
        rep.add("scaling_quotient", 0.0, math.nan, opts.quotient_tol, False)
    return rep
