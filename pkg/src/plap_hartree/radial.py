"""Geometric radial grids, sampled radial profiles and weighted integrals.

All integrals use the measure ``|S^{N-1}| r^{N-1} dr = |S^{N-1}| r^N ds`` with
``s = log r``. Between nodes a profile is interpolated log-log linearly, so
every integrand of the form ``u^q r^{N-w}`` is exponential in ``s`` on each
cell and is integrated exactly there (logarithmic-mean rule, which reduces
to the trapezoid rule for slowly varying integrands).
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn

from .errors import ProfileFormatError


class DivergenceWarning(RuntimeWarning):
    pass


def sphere_area(N: int) -> float:
    """|S^{N-1}| = 2 π^{N/2} / Γ(N/2)."""
    return 2.0 * math.pi ** (N / 2.0) / gamma_fn(N / 2.0)


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = 1e-4
    r_max: float = 1e4
    M: int = 2048
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.r_min > 0 and self.r_max > self.r_min):
            raise ValueError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if int(self.M) != self.M or self.M < 16:
            raise ValueError(f"need M >= 16, got {self.M}")
        s = np.linspace(math.log(self.r_min), math.log(self.r_max), int(self.M))
        r = np.exp(s)
        r[0], r[-1] = self.r_min, self.r_max
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)

    @property
    def h(self) -> float:
        """Uniform spacing in log r."""
        return math.log(self.r_max / self.r_min) / (self.M - 1)

    @property
    def s(self) -> np.ndarray:
        return np.log(self.nodes)

    def digest(self) -> str:
        key = f"{self.r_min!r},{self.r_max!r},{int(self.M)}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def index_of(self, r: float) -> float:
        """Fractional node index of radius ``r``."""
        return math.log(r / self.r_min) / self.h


class RadialProfile:
    """A sampled radial function u(r_i) on a :class:`RadialGrid`.

    ``signed=True`` lifts the nonnegativity requirement (used for derivatives).
    """

    def __init__(self, grid: RadialGrid, values, N: int, p: float | None = None,
                 signed: bool = False):
        v = np.array(values, dtype=float)
        if v.shape != (grid.M,):
            raise ValueError(f"expected {grid.M} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if not signed and np.any(v < 0):
            raise ValueError("profile values must be nonnegative")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.N = int(N)
        self.p = p
        self.signed = signed

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values, signed=None) -> "RadialProfile":
        return RadialProfile(self.grid, values, self.N, self.p,
                             self.signed if signed is None else signed)

    def __mul__(self, c: float) -> "RadialProfile":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __call__(self, r, extrapolate: bool = False):
        """Evaluate the log-log linear interpolant at radii ``r``.

        Outside the grid a power law through the two boundary nodes is used
        when ``extrapolate`` is set; otherwise out-of-range radii raise.
        """
        r = np.asarray(r, dtype=float)
        g = self.grid
        x = np.log(r / g.r_min) / g.h
        if not extrapolate and (np.any(x < -1e-9) or np.any(x > g.M - 1 + 1e-9)):
            raise ValueError("radius outside the grid range")
        v = self.values
        i = np.clip(np.floor(x).astype(int), 0, g.M - 2)
        t = x - i
        a, b = v[i], v[i + 1]
        pos = (a > 0) & (b > 0)
        out = np.where(pos, 0.0, a + t * (b - a))
        with np.errstate(divide="ignore", invalid="ignore"):
            la = np.log(np.where(pos, a, 1.0))
            lb = np.log(np.where(pos, b, 1.0))
            out = np.where(pos, np.exp(la + t * (lb - la)), out)
        # outside the segment range t < 0 or t > 1 the same formula extrapolates
        # the boundary power law; for zero-valued ends it is clamped to zero
        out = np.where((~pos) & ((t < 0) | (t > 1)), 0.0, out)
        return out

    def boundary_slopes(self):
        """Local log-log slopes ``d log u / d log r`` at both ends (nan on zeros)."""
        v, h = self.values, self.grid.h
        with np.errstate(divide="ignore", invalid="ignore"):
            head = math.log(v[1] / v[0]) / h if v[0] > 0 and v[1] > 0 else float("nan")
            tail = math.log(v[-1] / v[-2]) / h if v[-1] > 0 and v[-2] > 0 else float("nan")
        return head, tail


class WeightedIntegral(NamedTuple):
    value: float
    head: float
    tail: float

    @property
    def total(self) -> float:
        return self.value + self.head + self.tail


def _segment_integrals(F, h):
    """Exact integrals of the log-linear interpolant of ``F >= 0`` over each cell."""
    F0, F1 = F[:-1], F[1:]
    out = np.zeros_like(F0)
    pos = (F0 > 0) & (F1 > 0)
    x = np.log(F1[pos] / F0[pos])
    small = np.abs(x) < 1e-6
    ratio = np.empty_like(x)
    ratio[small] = 1.0 + x[small] / 2.0 + x[small] ** 2 / 6.0
    xs = x[~small]
    ratio[~small] = np.expm1(xs) / xs
    out[pos] = h * F0[pos] * ratio
    return out


def log_integral(F, h):
    """∫ F ds over the grid for log-linear interpolated ``F >= 0``."""
    return float(np.sum(_segment_integrals(np.asarray(F, float), h)))


def power_tails(F, h, warn: bool = True):
    """Head/tail integrals ∫ F ds beyond the grid for power-law extrapolated F.

    ``F`` is the integrand with respect to ``s = log r``. The boundary power
    law is the one through the two outermost nodes. Returns ``inf`` (and
    warns) when the extrapolated integrand is not integrable.
    """
    F = np.asarray(F, float)
    head = tail = 0.0
    if F[0] > 0:
        k0 = math.log(F[1] / F[0]) / h if F[1] > 0 else math.inf
        head = F[0] / k0 if k0 > 0 else math.inf
    if F[-1] > 0:
        k1 = math.log(F[-1] / F[-2]) / h if F[-2] > 0 else -math.inf
        tail = F[-1] / (-k1) if k1 < 0 else math.inf
    if warn and (math.isinf(head) or math.isinf(tail)):
        warnings.warn("weighted integral diverges at the "
                      + ("head" if math.isinf(head) else "tail")
                      + " of the grid", DivergenceWarning, stacklevel=3)
    return head, tail


def integral_weighted(u: RadialProfile, q: float, w: float) -> WeightedIntegral:
    """∫ u^q |x|^{-w} dx  =  |S^{N-1}| ∫ u(r)^q r^{N-1-w} dr.

    ``value`` covers ``[r_min, r_max]``; ``head``/``tail`` are the power-law
    extrapolated contributions of ``(0, r_min)`` and ``(r_max, ∞)``.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    g = u.grid
    vals = np.abs(u.values) if u.signed else u.values
    F = vals ** q * g.nodes ** (u.N - w)
    S = sphere_area(u.N)
    head, tail = power_tails(F, g.h)
    return WeightedIntegral(S * log_integral(F, g.h), S * head, S * tail)


def derivative(u: RadialProfile) -> RadialProfile:
    """du/dr at the nodes via centred differences in log r.

    Where the three-point stencil is positive the difference is taken on
    ``log u`` (exact for power laws); otherwise on ``u`` itself. Endpoints
    use one-sided differences.
    """
    v, r, h = u.values, u.r, u.grid.h
    M = len(v)
    du_ds = np.empty(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = np.log(np.where(v > 0, np.abs(v), 1.0))
    pos = v > 0
    c_pos = pos[:-2] & pos[1:-1] & pos[2:]
    lin = (v[2:] - v[:-2]) / (2 * h)
    loglog = v[1:-1] * (lv[2:] - lv[:-2]) / (2 * h)
    du_ds[1:-1] = np.where(c_pos, loglog, lin)
    for i, j, sgn in ((0, 1, 1.0), (M - 1, M - 2, -1.0)):
        if pos[i] and pos[j]:
            du_ds[i] = sgn * v[i] * (lv[j] - lv[i]) / h
        else:
            du_ds[i] = sgn * (v[j] - v[i]) / h
    return u.with_values(du_ds / r, signed=True)


def lp_gradient_norm(u: RadialProfile, p: float) -> float:
    """‖∇u‖_p^p including power-law head/tail corrections."""
    du = derivative(u)
    return integral_weighted(du.with_values(np.abs(du.values), signed=False), p, 0.0).total


def annulus_integral(u: RadialProfile, q: float, R_lo: float, R_hi: float,
                     w: float = 0.0) -> float:
    """∫_{R_lo<|x|<R_hi} u^q |x|^{-w} dx on the log-log interpolant."""
    g = u.grid
    tol = 1e-12 * g.r_max
    if not (g.r_min * (1 - 1e-12) <= R_lo < R_hi <= g.r_max + tol):
        raise ValueError(f"annulus [{R_lo}, {R_hi}] outside grid [{g.r_min}, {g.r_max}]")
    xlo, xhi = g.index_of(R_lo), g.index_of(R_hi)
    i0 = int(math.ceil(xlo - 1e-9))
    i1 = int(math.floor(xhi + 1e-9))
    i0, i1 = max(i0, 0), min(i1, g.M - 1)
    r_pts = np.concatenate([[R_lo], g.nodes[i0:i1 + 1], [R_hi]])
    vals = np.concatenate([u([R_lo]), u.values[i0:i1 + 1], u([R_hi])])
    F = np.abs(vals) ** q * r_pts ** (u.N - w)
    ds = np.diff(np.log(r_pts))
    keep = ds > 1e-15
    F0, F1, d = F[:-1][keep], F[1:][keep], ds[keep]
    total = 0.0
    for a, b, dd in zip(F0, F1, d):
        total += _segment_integrals(np.array([a, b]), dd)[0]
    return sphere_area(u.N) * total


def annulus_norm(u: RadialProfile, q: float, R_lo: float, R_hi: float) -> float:
    """(∫_{R_lo<|x|<R_hi} u^q dx)^{1/q}."""
    return annulus_integral(u, q, R_lo, R_hi) ** (1.0 / q)


def rescale(u: RadialProfile, lam: float, a: float) -> RadialProfile:
    """The profile r ↦ λ^a u(λ r) resampled on the same grid.

    If ``log λ`` is an integer multiple of the grid step the result is an
    exact index shift (power-law extrapolation fills the vacated end);
    otherwise a cubic spline in (log r, log u) is used.
    """
    g = u.grid
    k = math.log(lam) / g.h
    target = g.nodes * lam
    if abs(k - round(k)) < 1e-9:
        k = int(round(k))
        idx = np.arange(g.M) + k
        vals = np.empty(g.M)
        inside = (idx >= 0) & (idx < g.M)
        vals[inside] = u.values[idx[inside]]
        if np.any(~inside):
            vals[~inside] = u(target[~inside], extrapolate=True)
    else:
        vals = _spline_eval(u, target)
    return u.with_values(lam ** a * vals)


def _spline_eval(u: RadialProfile, r):
    g = u.grid
    if np.any(u.values <= 0):
        return u(r, extrapolate=True)
    cs = CubicSpline(g.s, np.log(u.values))
    s = np.log(r)
    out = np.empty_like(s)
    inside = (s >= g.s[0]) & (s <= g.s[-1])
    out[inside] = np.exp(cs(s[inside]))
    if np.any(~inside):
        out[~inside] = u(r[~inside], extrapolate=True)
    return out


def write_profile_csv(path, u: RadialProfile, p: float | None = None) -> None:
    p = u.p if p is None else p
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# N={u.N} p={p if p is not None else ''}\n")
        fh.write("r,u\n")
        for r, v in zip(u.r, u.values):
            fh.write(f"{float(r)!r},{float(v)!r}\n")


def read_profile_csv(path) -> RadialProfile:
    """Read a two-column ``r,u`` profile.

    The radii must be a strictly increasing geometric sequence (the grid is
    rebuilt from its ends and count); values must be finite and nonnegative.
    """
    N = p = None
    rs, us = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        if k == "N" and v:
                            N = int(v)
                        elif k == "p" and v:
                            p = float(v)
                continue
            if line.lower().replace(" ", "") == "r,u":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ProfileFormatError(f"line {lineno}: expected two columns")
            try:
                r, v = float(parts[0]), float(parts[1])
            except ValueError:
                raise ProfileFormatError(f"line {lineno}: not a number") from None
            if not (math.isfinite(r) and math.isfinite(v)):
                raise ProfileFormatError(f"line {lineno}: non-finite value")
            if v < 0:
                raise ProfileFormatError(f"line {lineno}: negative u={v}")
            if rs and r <= rs[-1]:
                raise ProfileFormatError(f"line {lineno}: radii not increasing (r={r})")
            if r <= 0:
                raise ProfileFormatError(f"line {lineno}: nonpositive radius")
            rs.append(r)
            us.append(v)
    if N is None:
        raise ProfileFormatError("missing '# N=<n> p=<p>' header")
    grid = RadialGrid(rs[0], rs[-1], len(rs))
    if not np.allclose(grid.nodes, rs, rtol=1e-9, atol=0):
        raise ProfileFormatError("radii are not a geometric grid")
    return RadialProfile(grid, us, N, p)
