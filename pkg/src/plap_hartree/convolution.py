"""Riesz potentials ``(|x|^{-nu} * g)(r)`` of radial densities.

The sphere-averaged kernel is

    K_nu(r, t) = |S^{N-2}| ∫_0^π (r² + t² - 2 r t cos θ)^{-nu/2} sin^{N-2}θ dθ
               = r^{-nu} k(t / r),

so on a geometric grid every entry is a power of ``r_i`` times a function of
the index difference ``j - i``. The convolution

    V(r_i) = ∫ g(t) t^N K_nu(r_i, t) d(log t)

is discretised by product integration: ``g`` is linear in ``log t`` between
nodes and the kernel is integrated exactly against each hat function. The
weights only depend on ``j - i``, which makes the discrete potential exactly
covariant under grid-step dilations, and the hats adjacent to ``t = r``
absorb the (integrable) diagonal singularity.
"""

from __future__ import annotations

import functools
import logging
import math
import os

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import DivergenceError
from .model import ProblemParams, Variant, pairing_power
from .radial import RadialGrid, RadialProfile, sphere_area

log = logging.getLogger(__name__)

#: margin added to N - nu in the tail divergence test
DIVERGENCE_MARGIN = 0.02
#: fraction of nodes used for the boundary power-law fits
FIT_FRACTION = 0.10


def _sphere_area_m2(N):
    """|S^{N-2}|; equals 2 for N = 2."""
    return 2.0 * math.pi ** ((N - 1) / 2.0) / gamma_fn((N - 1) / 2.0)


@functools.lru_cache(maxsize=8)
def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def angular_profile(rho, nu, N, order=16, chunk=2048):
    """k(ρ) = |S^{N-2}| ∫_0^π (1 + ρ² - 2ρ cos θ)^{-nu/2} sin^{N-2}θ dθ for 0 ≤ ρ ≤ 1.

    The θ-range is split into panels ``[0, δ], [δ, 2δ], [2δ, 4δ], ... π`` with
    ``δ = (1-ρ)/√ρ``, the width of the peak at θ = 0. Each panel gets an
    ``order``-point Gauss-Legendre rule. At ρ = 1 the value is +inf when
    ``nu >= N - 1``.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("angular_profile expects 0 <= rho <= 1")
    out = np.empty_like(rho)
    S2 = _sphere_area_m2(N)
    xg, wg = _gauss(order)
    for lo in range(0, len(rho), chunk):
        rr = rho[lo:lo + chunk]
        res = np.empty_like(rr)
        zero = rr == 0
        res[zero] = sphere_area(N)
        one = rr == 1.0
        with np.errstate(divide="ignore"):
            delta = np.where(zero | one, np.pi, (1.0 - rr) / np.sqrt(np.where(zero, 1.0, rr)))
        delta = np.minimum(delta, np.pi)
        npan = int(np.ceil(np.log2(np.pi / delta.min()))) + 1 if np.any(~(zero | one)) else 1
        k = np.arange(npan + 1)
        b = np.minimum(delta[:, None] * np.where(k == 0, 0.0, 2.0 ** (k - 1))[None, :], np.pi)
        a_, b_ = b[:, :-1], b[:, 1:]
        half = 0.5 * (b_ - a_)
        theta = (a_ + half)[:, :, None] + half[:, :, None] * xg[None, None, :]
        r3 = rr[:, None, None]
        base = (1.0 - r3) ** 2 + 4.0 * r3 * np.sin(0.5 * theta) ** 2
        with np.errstate(divide="ignore"):
            f = base ** (-0.5 * nu) * np.sin(theta) ** (N - 2)
        val = S2 * np.einsum("ijk,k,ij->i", f, wg, half)
        res[~zero] = val[~zero]
        if np.any(one):
            res[one] = math.inf if nu >= N - 1 else _angular_at_one(nu, N)
        out[lo:lo + chunk] = res
    return out


def _angular_at_one(nu, N):
    S2 = _sphere_area_m2(N)
    f = lambda th: (2.0 * math.sin(0.5 * th)) ** (-nu) * math.sin(th) ** (N - 2)
    val, _ = integrate.quad(f, 0.0, math.pi, limit=200, epsabs=0, epsrel=1e-12)
    return S2 * val


def kernel_ratio(rho, nu, N, order=16):
    """k(ρ) for any ρ > 0 using k(ρ) = ρ^{-nu} k(1/ρ) above ρ = 1."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(rho)
    lo = rho <= 1
    out[lo] = angular_profile(rho[lo], nu, N, order)
    hi = ~lo
    out[hi] = rho[hi] ** (-nu) * angular_profile(1.0 / rho[hi], nu, N, order)
    return out


def _F(sigma, nu, N, order):
    """Integrand of the product weights: e^{Nσ} k(e^σ)."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    return np.exp(N * sigma) * kernel_ratio(np.exp(sigma), nu, N, order)


def _product_weights(h, L, nu, N, order):
    """w_m = ∫ hat(σ - m h) F(σ) dσ for m = -L..L (hat of half-width h)."""
    xg, wg = _gauss(8)
    m = np.arange(-L, L + 1, dtype=float)
    # right half [m h, (m+1) h] with weight (1 - τ/h); left half with (1 + τ/h)
    tau = 0.5 * h * (xg + 1.0)
    wt = 0.5 * h * wg
    sig_r = (m[:, None] * h + tau[None, :])
    sig_l = (m[:, None] * h - tau[None, :])
    hat = 1.0 - tau / h
    Fr = _F(sig_r.ravel(), nu, N, order).reshape(sig_r.shape)
    Fl = _F(sig_l.ravel(), nu, N, order).reshape(sig_l.shape)
    w = Fr @ (wt * hat) + Fl @ (wt * hat)

    # halves touching σ = 0 carry the (integrable) diagonal singularity
    def fscalar(s):
        return float(_F(np.array([s]), nu, N, order)[0])

    def adapt(fun, a, b):
        val, _ = integrate.quad(fun, a, b, limit=400, epsabs=0.0, epsrel=1e-11)
        return val

    c = L  # index of m = 0
    right0 = adapt(lambda s: (1 - s / h) * fscalar(s), 0.0, h)
    left0 = adapt(lambda s: (1 + s / h) * fscalar(s), -h, 0.0)
    w[c] = right0 + left0
    if L >= 1:
        # m = +1: left half is [0, h] with weight s / h
        left1 = adapt(lambda s: (s / h) * fscalar(s), 0.0, h)
        w[c + 1] = Fr[c + 1] @ (wt * hat) + left1
        # m = -1: right half is [-h, 0] with weight -s / h
        right_1 = adapt(lambda s: (-s / h) * fscalar(s), -h, 0.0)
        w[c - 1] = Fl[c - 1] @ (wt * hat) + right_1
    return w


class AngularKernel:
    """Kernel data for one ``(grid, nu, N)`` triple.

    ``weights[m + L]`` are the product-integration weights for index offset
    ``m = j - i`` over the grid extended by ``ext`` nodes at each end;
    ``table`` holds the point values ``K_nu(r_i, t_j)`` (the diagonal holds
    the cell average, since the point value is infinite for ``nu >= N-1``).
    """

    def __init__(self, grid: RadialGrid, nu: float, N: int, order: int, ext: int,
                 weights: np.ndarray, ratios: np.ndarray, diag_mean: float):
        self.grid = grid
        self.nu = float(nu)
        self.N = int(N)
        self.order = order
        self.ext = ext
        self.weights = weights
        self.ratios = ratios  # k(e^{-m h}), m = 0..M-1
        self.diag_mean = diag_mean
        self._table = None

    @property
    def L(self):
        return self.grid.M - 1 + self.ext

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            M, nu = self.grid.M, self.nu
            r = self.grid.nodes
            i = np.arange(M)
            d = i[None, :] - i[:, None]  # j - i
            kr = self.ratios[np.abs(d)]
            # t_j / r_i = e^{d h}; for d > 0 use k(ρ) = ρ^{-nu} k(1/ρ)
            fac = np.where(d > 0, np.exp(-nu * d * self.grid.h), 1.0)
            T = r[:, None] ** (-nu) * kr * fac
            T[i, i] = r ** (-nu) * self.diag_mean
            self._table = T
        return self._table

    @property
    def diagonal_flag(self) -> np.ndarray:
        i = np.arange(self.grid.M)
        return np.abs(i[None, :] - i[:, None]) <= 1

    def to_csv(self, path) -> None:
        """Write the generator weights as ``i,j,K`` triples (row i = 0 of the
        scale-free weight table, j = offset)."""
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# nu={float(self.nu)!r} N={self.N} grid={self.grid.digest()} "
                     f"r_min={float(self.grid.r_min)!r} r_max={float(self.grid.r_max)!r} M={self.grid.M} "
                     f"order={self.order} ext={self.ext} diag_mean={float(self.diag_mean)!r}\n")
            fh.write("i,j,K\n")
            for m, w in zip(range(-self.L, self.L + 1), self.weights):
                fh.write(f"0,{m},{float(w)!r}\n")
            for m, k in enumerate(self.ratios):
                fh.write(f"1,{m},{float(k)!r}\n")

    @classmethod
    def from_csv(cls, path, grid: RadialGrid) -> "AngularKernel":
        meta = {}
        w, kr = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("#"):
                    for tok in line[1:].split():
                        k, v = tok.split("=", 1)
                        meta[k] = v
                    continue
                if not line or line.startswith("i,"):
                    continue
                i, _, val = line.split(",")
                (w if i == "0" else kr).append(float(val))
        if meta.get("grid") != grid.digest():
            raise ValueError("kernel cache was built for a different grid")
        return cls(grid, float(meta["nu"]), int(meta["N"]), int(meta["order"]),
                   int(meta["ext"]), np.array(w), np.array(kr), float(meta["diag_mean"]))


def _default_ext(grid: RadialGrid, decades=4.0):
    return int(math.ceil(decades * math.log(10.0) / grid.h))


def build_kernel(grid: RadialGrid, nu: float, N: int, angular_nodes: int = 256,
                 ext: int | None = None) -> AngularKernel:
    """Tabulate the sphere-averaged Riesz kernel on ``grid``.

    ``angular_nodes`` is the angular node budget; it is spread over the
    graded panels as a per-panel Gauss-Legendre order of ``angular_nodes // 16``
    (at least 8).
    """
    if not (0.0 < nu < N):
        raise ValueError(f"need 0 < nu < N, got nu={nu}, N={N}")
    if angular_nodes < 32:
        raise ValueError("angular_nodes must be >= 32")
    order = max(8, angular_nodes // 16)
    ext = _default_ext(grid) if ext is None else int(ext)
    L = grid.M - 1 + ext
    h = grid.h
    w = _product_weights(h, L, nu, N, order)
    ratios = angular_profile(np.exp(-h * np.arange(grid.M)), nu, N, order)
    diag, _ = integrate.quad(lambda s: float(kernel_ratio(np.array([math.exp(s)]), nu, N, order)[0]),
                             -0.5 * h, 0.5 * h, points=[0.0], limit=400, epsrel=1e-11)
    return AngularKernel(grid, nu, N, order, ext, w, ratios, diag / h)


class KernelStore:
    """Cache of kernels keyed by ``(grid, nu, N)``; optional CSV cache dir."""

    def __init__(self, cache_dir=None, angular_nodes: int = 256):
        self.cache_dir = cache_dir
        self.angular_nodes = angular_nodes
        self._mem = {}

    def get(self, grid: RadialGrid, nu: float, N: int) -> AngularKernel:
        key = (grid.digest(), float(nu), int(N), self.angular_nodes)
        if key in self._mem:
            return self._mem[key]
        kern = None
        path = None
        if self.cache_dir:
            os.makedirs(self.cache_dir, exist_ok=True)
            path = os.path.join(self.cache_dir,
                                f"kernel_N{N}_nu{float(nu)!r}_{grid.digest()}_{self.angular_nodes}.csv")
            if os.path.exists(path):
                try:
                    kern = AngularKernel.from_csv(path, grid)
                except (ValueError, KeyError):
                    log.warning("ignoring unreadable kernel cache %s", path)
        if kern is None:
            kern = build_kernel(grid, nu, N, self.angular_nodes)
            if path:
                # atomic publish: concurrent suite workers share the directory
                tmp = f"{path}.{os.getpid()}.tmp"
                kern.to_csv(tmp)
                os.replace(tmp, path)
        self._mem[key] = kern
        return kern


def fit_power(r, v):
    """Least-squares slope of log v against log r (v > 0)."""
    lr, lv = np.log(r), np.log(v)
    A = np.vstack([lr, np.ones_like(lr)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    return slope, icpt


def boundary_exponents(g: RadialProfile, fraction=FIT_FRACTION):
    """Fitted power laws ``g ~ t^{-beta}`` at both ends.

    Returns ``(beta_head, beta_tail)``; ``None`` marks an end where ``g``
    vanishes (compactly supported data).
    """
    M = g.grid.M
    n = max(3, int(round(fraction * M)))
    v, r = g.values, g.r
    head = tail = None
    if v[0] > 0:
        sl = slice(0, n)
        ok = v[sl] > 0
        head = -fit_power(r[sl][ok], v[sl][ok])[0] if ok.sum() >= 2 else None
    if v[-1] > 0:
        sl = slice(M - n, M)
        ok = v[sl] > 0
        tail = -fit_power(r[sl][ok], v[sl][ok])[0] if ok.sum() >= 2 else None
    return head, tail


def riesz_convolve(g: RadialProfile, kernel: AngularKernel) -> RadialProfile:
    """V(r_i) = ∫ g(y) |x - y|^{-nu} dy at every node.

    Raises :class:`DivergenceError` when the fitted tail exponent of ``g``
    is at most ``N - nu`` (plus a small margin), in which case the
    convolution is identically infinite, or when the head exponent reaches
    ``N`` (``g`` not locally integrable at the origin).
    """
    grid, N, nu = kernel.grid, kernel.N, kernel.nu
    if g.grid.digest() != grid.digest():
        raise ValueError("kernel was built for a different grid")
    if g.N != N:
        raise ValueError(f"profile dimension {g.N} != kernel dimension {N}")
    vals = g.values
    if np.any(np.isnan(vals)):
        raise ValueError("NaN in convolution input")
    if np.any(vals < 0):
        raise ValueError("convolution input must be nonnegative")
    M, E, h = grid.M, kernel.ext, grid.h
    r = grid.nodes
    if not np.any(vals > 0):
        return g.with_values(np.zeros(M))
    beta_head, beta_tail = boundary_exponents(g)
    if beta_tail is not None and beta_tail <= N - nu + DIVERGENCE_MARGIN:
        raise DivergenceError(
            f"tail exponent {beta_tail:.4f} <= N - nu = {N - nu:.4f} (+{DIVERGENCE_MARGIN}): "
            "|x|^-nu * g is identically infinite")
    if beta_head is not None and beta_head >= N:
        raise DivergenceError(f"head exponent {beta_head:.4f} >= N = {N}: g not integrable at 0")
    ext_steps = np.arange(1, E + 1) * h
    ge = np.zeros(M + 2 * E)
    ge[E:E + M] = vals
    S = sphere_area(N)
    head_rem = tail_rem = 0.0
    if beta_tail is not None:
        ge[E + M:] = vals[-1] * np.exp(-beta_tail * ext_steps)
        T = r[-1] * math.exp(E * h)
        gT = ge[-1]
        tail_rem = S * gT * T ** (N - nu) * math.exp(0.5 * h * (N - nu - beta_tail)) \
            / (beta_tail - N + nu)
    if beta_head is not None:
        ge[:E] = (vals[0] * np.exp(beta_head * ext_steps))[::-1]
        T0 = r[0] * math.exp(-E * h)
        g0 = ge[0]
        head_rem = S * g0 * T0 ** N * math.exp(-0.5 * h * (N - beta_head)) / (N - beta_head)
    L = kernel.L
    full = np.convolve(ge, kernel.weights[::-1])
    c = full[L + E: L + E + M]
    V = r ** (N - nu) * c + tail_rem + head_rem * r ** (-nu)
    if not np.all(np.isfinite(V)):
        raise ValueError("non-finite Riesz potential")
    return g.with_values(V, signed=False)


def hartree_potential(u: RadialProfile, params: ProblemParams, kernels: KernelStore) -> RadialProfile:
    """``|x|^{-2p} * u^p`` (Hartree) or ``|x|^{-sigma} * u^{p_{s,sigma}}`` (WeightedHartree)."""
    if params.variant not in (Variant.HARTREE, Variant.WEIGHTED_HARTREE):
        raise ValueError(f"{params.variant.value} has no nonlocal potential")
    q = pairing_power(params)
    kern = kernels.get(u.grid, params.nu, params.N)
    return riesz_convolve(u.with_values(u.values ** q), kern)
