"""Independent reference computations used to cross-check the numerics.

None of these share code paths with the production routines they check:
closed forms, a hypergeometric kernel formula, adaptive scipy quadrature
and a Monte-Carlo estimate of the N-dimensional Riesz convolution.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import hyp2f1


def quadratic_roots(N, mu):
    """Decay exponents for p = 2: roots of γ² - (N-2)γ + μ = 0."""
    b = N - 2.0
    disc = math.sqrt(b * b - 4.0 * mu)
    lo = (b - disc) / 2.0
    # product form avoids cancellation in the small root
    hi = (b + disc) / 2.0
    if hi > 0 and mu > 0:
        lo = mu / hi
    return lo, hi


def sphere(N):
    return 2.0 * math.pi ** (N / 2.0) / gamma_fn(N / 2.0)


def kernel_hyp2f1(rho, nu, N):
    """Sphere-averaged kernel k(ρ) for ρ < 1 via 2F1(ν/2, (ν-N+2)/2; N/2; ρ²)."""
    rho = np.asarray(rho, float)
    return sphere(N) * hyp2f1(nu / 2.0, (nu - N + 2.0) / 2.0, N / 2.0, rho ** 2)


def talenti(r, N, lam=1.0, c=1.0):
    """Aubin-Talenti bubble for p = 2: c (1 + (λ r)²)^{-(N-2)/2}."""
    return c * (1.0 + (lam * np.asarray(r, float)) ** 2) ** (-(N - 2) / 2.0)


def sobolev_constant(N):
    """Best constant S with S ‖u‖_{2*}² ≤ ‖∇u‖_2² (p = 2)."""
    return math.pi * N * (N - 2) * (gamma_fn(N / 2.0) / gamma_fn(N)) ** (2.0 / N)


def radial_quad(f, N, a=0.0, b=np.inf, w=0.0, points=None):
    """|S^{N-1}| ∫_a^b f(r) r^{N-1-w} dr by adaptive quadrature, split by decades."""
    S = sphere(N)
    edges = [a]
    if b == np.inf:
        edges += [10.0 ** k for k in range(-6, 7) if 10.0 ** k > a] + [np.inf]
    else:
        edges += [10.0 ** k for k in range(-6, 7) if a < 10.0 ** k < b] + [b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts = None if points is None else [x for x in points if lo < x < hi] or None
        if hi == np.inf:
            val, _ = integrate.quad(lambda r: f(r) * r ** (N - 1 - w), lo, hi,
                                    limit=400, epsabs=0, epsrel=1e-12)
        else:
            val, _ = integrate.quad(lambda r: f(r) * r ** (N - 1 - w), lo, hi,
                                    limit=400, epsabs=0, epsrel=1e-12, points=pts)
        total += val
    return S * total


def mc_riesz(g, support_radius, r, nu, N, n=1_000_000, seed=0, batch=200_000, eps=None):
    """Monte-Carlo estimate of ∫ g(|y|) |x - y|^{-nu} dy at |x| = r.

    ``g`` must vanish beyond ``support_radius``. The domain is split at
    ``|y - x| = eps`` (default ``support_radius / 2``). Inside, z = y - x is
    drawn with density ∝ |z|^{-nu}, which cancels the kernel singularity;
    outside, |y| is drawn from the radial density ∝ g(t) t^{N-1} (tabulated
    inverse CDF) with a uniform direction. Half the samples go to each part.
    Returns ``(estimate, standard_error)``.
    """
    rng = np.random.default_rng(seed)
    R = support_radius
    eps = 0.5 * R if eps is None else float(eps)
    x = np.zeros(N)
    x[0] = r

    def directions(m):
        d = rng.standard_normal((m, N))
        return d / np.linalg.norm(d, axis=1)[:, None]

    def run(sampler, m_total):
        s1 = s2 = 0.0
        done = 0
        while done < m_total:
            m = min(batch, m_total - done)
            vals = sampler(m)
            s1 += vals.sum()
            s2 += (vals ** 2).sum()
            done += m
        mean = s1 / m_total
        return mean, max(s2 / m_total - mean ** 2, 0.0) / m_total

    near_scale = sphere(N) * eps ** (N - nu) / (N - nu)

    def near(m):
        rad = eps * rng.random(m) ** (1.0 / (N - nu))
        y = x + rad[:, None] * directions(m)
        return near_scale * g(np.linalg.norm(y, axis=1))

    t = np.linspace(0.0, R, 400_001)
    dens = np.asarray(g(t), float) * t ** (N - 1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    mass = sphere(N) * cdf[-1]
    cdf /= cdf[-1]

    def far(m):
        rad = np.interp(rng.random(m), cdf, t)
        y = rad[:, None] * directions(m)
        dist = np.linalg.norm(y - x, axis=1)
        keep = dist >= eps
        out = np.zeros(m)
        out[keep] = dist[keep] ** (-nu)
        return mass * out

    n_near = n // 2 if r < R + eps else 0
    m1, v1 = run(near, n_near) if n_near else (0.0, 0.0)
    m2, v2 = run(far, n - n_near)
    return m1 + m2, math.sqrt(v1 + v2)
