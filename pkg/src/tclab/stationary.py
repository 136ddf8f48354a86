"""Stationary densities of reflected and resetted log-GBM, plus ergodic averages.

Every density here is piecewise of the form ``a + b * E_k(x - x0)`` where
``E_k(s) = expm1(k s) / k`` (and ``E_0(s) = s``).  Writing the pieces this way
keeps the formulas well conditioned when the exponent ``k`` is tiny, so the
triangular limit falls out without a separate code path.  The one exception
is the reflected density in level coordinates, a pure power of |xi|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .params import Band, DomainError, GbmParams, Reflect, ResetToInner, ResetToPoint

ALPHA_LIMIT = 1e-9


def _e1(k: float, s):
    """expm1(k s)/k, continuous at k = 0."""
    s = np.asarray(s, dtype=float)
    if k == 0.0:
        return s
    return np.expm1(k * s) / k


def _e2(k: float, s):
    """Antiderivative of _e1 vanishing at s = 0: (expm1(k s) - k s)/k^2."""
    s = np.asarray(s, dtype=float)
    ks = k * s
    small = np.abs(ks) < 1e-3
    series = s**2 * (0.5 + ks / 6.0 + ks**2 / 24.0 + ks**3 / 120.0)
    if k == 0.0:
        return s**2 / 2.0
    with np.errstate(over="ignore", invalid="ignore"):
        exact = (np.expm1(ks) - ks) / k**2
    return np.where(small, series, exact)


@dataclass(frozen=True)
class _Piece:
    left: float
    right: float
    a: float
    b: float
    k: float
    x0: float

    def pdf(self, x):
        return self.a + self.b * _e1(self.k, np.asarray(x) - self.x0)

    def deriv(self, x):
        return self.b * np.exp(self.k * (np.asarray(x) - self.x0))

    def antideriv(self, x):
        s = np.asarray(x, dtype=float) - self.x0
        return self.a * s + self.b * _e2(self.k, s)

    def mass(self, lo, hi):
        lo = np.clip(lo, self.left, self.right)
        hi = np.clip(hi, self.left, self.right)
        return self.antideriv(hi) - self.antideriv(lo)


@dataclass(frozen=True)
class DensityFn:
    """A normalized stationary density on ``support``.

    ``coord`` tells whether the argument is the level xi or log|xi|.
    ``parameters`` carries the formula constants for inspection.
    """

    support: tuple[float, float]
    kind: str
    coord: str
    parameters: dict = field(default_factory=dict)
    pieces: tuple[_Piece, ...] = ()
    power: float | None = None  # exponent for the level-coordinate reflected density
    norm: float = 1.0

    def __call__(self, x):
        return self.pdf(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        out = np.zeros_like(x)
        inside = (x >= lo) & (x <= hi)
        if self.power is not None:
            out[inside] = self.norm * np.abs(x[inside]) ** self.power
            return out
        for p in self.pieces:
            m = inside & (x >= p.left) & (x <= p.right)
            out[m] = p.pdf(x[m])
        return out

    def mass(self, lo, hi):
        """Probability of [lo, hi] (vectorized over bin edges)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.power is not None:
            a, b = self.support
            lo_c, hi_c = np.clip(lo, a, b), np.clip(hi, a, b)
            q = self.power + 1.0
            if abs(q) < ALPHA_LIMIT:
                return self.norm * np.log(np.abs(hi_c) / np.abs(lo_c)) * np.sign(hi_c)
            return self.norm * (np.sign(hi_c) * np.abs(hi_c) ** q - np.sign(lo_c) * np.abs(lo_c) ** q) / q
        return sum(p.mass(lo, hi) for p in self.pieces)

    def cdf(self, x):
        return self.mass(np.full_like(np.asarray(x, dtype=float), self.support[0]), x)

    def breakpoints(self) -> list[float]:
        pts = {self.support[0], self.support[1]}
        for p in self.pieces:
            pts.update((p.left, p.right))
        return sorted(pts)

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """Inverse-CDF draws (used to start ensembles in stationarity)."""
        grid = np.linspace(*self.support, 4001)
        c = self.cdf(grid)
        c = c / c[-1]
        u = np.random.Generator(np.random.Philox(seed)).random(n)
        return np.interp(u, c, grid)


def _positive_power_pieces(k: float, lo: float, hi: float) -> tuple[_Piece, ...]:
    """Density proportional to exp(k x) on [lo, hi]: 1 + k E_k(x - lo), normalized."""
    total = (hi - lo) + k * float(_e2(k, hi - lo))
    c = 1.0 / total
    return (_Piece(lo, hi, c, c * k, k, lo),)


def reflected_density(params: GbmParams, band: Band, coord: str = "level") -> DensityFn:
    """Stationary law of GBM reflected at the edges of ``band``.

    The band may lie in (0, inf) or in (-inf, -1); in the second case the
    density is written in terms of |xi|.  ``coord="log"`` returns the density
    of log|xi| instead, which is an exponential in that variable.
    """
    if not isinstance(band.policy, Reflect):
        raise DomainError("reflected density needs a Reflect band")
    lo, hi = band.lower, band.upper
    if not (lo > 0 or hi < -1):
        raise DomainError("band must lie in (0, inf) or in (-inf, -1)")
    expo = params.alpha() - 1.0  # 2M/Sigma^2 - 1
    if abs(expo) < ALPHA_LIMIT:
        expo = 0.0
    kind = "ReflectedPower"
    if coord == "log":
        a, b = sorted((math.log(abs(lo)), math.log(abs(hi))))
        return DensityFn((a, b), kind, "log", {"exponent": expo},
                         _positive_power_pieces(expo, a, b))
    if coord != "level":
        raise DomainError("coord must be 'level' or 'log'")
    r_hi, r_lo = (abs(hi), abs(lo)) if lo > 0 else (abs(lo), abs(hi))
    if expo == 0.0:
        norm = 1.0 / math.log(r_hi / r_lo)
    else:
        norm = expo / (r_hi**expo - r_lo**expo)
    return DensityFn((lo, hi), kind, "level", {"exponent": expo, "normalization": norm},
                     power=expo - 1.0, norm=norm)


def resetted_density(params: GbmParams, band: Band) -> DensityFn:
    """Stationary density of log(xi) reset to one interior point at either edge.

    Piecewise ``a_i + b_i exp(alpha eta)`` with alpha = 2M/Sigma^2 - 1,
    vanishing at both edges and continuous at the reset point.  For
    |alpha| < 1e-9 the density is the triangle with apex at the reset point.
    """
    if not isinstance(band.policy, ResetToPoint):
        raise DomainError("resetted density needs a ResetToPoint band")
    lo, star, hi = band.log_levels()
    alpha = params.alpha() - 1.0
    kind = "ResettedPiecewiseExp"
    if abs(alpha) < ALPHA_LIMIT:
        alpha, kind = 0.0, "ResettedTriangular"
    # phi = c1 E(eta - lo) on the left, c2 E(eta - hi) on the right;
    # continuity at star fixes c1/c2, normalization fixes the scale.
    g_left = float(_e1(alpha, star - hi))   # < 0
    g_right = float(_e1(alpha, star - lo))  # > 0
    m_left = float(_e2(alpha, star - lo))
    m_right = -float(_e2(alpha, star - hi))
    scale = 1.0 / (g_left * m_left + g_right * m_right)
    c1, c2 = scale * g_left, scale * g_right
    pieces = (_Piece(lo, star, 0.0, c1, alpha, lo), _Piece(star, hi, 0.0, c2, alpha, hi))
    params_out = {"alpha": alpha, "c1": c1, "c2": c2}
    if alpha != 0.0:
        # the a_i + b_i e^{alpha eta} coefficients
        params_out.update(b1=c1 / alpha * math.exp(-alpha * lo), a1=-c1 / alpha,
                          b2=c2 / alpha * math.exp(-alpha * hi), a2=-c2 / alpha)
    return DensityFn((lo, hi), kind, "log", params_out, pieces)


def reset_inner_density(params: GbmParams, band: Band) -> DensityFn:
    """Stationary density of log(xi) under small trades.

    Crossing the lower edge moves the state to ``lower_star``; crossing the
    upper edge moves it to ``upper_star``.  Between the two reset levels the
    probability flux vanishes, so the density there is a pure exponential.
    """
    if not isinstance(band.policy, ResetToInner):
        raise DomainError("needs a ResetToInner band")
    lo, el, eu, hi = band.log_levels()
    alpha = params.alpha() - 1.0
    if abs(alpha) < ALPHA_LIMIT:
        alpha = 0.0
    # unnormalized: c2 = 1 at the left reset level
    c1 = 1.0 / float(_e1(alpha, el - lo))
    mid_top = math.exp(alpha * (eu - el))
    c3 = mid_top / float(_e1(alpha, eu - hi))
    pieces = [_Piece(lo, el, 0.0, c1, alpha, lo),
              _Piece(el, eu, 1.0, alpha, alpha, el),
              _Piece(eu, hi, 0.0, c3, alpha, hi)]
    total = sum(float(p.mass(p.left, p.right)) for p in pieces)
    pieces = tuple(_Piece(p.left, p.right, p.a / total, p.b / total, p.k, p.x0) for p in pieces)
    return DensityFn((lo, hi), "ResettedInnerPiecewiseExp", "log",
                     {"alpha": alpha, "c1": c1 / total, "c2": 1.0 / total, "c3": c3 / total}, pieces)


def edge_flux_rates(params: GbmParams, density: DensityFn) -> tuple[float, float]:
    """(lower, upper) jump rates implied by the outward probability flux at the edges."""
    if density.coord != "log" or density.power is not None:
        raise DomainError("needs a piecewise log-coordinate density")
    d = 0.5 * params.vol_Sigma**2
    first, last = density.pieces[0], density.pieces[-1]
    return (d * float(first.deriv(first.left)), -d * float(last.deriv(last.right)))


def ergodic_average(f: Callable, density: DensityFn, epsabs: float = 1e-10) -> float:
    """Integral of f against the density, by adaptive quadrature on each smooth piece."""
    pts = density.breakpoints()
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, err = integrate.quad(lambda x: float(f(x)) * float(density.pdf(np.array([x]))[0]),
                                  a, b, epsabs=epsabs, epsrel=1e-12, limit=200)
        if err > 100 * max(epsabs, 1e-12 * abs(val)):
            raise ArithmeticError(f"quadrature did not converge on [{a}, {b}] (error {err:.2e})")
        total += val
    return total


def mean_exit_time(band: Band, Sigma: float) -> float:
    """Expected exit time of a driftless-in-log diffusion from the band, started at log level 0.

    Valid under M = Sigma^2/2; returns -eta_lower * eta_upper / Sigma^2.
    """
    if Sigma <= 0:
        raise DomainError("volatility must be positive")
    lo, hi = math.log(band.lower), math.log(band.upper)
    if not lo <= 0.0 <= hi:
        raise DomainError("band must contain log level 0")
    return -lo * hi / Sigma**2


def histogram(samples: Sequence[float], bins=None, range=None) -> tuple[np.ndarray, np.ndarray]:
    """(edges, counts); Sturges' rule by default."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("no samples")
    counts, edges = np.histogram(samples, bins="sturges" if bins is None else bins, range=range)
    return edges, counts


@dataclass(frozen=True)
class DensityDistance:
    l1: float
    chi2: float
    n_bins: int
    n_samples: int


def density_distance(hist: tuple[np.ndarray, np.ndarray], density: DensityFn) -> DensityDistance:
    """L1 distance between empirical and model bin probabilities, plus Pearson chi^2."""
    edges, counts = hist
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if counts.size == 0 or n <= 0:
        raise DomainError("empty histogram")
    lo, hi = density.support
    span = hi - lo
    if edges[0] > lo + 1e-9 * span or edges[-1] < hi - 1e-9 * span:
        raise DomainError("histogram bins must cover the density support")
    p_model = np.asarray(density.mass(edges[:-1], edges[1:]), dtype=float)
    p_hat = counts / n
    l1 = float(np.abs(p_hat - p_model).sum())
    expected = n * p_model
    pos = expected > 0
    chi2 = float((((counts - expected) ** 2)[pos] / expected[pos]).sum())
    return DensityDistance(l1, chi2, len(counts), int(n))
