"""Numeric and series solutions of the free-boundary problems.

Four objectives are covered.  The leveraged fund and the log-contract hedge
have a no-trade band of width O(eps^(1/3)) around their targets; the same
holds for power and log utility.  The risk-neutral investor instead holds a
leveraged position whose boundaries explode like eps^(-1/2).

Every numeric solver is seeded from the corresponding series and works in
scaled unknowns (boundary minus target, divided by delta) so that the
nonlinear systems stay O(1) as eps shrinks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .costs import BoundaryExpansion, EvaluatedBoundaries, atc_constant_proportion
from .objectives import Letf, LogContract, LogUtility, ObjectiveSpec, PowerUtility
from .params import DomainError, GbmParams, SolverError

BRANCH_TOL = 1e-9  # exponent test for the logarithmic antiderivative
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True)
class FreeBoundarySolution:
    """Boundaries of a solved problem.

    ``lower``/``upper`` are in the objective's natural coordinate (weight pi,
    or position y for the log contract).  ``aux`` carries the other
    coordinates the solver worked in (zeta, u).
    """

    lower: float
    upper: float
    value_fn_samples: tuple[np.ndarray, np.ndarray]
    residual_norm: float
    method: str
    eps: float
    coord: str = "pi"
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(f"solution has lower={self.lower} >= upper={self.upper}")


def _root(fun, x0, what: str, tol: float = 1e-10, jac=None):
    sol = optimize.root(fun, x0, jac=jac, method="hybr", options={"xtol": 1e-14})
    res = float(np.max(np.abs(fun(sol.x))))
    if not np.all(np.isfinite(sol.x)) or res > tol:
        raise SolverError(f"{what} did not converge: {sol.message}", res)
    return sol.x, res


# --------------------------------------------------------------------------
# Log contract


def _kind(spec: ObjectiveSpec, cls):
    if not isinstance(spec.kind, cls):
        raise DomainError(f"expected a {cls.__name__} objective, got {spec.name}")
    return spec.kind


def logcontract_expansion(spec: ObjectiveSpec) -> BoundaryExpansion:
    k = _kind(spec, LogContract)
    m = spec.market
    A = (3.0 * k.y_star**2 / (4.0 * k.gamma)) ** (1.0 / 3.0)
    B = (k.gamma * k.y_star / 6.0) ** (1.0 / 3.0) * m.mu / (k.gamma * m.sigma**2)
    return BoundaryExpansion(k.y_star, A, A, B, B)


def logcontract_series(spec: ObjectiveSpec, eps: float | None = None) -> EvaluatedBoundaries:
    """y_* +/- A delta - B delta^2."""
    eps = spec.spread_eps if eps is None else eps
    return logcontract_expansion(spec).evaluate(eps, order=2)


def _power_integral(p: float, lo, hi):
    """Integral of u^p over [lo, hi] for lo, hi > 0, with the log branch at p = -1."""
    q = p + 1.0
    lr = np.log(hi / lo)
    if abs(q) < BRANCH_TOL:
        return lr
    return lo**q * np.expm1(q * lr) / q


@dataclass(frozen=True)
class _LogContractSystem:
    y_star: float
    gamma: float
    sigma: float
    alpha: float  # 2 mu / sigma^2
    eps: float

    def h(self, y):
        g = self.gamma * self.sigma**2
        return g * self.y_star * y - 0.5 * g * y**2

    def integral(self, lo, y):
        """Closed form of the integral of (h(u) - h(lo)) u^(alpha-2) over [lo, y]."""
        g = self.gamma * self.sigma**2
        c2 = -0.5 * g
        c1 = g * self.y_star
        c0 = -(c1 * lo + c2 * lo**2)
        a = self.alpha
        return (c0 * _power_integral(a - 2.0, lo, y) + c1 * _power_integral(a - 1.0, lo, y)
                + c2 * _power_integral(a, lo, y))

    def equations(self, lo, hi):
        I = self.integral(lo, hi)
        a = self.alpha
        g1 = I - 0.5 * self.eps * self.sigma**2 * hi**a
        g2 = a * I - hi ** (a - 1.0) * (self.h(hi) - self.h(lo))
        return g1, g2

    def jacobian(self, lo, hi):
        a = self.alpha
        g = self.gamma * self.sigma**2
        dh = self.h(hi) - self.h(lo)
        dI_hi = dh * hi ** (a - 2.0)
        dI_lo = -g * (self.y_star - lo) * _power_integral(a - 2.0, lo, hi)
        h1_hi = g * (self.y_star - hi)
        h1_lo = g * (self.y_star - lo)
        j11 = dI_lo
        j12 = dI_hi - 0.5 * self.eps * self.sigma**2 * a * hi ** (a - 1.0)
        j21 = a * dI_lo + hi ** (a - 1.0) * h1_lo
        j22 = a * dI_hi - (a - 1.0) * hi ** (a - 2.0) * dh - hi ** (a - 1.0) * h1_hi
        return np.array([[j11, j12], [j21, j22]])


def _logcontract_system(spec: ObjectiveSpec, eps: float) -> _LogContractSystem:
    k = _kind(spec, LogContract)
    m = spec.market
    return _LogContractSystem(k.y_star, k.gamma, m.sigma, 2.0 * m.mu / m.sigma**2, eps)


def logcontract_solve(spec: ObjectiveSpec, eps: float | None = None,
                      n_grid: int = 1000) -> FreeBoundarySolution:
    """Solve for (y_-, y_+) with Newton iterations started at the series."""
    eps = spec.spread_eps if eps is None else eps
    if not 0.0 < eps < 1.0:
        raise DomainError("spread must lie in (0, 1)")
    sysm = _logcontract_system(spec, eps)
    exp = logcontract_expansion(spec)
    d = eps ** (1.0 / 3.0)
    seed = exp.evaluate(eps, order=2)
    ys = sysm.y_star
    scale = 0.5 * eps * sysm.sigma**2 * ys**sysm.alpha

    def unpack(x):
        return ys + d * x[0], ys + d * x[1]

    def fun(x):
        lo, hi = unpack(x)
        if lo <= 0:
            return np.array([1e6, 1e6])
        return np.array(sysm.equations(lo, hi)) / scale

    def jac(x):
        lo, hi = unpack(x)
        return sysm.jacobian(lo, hi) * d / scale

    x0 = np.array([(seed.lower - ys) / d, (seed.upper - ys) / d])
    x, res = _root(fun, x0, "log-contract Newton iteration", jac=jac)
    lo, hi = unpack(x)
    if not 0 < lo < ys < hi:
        raise SolverError(f"log-contract solve left the admissible region: y-={lo}, y+={hi}")
    grid = np.linspace(lo, hi, n_grid)
    W = logcontract_hjb_value(spec, lo, grid)
    raw = max(abs(v) for v in sysm.equations(lo, hi))
    return FreeBoundarySolution(lo, hi, (grid, W), raw, "Numeric", eps, coord="y",
                                aux={"scaled_residual": res})


def logcontract_hjb_value(spec: ObjectiveSpec, y_minus: float, grid, eps: float | None = None,
                          tol: float = 1e-9) -> np.ndarray:
    """W(y) = 2/(sigma^2 y^alpha) times the integral of (h(u) - h(y_-)) u^(alpha-2) from y_- to y.

    W = -V_y is the marginal value of the position.  When ``eps`` is given
    the samples are checked against 0 <= W <= eps and a SolverError is
    raised if they leave it.
    """
    e = spec.spread_eps if eps is None else eps
    sysm = _logcontract_system(spec, e)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < y_minus * (1 - 1e-12)):
        raise DomainError("grid must lie at or above y_-")
    I = np.array([sysm.integral(y_minus, y) if y > y_minus else 0.0 for y in grid])
    W = 2.0 / (sysm.sigma**2 * grid**sysm.alpha) * I
    if eps is not None:
        lo_bad = W.min() < -tol * eps
        hi_bad = W.max() > eps * (1 + tol) + tol * eps
        if lo_bad or hi_bad:
            raise SolverError(f"W leaves [0, eps] on the band (min={W.min():.3e}, max={W.max():.3e})")
    return W


# --------------------------------------------------------------------------
# Leveraged fund


def letf_kappa_expansion(Lambda: float, gamma: float, kappa_plus: float,
                         kappa_minus: float) -> BoundaryExpansion:
    """Lambda +/- A delta - kappa (Lambda/gamma)(gamma Lambda (Lambda-1)/6)^(1/3) delta^2."""
    A = (0.75 / gamma * Lambda**2 * (Lambda - 1.0) ** 2) ** (1.0 / 3.0)
    B = Lambda / gamma * float(np.cbrt(gamma * Lambda * (Lambda - 1.0) / 6.0))
    return BoundaryExpansion(Lambda, A, A, kappa_plus * B, kappa_minus * B,
                             kappa_plus=kappa_plus, kappa_minus=kappa_minus)


def letf_expansion(spec: ObjectiveSpec, variant: str = "Original") -> BoundaryExpansion:
    """Original: second-order multiplier +1.  Shadow: the sign flips."""
    k = _kind(spec, Letf)
    kap = {"Original": 1.0, "Shadow": -1.0}.get(variant)
    if kap is None:
        raise DomainError("variant must be 'Original' or 'Shadow'")
    return letf_kappa_expansion(k.Lambda, k.gamma, kap, kap)


def letf_series(spec: ObjectiveSpec, eps: float | None = None, variant: str = "Original") -> EvaluatedBoundaries:
    eps = spec.spread_eps if eps is None else eps
    return letf_expansion(spec, variant).evaluate(eps, order=2)


def _zeta(pi):
    return pi / (1.0 - pi)


def _letf_wprime(lam: float, gam: float, z_lo: float, z):
    """W'(zeta) from the once-integrated ODE with W'(zeta_-) = 0."""
    t_lo = 1.0 / (1.0 + z_lo)
    t = 1.0 / (1.0 + z)
    diff = (z - z_lo) / ((1.0 + z) * (1.0 + z_lo))  # t_- - t without cancellation
    return 2.0 * gam * diff * (lam - 1.0 + 0.5 * (t_lo + t)) / z**2


def _letf_w(lam: float, gam: float, z_lo: float, z):
    """W(zeta) by Gauss-Legendre quadrature of W' from zeta_- (exact to rounding for a smooth integrand)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    half = 0.5 * (z - z_lo)
    nodes = z_lo + half[:, None] * (1.0 + _GL_X[None, :])
    vals = _letf_wprime(lam, gam, z_lo, nodes)
    return (vals * _GL_W[None, :]).sum(axis=1) * half


def _letf_targets(eps: float, z_hi: float):
    den = (1.0 + z_hi) * (1.0 + (1.0 - eps) * z_hi)
    w = eps / den
    w1 = eps * (eps - 2.0 * (1.0 - eps) * z_hi - 2.0) / den**2
    return w, w1


def letf_solve(spec: ObjectiveSpec, eps: float | None = None, n_grid: int = 1000) -> FreeBoundarySolution:
    """Shooting in (zeta_-, zeta_+): start with W = W' = 0 and match both conditions at zeta_+.

    The ODE integrates once in closed form, so "shooting" reduces to
    evaluating W' exactly and W by quadrature.
    """
    k = _kind(spec, Letf)
    eps = spec.spread_eps if eps is None else eps
    lam, gam = k.Lambda, k.gamma
    exp = letf_expansion(spec, "Original")
    d = eps ** (1.0 / 3.0)
    seed = exp.evaluate(eps, order=2)

    def unpack(x):
        return lam + d * x[0], lam + d * x[1]

    def fun(x):
        plo, phi = unpack(x)
        zlo, zhi = _zeta(plo), _zeta(phi)
        w_t, w1_t = _letf_targets(eps, zhi)
        w = _letf_w(lam, gam, zlo, zhi)[0]
        w1 = _letf_wprime(lam, gam, zlo, zhi)
        return np.array([(w - w_t) / eps, (w1 - w1_t) / eps ** (2.0 / 3.0)])

    x0 = np.array([(seed.lower - lam) / d, (seed.upper - lam) / d])
    x, res = _root(fun, x0, "leveraged-fund shooting")
    plo, phi = unpack(x)
    zlo, zhi = _zeta(plo), _zeta(phi)
    grid = np.linspace(zlo, zhi, n_grid)
    W = _letf_w(lam, gam, zlo, grid)
    w_t, w1_t = _letf_targets(eps, zhi)
    raw = max(abs(W[-1] - w_t), abs(_letf_wprime(lam, gam, zlo, zhi) - w1_t))
    return FreeBoundarySolution(plo, phi, (grid, W), float(raw), "Numeric", eps,
                                aux={"zeta_minus": zlo, "zeta_plus": zhi, "scaled_residual": res})


def letf_shadow_solve(spec: ObjectiveSpec, eps: float | None = None) -> FreeBoundarySolution:
    """Boundaries of the potential shadow market, by shooting on the ODE for g.

    In scaled variables s = (pi - Lambda)/delta and V = (g - 1)/delta^3 the
    problem is O(1): V(s_-) = V'(s_-) = 0, V(s_+) = -1, V'(s_+) = 0.
    """
    k = _kind(spec, Letf)
    eps = spec.spread_eps if eps is None else eps
    lam, gam = k.Lambda, k.gamma
    d = eps ** (1.0 / 3.0)

    def rhs(s, y):
        V, V1 = y
        p = lam + d * s
        q = p * (1.0 - p)
        g_fac = (1.0 + d**3 * V + d**2 * V1 * q) ** 2
        frac = s + q * d**2 * V / (1.0 + p * d**3 * V)
        return [V1, 2.0 * (gam * g_fac * frac - d * V1 * p * (1.0 - p) ** 2) / q**2]

    def fun(x):
        sol = solve_ivp(rhs, (x[0], x[1]), [0.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14)
        V, V1 = sol.y[:, -1]
        return np.array([V + 1.0, V1])

    seed = letf_expansion(spec, "Shadow").evaluate(eps, order=2)
    x0 = np.array([(seed.lower - lam) / d, (seed.upper - lam) / d])
    x, res = _root(fun, x0, "shadow-market shooting", tol=1e-9)
    plo, phi = lam + d * x[0], lam + d * x[1]
    sol = solve_ivp(rhs, (x[0], x[1]), [0.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    s = np.linspace(x[0], x[1], 200)
    g = 1.0 + d**3 * sol.sol(s)[0]
    return FreeBoundarySolution(plo, phi, (lam + d * s, g), res, "Numeric", eps)


@dataclass(frozen=True)
class LetfPerformance:
    eer: float
    trd: float
    tre: float
    atc: float
    tre_displayed: float

    def __post_init__(self):
        if not (self.tre >= 0 and self.atc >= 0):
            raise DomainError("tracking error and cost must be nonnegative")


def letf_atc_series(eps: float, sigma: float, gamma: float, Lambda: float) -> float:
    q = float(np.cbrt(gamma * Lambda * (Lambda - 1.0) / 6.0))
    return (3.0 * sigma**2 / gamma * q**4 * eps ** (2.0 / 3.0)
            + 0.5 * sigma**2 * Lambda**2 * (Lambda - 1.0) * eps)


def letf_performance(pi_minus: float, pi_plus: float, eps: float, sigma: float, gamma: float,
                     Lambda: float) -> LetfPerformance:
    """Tracking difference, tracking error and expense ratio of the band [pi_-, pi_+].

    ``tre`` is sigma sqrt((pi_- - Lambda)^2 - X/gamma), which is what makes
    EER = gamma/2 TrE^2 - TrD hold; ``tre_displayed`` multiplies X by gamma
    instead (NaN when the radicand is negative).  Here X is the fraction
    pi_- pi_+ (pi_+ - 1)^2 / ((pi_+ - pi_-)(1/eps - pi_+)).
    """
    if not pi_minus < pi_plus:
        raise DomainError("need pi_- < pi_+")
    if not pi_plus < 1.0 / eps:
        raise DomainError("need pi_+ < 1/eps")
    X = pi_minus * pi_plus * (pi_plus - 1.0) ** 2 / ((pi_plus - pi_minus) * (1.0 / eps - pi_plus))
    trd = -0.5 * sigma**2 * X
    base = (pi_minus - Lambda) ** 2
    rad = base - X / gamma
    rad_disp = base - gamma * X
    tre = sigma * math.sqrt(max(rad, 0.0))
    tre_disp = sigma * math.sqrt(rad_disp) if rad_disp >= 0 else math.nan
    eer = 0.5 * gamma * sigma**2 * base
    atc = letf_atc_series(eps, sigma, gamma, Lambda)
    return LetfPerformance(eer, trd, tre, max(atc, 0.0), tre_disp)


# --------------------------------------------------------------------------
# Power and log utility


def utility_kappa_expansion(spec: ObjectiveSpec, kappa_plus: float = 0.0,
                            kappa_minus: float = 0.0) -> BoundaryExpansion:
    """pi_* +/- A delta + kappa (pi_*^2 (1-pi_*)/6)(6/(gamma pi_* (1-pi_*)))^(2/3) delta^2."""
    k = spec.kind
    if not isinstance(k, (PowerUtility, LogUtility)):
        raise DomainError("utility objective required")
    ps, gam = k.pi_star, k.gamma
    A = (0.75 / gam * ps**2 * (ps - 1.0) ** 2) ** (1.0 / 3.0)
    Bp = ps**2 * (1.0 - ps) / 6.0 * float(np.cbrt(6.0 / (gam * ps * (1.0 - ps)))) ** 2
    return BoundaryExpansion(ps, A, A, -kappa_plus * Bp, -kappa_minus * Bp,
                             kappa_plus=kappa_plus, kappa_minus=kappa_minus)


def utility_expansion(spec: ObjectiveSpec) -> BoundaryExpansion:
    """Symmetric band without second-order terms."""
    return utility_kappa_expansion(spec, 0.0, 0.0)


def utility_series(spec: ObjectiveSpec, eps: float | None = None) -> EvaluatedBoundaries:
    eps = spec.spread_eps if eps is None else eps
    return utility_expansion(spec).evaluate(eps, order=2)


def utility_atc_series(spec: ObjectiveSpec, eps: float | None = None) -> float:
    k = spec.kind
    if not isinstance(k, (PowerUtility, LogUtility)):
        raise DomainError("utility objective required")
    eps = spec.spread_eps if eps is None else eps
    ps, gam = k.pi_star, k.gamma
    sig2, mu = spec.market.sigma**2, spec.market.mu
    q = float(np.cbrt(gam * ps * (ps - 1.0) / 6.0))
    return (3.0 * sig2 / gam * q**4 * eps ** (2.0 / 3.0)
            - mu * (gam - 1.0) / (2.0 * gam) * ps * (ps - 1.0) * eps)


# --------------------------------------------------------------------------
# Risk-neutral investor


def _kappa_fn(x: float) -> float:
    return 1.5 * x + math.log1p(-x)


def riskneutral_kappa() -> float:
    """Root of 1.5 x + log(1 - x) in (0, 1) other than 0."""
    return optimize.brentq(_kappa_fn, 0.5, 0.7, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _alpha(market: GbmParams) -> float:
    if not market.mu > 0:
        raise DomainError("the risk-neutral problem needs a positive excess return")
    return market.mu / market.sigma**2


def riskneutral_first_order_closed_form(alpha: float) -> tuple[float, float]:
    kap = riskneutral_kappa()
    a_plus = 1.0 / math.sqrt(kap * alpha)
    return a_plus / (1.0 - kap), a_plus


def _first_order_equations(alpha: float, am: float, ap: float):
    e1 = 2.0 * alpha * (math.log(am / ap) - (am - ap) / am) - 1.0 / ap**2
    e2 = alpha * (1.0 / ap - 1.0 / am) - 1.0 / ap**3
    return e1, e2


def riskneutral_first_order_system(alpha: float) -> tuple[float, float]:
    """Newton solve for (A_-, A_+) of the zeroth-order boundary conditions."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    s = math.sqrt(alpha)  # A scales like 1/sqrt(alpha)

    def fun(x):
        am, ap = x / s
        if am <= 0 or ap <= 0:
            return np.array([1e6, 1e6])
        e1, e2 = _first_order_equations(alpha, am, ap)
        return np.array([e1 * ap**2, e2 * ap**3])

    x, _ = _root(fun, np.array([3.0, 1.2]), "first-order system", tol=1e-12)
    return float(x[0] / s), float(x[1] / s)


def riskneutral_B(alpha: float, A_minus: float, A_plus: float) -> tuple[float, float]:
    """Displayed closed forms of the second coefficients (B_-, B_+)."""
    am, ap, a = A_minus, A_plus, alpha
    bm = 1.0 + (2 * am - 3 * ap) / (2 * a * ap**3 * (am - ap) ** 2 + 2 * am * ap * (4 * ap - 3 * am))
    bp = 1.0 + am * (3 * am - 4 * ap) / (2 * a * ap**4 * (am - ap) ** 2 + 2 * am * ap**2 * (4 * ap - 3 * am))
    return bm, bp


@dataclass(frozen=True)
class RiskNeutralSeries:
    kappa: float
    alpha: float
    delta: float
    A_minus: float
    A_plus: float
    B_minus: float
    B_plus: float
    pi_minus: float          # 1/(A_- delta) + B_-
    pi_plus: float
    lead_pi_minus: float     # (1 - kappa) kappa^(1/2) alpha^(1/2) / delta
    lead_pi_plus: float


def riskneutral_series(market: GbmParams, eps: float) -> RiskNeutralSeries:
    a = _alpha(market)
    if not 0 < eps < 1:
        raise DomainError("spread must lie in (0, 1)")
    kap = riskneutral_kappa()
    d = math.sqrt(eps)
    am, ap = riskneutral_first_order_closed_form(a)
    bm, bp = riskneutral_B(a, am, ap)
    return RiskNeutralSeries(kap, a, d, am, ap, bm, bp, 1.0 / (am * d) + bm, 1.0 / (ap * d) + bp,
                             (1 - kap) * math.sqrt(kap * a) / d, math.sqrt(kap * a) / d)


def _psi0(alpha, u, u_lo):
    return -2.0 * alpha * np.log(u / u_lo) + 2.0 * alpha * (u - u_lo) / u_lo


def _psi0_prime(alpha, u, u_lo):
    return -2.0 * alpha / u + 2.0 * alpha / u_lo


def _rn_targets(u, d):
    psi = 1.0 / (u * (u * (1.0 - d * d) - d))
    dpsi = (d + 2.0 * (d * d - 1.0) * u) / (u**2 * (d + (d * d - 1.0) * u) ** 2)
    return psi, dpsi


def riskneutral_solve(alpha: float, eps: float, n_grid: int = 1000) -> FreeBoundarySolution:
    """Solve the two conditions at u_+ for Psi_0, which meets those at u_- by design.

    u = -(1 + zeta)/delta with delta = sqrt(eps); u_+ < u_- and the weights
    are pi = 1 + 1/(u delta).
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not 0 < eps < 1:
        raise DomainError("spread must lie in (0, 1)")
    d = math.sqrt(eps)
    am, ap = riskneutral_first_order_closed_form(alpha)

    def fun(x):
        u_lo, u_hi = x  # u_lo is u_-, the larger one
        if u_hi <= 0 or u_lo <= 0:
            return np.array([1e6, 1e6])
        psi, dpsi = _rn_targets(u_hi, d)
        return np.array([(_psi0(alpha, u_hi, u_lo) - psi) * u_hi**2,
                         (_psi0_prime(alpha, u_hi, u_lo) - dpsi) * u_hi**3])

    x, res = _root(fun, np.array([am, ap]), "risk-neutral boundary solve", tol=1e-12)
    u_m, u_p = float(x[0]), float(x[1])
    if not u_m > u_p > d / (1.0 - d * d):
        raise SolverError(f"no admissible bracket: u_-={u_m}, u_+={u_p}")
    grid = np.linspace(u_p, u_m, n_grid)
    psi = _psi0(alpha, grid, u_m)
    pm, pp = 1.0 + 1.0 / (u_m * d), 1.0 + 1.0 / (u_p * d)
    zm, zp = -1.0 - u_m * d, -1.0 - u_p * d
    return FreeBoundarySolution(pm, pp, (grid, psi), res, "Numeric", eps,
                                aux={"u_minus": u_m, "u_plus": u_p, "zeta_minus": zm, "zeta_plus": zp})


@dataclass(frozen=True)
class RiskNeutralAtc:
    displayed: float      # sigma^2 (1 - kappa) kappa^(3/2) / (2 sqrt(eps))
    leading: float        # sigma^2 / (2 (A_- - A_+) A_+^2 sqrt(eps))
    exact: float | None   # ergodic formula at supplied boundaries
    welfare: float | None  # r + mu pi_-


def riskneutral_atc(market: GbmParams, eps: float,
                    solution: FreeBoundarySolution | None = None) -> RiskNeutralAtc:
    a = _alpha(market)
    kap = riskneutral_kappa()
    sig2 = market.sigma**2
    am, ap = riskneutral_first_order_closed_form(a)
    disp = sig2 * (1.0 - kap) * kap**1.5 / (2.0 * math.sqrt(eps))
    lead = sig2 / (2.0 * (am - ap) * ap**2 * math.sqrt(eps))
    exact = welfare = None
    if solution is not None:
        exact = atc_constant_proportion(market, 0.5 * (solution.lower + solution.upper), eps,
                                        "exact", band=(solution.lower, solution.upper))
        welfare = market.interest_r + market.mu * solution.lower
    return RiskNeutralAtc(disp, lead, exact, welfare)


def extract_first_coefficient(deltas, values, limit: float, order: int = 3) -> float:
    """Richardson-style estimate of c_1 in values = limit + c_1 delta + c_2 delta^2 + ...

    Fits a polynomial of the given order through (delta, values - limit)
    with zero constant term.
    """
    d = np.asarray(deltas, dtype=float)
    y = np.asarray(values, dtype=float) - limit
    V = np.column_stack([d**k for k in range(1, order + 1)])
    c, *_ = np.linalg.lstsq(V, y, rcond=None)
    return float(c[0])


def riskneutral_B_numeric(alpha: float, eps_ladder=None) -> tuple[float, float]:
    """(B_-, B_+) read off the numeric u_+/-(eps) via u = A - A^2 (B - 1) delta + O(delta^2)."""
    eps_ladder = np.geomspace(1e-8, 1e-5, 7) if eps_ladder is None else np.asarray(eps_ladder)
    am, ap = riskneutral_first_order_closed_form(alpha)
    sols = [riskneutral_solve(alpha, float(e), n_grid=2) for e in eps_ladder]
    d = np.sqrt(eps_ladder)
    cm = extract_first_coefficient(d, [s.aux["u_minus"] for s in sols], am)
    cp = extract_first_coefficient(d, [s.aux["u_plus"] for s in sols], ap)
    return 1.0 - cm / am**2, 1.0 - cp / ap**2
