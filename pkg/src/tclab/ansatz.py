"""Polynomial approximations of the shadow-price function g and their ODE residuals.

g is written as a blend of two local expansions, one anchored at each
trading boundary, plus corrections that vanish at both boundaries:

    g(z) = (1 + C_- a^3 + D_- a^4 + E_- a^5) (z - p_+)/(p_- - p_+)
         + (1 - delta^3 + C_+ b^3 + D_+ b^4 + E_+ b^5) (z - p_-)/(p_+ - p_-)
         + M_0 a^2 b^2 + M_+ a b^3 + M_- a^3 b + G_+ a b^2 + G_- a^2 b
         + L_+ a b^4 + L_- a^4 b,        a = z - p_-,  b = z - p_+.

Everything here accepts complex input so that Taylor coefficients in delta
can be read off exactly with a discrete Cauchy integral
(:func:`taylor_coefficients`).  That is how "the ODE holds at order k" is
checked: the order-k coefficient of the residual must vanish for every
interior point z = theta p_- + (1 - theta) p_+.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .boundaries import (letf_kappa_expansion, logcontract_expansion,
                         utility_kappa_expansion)
from .costs import BoundaryExpansion
from .objectives import Letf, LogContract, LogUtility, ObjectiveSpec, PowerUtility
from .params import DomainError

THETA_GRID = np.linspace(0.0, 1.0, 101)
COEFF_NAMES = ("C_plus", "C_minus", "D_plus", "D_minus", "E_plus", "E_minus", "G_plus",
               "G_minus", "L_plus", "L_minus", "M0", "M_plus", "M_minus")


@dataclass(frozen=True)
class AnsatzCoeffs:
    C_plus: float = 0.0
    C_minus: float = 0.0
    D_plus: float = 0.0
    D_minus: float = 0.0
    E_plus: float = 0.0
    E_minus: float = 0.0
    G_plus: float = 0.0
    G_minus: float = 0.0
    L_plus: float = 0.0
    L_minus: float = 0.0
    M0: float = 0.0
    M_plus: float = 0.0
    M_minus: float = 0.0

    def replace(self, **changes) -> "AnsatzCoeffs":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def _monomials(c: AnsatzCoeffs, w, delta):
    """g - 1 as a list of (coefficient, i, j) standing for coefficient * a^i * b^j."""
    return [
        (-c.C_minus / w, 3, 1), (-c.D_minus / w, 4, 1), (-c.E_minus / w, 5, 1),
        (-(delta**3) / w, 1, 0), (c.C_plus / w, 1, 3), (c.D_plus / w, 1, 4), (c.E_plus / w, 1, 5),
        (c.M0, 2, 2), (c.M_plus, 1, 3), (c.M_minus, 3, 1), (c.G_plus, 1, 2), (c.G_minus, 2, 1),
        (c.L_plus, 1, 4), (c.L_minus, 4, 1),
    ]


def _pow(x, n):
    return x**n if n > 0 else 1.0


def eval_ansatz(c: AnsatzCoeffs, lower: float, upper: float, eps: float, z):
    """Return (g, g', g'') at real z in [lower, upper], with delta = eps^(1/3)."""
    z = np.asarray(z, dtype=float)
    tol = 1e-12 * max(1.0, abs(lower), abs(upper))
    if not lower < upper:
        raise DomainError("need lower < upper")
    if np.any(z < lower - tol) or np.any(z > upper + tol):
        raise DomainError("z must lie in the band")
    v, v1, v2 = _eval(c, lower, upper, eps ** (1.0 / 3.0), z)
    return 1.0 + v, v1, v2


def _eval(c: AnsatzCoeffs, lower, upper, delta, z):
    """(g - 1, g', g''); every argument may be a complex array and they broadcast."""
    a = z - lower
    b = z - upper
    v = v1 = v2 = 0.0
    for k, i, j in _monomials(c, upper - lower, delta):
        if isinstance(k, float) and k == 0.0:
            continue
        v = v + k * _pow(a, i) * _pow(b, j)
        d1 = i * _pow(a, i - 1) * _pow(b, j) + j * _pow(a, i) * _pow(b, j - 1)
        d2 = (i * (i - 1) * _pow(a, i - 2) * _pow(b, j) + 2 * i * j * _pow(a, i - 1) * _pow(b, j - 1)
              + j * (j - 1) * _pow(a, i) * _pow(b, j - 2))
        v1 = v1 + k * d1
        v2 = v2 + k * d2
    return v, v1, v2


# --------------------------------------------------------------------------
# ODE residuals.  Each takes (z, v, v1, v2) with g = 1 + v.


def _letf_shadow(k: Letf):
    lam, gam = k.Lambda, k.gamma

    def res(z, v, v1, v2):
        q = z * (1.0 - z)
        g = 1.0 + v
        frac = (z - lam) + q * v / (1.0 + z * v)
        return 0.5 * v2 * q**2 + v1 * z * (1.0 - z) ** 2 - gam * (g + v1 * q) ** 2 * frac

    return res


def _letf_original(k: Letf):
    lam, gam = k.Lambda, k.gamma

    def res(p, v, g1, g2):
        g = 1.0 + v
        t1 = 2 * gam * (p * v + 1) ** 3 * (p - lam)
        t2 = 2 * p * (p * v + 1) * (-g1 + p * (g1 + v**2) + v * (v + 2))
        inner = (g2 - 4 * g * g1 - 2 * g1
                 + p**2 * (3 * g2 + 4 * g1**2 - 2 * g1 + 2 * g * (-g2 + g1 + 3) + 2 * g**3 - 6 * g**2 - 2)
                 + p**3 * (v * g2 - 2 * g1**2)
                 + p * (-3 * g2 - 2 * g1**2 + 4 * g1 + g * (g2 + 2 * g1 - 6) + 2 * g**3 + 4)
                 + 2 * v * (v * v + 3 * v + 3))
        return t1 + t2 - p**2 * inner

    return res


def _log_contract(k: LogContract, a: float):
    ys, gam = k.y_star, k.gamma

    def res(y, v, v1, v2):
        return 0.5 * y**2 * v2 + (1.0 + a) * y * v1 + a * v + gam * (ys - y)

    return res


def _power_utility(k: PowerUtility):
    # The constant written as pi in the power-utility equation is the Merton
    # fraction; z is the running weight.
    ps, gam = k.pi_star, k.gamma

    def res(z, v, g1, g2):
        g = 1.0 + v
        t1 = z * (z - 1) ** 2 * ((z - 1) * z * g2 + 2 * g1 * (-ps * gam + z**2 * g1 + z - 1))
        t2 = (z - 1) * g * (2 * ps * gam - (z - 1) * z**3 * g2 - 2 * z**2 * (-ps * gam + gam + z) * g1)
        return t1 + t2 - 2 * (ps - 1) * gam * z * g**2

    return res


def _log_utility(k: LogUtility):
    ps = k.pi_star

    def res(z, v, g1, g2):
        g = 1.0 + v
        q = z * (1.0 - z)
        rhs = z * (g + g1 * q) ** 2 / (1.0 + z * v) - ps * g - g1 * (q * ps + q * (1.0 - z))
        return rhs - 0.5 * g2 * q**2

    return res


def residual_function(spec: ObjectiveSpec, variant: str = "shadow") -> Callable:
    """The ODE for g written as F(z, g-1, g', g'') = 0.

    ``variant`` only matters for the leveraged fund, where "shadow" is the
    potential shadow market and "original" the fund's own value problem.
    """
    k = spec.kind
    if isinstance(k, Letf):
        if variant == "shadow":
            return _letf_shadow(k)
        if variant == "original":
            return _letf_original(k)
        raise DomainError(f"unknown variant {variant!r}")
    if isinstance(k, LogContract):
        m = spec.market
        return _log_contract(k, m.mu / m.sigma**2)
    if isinstance(k, PowerUtility):
        return _power_utility(k)
    if isinstance(k, LogUtility):
        return _log_utility(k)
    raise DomainError(f"no polynomial Ansatz for {spec.name}")


def ode_residual(spec: ObjectiveSpec, coeffs: AnsatzCoeffs, expansion: BoundaryExpansion,
                 delta, theta, variant: str = "shadow") -> np.ndarray:
    """Residual at z = theta lower + (1 - theta) upper, boundaries taken from the series at delta."""
    delta = np.asarray(delta)
    if delta.ndim:
        delta = delta[..., None]
    lo, hi = _series_boundaries(expansion, delta)
    theta = np.asarray(theta, dtype=float)
    z = theta * lo + (1.0 - theta) * hi
    v, v1, v2 = _eval(coeffs, lo, hi, delta, z)
    return residual_function(spec, variant)(z, v, v1, v2)


def _series_boundaries(e: BoundaryExpansion, d):
    lo = e.target - e.A_minus * d - e.B_minus * d**2 + (e.c_minus or 0.0) * d**3
    hi = e.target + e.A_plus * d - e.B_plus * d**2 + (e.c_plus or 0.0) * d**3
    return lo, hi


def slope_at_boundaries(coeffs: AnsatzCoeffs, expansion: BoundaryExpansion, delta):
    """(g'(lower), g'(upper)) for the series boundaries at delta."""
    lo, hi = _series_boundaries(expansion, delta)
    return _eval(coeffs, lo, hi, delta, lo)[1], _eval(coeffs, lo, hi, delta, hi)[1]


# --------------------------------------------------------------------------
# Taylor coefficients in delta


def taylor_coefficients(fn: Callable, orders, radius: float = 0.05, n: int = 64) -> np.ndarray:
    """Taylor coefficients of an analytic ``fn(delta)`` at delta = 0.

    Uses the trapezoid rule on |delta| = radius, which converges
    geometrically.  ``fn`` is called once with the array of n contour points
    and must return an array whose leading axis runs over them.  The result
    has shape (len(orders), *rest).
    """
    k = np.arange(n)
    pts = radius * np.exp(2j * np.pi * k / n)
    vals = np.asarray(fn(pts), dtype=complex)
    out = []
    for m in orders:
        w = np.exp(-2j * np.pi * k * m / n) / (n * radius**m)
        out.append(np.tensordot(w, vals, axes=(0, 0)).real)
    return np.array(out)


def residual_taylor(spec: ObjectiveSpec, coeffs: AnsatzCoeffs, expansion: BoundaryExpansion,
                    theta, orders=(1, 2, 3, 4), variant: str = "shadow",
                    radius: float = 0.05) -> np.ndarray:
    """Order-k Taylor coefficients in delta of the residual, one row per order and one column per theta."""
    return taylor_coefficients(lambda d: ode_residual(spec, coeffs, expansion, d, theta, variant),
                               orders, radius)


# --------------------------------------------------------------------------
# Convergence order


@dataclass(frozen=True)
class ResidualOrder:
    slope: float
    r_squared: float
    deltas: np.ndarray
    residuals: np.ndarray
    warning: str | None = None


def fit_order(deltas, residuals) -> ResidualOrder:
    """Least-squares slope of log residual against log delta.

    A warning is attached when the residual is not monotone along the ladder
    or the fit is poor, since the slope then says little about the order.
    """
    d = np.asarray(deltas, dtype=float)
    r = np.abs(np.asarray(residuals, dtype=float))
    if d.size < 3:
        raise DomainError("need at least three points to fit an order")
    if np.any(r == 0):
        raise DomainError("residual vanished exactly; order undefined")
    x, y = np.log(d), np.log(r)
    slope, icpt = np.polyfit(x, y, 1)
    fit = slope * x + icpt
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    order = np.argsort(d)
    diffs = np.diff(r[order])
    warn = None
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        warn = "residual is not monotone in delta"
    elif r2 < 0.99:
        warn = f"poor log-log fit (R^2={r2:.3f})"
    return ResidualOrder(float(slope), float(r2), d, r, warn)


def sup_residual(spec: ObjectiveSpec, coeffs: AnsatzCoeffs, expansion: BoundaryExpansion,
                 eps: float, theta=None, variant: str = "shadow") -> float:
    """max over the theta grid (default 101 points in [0, 1]) of |residual|."""
    theta = THETA_GRID if theta is None else theta
    return float(np.max(np.abs(ode_residual(spec, coeffs, expansion, expansion.delta(eps), theta, variant))))


def residual_order(spec: ObjectiveSpec, solution: "AnsatzSolution", eps_ladder,
                   theta=None, variant: str = "shadow") -> ResidualOrder:
    """Order in delta of the sup residual along a ladder of spreads.

    The ladder needs at least four values spanning three decades.
    """
    eps = np.sort(np.asarray(eps_ladder, dtype=float))
    if eps.size < 4 or eps[-1] / eps[0] < 1e3 * (1 - 1e-9):
        raise DomainError("need at least four spreads spanning three decades")
    exp = solution.expansion
    sups = [sup_residual(spec, solution.coeffs, exp, float(e), theta, variant) for e in eps]
    return fit_order([exp.delta(float(e)) for e in eps], sups)


# --------------------------------------------------------------------------
# Closed-form coefficients


@dataclass(frozen=True)
class AnsatzSolution:
    coeffs: AnsatzCoeffs
    expansion: BoundaryExpansion
    determinant: float | None = None
    system: np.ndarray | None = None


def letf_shadow_coeffs(spec: ObjectiveSpec, kappa: float = -1.0, G: float = 0.0,
                       M0: float = 0.0) -> AnsatzSolution:
    """Coefficients for the potential shadow market of a leveraged fund.

    With kappa = -1 every order through delta^3 vanishes and the third-order
    boundary terms c_+/- are included.  Other kappa values plug into the same
    formulas and are meant for comparison only.
    """
    k = spec.kind
    if not isinstance(k, Letf):
        raise DomainError("leveraged-fund objective required")
    lam, gam = k.Lambda, k.gamma
    p = lam * (lam - 1.0)
    C = G - gam / (6.0 * p**2)
    D = M0 - gam * (3.0 + lam * (kappa - 2.0 * (3.0 + kappa))) / (6.0 * p**3)
    E = gam * (-99.0 + 2.0 * (153.0 + 33.0 * gam * (lam - 1.0) - 137.0 * lam) * lam) / (360.0 * p**4)
    L = gam * (-9.0 + (30.0 + 9.0 * gam * (lam - 1.0) - 29.0 * lam) * lam) / (36.0 * p**4)
    c_sum = lam * (1.0 - lam)
    c_diff = -12.0 * (E - L) * p**4 / gam**2  # c_- minus c_+
    coeffs = AnsatzCoeffs(C_plus=C, C_minus=C, D_plus=D, D_minus=D, E_plus=E, E_minus=E,
                          G_plus=G, G_minus=G, L_plus=L, L_minus=L, M0=M0, M_plus=D, M_minus=D)
    base = letf_kappa_expansion(lam, gam, kappa, kappa)
    exp = dataclasses.replace(base, c_plus=0.5 * (c_sum - c_diff), c_minus=0.5 * (c_sum + c_diff))
    return AnsatzSolution(coeffs, exp)


def logcontract_coeffs(spec: ObjectiveSpec, G: float = 0.0, M0: float = 0.0) -> AnsatzSolution:
    """Coefficients for the log-contract hedge, third-order terms from a 4x4 linear system.

    Unknowns are (E, L_-, L_+, c_- + c_+).  Each row is an order-delta^3
    condition divided by gamma, so the determinant scales like y_star^12/gamma^2.
    The split of c_- + c_+ into its parts comes from the two boundary-slope
    conditions at the same order.
    """
    k, m = spec.kind, spec.market
    exp = logcontract_expansion(spec)
    ys, gam = k.y_star, k.gamma
    a = m.mu / m.sigma**2
    y4 = ys**4
    mat = np.array([
        [60.0 * y4, -15.0 * y4, -15.0 * y4, 0.0],
        [60.0 * y4, -24.0 * y4, -6.0 * y4, 0.0],
        [360.0 * y4, -216.0 * y4, 0.0, 0.0],
        [120.0 * y4, -96.0 * y4, 0.0, 2.0 * gam**2],
    ]) / gam
    rhs = -np.array([a * a + 5 * a + 9, a * a + 5 * a + 9, 4 * a * a + 30 * a + 45, 12 * a + 9])
    E, Lm, Lp, c_sum = map(float, np.linalg.solve(mat, rhs))
    c_minus = (9.0 - 4.0 * a * a) / (60.0 * gam)
    c_plus = c_sum - c_minus
    C = G - gam / (6.0 * ys**2)
    D = M0 + gam / (2.0 * ys**3) + gam * a / (6.0 * ys**3)
    coeffs = AnsatzCoeffs(C_plus=C, C_minus=C, D_plus=D, D_minus=D, E_plus=E, E_minus=E,
                          G_plus=G, G_minus=G, L_plus=Lp, L_minus=Lm, M0=M0, M_plus=D, M_minus=D)
    exp = dataclasses.replace(exp, c_plus=float(c_plus), c_minus=float(c_minus))
    return AnsatzSolution(coeffs, exp, float(np.linalg.det(mat)), mat)


def utility_base_coeffs(spec: ObjectiveSpec, G: float = 0.0, M0: float = 0.0) -> AnsatzCoeffs:
    k = spec.kind
    ps, gam = k.pi_star, k.gamma
    C = G - gam / (6.0 * (ps - 1.0) ** 2 * ps**2)
    return AnsatzCoeffs(C_plus=C, C_minus=C, G_plus=G, G_minus=G, M0=M0)


# --------------------------------------------------------------------------
# Second-order fits with unknown D and M


@dataclass(frozen=True)
class SecondOrderFit:
    kappa: float
    misfit: float          # norm of the order-delta^2 conditions after the fit
    first_order: float     # norm of the order-delta conditions (should be ~0)
    coeffs: AnsatzCoeffs


_FIT_NAMES = ("D_plus", "D_minus", "M_plus", "M_minus")


def _order_conditions(spec, coeffs, expansion, theta, variant, order, radius):
    res = taylor_coefficients(lambda d: ode_residual(spec, coeffs, expansion, d, theta, variant),
                              (order,), radius)[0]
    slopes = taylor_coefficients(lambda d: np.stack(slope_at_boundaries(coeffs, expansion, d), axis=-1),
                                 (order + 1,), radius)[0]
    return np.concatenate([res, slopes])


def fit_second_order(spec: ObjectiveSpec, base: AnsatzCoeffs, expansion: BoundaryExpansion,
                     variant: str = "shadow", n_theta: int = 9, radius: float = 0.05) -> SecondOrderFit:
    """Choose D_+/-, M_+/- to meet the order-delta^2 residual and order-delta^3 slope conditions.

    The conditions are linear in these four coefficients, so the fit is an
    exact least-squares solve.  ``misfit`` is zero (to rounding) only when the
    boundary expansion admits a consistent second-order solution.
    """
    theta = np.linspace(0.0, 1.0, n_theta)
    z0 = base.replace(**{n: 0.0 for n in _FIT_NAMES})
    f0 = _order_conditions(spec, z0, expansion, theta, variant, 2, radius)
    cols = []
    for n in _FIT_NAMES:
        cols.append(_order_conditions(spec, z0.replace(**{n: 1.0}), expansion, theta, variant, 2,
                                      radius) - f0)
    J = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(J, -f0, rcond=None)
    fitted = z0.replace(**dict(zip(_FIT_NAMES, map(float, sol))))
    mis = float(np.linalg.norm(f0 + J @ sol))
    first = float(np.linalg.norm(_order_conditions(spec, fitted, expansion, theta, variant, 1, radius)))
    kap = expansion.kappa_plus if expansion.kappa_plus is not None else math.nan
    return SecondOrderFit(float(kap), mis, first, fitted)


@dataclass(frozen=True)
class ParameterScan:
    values: np.ndarray
    misfits: np.ndarray
    best: float


def second_order_scan(spec: ObjectiveSpec, base: AnsatzCoeffs, expansions, values,
                      variant: str = "shadow") -> ParameterScan:
    """Second-order misfit for each candidate boundary expansion (D, M refitted each time)."""
    values = np.asarray(values, dtype=float)
    mis = np.array([fit_second_order(spec, base, e, variant).misfit for e in expansions])
    return ParameterScan(values, mis, float(values[int(np.argmin(mis))]))


def kappa_scan(spec: ObjectiveSpec, kappas=None, variant: str = "shadow") -> ParameterScan:
    """Second-order misfit as a function of a common second-order multiplier kappa.

    The default grid runs over [-1, 1] in steps of 0.01.
    """
    kappas = np.round(np.arange(-1.0, 1.0 + 1e-9, 0.01), 10) if kappas is None else np.asarray(kappas)
    k = spec.kind
    if isinstance(k, Letf):
        C = -k.gamma / (6 * (k.Lambda * (k.Lambda - 1)) ** 2)
        base = AnsatzCoeffs(C_plus=C, C_minus=C)
        exps = [letf_kappa_expansion(k.Lambda, k.gamma, float(x), float(x)) for x in kappas]
    else:
        base = utility_base_coeffs(spec)
        exps = [utility_kappa_expansion(spec, float(x), float(x)) for x in kappas]
    return second_order_scan(spec, base, exps, kappas, variant)


def logcontract_B_scan(spec: ObjectiveSpec, values) -> ParameterScan:
    """Second-order misfit of the log-contract Ansatz as the common coefficient B varies."""
    sol = logcontract_coeffs(spec)
    base = AnsatzCoeffs(C_plus=sol.coeffs.C_plus, C_minus=sol.coeffs.C_minus)
    e = logcontract_expansion(spec)
    exps = [dataclasses.replace(e, B_plus=float(b), B_minus=float(b)) for b in values]
    return second_order_scan(spec, base, exps, values)
