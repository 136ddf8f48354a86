"""Long-run trading frequency and cost of band policies.

Three ways of trading at the edges of a no-trade band [pi_-, pi_+] around a
target weight Lambda are covered:

* minimal trades (reflection), which only push the weight back to the edge;
* bulk trades, which jump back to a reset level inside the band;
* small trades, which jump a distance of order eps^(2/3) inward.

Each comes with closed-form leading asymptotics in delta = eps^(1/3) and with
an exact ergodic evaluation.  The exact route maps the weight to the
risky/safe ratio zeta = pi/(1-pi), which is a geometric Brownian motion with
drift mu and volatility sigma between trades, and reads the selling frequency
off the stationary density of log|zeta|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import Band, DomainError, GbmParams, ResetToPoint
from .stationary import edge_flux_rates, ergodic_average, reset_inner_density, resetted_density


@dataclass(frozen=True)
class EvaluatedBoundaries:
    lower: float
    upper: float
    order: int  # highest power of delta kept


@dataclass(frozen=True)
class BoundaryExpansion:
    """Trading boundaries ``target +/- A delta - B delta^2 + c delta^3``.

    ``delta = eps ** delta_exponent``.  ``kappa_plus``/``kappa_minus`` are
    optional multipliers that some objectives attach to the second-order term;
    they are informational and already folded into ``B``.
    """

    target: float
    A_plus: float
    A_minus: float
    B_plus: float = 0.0
    B_minus: float = 0.0
    kappa_plus: float | None = None
    kappa_minus: float | None = None
    c_plus: float | None = None
    c_minus: float | None = None
    delta_exponent: float = 1.0 / 3.0

    def __post_init__(self):
        if not (self.A_plus > 0 and self.A_minus > 0):
            raise DomainError("first-order coefficients must be positive")

    def delta(self, eps: float) -> float:
        if not eps > 0:
            raise DomainError("spread must be positive")
        return eps ** self.delta_exponent

    def evaluate(self, eps: float, order: int | None = None) -> EvaluatedBoundaries:
        """Truncated series; by default keeps every coefficient that is set."""
        d = self.delta(eps)
        top = 3 if (self.c_plus is not None or self.c_minus is not None) else 2
        order = top if order is None else min(order, top)
        lo = self.target - self.A_minus * d
        hi = self.target + self.A_plus * d
        if order >= 2:
            lo -= self.B_minus * d**2
            hi -= self.B_plus * d**2
        if order >= 3:
            lo += (self.c_minus or 0.0) * d**3
            hi += (self.c_plus or 0.0) * d**3
        return EvaluatedBoundaries(lo, hi, order)

    def eps_threshold(self, eps_max: float = 1.0, n: int = 400) -> float:
        """Largest eps on a log grid below which lower < target < upper holds throughout."""
        grid = np.geomspace(1e-16, eps_max, n)
        good = 0.0
        for e in grid:
            b = self.evaluate(float(e))
            if b.lower < self.target < b.upper:
                good = float(e)
            else:
                break
        return good


@dataclass(frozen=True)
class CostReport:
    """Long-run statistics of one policy.

    ``trc`` is reported per unit of wealth for weight-based policies, where
    it coincides with ``atc``.  ``tf`` counts sales and purchases together.
    """

    trc: float
    atc: float
    sf: float
    regime: str
    mode: str
    tf: float | None = None
    trade_size: float | None = None  # size of a sale, in units of pi

    def __post_init__(self):
        for name in ("trc", "atc", "sf"):
            v = getattr(self, name)
            if not v >= 0:
                raise DomainError(f"{name} must be nonnegative, got {v}")


# --------------------------------------------------------------------------
# Local times of reflected GBM


def _push_rate(sigma2: float, b: float, w: float) -> float:
    """(Sigma^2/2) b / (e^{b w} - 1), continuous at b = 0."""
    if abs(b * w) < 1e-300 or b == 0.0:
        return sigma2 / (2.0 * w)
    return 0.5 * sigma2 * b / math.expm1(b * w)


def local_time_rates(params: GbmParams, band: Band) -> tuple[float, float]:
    """Long-run push rates (L, U) at the lower and upper edge of a positive band."""
    if not band.lower > 0:
        raise DomainError("band must be positive")
    w = math.log(band.upper / band.lower)
    if not w > 0:
        raise DomainError("upper/lower must exceed 1")
    s2 = params.vol_Sigma**2
    b = params.alpha() - 1.0
    if abs(b) < 1e-12:
        b = 0.0
    return _push_rate(s2, b, w), _push_rate(s2, -b, w)


# --------------------------------------------------------------------------
# Minimal trades


def _expansion_or_band(expansion: BoundaryExpansion | None, band, eps: float) -> tuple[float, float]:
    if band is not None:
        lo, hi = band
    elif expansion is not None:
        b = expansion.evaluate(eps)
        lo, hi = b.lower, b.upper
    else:
        raise DomainError("give either explicit boundaries or an expansion")
    if not lo < hi:
        raise DomainError("lower boundary must lie below upper boundary")
    return lo, hi


def trc_constant_position(params: GbmParams, eps: float, mode: str = "exact",
                          expansion: BoundaryExpansion | None = None,
                          band: tuple[float, float] | None = None,
                          variant: str = "corrected") -> float:
    """Selling cost per year of keeping the risky position Y in [y_-, y_+].

    Y drifts at mu + r between trades.  ``variant="displayed"`` drops the
    overall factor y_star from the eps-order asymptotic term; the default
    keeps it, which is what the exact formula expands to.
    """
    sigma2 = params.vol_Sigma**2
    m = params.mu + params.interest_r
    if mode == "exact":
        lo, hi = _expansion_or_band(expansion, band, eps)
        if not lo > 0:
            raise DomainError("position band must be positive")
        b = 2.0 * m / sigma2 - 1.0
        return eps * hi * _push_rate(sigma2, -b, math.log(hi / lo))
    if mode != "asymptotic":
        raise DomainError("mode must be 'exact' or 'asymptotic'")
    if expansion is None:
        raise DomainError("asymptotic mode needs an expansion")
    e = expansion
    s = e.A_plus + e.A_minus
    d = eps ** (1.0 / 3.0)
    lead = sigma2 * e.target**2 / (2.0 * s) * d**2
    bracket = m / sigma2 + (e.A_plus**2 - e.A_minus**2 + e.target * (e.B_plus - e.B_minus)) / s**2
    scale = 1.0 if variant == "displayed" else e.target
    return lead + 0.5 * sigma2 * scale * bracket * eps


def _check_weight(Lambda: float) -> None:
    if Lambda in (0.0, 1.0) or not math.isfinite(Lambda):
        raise DomainError("target weight must differ from 0 and 1")


def _same_branch(lo: float, hi: float) -> None:
    for p in (lo, hi):
        if p in (0.0, 1.0):
            raise DomainError("boundaries must avoid the weights 0 and 1")
    if (lo < 0) != (hi < 0) or (lo < 1) != (hi < 1):
        raise DomainError("both boundaries must lie on the same side of 0 and of 1")


def atc_constant_proportion(params: GbmParams, Lambda: float, eps: float, mode: str = "exact",
                            expansion: BoundaryExpansion | None = None,
                            band: tuple[float, float] | None = None,
                            variant: str = "corrected") -> float:
    """Return drag of keeping the risky weight in [pi_-, pi_+] by minimal trades.

    The ratio zeta = pi/(1-pi) drifts at the excess return mu.
    ``variant="displayed"`` uses -(mu/sigma^2)(A_+ - A_-)^2 as the drift
    contribution to the eps-order term; the default uses -(mu/2) Lambda (Lambda-1),
    which is what the exact formula expands to.
    """
    _check_weight(Lambda)
    sigma2 = params.vol_Sigma**2
    mu = params.mu
    if mode == "exact":
        lo, hi = _expansion_or_band(expansion, band, eps)
        _same_branch(lo, hi)
        b = 2.0 * mu / sigma2 - 1.0
        log_r = math.log(hi * (1.0 - lo) / (lo * (1.0 - hi)))
        frac = eps * hi * (1.0 - hi) / (1.0 - eps * hi)
        return frac * _push_rate(sigma2, -b, log_r)
    if mode != "asymptotic":
        raise DomainError("mode must be 'exact' or 'asymptotic'")
    if expansion is None:
        raise DomainError("asymptotic mode needs an expansion")
    e = expansion
    L = Lambda
    ap, am = e.A_plus, e.A_minus
    s = ap + am
    d = eps ** (1.0 / 3.0)
    lead = sigma2 * L**2 * (L - 1.0) ** 2 / (2.0 * s) * d**2
    core = -am**2 * (L - 1.0) + 2.0 * am * ap * L + ap**2 * (3.0 * L - 1.0) - (L - 1.0) * L * (e.B_minus - e.B_plus)
    if variant == "displayed":
        second = sigma2 * (L - 1.0) * L / (2.0 * s**2) * (core - mu / sigma2 * (ap - am) ** 2)
    else:
        second = sigma2 * (L - 1.0) * L / (2.0 * s**2) * core - 0.5 * mu * L * (L - 1.0)
    return lead + second * eps


# --------------------------------------------------------------------------
# Resetted GBM


def reset_jump_rate(params: GbmParams, band: Band, variant: str = "displayed") -> float:
    """Long-run number of downward resets (from the upper edge) per year.

    ``variant="displayed"`` evaluates the closed form with the auxiliary
    constant Theta exactly as printed, which uses the exponent 2(M - Sigma^2)/Sigma^2.
    ``variant="ergodic"`` uses Theta = 2 E[eta] from the stationary density,
    which is what the ergodic argument behind the formula requires.
    """
    if not isinstance(band.policy, ResetToPoint):
        raise DomainError("needs a ResetToPoint band")
    lo, st, hi = band.log_levels()
    M, s2 = params.drift_M, params.vol_Sigma**2
    if variant == "displayed":
        if math.isclose(M, s2, rel_tol=1e-12):
            raise DomainError("the displayed rate divides by Sigma^2 - M and is singular at M = Sigma^2")
        k = 2.0 * (M - s2) / s2
        e1, e2, e3 = (math.exp(k * (lo + st)), math.exp(k * (lo + hi)), math.exp(k * (st + hi)))
        theta = ((lo - st) * (lo - hi) * (e1 - e2) / ((lo - st) * e1 + (hi - lo) * e2 + (st - hi) * e3)
                 + st + s2 / (s2 - M) + hi)
    elif variant == "ergodic":
        theta = 2.0 * ergodic_average(lambda x: x, resetted_density(params, band))
    else:
        raise DomainError("variant must be 'displayed' or 'ergodic'")
    num = -(lo + st) * (M - 0.5 * s2) + 0.5 * (2.0 * M - s2) * theta + s2
    return num / ((hi - lo) * (hi - st))


def _log_abs_ratio(pi: float) -> float:
    return math.log(abs(pi / (1.0 - pi)))


@dataclass(frozen=True)
class _ResetRates:
    sell: float
    buy: float


def _resetted_weight_rates(params: GbmParams, lo: float, hi: float, lo_target: float,
                           hi_target: float) -> _ResetRates:
    """Selling/buying frequencies of a weight band with reset targets, via log|zeta|."""
    for p in (lo, lo_target, hi_target):
        _same_branch(p, hi)
    if not lo < lo_target <= hi_target < hi:
        raise DomainError("need lower < lower target <= upper target < upper")
    pts = {"lo": _log_abs_ratio(lo), "hi": _log_abs_ratio(hi),
           "lt": _log_abs_ratio(lo_target), "ht": _log_abs_ratio(hi_target)}
    increasing = pts["hi"] > pts["lo"]
    if increasing:
        e_lo, e_hi, t_lo, t_hi = pts["lo"], pts["hi"], pts["lt"], pts["ht"]
    else:
        e_lo, e_hi, t_lo, t_hi = pts["hi"], pts["lo"], pts["ht"], pts["lt"]
    ratio = GbmParams(drift_M=params.mu, vol_Sigma=params.vol_Sigma)
    if lo_target == hi_target:
        band = Band.from_log(e_lo, e_hi, star=t_lo)
        dens = resetted_density(ratio, band)
    else:
        band = Band.from_log(e_lo, e_hi, inner=(t_lo, t_hi))
        dens = reset_inner_density(ratio, band)
    r_lo, r_hi = edge_flux_rates(ratio, dens)
    return _ResetRates(sell=r_hi, buy=r_lo) if increasing else _ResetRates(sell=r_lo, buy=r_hi)


def _exact_report(params, eps, lo, hi, lo_target, hi_target, regime) -> CostReport:
    rates = _resetted_weight_rates(params, lo, hi, lo_target, hi_target)
    frac = eps * (hi - hi_target) / (1.0 - eps * hi_target)
    atc = rates.sell * frac
    return CostReport(atc, atc, rates.sell, regime, "exact", tf=rates.sell + rates.buy,
                      trade_size=hi - hi_target)


def _lead(params: GbmParams, Lambda: float) -> float:
    return params.vol_Sigma**2 * Lambda**2 * (Lambda - 1.0) ** 2


def minimal_trade_stats(params: GbmParams, Lambda: float, expansion: BoundaryExpansion, eps: float,
                        mode: str = "exact") -> CostReport:
    """Control limit policy; trade frequency is infinite, so ``sf`` is reported as inf."""
    atc = atc_constant_proportion(params, Lambda, eps, mode, expansion=expansion)
    if mode == "asymptotic":
        atc = _lead(params, Lambda) / (2.0 * (expansion.A_plus + expansion.A_minus)) * eps ** (2.0 / 3.0)
    return CostReport(atc, atc, math.inf, "Minimal", mode, tf=math.inf, trade_size=0.0)


def maximal_trade_stats(params: GbmParams, Lambda: float, expansion: BoundaryExpansion, eps: float,
                        mode: str = "exact") -> CostReport:
    """Bulk trades from either edge straight back to Lambda."""
    _check_weight(Lambda)
    if math.isclose(params.mu, 0.5 * params.vol_Sigma**2, rel_tol=1e-12):
        raise DomainError("excluded case mu = sigma^2/2")
    if mode == "asymptotic":
        s = expansion.A_plus + expansion.A_minus
        d = eps ** (1.0 / 3.0)
        sf = _lead(params, Lambda) / (expansion.A_plus * s) / d**2
        atc = _lead(params, Lambda) / s * d**2
        return CostReport(atc, atc, sf, "Maximal", mode, trade_size=expansion.A_plus * d)
    b = expansion.evaluate(eps)
    return _exact_report(params, eps, b.lower, b.upper, Lambda, Lambda, "Maximal")


def small_trade_stats(params: GbmParams, Lambda: float, expansion: BoundaryExpansion,
                      kappa_plus: float, kappa_minus: float, eps: float,
                      mode: str = "exact") -> CostReport:
    """Trades of size kappa eps^(2/3) inward from each edge."""
    _check_weight(Lambda)
    if not (kappa_plus > 0 and kappa_minus > 0):
        raise DomainError("trade-size multipliers must be positive")
    if mode == "asymptotic":
        s = expansion.A_plus + expansion.A_minus
        sf = _lead(params, Lambda) / (2.0 * s * kappa_plus) / eps
        atc = _lead(params, Lambda) / (2.0 * s) * eps ** (2.0 / 3.0)
        return CostReport(atc, atc, sf, "Small", mode, trade_size=kappa_plus * eps ** (2.0 / 3.0))
    b = expansion.evaluate(eps)
    e23 = eps ** (2.0 / 3.0)
    return _exact_report(params, eps, b.lower, b.upper, b.lower + kappa_minus * e23,
                         b.upper - kappa_plus * e23, "Small")


def moderate_trade_stats(params: GbmParams, Lambda: float, expansion: BoundaryExpansion,
                         kappa_fraction: float, eps: float, mode: str = "exact") -> CostReport:
    """Trades from each edge to Lambda +/- kappa A_+/- delta.

    kappa = 0 sends the weight all the way back to Lambda; kappa close to 1
    makes the trades small.  This placement of the reset levels is the one
    under which the leading-order frequency and cost below hold.
    """
    _check_weight(Lambda)
    k = kappa_fraction
    if not 0.0 <= k < 1.0:
        raise DomainError("kappa must lie in [0, 1)")
    s = expansion.A_plus + expansion.A_minus
    d = eps ** (1.0 / 3.0)
    if mode == "asymptotic":
        sf = _lead(params, Lambda) / (expansion.A_plus * s * (1.0 - k * k)) / d**2
        atc = _lead(params, Lambda) / (s * (1.0 + k)) * d**2
        return CostReport(atc, atc, sf, "Moderate", mode, trade_size=(1.0 - k) * expansion.A_plus * d)
    b = expansion.evaluate(eps)
    return _exact_report(params, eps, b.lower, b.upper, Lambda - k * expansion.A_minus * d,
                         Lambda + k * expansion.A_plus * d, "Moderate")


@dataclass(frozen=True)
class ScalingCheck:
    ratio: float
    atc: float
    tf: float
    trade_size: float
    regime: str


def scaling_law_check(eps: float, alpha_exponent: int, params: GbmParams, Lambda: float,
                      expansion: BoundaryExpansion, kappa: float = 1.0,
                      mode: str = "exact") -> ScalingCheck:
    """ATC / (eps * TF * trade size) for bulk (exponent 1) or small (exponent 2) trades.

    TF is the selling frequency and the trade size is the weight change of a
    sale, pi_+ minus the level sold down to.
    """
    if alpha_exponent == 1:
        rep = maximal_trade_stats(params, Lambda, expansion, eps, mode)
    elif alpha_exponent == 2:
        rep = small_trade_stats(params, Lambda, expansion, kappa, kappa, eps, mode)
    else:
        raise DomainError("closed forms exist only for exponents 1 and 2; use Monte Carlo otherwise")
    ratio = rep.atc / (eps * rep.sf * rep.trade_size)
    return ScalingCheck(ratio, rep.atc, rep.sf, rep.trade_size, rep.regime)


def utility_expansion(Lambda: float, gamma: float) -> BoundaryExpansion:
    """Symmetric first-order band (3/(4 gamma) Lambda^2 (Lambda-1)^2)^(1/3) with no second-order term."""
    a = (0.75 / gamma * Lambda**2 * (Lambda - 1.0) ** 2) ** (1.0 / 3.0)
    return BoundaryExpansion(Lambda, a, a)
