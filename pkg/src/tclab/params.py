"""Market parameters and no-trade bands shared by the simulators and formulas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union


class DomainError(ValueError):
    """An input lies outside the region where a formula or simulator is defined."""


class SolverError(RuntimeError):
    """A root finder or shooting iteration failed to converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class GbmParams:
    """Drift and volatility of a geometric Brownian motion.

    ``drift_M`` and ``vol_Sigma`` describe the controlled process itself
    (dxi/xi = M dt + Sigma dW).  ``excess_mu`` is the asset's excess return
    over the interest rate ``interest_r``; it defaults to ``drift_M - interest_r``.
    """

    drift_M: float
    vol_Sigma: float
    interest_r: float = 0.0
    excess_mu: float | None = None

    def __post_init__(self):
        # Zero volatility is allowed so that simulators can run deterministic
        # paths; analytic formulas call alpha(), which rejects it.
        if not self.vol_Sigma >= 0:
            raise DomainError("volatility must be nonnegative")
        if not (math.isfinite(self.drift_M) and math.isfinite(self.interest_r)):
            raise DomainError("drift and interest rate must be finite")

    @classmethod
    def from_market(cls, mu: float, sigma: float, r: float = 0.0) -> "GbmParams":
        """Asset with excess return ``mu``; the controlled ratio drifts at ``mu``."""
        return cls(drift_M=mu, vol_Sigma=sigma, interest_r=r, excess_mu=mu)

    @classmethod
    def from_log_drift(cls, log_drift: float, sigma: float) -> "GbmParams":
        """Parametrize by the drift M - Sigma^2/2 of log(xi)."""
        return cls(drift_M=log_drift + 0.5 * sigma**2, vol_Sigma=sigma)

    @property
    def mu(self) -> float:
        return self.drift_M - self.interest_r if self.excess_mu is None else self.excess_mu

    @property
    def sigma(self) -> float:
        return self.vol_Sigma

    @property
    def log_drift(self) -> float:
        return self.drift_M - 0.5 * self.vol_Sigma**2

    def alpha(self) -> float:
        """2M / Sigma^2."""
        if self.vol_Sigma == 0:
            raise DomainError("2M/Sigma^2 is undefined for zero volatility")
        return 2.0 * self.drift_M / self.vol_Sigma**2


@dataclass(frozen=True)
class Reflect:
    pass


@dataclass(frozen=True)
class ResetToPoint:
    star: float


@dataclass(frozen=True)
class ResetToInner:
    lower_star: float
    upper_star: float


Policy = Union[Reflect, ResetToPoint, ResetToInner]


@dataclass(frozen=True)
class Band:
    """A no-trade interval [lower, upper] together with what happens at its edges.

    Levels are in the natural coordinate of the controlled process (xi > 0 for
    the simulators).  Use :meth:`from_log` to specify a band in log coordinates.
    """

    lower: float
    upper: float
    policy: Policy = field(default_factory=Reflect)
    spread_eps: float = 0.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(f"band needs lower < upper, got [{self.lower}, {self.upper}]")
        if not 0.0 <= self.spread_eps < 1.0:
            raise DomainError("spread must lie in [0, 1)")
        p = self.policy
        if isinstance(p, ResetToPoint) and not self.lower < p.star < self.upper:
            raise DomainError("reset point must lie strictly inside the band")
        if isinstance(p, ResetToInner) and not self.lower < p.lower_star < p.upper_star < self.upper:
            raise DomainError("inner reset points must satisfy lower < lower_star < upper_star < upper")

    @classmethod
    def from_log(cls, eta_lower: float, eta_upper: float, star: float | None = None,
                 inner: tuple[float, float] | None = None, spread_eps: float = 0.0) -> "Band":
        """Build a band from log levels; ``star`` or ``inner`` select a reset policy."""
        if star is not None and inner is not None:
            raise DomainError("give either a single reset point or a pair of inner points")
        if star is not None:
            policy: Policy = ResetToPoint(math.exp(star))
        elif inner is not None:
            policy = ResetToInner(math.exp(inner[0]), math.exp(inner[1]))
        else:
            policy = Reflect()
        return cls(math.exp(eta_lower), math.exp(eta_upper), policy, spread_eps)

    def log_levels(self) -> tuple[float, ...]:
        """(eta_-, [reset levels...], eta_+) in log coordinates."""
        if self.lower <= 0:
            raise DomainError("log coordinates need a positive band")
        p = self.policy
        inner: tuple[float, ...] = ()
        if isinstance(p, ResetToPoint):
            inner = (math.log(p.star),)
        elif isinstance(p, ResetToInner):
            inner = (math.log(p.lower_star), math.log(p.upper_star))
        return (math.log(self.lower), *inner, math.log(self.upper))

    def reset_targets(self) -> tuple[float, float] | None:
        """Log levels the process jumps to from the lower and upper edge, or None when reflecting."""
        levels = self.log_levels()
        if isinstance(self.policy, Reflect):
            return None
        if isinstance(self.policy, ResetToPoint):
            return levels[1], levels[1]
        return levels[1], levels[2]
