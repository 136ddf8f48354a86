"""Objective specifications for the free-boundary problems."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .params import DomainError, GbmParams


@dataclass(frozen=True)
class Letf:
    """Leveraged fund tracking Lambda times the index with tracking-error aversion gamma."""

    Lambda: float
    gamma: float

    def __post_init__(self):
        if self.Lambda in (0.0, 1.0):
            raise DomainError("leverage must differ from 0 and 1")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")


@dataclass(frozen=True)
class LogContract:
    """Hedge of y_star units of a log contract with hedging-error aversion gamma."""

    y_star: float
    gamma: float

    def __post_init__(self):
        if not self.y_star > 0:
            raise DomainError("target position must be positive")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")


@dataclass(frozen=True)
class PowerUtility:
    gamma: float
    pi_star: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if self.pi_star in (0.0, 1.0):
            raise DomainError("Merton fraction must differ from 0 and 1")


@dataclass(frozen=True)
class LogUtility:
    pi_star: float

    @property
    def gamma(self) -> float:
        return 1.0

    def __post_init__(self):
        if self.pi_star in (0.0, 1.0):
            raise DomainError("Merton fraction must differ from 0 and 1")


@dataclass(frozen=True)
class RiskNeutral:
    pass


Kind = Union[Letf, LogContract, PowerUtility, LogUtility, RiskNeutral]


@dataclass(frozen=True)
class ObjectiveSpec:
    """An objective, the market it lives in, and the relative spread."""

    kind: Kind
    market: GbmParams = field(default_factory=lambda: GbmParams(0.0, 0.2))
    spread_eps: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.spread_eps < 1.0:
            raise DomainError("spread must lie in (0, 1)")
        k = self.kind
        if isinstance(k, (PowerUtility, LogUtility)):
            m = self.market
            merton = m.mu / (k.gamma * m.sigma**2)
            if abs(merton - k.pi_star) > 1e-9 * max(1.0, abs(k.pi_star)):
                raise DomainError(f"pi_star={k.pi_star} disagrees with mu/(gamma sigma^2)={merton}")

    @classmethod
    def power_utility(cls, mu: float, sigma: float, gamma: float, eps: float = 1e-3) -> "ObjectiveSpec":
        kind = (LogUtility(mu / sigma**2) if gamma == 1.0
                else PowerUtility(gamma, mu / (gamma * sigma**2)))
        return cls(kind, GbmParams.from_market(mu, sigma), eps)

    @property
    def name(self) -> str:
        return type(self.kind).__name__
