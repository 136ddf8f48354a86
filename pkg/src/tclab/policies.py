"""Band-keeping trade generators that drive the wealth ledger.

The simulators never invent trades.  These helpers look at a simulated
price path, decide when the risky weight has left a band, and emit the
share trades that bring it back, so that costs can be measured through
:func:`tclab.sde.evolve_portfolio` exactly as an account would book them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import DomainError
from .sde import LongRunEstimate, PathRecord, PortfolioLedger, evolve_portfolio, path_generator


def _sell_to(target: float, x: float, shares: float, s: float, eps: float) -> float:
    """Shares to sell at (1 - eps) s so that the weight becomes ``target``."""
    return (shares * s - target * (x + shares * s)) / (s * (1.0 - target * eps))


def _buy_to(target: float, x: float, shares: float, s: float) -> float:
    return (target * (x + shares * s) - shares * s) / s


def _check_band(lower, upper, sell_to, buy_to):
    if not lower < upper:
        raise DomainError("need lower < upper")
    if not lower <= buy_to <= sell_to <= upper:
        raise DomainError("need lower <= buy target <= sell target <= upper")


def band_trades(price_path: PathRecord, lower: float, upper: float, spread_eps: float,
                wealth0: float = 1.0, start_weight: float | None = None,
                sell_to: float | None = None, buy_to: float | None = None):
    """Trades that keep the risky weight in [lower, upper] on the path's grid.

    When the weight is found above ``upper`` it is sold down to ``sell_to``
    (default: ``upper`` itself, i.e. the smallest possible trade); below
    ``lower`` it is bought up to ``buy_to``.  Returns (trades, safe0, shares0)
    ready for :func:`evolve_portfolio`.
    """
    sell_to = upper if sell_to is None else sell_to
    buy_to = lower if buy_to is None else buy_to
    _check_band(lower, upper, sell_to, buy_to)
    w0 = 0.5 * (lower + upper) if start_weight is None else start_weight
    s = price_path.state
    shares = w0 * wealth0 / s[0]
    x = wealth0 - shares * s[0]
    safe0, shares0 = x, shares
    trades = []
    for k, t in enumerate(price_path.times):
        sk = s[k]
        pi = shares * sk / (x + shares * sk)
        if pi > upper:
            d = _sell_to(sell_to, x, shares, sk, spread_eps)
            x += (1.0 - spread_eps) * sk * d
            shares -= d
            trades.append((float(t), 0.0, float(d)))
        elif pi < lower:
            d = _buy_to(buy_to, x, shares, sk)
            x -= sk * d
            shares += d
            trades.append((float(t), float(d), 0.0))
    return trades, safe0, shares0


def run_band_policy(price_path: PathRecord, lower: float, upper: float, spread_eps: float,
                    **kwargs) -> PortfolioLedger:
    """Generate band trades and book them on the ledger."""
    trades, x0, p0 = band_trades(price_path, lower, upper, spread_eps, **kwargs)
    return evolve_portfolio(price_path, trades, spread_eps, safe0=x0, shares0=p0)


@dataclass(frozen=True)
class PolicyCostEstimate:
    atc: LongRunEstimate
    sell_frequency: LongRunEstimate


def band_policy_ensemble(mu: float, sigma: float, lower: float, upper: float, spread_eps: float,
                         horizon: float, dt: float, n_paths: int, seed_base: int = 0,
                         sell_to: float | None = None, buy_to: float | None = None) -> PolicyCostEstimate:
    """Vectorized version of :func:`run_band_policy` over many paths (zero interest).

    Performs the same bookkeeping as the ledger: the cost of a sale is
    eps * S * shares sold, divided by wealth just before the sale.
    """
    sell_to = upper if sell_to is None else sell_to
    buy_to = lower if buy_to is None else buy_to
    _check_band(lower, upper, sell_to, buy_to)
    n = int(round(horizon / dt))
    if n < 1:
        raise DomainError("horizon shorter than one step")
    rngs = [path_generator(seed_base + i) for i in range(n_paths)]
    drift = (mu - 0.5 * sigma**2) * dt
    vol = sigma * np.sqrt(dt)
    w0 = 0.5 * (lower + upper)
    x = np.full(n_paths, 1.0 - w0)
    y = np.full(n_paths, w0)  # risky value
    cost = np.zeros(n_paths)
    sales = np.zeros(n_paths)
    block = max(1, int(4_000_000 // max(n_paths, 1)))
    done = 0
    while done < n:
        m = min(block, n - done)
        z = np.stack([r.standard_normal(m) for r in rngs])
        growth = np.exp(drift + vol * z)
        for j in range(m):
            y *= growth[:, j]
            w = x + y
            pi = y / w
            up = pi > upper
            if up.any():
                d = (y[up] - sell_to * w[up]) / (1.0 - sell_to * spread_eps)  # value sold
                cost[up] += spread_eps * d / w[up]
                x[up] += (1.0 - spread_eps) * d
                y[up] -= d
                sales[up] += 1
            dn = pi < lower
            if dn.any():
                d = buy_to * w[dn] - y[dn]
                x[dn] -= d
                y[dn] += d
        done += m
    T = n * dt
    return PolicyCostEstimate(_estimate(cost / T), _estimate(sales / T))


def _estimate(v: np.ndarray) -> LongRunEstimate:
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
    return LongRunEstimate(float(v.mean()), se, int(v.size))
