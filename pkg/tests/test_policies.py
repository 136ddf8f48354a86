import math

import numpy as np
import pytest

from tclab.costs import atc_constant_proportion
from tclab.params import DomainError, GbmParams
from tclab.policies import band_policy_ensemble, band_trades, run_band_policy
from tclab.sde import simulate_gbm

MU, SIGMA = 0.05, 0.2


def test_ledger_and_vectorized_policy_agree_on_one_path():
    T, dt, seed = 3.0, 1 / 252, 17
    path = simulate_gbm(GbmParams.from_market(MU, SIGMA), 1.0, T, dt, seed=seed)
    led = run_band_policy(path, 0.45, 0.55, 1e-3)
    ens = band_policy_ensemble(MU, SIGMA, 0.45, 0.55, 1e-3, T, dt, n_paths=1, seed_base=seed)
    n_sales = np.count_nonzero(np.diff(led.cum_sell_cost) > 0)
    assert ens.sell_frequency.value == pytest.approx(n_sales / T, rel=1e-9)
    # ensemble ATC sums eps * value sold / wealth at each sale
    w_before = led.safe_X[:-1] + led.shares[:-1] * path.state[1:]
    per_sale = np.diff(led.cum_sell_cost) / w_before
    assert ens.atc.value == pytest.approx(per_sale.sum() / T, rel=1e-9)
    assert ens.atc.value == pytest.approx(led.annualized_relative_cost(), rel=1e-9)


def test_weights_stay_in_band_after_trading():
    path = simulate_gbm(GbmParams.from_market(MU, SIGMA), 1.0, 2.0, 1 / 252, seed=4)
    led = run_band_policy(path, 0.4, 0.6, 1e-3)
    assert led.fraction_pi.min() >= 0.4 - 1e-12 and led.fraction_pi.max() <= 0.6 + 1e-12


def test_bulk_trades_land_on_targets():
    path = simulate_gbm(GbmParams.from_market(MU, SIGMA), 1.0, 5.0, 1 / 252, seed=4)
    trades, x0, p0 = band_trades(path, 0.48, 0.52, 1e-3, sell_to=0.5, buy_to=0.5)
    assert len(trades) > 3
    led = run_band_policy(path, 0.48, 0.52, 1e-3, sell_to=0.5, buy_to=0.5)
    traded = np.isin(led.times, [t for t, _, _ in trades])
    assert led.fraction_pi[traded] == pytest.approx(np.full(traded.sum(), 0.5), abs=1e-12)


def test_ensemble_cost_against_reflected_formula():
    eps, lo, hi = 1e-3, 0.45, 0.55
    exact = atc_constant_proportion(GbmParams.from_market(MU, SIGMA), 0.5, eps, band=(lo, hi))
    est = band_policy_ensemble(MU, SIGMA, lo, hi, eps, 5.0, 1 / 2520, n_paths=200, seed_base=1)
    assert abs(est.atc.value - exact) < 4 * est.atc.stderr + 0.1 * exact


def test_policy_validation():
    path = simulate_gbm(GbmParams.from_market(MU, SIGMA), 1.0, 0.1, 0.01, seed=1)
    with pytest.raises(DomainError):
        band_trades(path, 0.6, 0.4, 1e-3)
    with pytest.raises(DomainError):
        band_trades(path, 0.4, 0.6, 1e-3, sell_to=0.7)
    with pytest.raises(DomainError):
        band_policy_ensemble(MU, SIGMA, 0.4, 0.6, 1e-3, 0.001, 0.01, 2)
