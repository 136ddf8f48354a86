import math

import numpy as np
import pytest

from tclab.costs import (BoundaryExpansion, CostReport, atc_constant_proportion, local_time_rates,
                         maximal_trade_stats, minimal_trade_stats, moderate_trade_stats,
                         reset_jump_rate, scaling_law_check, small_trade_stats,
                         trc_constant_position, utility_expansion)
from tclab.params import Band, DomainError, GbmParams
from tclab.sde import simulate_ensemble, simulate_resetted
from tclab.stationary import edge_flux_rates, resetted_density

MARKET = GbmParams.from_market(0.05, 0.2)
DRIFTY = GbmParams.from_log_drift(0.08, 0.16)


def test_local_times_at_zero_log_drift():
    p = GbmParams.from_log_drift(0.0, 0.2)
    L, U = local_time_rates(p, Band(1.0, math.e))
    assert L == pytest.approx(0.02) and U == pytest.approx(0.02)


@pytest.mark.parametrize("log_drift", [-0.05, 0.0, 0.03, 0.2])
def test_local_time_balance(log_drift):
    # stationarity of log(xi): log drift + L - U = 0
    p = GbmParams.from_log_drift(log_drift, 0.2)
    L, U = local_time_rates(p, Band.from_log(-0.1, 0.15))
    assert U - L == pytest.approx(log_drift, abs=1e-14)
    assert L > 0 and U > 0


def test_local_times_against_simulation():
    p = GbmParams.from_log_drift(0.04, 0.2)
    band = Band.from_log(-0.1, 0.1)
    L, U = local_time_rates(p, band)
    ens = simulate_ensemble(p, band, 1.0, 20.0, 400, dt=1 / 252, seed_base=5)
    for rate, lt in ((L, ens.local_time_L), (U, ens.local_time_U)):
        v = lt / 20.0
        assert abs(v.mean() - rate) < 4 * v.std(ddof=1) / math.sqrt(v.size) + 0.02 * rate


def test_letf_leading_atc_value():
    e = utility_expansion(2.0, 1.0)
    assert e.A_plus == pytest.approx(3 ** (1 / 3))
    rep = minimal_trade_stats(MARKET, 2.0, e, 1e-3, mode="asymptotic")
    assert rep.atc == pytest.approx(2.773e-4, rel=1e-3)
    assert rep.sf == math.inf


def test_exact_atc_converges_to_two_term_series():
    e = utility_expansion(0.5, 1.0)
    lead = 0.04 * 0.25 * 0.25 / (4 * e.A_plus)
    gaps = []
    for eps in (1e-4, 1e-5, 1e-6):
        exact = atc_constant_proportion(MARKET, 0.5, eps, expansion=e)
        series = atc_constant_proportion(MARKET, 0.5, eps, "asymptotic", expansion=e)
        assert exact / series == pytest.approx(1.0, rel=5 * eps ** (1 / 3))
        gaps.append(abs((exact - lead * eps ** (2 / 3)) / eps - (series - lead * eps ** (2 / 3)) / eps))
    # the remainder after two terms is one power of delta higher
    assert gaps[0] / gaps[1] == pytest.approx(10 ** (1 / 3), rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(10 ** (1 / 3), rel=0.1)


def test_drift_part_of_second_order_atc():
    # symmetric band without B: the eps term reduces to sigma^2 L(L-1)/(2 s^2) core - (mu/2) L (L-1)
    e = BoundaryExpansion(0.5, 1.0, 1.0)
    sym = atc_constant_proportion(MARKET, 0.5, 1e-6, "asymptotic", expansion=e)
    disp = atc_constant_proportion(MARKET, 0.5, 1e-6, "asymptotic", expansion=e, variant="displayed")
    assert (sym - disp) / 1e-6 == pytest.approx(-0.5 * 0.05 * 0.5 * -0.5)


def test_trc_eps_term_scales_with_target():
    e = BoundaryExpansion(2.0, 1.1, 0.9, 0.3, -0.2)
    lead = 0.04 * 4 / (2 * 2.0)
    exact_terms = []
    for eps in (1e-5, 1e-6, 1e-7):
        ex = trc_constant_position(MARKET, eps, expansion=e)
        exact_terms.append((ex - lead * eps ** (2 / 3)) / eps)
    corrected = (trc_constant_position(MARKET, 1e-7, "asymptotic", expansion=e) - lead * 1e-7 ** (2 / 3)) / 1e-7
    displayed = (trc_constant_position(MARKET, 1e-7, "asymptotic", expansion=e, variant="displayed")
                 - lead * 1e-7 ** (2 / 3)) / 1e-7
    assert exact_terms[-1] == pytest.approx(corrected, rel=5e-3)
    assert abs(exact_terms[-1] - displayed) > 0.4 * corrected
    assert corrected == pytest.approx(2.0 * displayed)


def test_atc_scales_as_eps_two_thirds():
    e = utility_expansion(0.5, 1.0)
    a1 = minimal_trade_stats(MARKET, 0.5, e, 1e-6, mode="asymptotic").atc
    a8 = minimal_trade_stats(MARKET, 0.5, e, 8e-6, mode="asymptotic").atc
    assert a8 / a1 == pytest.approx(4.0, rel=1e-12)
    x1 = minimal_trade_stats(MARKET, 0.5, e, 1e-9).atc
    x8 = minimal_trade_stats(MARKET, 0.5, e, 8e-9).atc
    assert x8 / x1 == pytest.approx(4.0, rel=5e-3)


def test_leading_atc_ignores_second_order_shift():
    base = utility_expansion(0.5, 1.0)
    shifted = BoundaryExpansion(0.5, base.A_plus, base.A_minus, 0.7, 0.4)
    r0 = minimal_trade_stats(MARKET, 0.5, base, 1e-9).atc
    r1 = minimal_trade_stats(MARKET, 0.5, shifted, 1e-9).atc
    assert r1 / r0 == pytest.approx(1.0, rel=5e-3)


def test_cost_ordering_of_policies():
    e = utility_expansion(0.5, 1.0)
    eps = 1e-5
    mn = minimal_trade_stats(MARKET, 0.5, e, eps)
    mx = maximal_trade_stats(MARKET, 0.5, e, eps)
    sm = small_trade_stats(MARKET, 0.5, e, 1.0, 1.0, eps)
    assert mn.atc < sm.atc < mx.atc
    assert mx.atc / mn.atc == pytest.approx(2.0, rel=0.05)
    assert sm.sf > mx.sf


def test_moderate_trades_interpolate():
    e = utility_expansion(0.5, 1.0)
    eps = 1e-5
    reports = [moderate_trade_stats(MARKET, 0.5, e, k, eps) for k in (0.0, 0.3, 0.6, 0.9)]
    atcs = [r.atc for r in reports]
    sfs = [r.sf for r in reports]
    assert all(np.diff(atcs) < 0) and all(np.diff(sfs) > 0)
    assert atcs[0] == pytest.approx(maximal_trade_stats(MARKET, 0.5, e, eps).atc, rel=1e-12)
    for k, r in zip((0.0, 0.3, 0.6, 0.9), reports):
        a = moderate_trade_stats(MARKET, 0.5, e, k, eps, mode="asymptotic")
        assert r.atc / a.atc == pytest.approx(1.0, rel=0.06)
    with pytest.raises(DomainError):
        moderate_trade_stats(MARKET, 0.5, e, 1.0, eps)


@pytest.mark.parametrize("exponent", [1, 2])
def test_scaling_law_ratio_is_one(exponent):
    e = utility_expansion(0.5, 1.0)
    for eps in (1e-3, 1e-5):
        chk = scaling_law_check(eps, exponent, MARKET, 0.5, e)
        assert chk.ratio == pytest.approx(1.0, abs=2 * eps)


def test_scaling_law_rejects_other_exponents():
    with pytest.raises(DomainError):
        scaling_law_check(1e-3, 3, MARKET, 0.5, utility_expansion(0.5, 1.0))


def test_reset_rate_ergodic_matches_flux_and_simulation():
    band = Band.from_log(-0.2, 0.2, star=0.05)
    ergodic = reset_jump_rate(DRIFTY, band, variant="ergodic")
    assert ergodic == pytest.approx(edge_flux_rates(DRIFTY, resetted_density(DRIFTY, band))[1], rel=1e-9)
    assert reset_jump_rate(DRIFTY, band) == pytest.approx(ergodic, rel=0.02)
    T = 400.0
    rec = simulate_resetted(DRIFTY, band, 1.0, T, seed=3)
    n_down = sum(1 for _, d, _ in rec.jump_events if d == -1)
    assert abs(n_down / T - ergodic) < 3 * math.sqrt(n_down) / T


def test_reset_rate_singular_case():
    p = GbmParams(drift_M=0.04, vol_Sigma=0.2)
    with pytest.raises(DomainError):
        reset_jump_rate(p, Band.from_log(-0.2, 0.2, star=0.0))
    assert reset_jump_rate(p, Band.from_log(-0.2, 0.2, star=0.0), variant="ergodic") > 0


def test_input_validation():
    e = utility_expansion(0.5, 1.0)
    with pytest.raises(DomainError):
        atc_constant_proportion(MARKET, 1.0, 1e-3, expansion=e)
    with pytest.raises(DomainError):
        atc_constant_proportion(MARKET, 0.5, 1e-3, band=(0.6, 0.4))
    with pytest.raises(DomainError):
        atc_constant_proportion(MARKET, 0.5, 1e-3, band=(0.9, 1.2))
    with pytest.raises(DomainError):
        BoundaryExpansion(0.5, -1.0, 1.0)
    with pytest.raises(DomainError):
        CostReport(-1.0, 0.0, 0.0, "Minimal", "exact")
    with pytest.raises(DomainError):
        maximal_trade_stats(GbmParams.from_market(0.02, 0.2), 0.5, e, 1e-3)


def test_expansion_threshold_and_orders():
    e = BoundaryExpansion(1.0, 1.0, 1.0, 2.0, -2.0, c_plus=0.5, c_minus=0.5)
    b3 = e.evaluate(1e-3)
    b1 = e.evaluate(1e-3, order=1)
    assert b3.order == 3 and b1.order == 1
    assert b1.upper == pytest.approx(1.1) and b1.lower == pytest.approx(0.9)
    assert b3.upper == pytest.approx(1.1 - 0.02 + 0.0005)
    thr = e.eps_threshold()
    assert 0 < thr < 1
    bad = e.evaluate(thr * 10)
    assert not (bad.lower < 1.0 < bad.upper)
