import math

import numpy as np
import pytest

from tclab.boundaries import (_letf_targets, _letf_wprime, letf_atc_series, letf_expansion,
                              letf_performance, letf_series, letf_shadow_solve, letf_solve,
                              logcontract_expansion, logcontract_hjb_value, logcontract_series,
                              logcontract_solve, riskneutral_atc, riskneutral_B,
                              riskneutral_B_numeric, riskneutral_first_order_closed_form,
                              riskneutral_first_order_system, riskneutral_kappa, riskneutral_series,
                              riskneutral_solve, utility_atc_series, utility_expansion,
                              utility_kappa_expansion)
from tclab.objectives import Letf, LogContract, LogUtility, ObjectiveSpec, PowerUtility, RiskNeutral
from tclab.params import DomainError, GbmParams, SolverError
from tclab.verify import loglog_slope

MARKET = GbmParams.from_market(0.05, 0.2)


def test_kappa_root():
    k = riskneutral_kappa()
    assert 1.5 * k + math.log(1 - k) == pytest.approx(0.0, abs=1e-15)
    assert k == pytest.approx(0.5828116, abs=5e-8)


def test_riskneutral_first_order_coefficients():
    am, ap = riskneutral_first_order_closed_form(1.0)
    assert ap == pytest.approx(1.310, abs=5e-4)
    assert ap / am == pytest.approx(0.4172, abs=5e-5)
    sys_am, sys_ap = riskneutral_first_order_system(1.0)
    assert sys_am == pytest.approx(am, rel=1e-10) and sys_ap == pytest.approx(ap, rel=1e-10)
    am4, ap4 = riskneutral_first_order_closed_form(4.0)
    assert am4 == pytest.approx(am / 2) and ap4 == pytest.approx(ap / 2)
    assert riskneutral_first_order_system(0.3)[1] == pytest.approx(ap / math.sqrt(0.3), rel=1e-10)


def test_riskneutral_numeric_boundaries_tend_to_series():
    am, ap = riskneutral_first_order_closed_form(1.0)
    gaps = []
    for eps in (1e-6, 1e-8):
        sol = riskneutral_solve(1.0, eps)
        gaps.append(abs(sol.aux["u_plus"] - ap))
        assert sol.aux["u_minus"] > sol.aux["u_plus"]
        assert sol.lower < sol.upper and sol.lower > 1
    # the correction is linear in sqrt(eps)
    assert gaps[0] / gaps[1] == pytest.approx(10.0, rel=0.05)


def test_riskneutral_second_coefficients_match_numeric_extraction():
    am, ap = riskneutral_first_order_closed_form(1.0)
    bm, bp = riskneutral_B(1.0, am, ap)
    nm, nplus = riskneutral_B_numeric(1.0)
    assert nm == pytest.approx(bm, rel=1e-6) and nplus == pytest.approx(bp, rel=1e-6)


def test_riskneutral_series_and_atc():
    ser = riskneutral_series(GbmParams.from_market(0.04, 0.2), 1e-4)
    assert ser.alpha == pytest.approx(1.0)
    assert ser.pi_plus == pytest.approx(1 / (ser.A_plus * 0.01) + ser.B_plus)
    assert ser.lead_pi_minus / ser.lead_pi_plus == pytest.approx(1 - ser.kappa)
    assert ser.lead_pi_plus == pytest.approx(1 / (ser.A_plus * 0.01))
    atc = riskneutral_atc(GbmParams.from_market(0.04, 0.2), 1e-8, riskneutral_solve(1.0, 1e-8))
    assert atc.exact == pytest.approx(atc.leading, rel=0.01)
    with pytest.raises(DomainError):
        riskneutral_series(GbmParams.from_market(-0.01, 0.2), 1e-4)


def test_logcontract_first_order_coefficient():
    spec = ObjectiveSpec(LogContract(1.0, 1.0), MARKET)
    e = logcontract_expansion(spec)
    assert e.A_plus == pytest.approx(0.9086, abs=5e-5)
    # A scales like y_star^(2/3) gamma^(-1/3)
    e2 = logcontract_expansion(ObjectiveSpec(LogContract(8.0, 8.0), MARKET))
    assert e2.A_plus == pytest.approx(e.A_plus * 4 / 2)


def test_logcontract_smooth_pasting():
    eps = 1e-4
    spec = ObjectiveSpec(LogContract(1.0, 1.0), MARKET, eps)
    sol = logcontract_solve(spec)
    grid, W = sol.value_fn_samples
    assert sol.residual_norm < 1e-8 * eps
    assert W[0] == 0.0 and W[-1] == pytest.approx(eps, rel=1e-9)
    h = grid[1] - grid[0]
    width = sol.upper - sol.lower
    # one-sided differences at both ends vanish to first order in h
    assert abs(W[1] - W[0]) / h * width / eps < 0.02
    assert abs(W[-1] - W[-2]) / h * width / eps < 0.02
    assert np.all((W >= 0) & (W <= eps * (1 + 1e-9)))
    ser = logcontract_series(spec)
    # the series drops terms of order delta^3 = eps
    assert abs(sol.lower - ser.lower) < 2 * eps and abs(sol.upper - ser.upper) < 2 * eps


def test_logcontract_value_range_check():
    spec = ObjectiveSpec(LogContract(1.0, 1.0), MARKET, 1e-4)
    with pytest.raises(SolverError):
        logcontract_hjb_value(spec, 0.9, np.linspace(0.9, 1.2, 20), eps=1e-4)
    with pytest.raises(DomainError):
        logcontract_hjb_value(spec, 0.95, np.array([0.9]))


def test_letf_solution_meets_boundary_conditions():
    eps = 1e-5
    spec = ObjectiveSpec(Letf(2.0, 1.0), MARKET, eps)
    sol = letf_solve(spec)
    zlo, zhi = sol.aux["zeta_minus"], sol.aux["zeta_plus"]
    w_t, w1_t = _letf_targets(eps, zhi)
    assert sol.value_fn_samples[1][-1] == pytest.approx(w_t, rel=1e-9)
    assert _letf_wprime(2.0, 1.0, zlo, zhi) == pytest.approx(w1_t, rel=1e-8)
    ser = letf_series(spec)
    assert abs(sol.lower - ser.lower) < 0.02 * (ser.upper - ser.lower)
    assert abs(sol.upper - ser.upper) < 0.02 * (ser.upper - ser.lower)


def test_letf_original_band_sits_below_shadow_band():
    spec = ObjectiveSpec(Letf(2.0, 1.0), MARKET, 1e-5)
    orig, shadow = letf_solve(spec), letf_shadow_solve(spec)
    assert orig.upper < shadow.upper and orig.lower < shadow.lower
    e_o, e_s = letf_expansion(spec), letf_expansion(spec, "Shadow")
    assert e_o.B_plus == pytest.approx(-e_s.B_plus) and e_o.B_plus > 0
    g = shadow.value_fn_samples[1]
    assert g[0] == pytest.approx(1.0, abs=1e-12) and g[-1] == pytest.approx(1 - 1e-5, abs=1e-12)
    with pytest.raises(DomainError):
        letf_expansion(spec, "Sideways")


def test_letf_performance_identity():
    eps, sigma, gamma, lam = 1e-4, 0.2, 2.0, 2.0
    spec = ObjectiveSpec(Letf(lam, gamma), MARKET, eps)
    b = letf_series(spec)
    perf = letf_performance(b.lower, b.upper, eps, sigma, gamma, lam)
    # expense ratio = gamma/2 TrE^2 - TrD
    assert perf.eer == pytest.approx(0.5 * gamma * perf.tre**2 - perf.trd, rel=1e-12)
    assert perf.trd < 0
    assert perf.atc == pytest.approx(letf_atc_series(eps, sigma, gamma, lam))
    # TrD is minus the drag, which agrees with the series ATC to leading order
    assert -perf.trd / perf.atc == pytest.approx(1.0, rel=0.1)
    with pytest.raises(DomainError):
        letf_performance(2.1, 2.0, eps, sigma, gamma, lam)


def test_utility_band_and_atc_order():
    spec = ObjectiveSpec.power_utility(0.05, 0.2, 2.0)
    assert isinstance(spec.kind, PowerUtility)
    e = utility_expansion(spec)
    ps = 0.625
    assert e.A_plus == pytest.approx((0.75 / 2 * ps**2 * (1 - ps) ** 2) ** (1 / 3))
    eps = np.geomspace(1e-8, 1e-5, 4)
    atc = [utility_atc_series(spec, float(x)) for x in eps]
    assert loglog_slope(eps, atc) == pytest.approx(2 / 3, abs=0.01)
    k = utility_kappa_expansion(spec, 1.0, 1.0)
    assert k.B_plus < 0 and k.B_plus == k.B_minus
    assert isinstance(ObjectiveSpec.power_utility(0.04, 0.2, 1.0).kind, LogUtility)


def test_objective_validation():
    with pytest.raises(DomainError):
        ObjectiveSpec(PowerUtility(2.0, 0.5), MARKET)
    with pytest.raises(DomainError):
        Letf(1.0, 1.0)
    with pytest.raises(DomainError):
        LogContract(-1.0, 1.0)
    with pytest.raises(DomainError):
        ObjectiveSpec(RiskNeutral(), MARKET, 0.0)
    with pytest.raises(DomainError):
        logcontract_expansion(ObjectiveSpec(Letf(2.0, 1.0), MARKET))
    with pytest.raises(DomainError):
        utility_expansion(ObjectiveSpec(Letf(2.0, 1.0), MARKET))
