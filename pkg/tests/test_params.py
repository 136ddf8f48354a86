import math

import pytest

from tclab.params import Band, DomainError, GbmParams, Reflect, ResetToInner, ResetToPoint, SolverError


def test_constructors_agree():
    a = GbmParams.from_market(0.05, 0.2)
    b = GbmParams.from_log_drift(0.05 - 0.02, 0.2)
    assert a.drift_M == pytest.approx(b.drift_M)
    assert a.alpha() == pytest.approx(2.5)
    assert a.mu == 0.05 and a.sigma == 0.2
    assert b.log_drift == pytest.approx(0.03)


def test_excess_return_defaults_to_drift_minus_rate():
    p = GbmParams(drift_M=0.07, vol_Sigma=0.2, interest_r=0.02)
    assert p.mu == pytest.approx(0.05)


@pytest.mark.parametrize("kwargs", [dict(drift_M=0.1, vol_Sigma=-0.1),
                                    dict(drift_M=math.nan, vol_Sigma=0.1),
                                    dict(drift_M=0.1, vol_Sigma=0.1, interest_r=math.inf)])
def test_bad_params(kwargs):
    with pytest.raises(DomainError):
        GbmParams(**kwargs)


def test_alpha_needs_volatility():
    with pytest.raises(DomainError):
        GbmParams(0.1, 0.0).alpha()


def test_band_from_log_policies():
    assert isinstance(Band.from_log(-0.1, 0.1).policy, Reflect)
    b = Band.from_log(-0.1, 0.1, star=0.02)
    assert isinstance(b.policy, ResetToPoint)
    assert b.log_levels() == pytest.approx((-0.1, 0.02, 0.1))
    assert b.reset_targets() == pytest.approx((0.02, 0.02))
    c = Band.from_log(-0.1, 0.1, inner=(-0.05, 0.03))
    assert isinstance(c.policy, ResetToInner)
    assert c.reset_targets() == pytest.approx((-0.05, 0.03))
    assert Band.from_log(-0.1, 0.1).reset_targets() is None


@pytest.mark.parametrize("build", [
    lambda: Band(2.0, 1.0),
    lambda: Band(1.0, 2.0, spread_eps=1.0),
    lambda: Band.from_log(-0.1, 0.1, inner=(0.05, -0.05)),
    lambda: Band.from_log(-0.1, 0.1, star=0.0, inner=(-0.05, 0.05)),
])
def test_band_validation(build):
    with pytest.raises(DomainError):
        build()


def test_log_levels_need_positive_band():
    with pytest.raises(DomainError):
        Band(-3.0, -2.0).log_levels()


def test_solver_error_reports_residual():
    e = SolverError("no convergence", residual=1.5e-3)
    assert "1.500e-03" in str(e) and e.residual == 1.5e-3
