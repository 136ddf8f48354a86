import math

import numpy as np
import pytest

from tclab.params import Band, DomainError, GbmParams
from tclab.sde import simulate_reflected
from tclab.stationary import (density_distance, edge_flux_rates, ergodic_average, histogram,
                              mean_exit_time, reflected_density, reset_inner_density,
                              resetted_density)

DRIFTY = GbmParams.from_log_drift(0.08, 0.16)


def _all_densities():
    yield resetted_density(DRIFTY, Band.from_log(-0.2, 0.2, star=0.05))
    yield resetted_density(GbmParams.from_log_drift(-0.05, 0.3), Band.from_log(-0.1, 0.3, star=0.0))
    yield reset_inner_density(DRIFTY, Band.from_log(-0.2, 0.2, inner=(-0.05, 0.1)))
    yield reflected_density(DRIFTY, Band.from_log(-0.2, 0.2), coord="log")
    yield reflected_density(DRIFTY, Band.from_log(-0.2, 0.2))
    yield reflected_density(GbmParams.from_market(0.05, 0.2), Band(-3.0, -1.5))


@pytest.mark.parametrize("density", list(_all_densities()), ids=lambda d: f"{d.kind}-{d.coord}")
def test_densities_normalized_and_nonnegative(density):
    lo, hi = density.support
    x = np.linspace(lo, hi, 2001)
    assert density.pdf(x).min() >= -1e-12
    assert float(density.mass(lo, hi)) == pytest.approx(1.0, abs=1e-12)
    assert ergodic_average(lambda _: 1.0, density) == pytest.approx(1.0, abs=1e-9)


def test_pdf_vanishes_outside_support():
    d = resetted_density(DRIFTY, Band.from_log(-0.2, 0.2, star=0.0))
    assert np.all(d.pdf(np.array([-0.3, 0.21])) == 0.0)


def _fokker_planck_residual(d, x, drift, diff):
    # stationary forward equation without sources: diff phi'' - drift phi' = 0
    h = 1e-4
    f0, fp, fm = d.pdf(x), d.pdf(x + h), d.pdf(x - h)
    return diff * (fp - 2 * f0 + fm) / h**2 - drift * (fp - fm) / (2 * h)


def test_resetted_density_solves_forward_equation_and_edge_conditions():
    band = Band.from_log(-0.2, 0.2, star=0.05)
    d = resetted_density(DRIFTY, band)
    diff = 0.5 * 0.16**2
    x = np.concatenate([np.linspace(-0.19, 0.04, 20), np.linspace(0.06, 0.19, 20)])
    assert np.abs(_fokker_planck_residual(d, x, 0.08, diff)).max() < 1e-4
    assert d.pdf(np.array([-0.2, 0.2])) == pytest.approx([0.0, 0.0], abs=1e-12)
    left, right = d.pieces
    assert float(left.pdf(0.05)) == pytest.approx(float(right.pdf(0.05)), rel=1e-12)
    # the reset point receives what leaves through both edges
    lo_rate, hi_rate = edge_flux_rates(DRIFTY, d)
    kink = diff * (float(left.deriv(0.05)) - float(right.deriv(0.05)))
    assert kink == pytest.approx(lo_rate + hi_rate, rel=1e-10)


def test_triangle_peak():
    d = resetted_density(GbmParams.from_log_drift(0.0, 0.16), Band.from_log(-0.2, 0.2, star=0.0))
    assert d.kind == "ResettedTriangular"
    assert float(d.pdf(np.array([0.0]))[0]) == pytest.approx(5.0)
    assert float(d.pdf(np.array([0.1]))[0]) == pytest.approx(2.5)


def test_piecewise_density_tends_to_triangle():
    band = Band.from_log(-0.2, 0.2, star=0.0)
    tri = resetted_density(GbmParams.from_log_drift(0.0, 0.16), band)
    x = np.linspace(-0.2, 0.2, 41)
    gaps = []
    for ld in (1e-2, 1e-4, 1e-6):
        d = resetted_density(GbmParams.from_log_drift(ld, 0.16), band)
        assert d.kind == "ResettedPiecewiseExp"
        gaps.append(np.abs(d.pdf(x) - tri.pdf(x)).max())
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_reflected_density_one_over_xi():
    # 2M/Sigma^2 = 1 on [1, e] gives 1/xi
    p = GbmParams(drift_M=0.02, vol_Sigma=0.2)
    d = reflected_density(p, Band(1.0, math.e))
    x = np.linspace(1.0, math.e, 7)
    assert d.pdf(x) == pytest.approx(1.0 / x, rel=1e-12)


def test_reflected_density_negative_band_matches_mirror():
    p = GbmParams.from_market(0.05, 0.2)
    neg = reflected_density(p, Band(-3.0, -1.5))
    pos = reflected_density(p, Band(1.5, 3.0))
    x = np.linspace(1.5, 3.0, 9)
    assert neg.pdf(-x) == pytest.approx(pos.pdf(x), rel=1e-12)
    with pytest.raises(DomainError):
        reflected_density(p, Band(-0.5, 0.5))


def test_reflected_log_density_forward_equation_and_zero_flux():
    d = reflected_density(DRIFTY, Band.from_log(-0.2, 0.2), coord="log")
    diff = 0.5 * 0.16**2
    x = np.linspace(-0.19, 0.19, 15)
    assert np.abs(_fokker_planck_residual(d, x, 0.08, diff)).max() < 1e-4
    # zero flux at the edge: diff phi' = drift phi
    piece = d.pieces[0]
    assert diff * float(piece.deriv(-0.2)) == pytest.approx(0.08 * float(piece.pdf(-0.2)), rel=1e-10)


def test_inner_reset_density_is_continuous_and_flat_flux_in_middle():
    band = Band.from_log(-0.2, 0.2, inner=(-0.05, 0.1))
    d = reset_inner_density(DRIFTY, band)
    p0, p1, p2 = d.pieces
    assert float(p0.pdf(-0.05)) == pytest.approx(float(p1.pdf(-0.05)), rel=1e-12)
    assert float(p1.pdf(0.1)) == pytest.approx(float(p2.pdf(0.1)), rel=1e-12)
    assert d.pdf(np.array([-0.2, 0.2])) == pytest.approx([0, 0], abs=1e-12)
    diff = 0.5 * 0.16**2
    lo_rate, hi_rate = edge_flux_rates(DRIFTY, d)
    # each reset level absorbs the mass lost at its own edge
    assert diff * float(p0.deriv(-0.05) - p1.deriv(-0.05)) == pytest.approx(lo_rate, rel=1e-10)
    mid = np.linspace(-0.04, 0.09, 5)
    flux = 0.08 * p1.pdf(mid) - diff * p1.deriv(mid)
    assert np.abs(flux).max() < 1e-12


def test_ergodic_average_of_eta_under_symmetric_triangle():
    d = resetted_density(GbmParams.from_log_drift(0.0, 0.16), Band.from_log(-0.2, 0.2, star=0.0))
    assert ergodic_average(lambda x: x, d) == pytest.approx(0.0, abs=1e-12)
    # variance of the symmetric triangle on [-h, h] is h^2/6
    assert ergodic_average(lambda x: x * x, d) == pytest.approx(0.04 / 6, rel=1e-9)


def test_mean_exit_time():
    assert mean_exit_time(Band.from_log(-0.2, 0.2), 0.16) == pytest.approx(1.5625)
    assert mean_exit_time(Band.from_log(-0.4, 0.4), 0.16) == pytest.approx(4 * 1.5625)
    assert mean_exit_time(Band.from_log(-0.2, 0.2), 0.32) == pytest.approx(1.5625 / 4)
    with pytest.raises(DomainError):
        mean_exit_time(Band.from_log(0.1, 0.2), 0.16)


def test_density_distance_of_exact_masses_is_zero():
    d = resetted_density(DRIFTY, Band.from_log(-0.2, 0.2, star=0.05))
    edges = np.linspace(-0.2, 0.2, 11)
    counts = np.round(1e9 * d.mass(edges[:-1], edges[1:]))
    dist = density_distance((edges, counts), d)
    assert dist.l1 < 1e-8 and dist.chi2 < 1e-6 and dist.n_bins == 10
    with pytest.raises(DomainError):
        density_distance((edges, np.zeros(10)), d)
    with pytest.raises(DomainError):
        density_distance((np.linspace(-0.1, 0.2, 11), counts), d)
    with pytest.raises(DomainError):
        histogram([])


def test_sample_follows_cdf():
    from scipy import stats
    d = resetted_density(DRIFTY, Band.from_log(-0.2, 0.2, star=0.05))
    x = d.sample(20_000, seed=3)
    assert stats.kstest(x, d.cdf).pvalue > 1e-3


def test_time_average_of_reflected_path_matches_ergodic_mean():
    band = Band.from_log(-0.2, 0.2)
    d = reflected_density(DRIFTY, band, coord="log")
    target = ergodic_average(lambda x: x, d)
    rec = simulate_reflected(DRIFTY, band, 1.0, 400.0, dt=1 / 252, seed=21)
    eta = np.log(rec.state)
    # batch means for the standard error of a correlated series
    batches = eta[1:].reshape(40, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(batches.size)
    assert abs(eta.mean() - target) < 4 * se
