"""Numerical acceptance checks, shared by the ``verify`` subcommand and the test suite.

Each check returns a :class:`CheckResult` with the measured value, the
expected value and the tolerance it was judged against.  Checks marked
``gating=False`` are informational lines printed next to a gating check.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ansatz, boundaries, costs, stationary
from .objectives import Letf, LogContract, ObjectiveSpec
from .params import Band, GbmParams
from .sde import simulate_ensemble


@dataclass
class CheckResult:
    id: str
    name: str
    measured: float
    expected: float | str
    tolerance: str
    passed: bool
    runtime: float = 0.0
    note: str = ""
    gating: bool = True

    @property
    def verdict(self) -> str:
        if not self.gating:
            return "INFO"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        exp = self.expected if isinstance(self.expected, str) else f"{self.expected:.6g}"
        text = (f"[{self.verdict}] {self.id:<4} {self.name}: measured={self.measured:.6g} "
                f"expected={exp} tol={self.tolerance} ({self.runtime:.2f}s)")
        return text + (f"  # {self.note}" if self.note else "")


def _timed(fn: Callable[[], list[CheckResult]]) -> list[CheckResult]:
    t0 = time.perf_counter()
    out = fn()
    dt = time.perf_counter() - t0
    for r in out:
        if r.runtime == 0.0:
            r.runtime = dt
    return out


def loglog_slope(x, y) -> float:
    """Least-squares slope of log|y| against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float))), 1)[0])


def noise_budget_bins(n_samples: int, l1_tol: float) -> int:
    """Largest bin count whose expected sampling L1 stays under half the tolerance.

    With K bins and N independent draws the sampling part of the L1 distance
    is about sqrt(2 K / (pi N)).
    """
    return max(2, int(math.floor(math.pi * n_samples * (0.5 * l1_tol) ** 2 / 2.0)))


# --------------------------------------------------------------------------
# stationary suite

MC_PATHS = 10_000
MC_HORIZON = 5.0
DAILY = 1.0 / 252.0


def _density_l1(params, band, density, x0, dt, tol, seed_base=0, scheme="bridge"):
    res = simulate_ensemble(params, band, x0, MC_HORIZON, MC_PATHS, dt, seed_base, scheme)
    k = noise_budget_bins(MC_PATHS, tol)
    hist = stationary.histogram(res.log_terminal, bins=k, range=density.support)
    return stationary.density_distance(hist, density)


def check_single_reset_density(tol: float = 0.05) -> list[CheckResult]:
    params = GbmParams.from_log_drift(0.08, 0.16)
    band = Band.from_log(-0.2, 0.2, star=0.0)
    dens = stationary.resetted_density(params, band)
    t0 = time.perf_counter()
    dist = _density_l1(params, band, dens, 1.0, DAILY, tol)
    rt = time.perf_counter() - t0
    ok = dist.l1 < tol and rt < 60.0
    out = [CheckResult("2", "single-reset density L1 (daily steps, 1e4 paths, T=5)", dist.l1, tol,
                       f"< {tol}, runtime < 60s", ok, rt, f"{dist.n_bins} bins")]
    t0 = time.perf_counter()
    grid = _density_l1(params, band, dens, 1.0, DAILY, tol, scheme="grid")
    out.append(CheckResult("2g", "same with grid-only crossing detection", grid.l1, tol, f"< {tol}",
                           grid.l1 < tol, time.perf_counter() - t0, gating=False))
    return out


def check_inner_reset_density(tol: float = 0.05) -> list[CheckResult]:
    params = GbmParams.from_log_drift(0.10, 0.25)
    band = Band.from_log(-0.2, 0.2, inner=(-0.1, 0.1))
    dens = stationary.reset_inner_density(params, band)
    t0 = time.perf_counter()
    dist = _density_l1(params, band, dens, 1.0, DAILY, tol)
    rt = time.perf_counter() - t0
    return [CheckResult("3", "two-level reset density L1 (daily steps, 1e4 paths, T=5)", dist.l1, tol,
                        f"< {tol}, runtime < 60s", dist.l1 < tol and rt < 60.0, rt, f"{dist.n_bins} bins")]


LOCAL_TIME_SETS = (
    # (log drift, Sigma, eta_-, eta_+)
    (0.08, 0.16, -0.2, 0.2),
    (0.0, 0.20, -0.1, 0.15),   # 2M = Sigma^2
    (-0.05, 0.30, -0.3, 0.1),
)


def check_local_times(n_se: float = 3.0, scheme: str = "bridge") -> list[CheckResult]:
    out = []
    gate = scheme == "bridge"
    for i, (ld, sig, lo, hi) in enumerate(LOCAL_TIME_SETS):
        params = GbmParams.from_log_drift(ld, sig)
        band = Band.from_log(lo, hi)
        want = costs.local_time_rates(params, band)
        x0 = np.exp(stationary.reflected_density(params, band, coord="log").sample(MC_PATHS, seed=7 + i))
        t0 = time.perf_counter()
        res = simulate_ensemble(params, band, x0, MC_HORIZON, MC_PATHS, DAILY, 1000 * i, scheme)
        rt = time.perf_counter() - t0
        for name, target in zip(("L", "U"), want):
            est = res.rate(name)
            z = (est.value - target) / est.stderr
            out.append(CheckResult("4" if gate else "4g", f"{name}_T/T set {i + 1} (M-S^2/2={ld}, S={sig})"
                                   + ("" if gate else ", clamp only"), est.value, target, f"{n_se} SE",
                                   est.within(target, n_se), rt, f"z={z:+.2f}", gating=gate))
    return out


def check_local_times_clamp() -> list[CheckResult]:
    """The same ensembles with the plain clamp; shows its downward bias."""
    return check_local_times(scheme="grid")


# --------------------------------------------------------------------------
# costs suite

COST_MARKET = GbmParams.from_market(0.05, 0.2)
COST_TARGET = 0.5
COST_GAMMA = 1.0


def check_cost_ratios() -> list[CheckResult]:
    exp = costs.utility_expansion(COST_TARGET, COST_GAMMA)
    out = []
    for eps in (1e-3, 1e-4, 1e-5):
        mn = costs.minimal_trade_stats(COST_MARKET, COST_TARGET, exp, eps).atc
        mx = costs.maximal_trade_stats(COST_MARKET, COST_TARGET, exp, eps).atc
        sm = costs.small_trade_stats(COST_MARKET, COST_TARGET, exp, 1.0, 1.0, eps).atc
        gate = eps == 1e-5
        out.append(CheckResult("5", f"maximal/minimal ATC at eps={eps:g}", mx / mn, 2.0, "[1.9, 2.1]",
                               1.9 <= mx / mn <= 2.1, gating=gate))
        out.append(CheckResult("5", f"small/minimal ATC at eps={eps:g}", sm / mn, 1.0, "[0.95, 1.05]",
                               0.95 <= sm / mn <= 1.05, gating=gate))
    return out


def check_scaling_law() -> list[CheckResult]:
    exp = costs.utility_expansion(COST_TARGET, COST_GAMMA)
    out = []
    for k in (1, 2):
        r = costs.scaling_law_check(1e-5, k, COST_MARKET, COST_TARGET, exp)
        out.append(CheckResult("6", f"ATC/(eps*TF*size), exponent {k} ({r.regime})", r.ratio, 1.0,
                               "[0.9, 1.1]", 0.9 <= r.ratio <= 1.1))
    return out


# --------------------------------------------------------------------------
# boundaries suite

LADDER = (1e-2, 1e-3, 1e-4, 1e-5)


def check_kappa() -> list[CheckResult]:
    boundaries.riskneutral_kappa()  # warm the import path
    t0 = time.perf_counter()
    k = boundaries.riskneutral_kappa()
    rt = time.perf_counter() - t0
    return [CheckResult("1", "risk-neutral kappa root", k, 0.5828, "1e-4, runtime < 1ms",
                        abs(k - 0.5828) <= 1e-4 and rt < 1e-3, rt)]


def _ladder_slopes(solve, series):
    dl, du = [], []
    for e in LADDER:
        num, ser = solve(e), series(e)
        dl.append(num.lower - ser.lower)
        du.append(num.upper - ser.upper)
    return {"lower": (loglog_slope(LADDER, dl), np.abs(dl) / np.asarray(LADDER)),
            "upper": (loglog_slope(LADDER, du), np.abs(du) / np.asarray(LADDER))}


def check_logcontract_convergence() -> list[CheckResult]:
    out = []
    # the second market has a nearly vanishing lower third-order coefficient,
    # so the eps^(4/3) term still shows at eps = 1e-2; it is reported, not gated
    for mu, gate in ((0.0, True), (0.05, False)):
        spec = ObjectiveSpec(LogContract(1.0, 1.0), GbmParams.from_market(mu, 0.2))
        t0 = time.perf_counter()
        res = _ladder_slopes(lambda e: boundaries.logcontract_solve(spec, e),
                             lambda e: boundaries.logcontract_series(spec, e))
        rt = time.perf_counter() - t0
        for side, (s, scaled) in res.items():
            out.append(CheckResult("7", f"log contract (mu={mu}) y_{side}: slope of |numeric-series|", s, 1.0,
                                   "0.1, runtime < 5s", abs(s - 1.0) <= 0.1 and rt < 5.0, rt,
                                   f"|diff|/eps from {scaled[0]:.3g} to {scaled[-1]:.3g}", gating=gate))
    return out


def _predicted_flip(Lambda: float, gamma: float) -> float:
    return 2.0 * Lambda / gamma * float(np.cbrt(gamma * Lambda * (Lambda - 1.0) / 6.0))


def check_letf_convergence(Lambda: float = 2.0, gamma: float = 2.0) -> list[CheckResult]:
    out = []
    for gam, gate in ((gamma, True), (1.0, False)):
        spec = ObjectiveSpec(Letf(Lambda, gam), GbmParams.from_market(0.0, 0.2))
        res = _ladder_slopes(lambda e: boundaries.letf_solve(spec, e),
                             lambda e: boundaries.letf_series(spec, e))
        for side, (s, scaled) in res.items():
            out.append(CheckResult("8", f"LETF (gamma={gam:g}) pi_{side}: slope of |numeric-series|", s, 1.0,
                                   "0.1", abs(s - 1.0) <= 0.1,
                                   note=f"|diff|/eps from {scaled[0]:.3g} to {scaled[-1]:.3g}", gating=gate))
    spec = ObjectiveSpec(Letf(Lambda, gamma), GbmParams.from_market(0.0, 0.2))
    fl, fu = [], []
    for e in LADDER:
        num = boundaries.letf_solve(spec, e)
        sh = boundaries.letf_shadow_solve(spec, e)
        d2 = e ** (2.0 / 3.0)
        fl.append((sh.lower - num.lower) / d2)
        fu.append((sh.upper - num.upper) / d2)
    want = _predicted_flip(Lambda, gamma)
    deltas = np.cbrt(np.asarray(LADDER))
    for side, f in (("lower", fl), ("upper", fu)):
        # (shadow - original)/delta^2 = flip + O(delta); extrapolate to delta = 0
        lim = float(np.polyval(np.polyfit(deltas, f, 2), 0.0))
        out.append(CheckResult("8", f"shadow-minus-original pi_{side} at delta^2 order", lim, want,
                               "10%", abs(lim / want - 1.0) <= 0.10, note=f"raw at eps=1e-5: {f[-1]:.4g}"))
    return out


def check_letf_identity(Lambda: float = 2.0, gamma: float = 1.0, sigma: float = 0.2,
                        bound: float = 1.0) -> list[CheckResult]:
    ladder = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    spec = ObjectiveSpec(Letf(Lambda, gamma), GbmParams.from_market(0.0, sigma))
    ratios = []
    for e in ladder:
        ser = boundaries.letf_series(spec, e)
        perf = boundaries.letf_performance(ser.lower, ser.upper, e, sigma, gamma, Lambda)
        atc = boundaries.letf_atc_series(e, sigma, gamma, Lambda)
        ratios.append((-perf.trd - atc) / e ** (4.0 / 3.0))
    r = np.abs(ratios)
    # bounded: small everywhere and not growing as eps shrinks
    ok = r.max() <= bound and r[-1] <= 1.5 * r[-2] + 1e-3
    return [CheckResult("9", "(-TrD - ATC)/eps^(4/3) over eps 1e-2..1e-6, max abs", float(r.max()), bound,
                        "bounded, no growth", bool(ok), note=f"at eps=1e-6: {ratios[-1]:.4g}")]


def check_riskneutral(alpha: float = 1.0, sigma: float = 0.2, eps_atc: float = 1e-6) -> list[CheckResult]:
    ladder = np.geomspace(1e-8, 1e-4, 5)
    am, ap = boundaries.riskneutral_first_order_closed_form(alpha)
    sols = [boundaries.riskneutral_solve(alpha, float(e), n_grid=2) for e in ladder]
    d = np.sqrt(ladder)
    out = []
    for side, key, a in (("u_-", "u_minus", am), ("u_+", "u_plus", ap)):
        s = loglog_slope(d, [x.aux[key] - a for x in sols])
        out.append(CheckResult("10", f"risk-neutral {side} -> A: slope in sqrt(eps)", s, 1.0, "0.1",
                               abs(s - 1.0) <= 0.1))
    market = GbmParams.from_market(alpha * sigma**2, sigma)
    sol = boundaries.riskneutral_solve(alpha, eps_atc)
    atc = boundaries.riskneutral_atc(market, eps_atc, sol)
    measured = atc.exact * math.sqrt(eps_atc)
    kap = boundaries.riskneutral_kappa()
    displayed = sigma**2 * (1.0 - kap) * kap**1.5 / 2.0
    corrected = sigma**2 * (1.0 - kap) * math.sqrt(kap) * alpha**1.5 / 2.0
    out.append(CheckResult("10", f"ATC*sqrt(eps) at eps={eps_atc:g} vs sigma^2(1-k)k^(3/2)/2", measured,
                           displayed, "5%", abs(measured / displayed - 1.0) <= 0.05,
                           note=f"ratio {measured / displayed:.4f}, 1/kappa = {1.0 / kap:.4f}"))
    out.append(CheckResult("10c", "same vs sigma^2(1-k)k^(1/2)alpha^(3/2)/2", measured, corrected, "5%",
                           abs(measured / corrected - 1.0) <= 0.05, gating=False))
    return out


# --------------------------------------------------------------------------
# ansatz suite

def check_residual_orders() -> list[CheckResult]:
    lc = ObjectiveSpec(LogContract(1.3, 2.0), GbmParams.from_market(0.05, 0.2))
    o = ansatz.residual_order(lc, ansatz.logcontract_coeffs(lc), LADDER)
    out = [CheckResult("11", "log-contract residual delta-slope", o.slope, 3.8, ">= 3.8, R^2 > 0.99",
                       o.slope >= 3.8 and o.r_squared > 0.99, note=f"R^2={o.r_squared:.5f}")]
    sp = ObjectiveSpec(Letf(2.0, 1.0), GbmParams.from_market(0.0, 0.2))
    s_m = ansatz.residual_order(sp, ansatz.letf_shadow_coeffs(sp, -1.0), LADDER).slope
    s_p = ansatz.residual_order(sp, ansatz.letf_shadow_coeffs(sp, 1.0), LADDER).slope
    out.append(CheckResult("11", "LETF shadow slope(kappa=-1) - slope(kappa=+1)", s_m - s_p, 1.0, ">= 1",
                           s_m - s_p >= 1.0, note=f"slopes {s_m:.3f} vs {s_p:.3f}"))
    return out


def check_utility_kappa(resolution: float = 1e-2) -> list[CheckResult]:
    out = []
    for label, spec in (("power gamma=2", ObjectiveSpec.power_utility(0.05, 0.2, 2.0)),
                        ("log", ObjectiveSpec.power_utility(0.06, 0.2, 1.0))):
        scan = ansatz.kappa_scan(spec)
        out.append(CheckResult("12", f"{label} utility: argmin of second-order misfit over kappa",
                               scan.best, 0.0, f"{resolution}", abs(scan.best) <= resolution + 1e-12))
    return out


# --------------------------------------------------------------------------

SUITES: dict[str, tuple[Callable[[], list[CheckResult]], ...]] = {
    "stationary": (check_single_reset_density, check_inner_reset_density, check_local_times,
                   check_local_times_clamp),
    "costs": (check_cost_ratios, check_scaling_law),
    "boundaries": (check_kappa, check_logcontract_convergence, check_letf_convergence,
                   check_letf_identity, check_riskneutral),
    "ansatz": (check_residual_orders, check_utility_kappa),
}
SUITES["all"] = tuple(fn for name in ("boundaries", "stationary", "costs", "ansatz") for fn in SUITES[name])


@dataclass
class SuiteReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.gating)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]


def run_suite(name: str = "all") -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    rep = SuiteReport()
    for fn in SUITES[name]:
        rep.results.extend(_timed(fn))
    return rep
