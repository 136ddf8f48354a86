"""Monte Carlo engine for geometric Brownian motion under band controls.

All simulation happens in log coordinates eta = log(xi).  Reflection uses the
Skorokhod map on each step with the Brownian-bridge extremum sampled exactly:
the push needed at an edge equals how far the bridge between the two grid
values would have travelled beyond it.  This removes the square-root-of-dt
bias that plain clamping puts on the local times.  The plain clamp is still
available as ``scheme="grid"`` for comparison.

Resets fire when the grid value is beyond an edge or, failing that, when the
bridge between two grid values crossed it (sampled with its exact crossing
probability; ``scheme="grid"`` skips the bridge test).  The state then moves
to the nominal reset level, so recorded jump sizes equal the distance
between levels.

Every path draws its normals from its own Philox generator seeded with
``seed_base + path_index``.  Batching over paths therefore never changes the
numbers a given path sees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import Band, DomainError, GbmParams, Reflect, ResetToInner, ResetToPoint

RNG_ALGORITHM = "numpy.random.Philox (4x64-10), one generator per path seeded with seed_base + path_index"
DEFAULT_DT = 1.0 / 252.0
SCHEMES = ("bridge", "grid")
# Upper bound on normals held in memory per block of time steps.
_BATCH_DRAWS = 4_000_000


def path_generator(seed: int) -> np.random.Generator:
    """Counter-based generator for one path."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class PathRecord:
    """One simulated trajectory on a uniform grid.

    ``jump_events`` holds ``(time, direction, size)`` with direction -1 for a
    downward reset from the upper edge and +1 for an upward reset from the
    lower edge; ``size`` is the nominal jump in log units.
    """

    times: np.ndarray
    state: np.ndarray
    local_time_L: np.ndarray
    local_time_U: np.ndarray
    jump_events: list[tuple[float, int, float]]
    rng_seed: int
    dt: float
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def log_state(self) -> np.ndarray:
        return np.log(self.state)

    def metadata(self) -> dict:
        return {"rng_seed": self.rng_seed, "rng_algorithm": self.rng_algorithm, "dt": self.dt,
                "horizon": float(self.times[-1]), "n_steps": len(self.times) - 1,
                "n_jumps": len(self.jump_events)}


@dataclass
class EnsembleResult:
    """Terminal statistics of many independent paths.

    Local times are in log units (the same units in which they push the
    diffusion).  ``eta_time_avg`` and ``eta2_time_avg`` are pathwise time
    averages of eta and eta^2 over [0, horizon].
    """

    log_terminal: np.ndarray
    local_time_L: np.ndarray
    local_time_U: np.ndarray
    n_up_jumps: np.ndarray
    n_down_jumps: np.ndarray
    eta_time_avg: np.ndarray
    eta2_time_avg: np.ndarray
    horizon: float
    dt: float
    seed_base: int
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def terminal(self) -> np.ndarray:
        return np.exp(self.log_terminal)

    @property
    def n_paths(self) -> int:
        return len(self.log_terminal)

    def rate(self, name: str) -> "LongRunEstimate":
        """Ensemble estimate of a long-run rate: ``L``, ``U``, ``up_jumps`` or ``down_jumps``."""
        data = {"L": self.local_time_L, "U": self.local_time_U,
                "up_jumps": self.n_up_jumps, "down_jumps": self.n_down_jumps}
        if name not in data:
            raise DomainError(f"unknown rate {name!r}")
        return empirical_long_run(np.asarray(data[name], dtype=float)[:, None], self.horizon)


@dataclass(frozen=True)
class LongRunEstimate:
    value: float
    stderr: float
    n_paths: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.stderr


def _grid(horizon: float, dt: float) -> tuple[int, float]:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not horizon >= dt:
        raise DomainError("horizon must be at least one step")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        # keep the grid uniform and end exactly at the horizon
        n_steps = int(math.ceil(horizon / dt))
    return n_steps, horizon / n_steps


@dataclass
class _Control:
    kind: str  # "free", "reflect" or "reset"
    lo: float = -np.inf
    hi: float = np.inf
    lo_target: float = 0.0
    hi_target: float = 0.0


def _control_for(band: Band | None) -> _Control:
    if band is None:
        return _Control("free")
    levels = band.log_levels()
    if isinstance(band.policy, Reflect):
        return _Control("reflect", levels[0], levels[-1])
    lo_t, hi_t = band.reset_targets()
    return _Control("reset", levels[0], levels[-1], lo_t, hi_t)


def _bridge_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)).jumped())


def _bridge_pushes(a: np.ndarray, b: np.ndarray, vol: float, logu: np.ndarray, control: _Control):
    """Edge pushes over one step from the sampled minimum and maximum of the bridge a -> b."""
    gap2 = (b - a) ** 2
    lo_ext = 0.5 * (a + b - np.sqrt(gap2 - 2.0 * vol * vol * logu[:, 0]))
    hi_ext = 0.5 * (a + b + np.sqrt(gap2 - 2.0 * vol * vol * logu[:, 1]))
    return np.maximum(control.lo - lo_ext, 0.0), np.maximum(hi_ext - control.hi, 0.0)


def _bridge_crossed(a: np.ndarray, b: np.ndarray, vol: float, logu: np.ndarray, control: _Control):
    """Whether the bridge a -> b touched each edge, for endpoints inside the band.

    The bridge reaches level h (beyond both ends) with probability
    exp(-2 (h - a)(h - b) / vol^2).
    """
    v2 = vol * vol
    with np.errstate(invalid="ignore"):
        lo_log = -2.0 * (a - control.lo) * (b - control.lo) / v2
        hi_log = -2.0 * (control.hi - a) * (control.hi - b) / v2
    return logu[:, 0] < lo_log, logu[:, 1] < hi_log


def _evolve(params: GbmParams, control: _Control, eta0: np.ndarray, n_steps: int, dt: float,
            seeds: np.ndarray, record: bool = False, scheme: str = "bridge"):
    """Advance a batch of paths; returns a dict of per-path totals (and the path if ``record``).

    Normals are drawn from each path's generator in blocks of time steps, which
    yields the same stream as one long draw per path.
    """
    n = len(eta0)
    drift = params.log_drift * dt
    vol = params.vol_Sigma * math.sqrt(dt)
    gens = [path_generator(s) for s in seeds] if vol > 0 else []
    # bridge extrema use a separate stream per path so normals never shift
    ugens = ([_bridge_generator(s) for s in seeds]
             if vol > 0 and control.kind != "free" and scheme == "bridge" else [])
    block = max(16, _BATCH_DRAWS // max(n, 1))
    eta = eta0.astype(float).copy()
    L = np.zeros(n)
    U = np.zeros(n)
    n_up = np.zeros(n, dtype=np.int64)
    n_down = np.zeros(n, dtype=np.int64)
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    if record:
        eta_path = np.empty(n_steps + 1)
        L_path = np.zeros(n_steps + 1)
        U_path = np.zeros(n_steps + 1)
        eta_path[0] = eta[0]
        events: list[tuple[float, int, float]] = []
    for k0 in range(0, n_steps, block):
        m = min(block, n_steps - k0)
        if vol > 0:
            # time-major so each step reads a contiguous slice
            z = np.ascontiguousarray(np.stack([g.standard_normal(m) for g in gens]).T)
            if ugens:
                logu = np.log1p(-np.stack([g.random((m, 2)) for g in ugens], axis=1))
        for j in range(m):
            k = k0 + j
            prev = eta
            eta = eta + drift
            if vol > 0:
                eta += vol * z[j]
            if control.kind == "reflect":
                if ugens:
                    push_lo, push_hi = _bridge_pushes(prev, eta, vol, logu[j], control)
                    L += push_lo
                    U += push_hi
                    eta = eta + push_lo - push_hi
                # exact pushes leave at most a double-touch remainder
                below = np.minimum(eta - control.lo, 0.0)
                above = np.maximum(eta - control.hi, 0.0)
                L -= below
                U += above
                eta -= below + above
            elif control.kind == "reset":
                hit_hi = eta >= control.hi
                hit_lo = eta <= control.lo
                if ugens:
                    c_lo, c_hi = _bridge_crossed(prev, eta, vol, logu[j], control)
                    hit_hi |= c_hi & ~hit_lo
                    hit_lo |= c_lo & ~hit_hi
                if hit_hi.any():
                    eta[hit_hi] = control.hi_target
                    n_down += hit_hi
                if hit_lo.any():
                    eta[hit_lo] = control.lo_target
                    n_up += hit_lo
                if record:
                    t = (k + 1) * dt
                    if hit_hi[0]:
                        events.append((t, -1, control.hi - control.hi_target))
                    if hit_lo[0]:
                        events.append((t, +1, control.lo_target - control.lo))
            # trapezoidal time integrals
            s1 += 0.5 * (prev + eta) * dt
            s2 += 0.5 * (prev * prev + eta * eta) * dt
            if record:
                eta_path[k + 1] = eta[0]
                L_path[k + 1] = L[0]
                U_path[k + 1] = U[0]
    out = {"eta": eta, "L": L, "U": U, "n_up": n_up, "n_down": n_down, "s1": s1, "s2": s2}
    if record:
        out.update(eta_path=eta_path, L_path=L_path, U_path=U_path, events=events)
    return out


def _check_start(band: Band, x0: float, interior: bool) -> None:
    if interior:
        ok = band.lower < x0 < band.upper
    else:
        ok = band.lower <= x0 <= band.upper
    if not ok:
        raise DomainError(f"start {x0} lies outside the band [{band.lower}, {band.upper}]")


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}")


def _single(params: GbmParams, band: Band | None, x0: float, horizon: float, dt: float,
            seed: int, scheme: str = "bridge") -> PathRecord:
    if not x0 > 0:
        raise DomainError("start level must be positive")
    _check_scheme(scheme)
    n_steps, dt = _grid(horizon, dt)
    res = _evolve(params, _control_for(band), np.array([math.log(x0)]), n_steps, dt,
                  np.array([seed]), record=True, scheme=scheme)
    times = dt * np.arange(n_steps + 1)
    return PathRecord(times, np.exp(res["eta_path"]), res["L_path"], res["U_path"],
                      res["events"], int(seed), dt)


def simulate_gbm(params: GbmParams, x0: float, horizon: float, dt: float = DEFAULT_DT,
                 seed: int = 0) -> PathRecord:
    """Uncontrolled GBM with exact lognormal increments."""
    return _single(params, None, x0, horizon, dt, seed)


def simulate_reflected(params: GbmParams, band: Band, x0: float, horizon: float,
                       dt: float = DEFAULT_DT, seed: int = 0, scheme: str = "bridge") -> PathRecord:
    """GBM kept inside ``band`` by minimal pushes at its edges.

    ``scheme="grid"`` uses the plain clamp (overshoot of the grid value only).
    """
    if not isinstance(band.policy, Reflect):
        raise DomainError("simulate_reflected needs a band with the Reflect policy")
    _check_start(band, x0, interior=False)
    return _single(params, band, x0, horizon, dt, seed, scheme)


def simulate_resetted(params: GbmParams, band: Band, x0: float, horizon: float,
                      dt: float = DEFAULT_DT, seed: int = 0, scheme: str = "bridge") -> PathRecord:
    """GBM that jumps to the band's reset level(s) whenever it crosses an edge.

    ``scheme="grid"`` only looks at grid values when detecting a crossing.
    """
    if not isinstance(band.policy, (ResetToPoint, ResetToInner)):
        raise DomainError("simulate_resetted needs a ResetToPoint or ResetToInner band")
    _check_start(band, x0, interior=True)
    return _single(params, band, x0, horizon, dt, seed, scheme)


def simulate_ensemble(params: GbmParams, band: Band | None, x0, horizon: float, n_paths: int,
                      dt: float = DEFAULT_DT, seed_base: int = 0, scheme: str = "bridge") -> EnsembleResult:
    """Run ``n_paths`` independent copies and keep only their terminal statistics.

    ``x0`` is either one start level or an array with one level per path
    (for instance draws from a stationary density).  ``scheme`` is
    ``"bridge"`` (default) or ``"grid"``; see the module notes.
    """
    _check_scheme(scheme)
    if n_paths < 1:
        raise DomainError("need at least one path")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n_paths,))
    if np.any(x0 <= 0):
        raise DomainError("start levels must be positive")
    if band is not None:
        interior = not isinstance(band.policy, Reflect)
        for v in np.unique(x0):
            _check_start(band, float(v), interior)
    n_steps, dt = _grid(horizon, dt)
    cat = _evolve(params, _control_for(band), np.log(x0), n_steps, dt,
                  seed_base + np.arange(n_paths), scheme=scheme)
    return EnsembleResult(cat["eta"], cat["L"], cat["U"], cat["n_up"], cat["n_down"],
                          cat["s1"] / horizon, cat["s2"] / horizon, horizon, dt, seed_base)


def first_exit_times(params: GbmParams, eta_lower: float, eta_upper: float, n_paths: int,
                     eta0: float = 0.0, dt: float = DEFAULT_DT, seed_base: int = 0,
                     max_horizon: float = 100.0) -> np.ndarray:
    """First grid time at which log(xi) leaves (eta_lower, eta_upper); NaN if never within ``max_horizon``."""
    if not eta_lower < eta0 < eta_upper:
        raise DomainError("start must lie strictly inside the interval")
    n_steps, dt = _grid(max_horizon, dt)
    drift = params.log_drift * dt
    vol = params.vol_Sigma * math.sqrt(dt)
    out = np.full(n_paths, np.nan)
    gens = [path_generator(seed_base + i) for i in range(n_paths)]
    eta = np.full(n_paths, float(eta0))
    alive = np.ones(n_paths, dtype=bool)
    chunk = 256
    for k0 in range(0, n_steps, chunk):
        m = min(chunk, n_steps - k0)
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        z = np.stack([gens[i].standard_normal(m) for i in idx])
        paths = eta[idx, None] + np.cumsum(drift + vol * z, axis=1)
        out_of = (paths <= eta_lower) | (paths >= eta_upper)
        hit = out_of.any(axis=1)
        first = np.argmax(out_of, axis=1)
        out[idx[hit]] = (k0 + first[hit] + 1) * dt
        alive[idx[hit]] = False
        eta[idx] = paths[:, -1]
    return out


def empirical_long_run(series, horizon: float) -> LongRunEstimate:
    """Terminal cumulative value divided by the horizon.

    A 1-D array is one path (standard error NaN).  A 2-D array is read as
    (paths, times) and the estimate is the ensemble mean with its standard error.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise DomainError("empty series")
    if arr.ndim == 1:
        return LongRunEstimate(float(arr[-1] / horizon), float("nan"), 1)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DomainError("series must be 1-D or (paths, times)")
    rates = arr[:, -1] / horizon
    n = len(rates)
    se = float(rates.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return LongRunEstimate(float(rates.mean()), se, n)


# --------------------------------------------------------------------------
# Self-financing ledger


class InsolvencyError(RuntimeError):
    """Wealth reached zero or below: the strategy is not admissible."""


@dataclass
class PortfolioLedger:
    """Ledger state sampled on the price grid (after any trade at that time)."""

    times: np.ndarray
    safe_X: np.ndarray
    risky_Y: np.ndarray
    wealth_w: np.ndarray
    fraction_pi: np.ndarray
    ratio_zeta: np.ndarray
    shares: np.ndarray
    cum_sell_cost: np.ndarray
    cum_relative_cost: np.ndarray = field(default=None)  # sum of eps*S*dphi_down / w

    def annualized_relative_cost(self) -> float:
        """Long-run average of selling costs measured against current wealth."""
        return float(self.cum_relative_cost[-1] / (self.times[-1] - self.times[0]))


def evolve_portfolio(price_path: PathRecord, trades, spread_eps: float, safe0: float = 0.0,
                     shares0: float = 0.0, interest_r: float = 0.0) -> PortfolioLedger:
    """Replay externally supplied trades on a price path.

    ``trades`` is a time-sorted sequence of ``(time, bought, sold)`` share
    amounts.  A trade is executed at the first grid point not earlier than its
    time.  Purchases pay the ask S, sales receive the bid (1 - eps) S, and the
    safe account accrues at ``interest_r``.  Wealth is marked at the ask.
    """
    if not 0.0 <= spread_eps < 1.0:
        raise DomainError("spread must lie in [0, 1)")
    times = price_path.times
    price = price_path.state
    n = len(times)
    trades = list(trades)
    t_prev = -np.inf
    for t, up, down in trades:
        if t < t_prev:
            raise DomainError("trades must be sorted by time")
        if up < 0 or down < 0:
            raise DomainError("trade amounts must be nonnegative")
        t_prev = t
    idx_of = np.searchsorted(times, [t for t, _, _ in trades], side="left") if trades else []
    X = np.empty(n)
    phi = np.empty(n)
    cost = np.empty(n)
    rel = np.empty(n)
    x, p, c, rc = float(safe0), float(shares0), 0.0, 0.0
    j = 0
    for k in range(n):
        if k > 0 and interest_r:
            x *= math.exp(interest_r * (times[k] - times[k - 1]))
        s = price[k]
        while j < len(trades) and idx_of[j] <= k:
            _, up, down = trades[j]
            x -= s * up
            p += up
            x += (1.0 - spread_eps) * s * down
            p -= down
            w_before = x + p * s + spread_eps * s * down
            c += spread_eps * s * down
            rc += spread_eps * s * down / w_before
            j += 1
        w = x + p * s
        if not w > 0:
            raise InsolvencyError(f"wealth {w:.6g} at t={times[k]:.6g}")
        X[k], phi[k], cost[k], rel[k] = x, p, c, rc
    Y = phi * price
    w = X + Y
    pi = Y / w
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(pi != 1.0, pi / (1.0 - pi), np.inf)
    return PortfolioLedger(times, X, Y, w, pi, zeta, phi, cost, rel)
