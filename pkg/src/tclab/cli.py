"""Command-line front end: ``tclab <command> [options]``.

Commands write a CSV table (first line ``# schema=<name>.v1``) and a JSON
sidecar next to it.  Options may also come from a flat TOML or JSON file
given with ``--config``; flags on the command line win over the file.
The default output directory is ``$TCLAB_OUT`` or ``./tclab_out``.

Exit status: 0 on success, 1 on solver failure or a failing check,
2 on a usage error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, ansatz, boundaries, costs, stationary
from .io import load_config, write_table
from .objectives import Letf, LogContract, ObjectiveSpec
from .params import Band, DomainError, GbmParams, SolverError
from .sde import simulate_ensemble, simulate_gbm, simulate_reflected, simulate_resetted

OUT_ENV = "TCLAB_OUT"
DEFAULT_LADDER = "1e-2,1e-3,1e-4,1e-5"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


# --------------------------------------------------------------------------
# parser


def _band_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=["reflect", "reset", "inner"], default="reflect")
    p.add_argument("--log-drift", type=float, default=0.08, help="M - Sigma^2/2")
    p.add_argument("--vol", type=float, default=0.16, help="Sigma")
    p.add_argument("--eta-lower", type=float, default=-0.2)
    p.add_argument("--eta-upper", type=float, default=0.2)
    p.add_argument("--eta-star", type=float, default=0.0, help="reset level (policy=reset)")
    p.add_argument("--eta-inner", type=_floats, default=[-0.1, 0.1],
                   help="two inner reset levels (policy=inner)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat TOML or JSON file with option values")
    p.add_argument("--output", help="CSV path (default: $TCLAB_OUT/<command>.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a controlled GBM path or an ensemble histogram")
    _common(p)
    _band_options(p)
    p.add_argument("--free", action="store_true", help="ignore the band (plain GBM)")
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1.0 / 252.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=1, help=">1 writes a histogram of terminal log levels")
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("density", help="tabulate a stationary density")
    _common(p)
    _band_options(p)
    p.add_argument("--coord", choices=["log", "level"], default="log",
                   help="coordinate for the reflected density")
    p.add_argument("--n-grid", type=int, default=201)

    p = sub.add_parser("costs", help="long-run trading costs of a band policy")
    _common(p)
    p.add_argument("--regime", choices=["minimal", "maximal", "small", "moderate"], default="minimal")
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--target", type=float, default=0.5, help="target weight Lambda")
    p.add_argument("--gamma", type=float, default=1.0, help="sets the band width")
    p.add_argument("--kappa", type=float, default=1.0,
                   help="small: size multiplier of eps^(2/3); moderate: fraction in [0, 1)")
    p.add_argument("--mode", choices=["exact", "asymptotic"], default="exact")
    p.add_argument("--eps-ladder", type=_floats, default=_floats("1e-3,1e-4,1e-5"))

    p = sub.add_parser("boundaries", help="free boundaries: numeric solve against the series")
    _common(p)
    p.add_argument("--objective",
                   choices=["logcontract", "letf", "letf-shadow", "power", "log", "riskneutral"])
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--y-star", type=float, default=1.0)
    p.add_argument("--leverage", type=float, default=2.0)
    p.add_argument("--method", choices=["numeric", "series", "both"], default="both")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eps", type=float)
    g.add_argument("--eps-ladder", type=_floats)

    p = sub.add_parser("residual", help="sup-norm residual of an Ansatz along a spread ladder")
    _common(p)
    p.add_argument("--objective", choices=["logcontract", "letf-shadow", "power", "log"])
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--y-star", type=float, default=1.0)
    p.add_argument("--leverage", type=float, default=2.0)
    p.add_argument("--kappa", type=float, default=-1.0, help="second-order multiplier (letf-shadow)")
    p.add_argument("--eps-ladder", type=_floats, default=_floats(DEFAULT_LADDER))

    p = sub.add_parser("verify", help="run the numerical acceptance checks")
    _common(p)
    p.add_argument("--suite", choices=["stationary", "costs", "boundaries", "ansatz", "all"], default="all")
    parser.subcommands = sub.choices
    return parser


def parse(argv: list[str] | None) -> argparse.Namespace:
    """Parse flags, filling unset options from ``--config`` first."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = load_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        sub = parser.subcommands[args.command]
        dests = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in dests or dest in ("config", "help"):
                parser.error(f"config key {key!r} is not an option of {args.command!r}")
            act = dests[dest]
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            if act.type is not None and isinstance(val, (str, int, float)) and not isinstance(val, bool):
                try:
                    val = act.type(str(val)) if act.type is _floats else act.type(val)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    parser.error(f"config key {key!r}: {exc}")
            defaults[dest] = val
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.command in ("boundaries", "residual") and args.objective is None:
        parser.error("--objective is required (on the command line or in the config file)")
    return args


# --------------------------------------------------------------------------
# commands


def _out_path(args) -> Path:
    if args.output:
        return Path(args.output)
    return Path(os.environ.get(OUT_ENV, "tclab_out")) / f"{args.command}.csv"


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "output")}


def _band(args) -> Band:
    if args.policy == "reset":
        return Band.from_log(args.eta_lower, args.eta_upper, star=args.eta_star)
    if args.policy == "inner":
        if len(args.eta_inner) != 2:
            raise DomainError("--eta-inner takes exactly two levels")
        return Band.from_log(args.eta_lower, args.eta_upper, inner=tuple(args.eta_inner))
    return Band.from_log(args.eta_lower, args.eta_upper)


def cmd_simulate(args) -> int:
    params = GbmParams.from_log_drift(args.log_drift, args.vol)
    band = None if args.free else _band(args)
    cfg = _config(args)
    if args.paths > 1:
        res = simulate_ensemble(params, band, args.x0, args.horizon, args.paths, args.dt, args.seed)
        rng = None if band is None else (math.log(band.lower), math.log(band.upper))
        edges, counts = stationary.histogram(res.log_terminal, bins=args.bins, range=rng)
        rows = [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))]
        cfg.update(rng_algorithm=res.rng_algorithm, dt_used=res.dt)
        write_table(_out_path(args), "histogram", ("bin_left", "bin_right", "count"), rows, cfg)
        return 0
    if band is None:
        rec = simulate_gbm(params, args.x0, args.horizon, args.dt, args.seed)
    elif args.policy == "reflect":
        rec = simulate_reflected(params, band, args.x0, args.horizon, args.dt, args.seed)
    else:
        rec = simulate_resetted(params, band, args.x0, args.horizon, args.dt, args.seed)
    rows = zip(rec.times, rec.state, rec.local_time_L, rec.local_time_U)
    cfg.update(rec.metadata())
    write_table(_out_path(args), "path", ("t", "state", "L", "U"), list(rows), cfg)
    return 0


def cmd_density(args) -> int:
    params = GbmParams.from_log_drift(args.log_drift, args.vol)
    band = _band(args)
    if args.policy == "reflect":
        dens = stationary.reflected_density(params, band, coord=args.coord)
    elif args.policy == "reset":
        dens = stationary.resetted_density(params, band)
    else:
        dens = stationary.reset_inner_density(params, band)
    x = np.linspace(*dens.support, args.n_grid)
    cfg = _config(args)
    cfg.update(density_kind=dens.kind, density_coord=dens.coord)
    write_table(_out_path(args), "density", ("x", "pdf"), list(zip(x, dens.pdf(x))), cfg)
    return 0


def cmd_costs(args) -> int:
    market = GbmParams.from_market(args.mu, args.sigma)
    exp = costs.utility_expansion(args.target, args.gamma)
    rows = []
    for eps in args.eps_ladder:
        base = costs.minimal_trade_stats(market, args.target, exp, eps, args.mode)
        if args.regime == "minimal":
            rep = base
        elif args.regime == "maximal":
            rep = costs.maximal_trade_stats(market, args.target, exp, eps, args.mode)
        elif args.regime == "small":
            rep = costs.small_trade_stats(market, args.target, exp, args.kappa, args.kappa, eps, args.mode)
        else:
            rep = costs.moderate_trade_stats(market, args.target, exp, args.kappa, eps, args.mode)
        rows.append((eps, rep.trc, rep.atc, rep.sf, rep.atc / base.atc))
    write_table(_out_path(args), "costs", ("eps", "trc", "atc", "sf", "ratio"), rows, _config(args))
    return 0


def _ladder(args) -> list[float]:
    if args.eps is not None:
        return [args.eps]
    return args.eps_ladder or _floats(DEFAULT_LADDER)


def _print_riskneutral(market: GbmParams, ladder) -> None:
    print(f"{'eps':>10} {'kappa':>10} {'A_-':>10} {'A_+':>10} {'pi_-':>12} {'pi_+':>12}")
    for eps in ladder:
        s = boundaries.riskneutral_series(market, eps)
        print(f"{eps:>10.3g} {s.kappa:>10.6f} {s.A_minus:>10.6f} {s.A_plus:>10.6f} "
              f"{s.pi_minus:>12.6g} {s.pi_plus:>12.6g}")


def _boundary_row(args, eps: float):
    market = GbmParams.from_market(args.mu, args.sigma)
    obj = args.objective
    num = ser = None
    if obj == "logcontract":
        spec = ObjectiveSpec(LogContract(args.y_star, args.gamma), market, eps)
        ser = boundaries.logcontract_series(spec, eps)
        if args.method != "series":
            num = boundaries.logcontract_solve(spec, eps)
    elif obj in ("letf", "letf-shadow"):
        spec = ObjectiveSpec(Letf(args.leverage, args.gamma), market, eps)
        variant = "Shadow" if obj == "letf-shadow" else "Original"
        ser = boundaries.letf_series(spec, eps, variant)
        if args.method != "series":
            num = (boundaries.letf_shadow_solve(spec, eps) if variant == "Shadow"
                   else boundaries.letf_solve(spec, eps))
    elif obj in ("power", "log"):
        gamma = 1.0 if obj == "log" else args.gamma
        spec = ObjectiveSpec.power_utility(args.mu, args.sigma, gamma, eps)
        ser = boundaries.utility_series(spec, eps)
    else:
        s = boundaries.riskneutral_series(market, eps)
        ser = s
        if args.method != "series":
            num = boundaries.riskneutral_solve(s.alpha, eps)
    lo_s, hi_s = (ser.pi_minus, ser.pi_plus) if obj == "riskneutral" else (ser.lower, ser.upper)
    if num is None:
        return (eps, math.nan, math.nan, lo_s, hi_s, math.nan)
    return (eps, num.lower, num.upper, lo_s, hi_s, num.residual_norm)


def cmd_boundaries(args) -> int:
    if args.objective in ("power", "log") and args.method != "series":
        raise UsageError("utility objectives have a series only; pass --method series")
    ladder = _ladder(args)
    if args.objective == "riskneutral":
        _print_riskneutral(GbmParams.from_market(args.mu, args.sigma), ladder)
    rows = [_boundary_row(args, eps) for eps in ladder]
    if args.method == "series":
        rows = [r[:1] + (math.nan, math.nan) + r[3:] for r in rows]
    header = ("eps", "lower_numeric", "upper_numeric", "lower_series", "upper_series", "residual")
    write_table(_out_path(args), "boundaries", header, rows, _config(args))
    return 0


def cmd_residual(args) -> int:
    market = GbmParams.from_market(args.mu, args.sigma)
    obj = args.objective
    if obj == "logcontract":
        spec = ObjectiveSpec(LogContract(args.y_star, args.gamma), market)
        sol = ansatz.logcontract_coeffs(spec)
        coeffs, exp = sol.coeffs, sol.expansion
    elif obj == "letf-shadow":
        spec = ObjectiveSpec(Letf(args.leverage, args.gamma), market)
        sol = ansatz.letf_shadow_coeffs(spec, args.kappa)
        coeffs, exp = sol.coeffs, sol.expansion
    else:
        gamma = 1.0 if obj == "log" else args.gamma
        spec = ObjectiveSpec.power_utility(args.mu, args.sigma, gamma)
        exp = boundaries.utility_expansion(spec)
        coeffs = ansatz.fit_second_order(spec, ansatz.utility_base_coeffs(spec), exp).coeffs
    ladder = sorted(args.eps_ladder, reverse=True)
    rows = []
    prev = None
    for eps in ladder:
        d = exp.delta(eps)
        r = ansatz.sup_residual(spec, coeffs, exp, eps)
        slope = math.log(r / prev[1]) / math.log(d / prev[0]) if prev and r > 0 and prev[1] > 0 else math.nan
        rows.append((eps, d, r, slope))
        prev = (d, r)
    write_table(_out_path(args), "residual", ("eps", "delta", "sup_residual", "slope_partial"), rows,
                _config(args))
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    rep = run_suite(args.suite)
    for line in rep.lines():
        print(line)
    rows = [(r.id, r.name, r.measured, r.expected, r.tolerance, r.verdict, r.runtime) for r in rep.results]
    cfg = _config(args)
    write_table(_out_path(args), "verify",
                ("id", "name", "measured", "expected", "tolerance", "verdict", "runtime_s"), rows, cfg)
    n_fail = sum(1 for r in rep.results if r.gating and not r.passed)
    print(f"{'PASS' if n_fail == 0 else 'FAIL'}: {n_fail} failing check(s)")
    return 0 if n_fail == 0 else 1


COMMANDS = {"simulate": cmd_simulate, "density": cmd_density, "costs": cmd_costs,
            "boundaries": cmd_boundaries, "residual": cmd_residual, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = parse(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"tclab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"tclab {args.command}: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
