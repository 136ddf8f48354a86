"""Long-run cost of minimal, bulk, small and moderate trades around a 50% target.

The band is the symmetric first-order band of a log-utility investor, and
all four policies share it.  Costs are computed from the stationary densities
(exact) and from the leading-order formulas (asymptotic).
"""
from tclab import costs
from tclab.params import GbmParams

market = GbmParams.from_market(0.05, 0.2)
target = 0.5
band = costs.utility_expansion(target, 1.0)


def row(label, exact, approx):
    sf = "inf" if exact.sf == float("inf") else f"{exact.sf:9.3f}"
    print(f"  {label:<14} ATC {exact.atc:.4e} (leading {approx.atc:.4e})  sales/yr {sf}")


for eps in (1e-3, 1e-4, 1e-5):
    print(f"eps = {eps:g}")
    row("minimal", costs.minimal_trade_stats(market, target, band, eps),
        costs.minimal_trade_stats(market, target, band, eps, "asymptotic"))
    row("maximal", costs.maximal_trade_stats(market, target, band, eps),
        costs.maximal_trade_stats(market, target, band, eps, "asymptotic"))
    row("small", costs.small_trade_stats(market, target, band, 1.0, 1.0, eps),
        costs.small_trade_stats(market, target, band, 1.0, 1.0, eps, "asymptotic"))
    for k in (0.25, 0.75):
        row(f"moderate k={k}", costs.moderate_trade_stats(market, target, band, k, eps),
            costs.moderate_trade_stats(market, target, band, k, eps, "asymptotic"))
