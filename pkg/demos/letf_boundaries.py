"""Numeric trading boundaries of a 2x leveraged fund against their series, original and shadow."""
from tclab import boundaries
from tclab.objectives import Letf, ObjectiveSpec
from tclab.params import GbmParams

spec = ObjectiveSpec(Letf(2.0, 2.0), GbmParams.from_market(0.0, 0.2))
print(f"{'eps':>8} {'pi- num':>10} {'pi- ser':>10} {'pi+ num':>10} {'pi+ ser':>10} {'shadow pi-':>11} {'shadow pi+':>11}")
for eps in (1e-2, 1e-3, 1e-4, 1e-5):
    num = boundaries.letf_solve(spec, eps)
    ser = boundaries.letf_series(spec, eps)
    sh = boundaries.letf_shadow_solve(spec, eps)
    print(f"{eps:8.0e} {num.lower:10.6f} {ser.lower:10.6f} {num.upper:10.6f} {ser.upper:10.6f} "
          f"{sh.lower:11.6f} {sh.upper:11.6f}")

b = boundaries.letf_series(spec, 1e-4)
perf = boundaries.letf_performance(b.lower, b.upper, 1e-4, 0.2, 2.0, 2.0)
print(f"eps=1e-4: TrD={perf.trd:.4e}  TrE={perf.tre:.4e}  EER={perf.eer:.4e}  ATC={perf.atc:.4e}")
