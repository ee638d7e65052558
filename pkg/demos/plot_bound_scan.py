"""
Checking the spectral bounds on a grid of sizes
===============================================

Each bound is evaluated on sampled instances and reported as lhs <= rhs.
Most only hold for n large enough, so the scan reports the first grid size
from which a bound keeps holding.  The closing experiment estimates the
norm of [Z Z^T] for a random sign matrix, whose conjectured limit after
scaling by sqrt(2N) is 1 + sqrt(1/2).
"""

from npsroles._rng import substream
from npsroles.diagnostics import (
    build_instance,
    check_conjecture,
    check_deviation,
    check_gap_bounds,
    check_sin_theta,
    scan_thresholds,
)
from npsroles.sbm import cycle_model

model = cycle_model(0.6)
records = []
for n in (2, 5, 10, 20):
    inst = build_instance(model, n, k=10, policy="half-gamma", seed=substream(0, n))
    records += check_deviation(model, n, instance=inst)
    records += check_gap_bounds(model, n, instance=inst)
    records += check_sin_theta(model, n, instance=inst)

for name, first in scan_thresholds(records).items():
    print(f"{name:<30} holds from n = {first}")

# the deviation bound needs very large n before it drops below ||A||^2
last = [r for r in records if r.name == "deviation-bound-below-normA"][-1]
print(f"at n={last.n}: bound {last.lhs:.3g} vs ||A||^2 {last.rhs:.3g}")

stats = check_conjecture(n=500, trials=5, seed=0)
print(f"||[Z Z^T]|| / sqrt(2N) = {stats.mean:.4f}  (conjectured {stats.sharp:.4f}, proven {stats.loose:.1f})")
