"""
Misclassification error against graph size
==========================================

Mean misclassification error over repeated samples for clusters taken from
S_1 and from the ten-step approximation S_10, next to the curve 3/(10n+24).
For n >= 10 the error is almost always exactly zero, so small grids are
where the decay can be seen.

Writes ``fhat.csv`` and ``fhat.svg``.  Set NPS_THREADS to use more cores.
"""

from npsroles import experiments as ex
from npsroles.diagnostics import fit_fhat_constant
from npsroles.sbm import cycle_model

grid = [1, 2, 3, 4, 6, 8, 10]
rows = ex.fhat_rows(0.6, grid, trials=100, ks=(1, 10), policy="fig4-literal", seed=0)

for r in rows:
    print(f"n={r['n']:3d}  S_1 {r['fhat_k1']:.4f}  S_10 {r['fhat_k10']:.4f}  3/(10n+24) {r['overlay']:.4f}")

# smallest C with mean fhat <= C * (bound factor) on this grid
c = fit_fhat_constant(cycle_model(0.6), grid, [r["fhat_k1"] for r in rows])
print(f"fitted constant C = {c:.3g}")

ex.write_rows("fhat.csv", rows)
with open("fhat.svg", "w") as fh:
    fh.write(ex.fhat_svg(ex.read_rows("fhat.csv")))
