"""
Signal and noise eigenvalues of the similarity matrix
=====================================================

For the cycle model the expected similarity matrix T_1 has exactly three
nonzero eigenvalues, growing like n^2.  The sampled S_1 adds a noise floor
that grows only like n, close to (3 + sqrt 8) p (1-p) m n.  The gap between
eigenvalue 3 and eigenvalue 4 therefore widens with n.

Writes ``spectra.csv`` and ``spectra.svg`` to the working directory.
"""

from npsroles import experiments as ex

rows = ex.spectra_rows([0.6, 0.75], [5, 10, 20, 30], k=1, policy="explicit:0", seed=0, trials=3)

print(f"{'p':>5} {'n':>4} {'lam3(S)':>10} {'lam3(T)':>10} {'lam4(S)':>9} {'estimate':>9}")
for r in rows:
    print(f"{r['p']:5.2f} {r['n']:4d} {r['S3']:10.1f} {r['T3']:10.1f} {r['S_noise']:9.1f} {r['noise_est']:9.1f}")

ex.write_rows("spectra.csv", rows)
# the chart is rebuilt from the CSV alone
with open("spectra.svg", "w") as fh:
    fh.write(ex.spectra_svg(ex.read_rows("spectra.csv"), "S_1 and T_1"))
