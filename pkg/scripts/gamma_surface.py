"""Scan the 1324 construction over (a, c) and report the optimum."""
import numpy as np

from permflag.constructions import eval_gamma_1324, optimize_gamma_1324

value, a, c = optimize_gamma_1324()
print(f"optimum {value:.12f} at a = {a:.9f}, c = {c:.9f}")
for aa in np.linspace(0.08, 0.15, 8):
    row = [eval_gamma_1324(aa, cc) if 1 - cc - 2 * aa > 0 else float("nan")
           for cc in np.linspace(0.3, 0.48, 7)]
    print(f"a={aa:.3f} " + " ".join(f"{v:.6f}" for v in row))
