"""How the reconstruction error falls as the noise level shrinks.

A 16 x 16 map on [1, 1000] ms is small enough to sweep four noise levels
quickly.  The uniform-penalty rules tie every weight to the current misfit,
so weaker noise means weaker regularization and a closer reconstruction.
"""

import numpy as np

from l1ll2 import SeparableOperator, SolverOptions, erel2, linear_time_grid, log_time_grid, solve
from l1ll2.kernels import relax_grid, vec
from l1ll2.phantoms import make_phantom, preset_peaks, simulate

g = relax_grid(1.0, 1000.0, 16)
F = make_phantom(preset_peaks("2pks", width=0.3), (g, g))
op = SeparableOperator.ir_cpmg(log_time_grid(0.5, 5000.0, 32), g, linear_time_grid(0.5, 256), g)

print(f"{'delta':>8s}{'L1LL2':>10s}{'A_L1':>10s}{'eps2/delta^2':>14s}")
for delta in (1e-1, 1e-2, 1e-3, 1e-4):
    med = {}
    for method in ("L1LL2", "A_L1"):
        errs, ratio = [], []
        for seed in range(5):
            rep = solve(op, simulate(F, op, delta, seed=seed).s, SolverOptions(method=method))
            errs.append(erel2(rep.f_final, vec(F)))
            ratio.append(rep.final_penalties.eps2 / delta**2)
        med[method] = np.median(errs)
        if method == "L1LL2":
            r = np.median(ratio)
    print(f"{delta:8.0e}{med['L1LL2']:10.4f}{med['A_L1']:10.4f}{r:14.2f}")
