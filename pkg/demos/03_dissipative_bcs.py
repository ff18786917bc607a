"""
Mean-field BCS with pair loss
=============================

Start from the self-consistent ground state and switch on a complex
coupling U + i gamma/2.  The mean-field O_N drifts even though the exact
dynamics of a weakly symmetric model keeps it fixed.
"""
import numpy as np

from opengauge.meanfield import coupling_for_gap, evolve_bcs, init_bcs, make_grid, mf_ON

grid = make_grid(512, cutoff=3.0, mu=0.5)
delta0 = 0.05
U = coupling_for_gap(delta0, grid)
print("U for Delta0 = %.2f: %.4f" % (delta0, U))

state = init_bcs(delta0, grid.mu, grid)
print("initial O_N:", mf_ON(state))

closed = evolve_bcs(state, U, 0.0, 0.1, 20.0)
print("gamma = 0: |Delta| spread %.1e" % np.ptp(np.abs(closed.delta)))

lossy = evolve_bcs(state, U, 0.1 * U, 0.1, 100.0)
for t in [0, 10, 20, 40, 60, 80, 100]:
    i = int(round(t / 0.1))
    print(f"t={t:5.1f}  |Delta|={abs(lossy.delta[i]):.5f}  N={lossy.N[i]:.5f}  O_N={lossy.ON[i]:.6f}")

steps = np.diff(lossy.ON)
if np.any(steps < 0):
    t_bad = lossy.times[1:][steps < 0][0]
    print("O_N first decreases at t = %.1f (%d decreasing steps)" % (t_bad, np.sum(steps < 0)))
else:
    print("O_N non-decreasing over the whole run")
