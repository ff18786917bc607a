"""
Vertex identity and gauge invariance
====================================

Check the retarded vertex identity against its closed form on random
points, and the transverse structure of the response current.
"""
import numpy as np

from opengauge.response import TAU2, gauge_sweep, greens, keldysh_action, wt_sweep, wt_vertex_lhs

rng = np.random.default_rng(1)
res = wt_sweep(1000, rng)
print("vertex identity: max residual %.2e over %d samples" % (res.max(), res.size))

# the q -> 0 limit stays finite
delta = 0.3
print("q = 0 limit:\n", wt_vertex_lhs(0.2, 0.0, 0.1, 0.1, delta, 0.05))
print("2 i Delta tau2:\n", 2j * delta * TAU2)

shift, trans = gauge_sweep(1000, rng)
print("gauge shift change %.1e, longitudinal part %.1e" % (shift, trans))

# lesser function from inverting the contour action
w, e, d, g = 0.3, -0.2, 0.4, 0.1
M = np.linalg.inv(keldysh_action(w, e, d, g))
print("max |G< - inverse block| = %.1e" % np.abs(M[:2, 2:] - greens(w, e, d, g, "<")).max())
