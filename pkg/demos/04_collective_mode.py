"""
Sound mode and loss-induced damping
===================================

Root-find the zeroth-order vertex condition for the sound velocity, then
run the first-order extraction of the damping and compare with the
closed-form diffusion coefficient.
"""
import numpy as np

from opengauge.collective import diffusion_analytic, diffusion_numeric, solve_sound_velocity
from opengauge.meanfield import make_grid
from opengauge.response import density_from_greens

grid = make_grid(512, 3.0, 0.5)
delta = 0.05

sv = solve_sound_velocity(np.linspace(0.001, 0.05, 10), delta, grid)
for q, r in zip(sv.q, sv.q0):
    print(f"q = {q:.4f}   q0 = {r:.6f}   q0/q = {r / q:.5f}")
print("v_s fit %.5f, v_F/sqrt(3) = %.5f" % (sv.v_s, sv.v_s_analytic))

n = density_from_greens(delta, grid.mu, grid)
gamma = 0.01 * delta / n
fit = diffusion_numeric([0.002, 0.004, 0.008], gamma, n, delta, grid)
print("\nf(q):", fit.f_q)
print("f(q) * q:", fit.f_q.real * fit.q)
print("D fit %.4f, closed form %.4f" % (fit.D_fit, diffusion_analytic(gamma, n, 1.0, delta)))

# f(q) scales like 1/q rather than q^2 here, so the fitted D has neither the
# size nor the sign of the closed form.
