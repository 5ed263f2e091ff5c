"""From the field to the cascade measure and the multifractal walk.

The measure integrates exp(omega); its second moment grows like tau^2 with a
prefactor above one, and the walk is a Brownian motion run on the measure's
clock.
"""

import numpy as np

from logcascade import CascadeParams, TimeGrid, build_measure, build_mrw, exact_moment2, zeta
from logcascade.gaussian_field import sample_path, sample_paths

lam2 = 0.5
n = 2048
params = CascadeParams(lambda2=lam2, cutoff=1.0 / n)
grid = TimeGrid(0.0, 1.0 / n, n)

m1 = np.exp(sample_paths("nonstationary", grid, params, reps=500, seed=2)).sum(axis=1) / n
se = np.std(m1 ** 2, ddof=1) / np.sqrt(m1.size)
print(f"E[M(1)^2]  Monte-Carlo {np.mean(m1 ** 2):.3f} +/- {se:.3f}   "
      f"quadrature {exact_moment2(1.0, lam2):.3f}")

measure = build_measure(sample_path("nonstationary", grid, params, seed=3))
walk = build_mrw(measure, seed=4)
print(f"one path: M(1) = {measure.cumulative[-1]:.3f}, X(1) = {walk.values[-1]:.3f}")

q = np.array([1, 2, 3, 4])
print("scaling exponents zeta(q):", np.round(zeta(q, lam2), 3))
