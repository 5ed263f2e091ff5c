"""The aging log-volatility field.

Sample many paths of the non-stationary field and compare the empirical
variance with lambda2 * (1 + ln t): the variance keeps growing with the age
of the process instead of saturating at an integral scale.
"""

from logcascade import CascadeParams, TimeGrid
from logcascade.gaussian_field import sample_paths, variance_nonstationary

params = CascadeParams(lambda2=1.0, cutoff=1.0)
grid = TimeGrid(t0=1.0, dt=1.0, n=500)
paths = sample_paths("nonstationary", grid, params, reps=500, seed=1)

print("    t   empirical mean   empirical var   lambda2 (1 + ln t)")
for t in (1, 10, 40, 150, 500):
    col = paths[:, t - 1]
    print(f"{t:5d}   {col.mean():14.3f}   {col.var(ddof=1):13.3f}   "
          f"{variance_nonstationary(t, params):18.3f}")
print("\nthe mean sits at minus half the variance, so exp(omega) has unit mean")
