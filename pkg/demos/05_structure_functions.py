"""Structure functions of the walk and a concavity check of the exponents.

The walk is Brownian motion on the measure's clock, so its q-th moment
scales with the measure exponent evaluated at q/2.
"""

import numpy as np

from logcascade import CascadeParams, TimeGrid, build_measure, build_mrw, concavity_check
from logcascade import structure_functions, zeta
from logcascade.gaussian_field import sample_path_blocks

lam2 = 0.05
params = CascadeParams(lambda2=lam2, cutoff=1.0)
grid = TimeGrid(0.0, 1.0, 2 ** 15)
walk = build_mrw(build_measure(sample_path_blocks("nonstationary", grid, params, seed=5)),
                 seed=6)

q = [1.0, 2.0, 3.0, 4.0]
sf = structure_functions(walk, q, [2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
print("  q   zeta_hat   zeta(q/2)")
for qi, z, zt in zip(q, sf.zeta_hat, zeta(np.array(q) / 2, lam2)):
    print(f"{qi:3.0f} {z:10.3f} {zt:9.3f}")
print("kurtosis by lag:", np.round(sf.kurtosis, 2))
print("exponents concave within errors:", concavity_check(sf).concave)
