"""Why the fitted integral scale follows the observation window.

On a single long path of the aging model, the magnitude covariance is
estimated inside windows of length delta_t and fitted with a log decay.  The
recovered scale grows in proportion to delta_t, near exp(-3/2) * delta_t.
"""

import math

from logcascade.experiments import reproduce_fig8

res = reproduce_fig8(seed=3)
scan = res.tables["scan"]
print(" delta_t    T_hat   T_hat/delta_t")
for d, t in zip(scan["delta_t"], scan["T"]):
    print(f"{d:8.0f} {t:8.1f}   {t / d:12.3f}")
s = res.summary
print(f"\nlog-log slope {s['slope']:.3f}, mean ln(T_hat/delta_t) {s['mean_offset']:.3f} "
      f"(reference -1.5, i.e. T_hat = {math.exp(-1.5):.3f} * delta_t)")
