"""
The no-bias condition and the curse of adaptivity
=================================================

With K equivalent blocks the efficient centring Psi_n and its block version
Psi_hat_K differ by a bias term. When the weight a is as smooth as the
truth this gap vanishes as n grows; when a is much rougher (a cusp with
exponent 0.2) it stops shrinking.
"""

# %%
import math

import numpy as np

from treebvm.approx import centering_estimators, equivalent_blocks_labels, kn_fixed, no_bias_value
from treebvm.dataset import SimulationTruth, make_grid_design, make_weight, truth_values

# %%
def median_gap(n, family, gamma, reps=100):
    x = make_grid_design(n)
    f0 = truth_values(x, "flat_half", 1.0)
    w = make_weight(x, family, gamma)
    part = equivalent_blocks_labels(x, kn_fixed(n, 1.0))
    rng = np.random.default_rng(n)
    gaps = []
    for _ in range(reps):
        t = SimulationTruth(f0, rng.standard_normal(n), "flat_half", 1.0)
        hat, full = centering_estimators(part, t, w)
        gaps.append(math.sqrt(n) * abs(full - hat))
    return float(np.median(gaps)), no_bias_value(part, t, w)


# %%
print("    n    K   linear: gap  no-bias   cusp(0.2): gap  no-bias")
for n in (2**8, 2**10, 2**12, 2**14):
    g1, b1 = median_gap(n, "linear", 1.0)
    g2, b2 = median_gap(n, "cusp", 0.2)
    print(f"{n:6d} {kn_fixed(n, 1.0):3d}   {g1:.4f}  {b1:+.4f}      {g2:.4f}  {b2:+.4f}")
