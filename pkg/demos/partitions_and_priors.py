"""
Partitions, diameters and tree priors
=====================================

A tree partition splits the design points by axis-aligned rules placed at
observed coordinate values. This walk-through builds k-d trees on a grid,
measures their diameters, and draws random partitions from the two
Galton-Watson priors.
"""

# %%
import numpy as np

from treebvm.dataset import check_design_regularity, make_grid_design
from treebvm.partition import build_kd_tree, diameter, equivalent_blocks, is_n_regular, threshold_dn
from treebvm.priors import GaltonWatsonPrior, gw_expected_leaves, sample_gw_tree

# %%
# k-d trees halve every cell at its median, cycling through coordinates.
# On a 32 x 32 grid the total diameter shrinks by about sqrt(2) per level.
x = make_grid_design(1024, 2)
for depth in range(1, 6):
    part = build_kd_tree(x, depth)
    print(f"depth {depth}: K={part.K:5d}  diam={diameter(part).total:.4f}")

# %%
# Equivalent blocks in one dimension: K consecutive groups of nearly equal size.
x1 = make_grid_design(1000)
blocks = equivalent_blocks(x1, 7)
print("block sizes:", blocks.counts)
print("diameter:", round(diameter(blocks).total, 4))

# %%
# A partition is called n-regular when its diameter is below d_n.
n = 1000
print("d_n =", round(threshold_dn(1.0, n, 1), 4))
for K in (2, 8, 32):
    print(K, "blocks regular:", is_n_regular(equivalent_blocks(x1, K), 1.0, n))

# %%
# The grid itself passes the design-regularity check at every k-d depth.
verdict = check_design_regularity(x, max_depth_s=5, M=2.0)
print("regular design:", verdict.regular)

# %%
# Galton-Watson draws. The chipman variant splits with probability
# 0.95/(1+depth)**2; the geometric variant uses alpha**depth and always
# splits the root.
rng = np.random.default_rng(0)
for prior in (GaltonWatsonPrior("chipman", 0.95, 2.0), GaltonWatsonPrior("geometric", 0.5)):
    ks = [sample_gw_tree(prior, x, rng, 8).K for _ in range(2000)]
    print(f"{prior.variant:9s} mean leaves {np.mean(ks):.3f}  (recursion: {gw_expected_leaves(prior, 8):.3f})")
