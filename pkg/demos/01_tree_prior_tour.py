"""
A tour of the tree-structured prior
===================================

Builds a small recursive-partition density model by hand, inspects its
partitions and leaf densities, then feeds it data through the exact
conjugate update and looks at how the posterior uncertainty shrinks.

Run from the repository root:  python3 demos/01_tree_prior_tour.py
"""

import numpy as np

from polyaflow.polya_tree import PolyaTreeModel, intervals_from_splits

np.set_printoptions(precision=4, suppress=True)

# ---------------------------------------------------------------------------
# 1. Partitions: where the splits land
# ---------------------------------------------------------------------------
# A depth-2 tree over (0, 1] with per-level split proportions 0.6 and 0.5.
# Level 1 cuts at 0.6; level 2 cuts each child at its own 50% mark.

bounds = intervals_from_splits(2, (0.6, 0.5), "per-level")
print("leaf boundaries for per-level splits (0.6, 0.5):", bounds)
print("so the four leaves are",
      ", ".join(f"({a:.2f}, {b:.2f}]" for a, b in zip(bounds[:-1], bounds[1:])))

# ---------------------------------------------------------------------------
# 2. A uniform tree is the uniform density
# ---------------------------------------------------------------------------

model = PolyaTreeModel.uniform(levels=3, dims=1)
x = np.linspace(0.05, 0.95, 7)[:, None]
print("\nuniform dyadic tree log densities (all zero):",
      model.log_density(x))

# ---------------------------------------------------------------------------
# 3. Leaf masses always sum to one, whatever the parameters
# ---------------------------------------------------------------------------

rng = np.random.default_rng(3)
model.raw_left += rng.normal(0.0, 1.0, model.raw_left.shape)
model.raw_right += rng.normal(0.0, 1.0, model.raw_right.shape)

widths = np.diff(model.leaf_boundaries()[0])
grid = 0.5 * (model.leaf_boundaries()[0][:-1] + model.leaf_boundaries()[0][1:])
masses = np.exp(model.log_density(grid[:, None])) * widths
print("\nrandomised tree leaf masses:", masses)
print("sum of masses:", masses.sum())

# ---------------------------------------------------------------------------
# 4. Conjugate updates: counts in, posterior out, no gradients involved
# ---------------------------------------------------------------------------
# Draw data bunched near 0.2 and fold it into the Beta branch parameters.

data = np.clip(rng.normal(0.2, 0.05, (500, 1)), 1e-6, 1.0)
posterior = PolyaTreeModel.uniform(3, 1).conjugate_update(data)
left, right = posterior.alphas()
print("\nposterior branch pseudo-counts after 500 points near x=0.2:")
print("  alpha_left :", left[0])
print("  alpha_right:", right[0])
print("posterior log density at 0.2 vs 0.8:",
      posterior.log_density(np.array([[0.2], [0.8]])))

# ---------------------------------------------------------------------------
# 5. Uncertainty: branch variance falls where the data piles up
# ---------------------------------------------------------------------------

before = PolyaTreeModel.uniform(3, 1).variance_map()
after = posterior.variance_map()
print("\nmean branch variance, prior vs posterior:",
      float(before.mean()), "->", float(after.mean()))
