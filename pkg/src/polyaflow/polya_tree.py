"""Tree-structured base density on (0,1]^D with Beta-distributed branch splits.

Each dimension carries an independent depth-L binary tree.  Every internal
node holds a Beta(alpha_left, alpha_right) posterior over the probability
mass routed to its left child; partitions are dyadic by default or use
learnable split proportions (one per level, or one per node).  Intervals
are half-open on the left, (lower, upper], and a point sitting exactly on
a split belongs to the left child.

Internal nodes are indexed breadth-first: the root is 0 and the node
reached by branch bits e_1..e_t sits at index 2^t - 1 + int(e_1..e_t as
binary).  A depth-L tree has 2^L - 1 internal nodes and K = 2^L leaves
per dimension.

Parameters are stored as unconstrained floats: alphas through a softplus,
split proportions through a sigmoid.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import special
from .distributions import BetaDist

PARTITION_MODES = ("dyadic", "per-level", "per-node")

_UNIT_RAW = float(special.inv_softplus(1.0))   # raw value giving alpha = 1


@lru_cache(maxsize=None)
def _tables(levels):
    """Static index tables for a depth-`levels` tree.

    Returns a dict with, for K = 2^levels leaves and n = 2^levels - 1
    internal nodes:
      node_of_level : (levels, K) int, BFS node index visited at each depth
      bit_of_level  : (levels, K) int, branch bit taken at each depth
      m_left/m_right: (K, n) float incidence, leaf visits node going left/right
      lev_left/lev_right: (K, levels) float, leaf goes left/right at depth j
    """
    K = 1 << levels
    n = K - 1
    leaves = np.arange(K)
    node_of_level = np.empty((levels, K), dtype=np.int64)
    bit_of_level = np.empty((levels, K), dtype=np.int64)
    for j in range(levels):
        prefix = leaves >> (levels - j)
        node_of_level[j] = (1 << j) - 1 + prefix
        bit_of_level[j] = (leaves >> (levels - j - 1)) & 1
    m_left = np.zeros((K, n))
    m_right = np.zeros((K, n))
    lev_left = np.zeros((K, levels))
    lev_right = np.zeros((K, levels))
    for j in range(levels):
        m_left[leaves, node_of_level[j]] += bit_of_level[j] == 0
        m_right[leaves, node_of_level[j]] += bit_of_level[j] == 1
        lev_left[leaves, j] = bit_of_level[j] == 0
        lev_right[leaves, j] = bit_of_level[j] == 1
    for arr in (node_of_level, bit_of_level, m_left, m_right, lev_left, lev_right):
        arr.setflags(write=False)
    return {
        "node_of_level": node_of_level,
        "bit_of_level": bit_of_level,
        "m_left": m_left,
        "m_right": m_right,
        "lev_left": lev_left,
        "lev_right": lev_right,
    }


def param_count(levels, dims, partition_mode="dyadic"):
    """Number of scalar parameters of a model with this structure."""
    if partition_mode not in PARTITION_MODES:
        raise ValueError(f"unknown partition mode: {partition_mode}")
    n = (1 << levels) - 1
    count = 2 * n * dims
    if partition_mode == "per-level":
        count += levels * dims
    elif partition_mode == "per-node":
        count += n * dims
    return count


def intervals_from_splits(levels, betas, partition_mode="dyadic"):
    """Leaf boundaries (K+1,) for one dimension from split proportions.

    `betas` is ignored for dyadic trees, per-level expects (levels,), and
    per-node expects (2^levels - 1,) in breadth-first node order.
    """
    bounds = np.array([0.0, 1.0])
    for j in range(levels):
        if partition_mode == "dyadic":
            props = np.full(1 << j, 0.5)
        elif partition_mode == "per-level":
            props = np.full(1 << j, float(np.asarray(betas, dtype=np.float64)[j]))
        elif partition_mode == "per-node":
            start = (1 << j) - 1
            props = np.asarray(betas, dtype=np.float64)[start: start + (1 << j)]
        else:
            raise ValueError(f"unknown partition mode: {partition_mode}")
        lows, highs = bounds[:-1], bounds[1:]
        mids = lows + (highs - lows) * props
        bounds = np.empty(2 * lows.size + 1)
        bounds[0::2] = np.append(lows, highs[-1])
        bounds[1::2] = mids
    return bounds


@dataclass(frozen=True)
class LeafAssignment:
    """Where a scalar lands in one dimension's partition."""

    path: tuple          # branch bits e_1..e_L (0 = left)
    leaf_index: int      # int(path) in breadth-first leaf order
    interval: tuple      # (lower, upper], the leaf's cell


@dataclass
class PolyaTreeModel:
    """Per-dimension Beta-branch trees; see the module docstring for layout.

    raw_left/raw_right are (dims, 2^levels - 1) unconstrained floats with
    alpha = softplus(raw).  split_raw is None for dyadic partitions,
    (dims, levels) for per-level, (dims, 2^levels - 1) for per-node, with
    split proportion beta = sigmoid(split_raw).
    """

    levels: int
    dims: int
    raw_left: np.ndarray
    raw_right: np.ndarray
    partition_mode: str = "dyadic"
    split_raw: np.ndarray = None

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.partition_mode not in PARTITION_MODES:
            raise ValueError(f"unknown partition mode: {self.partition_mode}")
        n = self.n_nodes
        expect = (self.dims, n)
        self.raw_left = np.asarray(self.raw_left, dtype=np.float64)
        self.raw_right = np.asarray(self.raw_right, dtype=np.float64)
        if self.raw_left.shape != expect or self.raw_right.shape != expect:
            raise ValueError(f"raw alpha arrays must have shape {expect}")
        if self.partition_mode == "dyadic":
            if self.split_raw is not None:
                raise ValueError("dyadic trees take no split parameters")
        else:
            want = (self.dims, self.levels if self.partition_mode == "per-level" else n)
            self.split_raw = np.asarray(self.split_raw, dtype=np.float64)
            if self.split_raw.shape != want:
                raise ValueError(f"split_raw must have shape {want}")

    # -- construction ---------------------------------------------------

    @classmethod
    def uniform(cls, levels, dims, partition_mode="dyadic"):
        """The flat prior: every alpha = 1, every split proportion 1/2."""
        n = (1 << levels) - 1
        raw = np.full((dims, n), _UNIT_RAW)
        split = None
        if partition_mode == "per-level":
            split = np.zeros((dims, levels))
        elif partition_mode == "per-node":
            split = np.zeros((dims, n))
        return cls(levels, dims, raw.copy(), raw.copy(), partition_mode, split)

    # -- basic views ----------------------------------------------------

    @property
    def n_nodes(self):
        return (1 << self.levels) - 1

    @property
    def n_leaves(self):
        return 1 << self.levels

    def alphas(self):
        """(alpha_left, alpha_right), each (dims, n_nodes)."""
        return special.softplus(self.raw_left), special.softplus(self.raw_right)

    def split_betas(self):
        """Split proportions as a dense (dims, n_nodes) array, any mode."""
        n = self.n_nodes
        if self.partition_mode == "dyadic":
            return np.full((self.dims, n), 0.5)
        props = special.sigmoid(self.split_raw)
        if self.partition_mode == "per-node":
            return props
        out = np.empty((self.dims, n))
        for j in range(self.levels):
            start = (1 << j) - 1
            out[:, start: start + (1 << j)] = props[:, j][:, None]
        return out

    def parameter_arrays(self):
        """Live references to the trainable arrays, keyed by name."""
        params = {"raw_left": self.raw_left, "raw_right": self.raw_right}
        if self.split_raw is not None:
            params["split_raw"] = self.split_raw
        return params

    def param_count(self):
        return param_count(self.levels, self.dims, self.partition_mode)

    def intervals(self, dim):
        """List of (lower, upper] leaf intervals for one dimension."""
        if not 0 <= dim < self.dims:
            raise ValueError("dim out of range")
        if self.partition_mode == "dyadic":
            betas = None
        else:
            betas = special.sigmoid(self.split_raw[dim])
        bounds = intervals_from_splits(self.levels, betas, self.partition_mode)
        return [(float(a), float(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def leaf_boundaries(self):
        """(dims, K+1) array of leaf boundaries per dimension."""
        return np.stack([
            intervals_from_splits(
                self.levels,
                None if self.partition_mode == "dyadic"
                else special.sigmoid(self.split_raw[d]),
                self.partition_mode,
            )
            for d in range(self.dims)
        ])

    # -- routing ----------------------------------------------------------

    def _validate_points(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dims:
            raise ValueError(f"points must be (N, {self.dims})")
        if x.size and (np.any(x <= 0.0) or np.any(x > 1.0)):
            raise ValueError("points must lie in the half-open unit cube (0, 1]^D")
        return x

    def route(self, x):
        """Leaf index per point and dimension: (N, D) ints in [0, 2^L)."""
        x = self._validate_points(x)
        n_pts = x.shape[0]
        betas = self.split_betas()
        d_idx = np.broadcast_to(np.arange(self.dims), (n_pts, self.dims))
        lo = np.zeros((n_pts, self.dims))
        hi = np.ones((n_pts, self.dims))
        prefix = np.zeros((n_pts, self.dims), dtype=np.int64)
        for j in range(self.levels):
            node = (1 << j) - 1 + prefix
            prop = betas[d_idx, node]
            split = lo + (hi - lo) * prop
            left = x <= split
            hi = np.where(left, split, hi)
            lo = np.where(left, lo, split)
            prefix = 2 * prefix + (~left)
        return prefix

    def leaf_of(self, dim, x):
        """Full assignment (path bits, leaf index, interval) of scalar x in one dimension."""
        if not 0 <= dim < self.dims:
            raise ValueError("dim out of range")
        x = float(x)
        if not 0.0 < x <= 1.0:
            raise ValueError("x must lie in (0, 1]")
        betas = self.split_betas()[dim]
        lo, hi, prefix, bits = 0.0, 1.0, 0, []
        for j in range(self.levels):
            node = (1 << j) - 1 + prefix
            split = lo + (hi - lo) * betas[node]
            if x <= split:
                hi = split
                bits.append(0)
            else:
                lo = split
                bits.append(1)
            prefix = 2 * prefix + bits[-1]
        return LeafAssignment(tuple(bits), prefix, (lo, hi))

    # -- densities on the tape -------------------------------------------

    def _node_log_ys_vars(self, tape, pvars, y_mode, rng):
        """(ln Y, ln(1-Y)) as (D, n) Vars; posterior-mean mode differentiates."""
        if y_mode == "posterior-mean":
            al = ad.softplus(pvars["raw_left"])
            ar = ad.softplus(pvars["raw_right"])
            log_total = ad.log(al + ar)
            return ad.log(al) - log_total, ad.log(ar) - log_total
        if y_mode == "sampled":
            if rng is None:
                raise ValueError("sampled mode needs an rng")
            y = self.sample_branch_probabilities(rng)
            return tape.leaf(np.log(y)), tape.leaf(np.log1p(-y))
        raise ValueError(f"unknown y_mode: {y_mode}")

    def _log_nu_vars(self, tape, pvars):
        """(D, K) Var of log leaf lengths under the current partition."""
        t = _tables(self.levels)
        if self.partition_mode == "dyadic":
            return tape.leaf(np.full((self.dims, self.n_leaves), -self.levels * np.log(2.0)))
        split = pvars["split_raw"]
        log_b = ad.log_sigmoid(split)
        log_1b = ad.log_sigmoid(-split)
        if self.partition_mode == "per-level":
            return ad.matmul(log_b, t["lev_left"].T) + ad.matmul(log_1b, t["lev_right"].T)
        return ad.matmul(log_b, t["m_left"].T) + ad.matmul(log_1b, t["m_right"].T)

    def leaf_log_densities_vars(self, tape, pvars, y_mode="posterior-mean", rng=None):
        """(D, K) Var: log density of each leaf cell (mass minus log length)."""
        t = _tables(self.levels)
        log_y, log_1y = self._node_log_ys_vars(tape, pvars, y_mode, rng)
        log_mass = ad.matmul(log_y, t["m_left"].T) + ad.matmul(log_1y, t["m_right"].T)
        return log_mass - self._log_nu_vars(tape, pvars)

    def log_density_vars(self, tape, pvars, x, y_mode="posterior-mean", rng=None,
                         smooth=False):
        """Per-point log density as an (N,) Var.

        `x` may be a plain array or a Var (e.g. the output of a flow); in
        the latter case `smooth=True` additionally gives the coordinates a
        gradient by interpolating leaf log densities between leaf centers.
        """
        x_values = x.value if isinstance(x, ad.Var) else x
        x_values = self._validate_points(x_values)
        leaf = self.route(x_values)
        g = self.leaf_log_densities_vars(tape, pvars, y_mode, rng)
        K = self.n_leaves
        flat = np.arange(self.dims)[None, :] * K + leaf
        if not smooth:
            return ad.take(g, flat).sum(axis=1)

        bounds = self.leaf_boundaries()
        centers = 0.5 * (bounds[:, :-1] + bounds[:, 1:])      # (D, K)
        c_here = centers[np.arange(self.dims)[None, :], leaf]
        upper_side = x_values >= c_here
        lo_leaf = np.where(upper_side, leaf, np.maximum(leaf - 1, 0))
        hi_leaf = np.where(upper_side, np.minimum(leaf + 1, K - 1), leaf)
        d_idx = np.broadcast_to(np.arange(self.dims), leaf.shape)
        c_lo = centers[d_idx, lo_leaf]
        c_hi = centers[d_idx, hi_leaf]
        gap = c_hi - c_lo
        inv_gap = np.where(gap > 0.0, 1.0 / np.where(gap > 0.0, gap, 1.0), 0.0)
        g_lo = ad.take(g, d_idx * K + lo_leaf)
        g_hi = ad.take(g, d_idx * K + hi_leaf)
        if isinstance(x, ad.Var):
            w = (x - c_lo) * inv_gap
        else:
            w = tape.leaf((x_values - c_lo) * inv_gap)
        return (g_lo + w * (g_hi - g_lo)).sum(axis=1)

    def _pvars_on(self, tape):
        return {k: tape.leaf(v) for k, v in self.parameter_arrays().items()}

    def log_density(self, x, y_mode="posterior-mean", rng=None, smooth=False):
        """Numpy convenience wrapper around log_density_vars; returns (N,)."""
        tape = ad.Tape()
        out = self.log_density_vars(tape, self._pvars_on(tape), x, y_mode, rng, smooth)
        return out.value

    def log_joint_posterior_vars(self, tape, pvars, x, y_mode="posterior-mean", rng=None):
        """Scalar Var: data term plus Beta prior term (flat split prior adds zero).

        The data term is the sum of per-point log densities; the prior
        term is sum over nodes of (alpha_l - 1) ln Y + (alpha_r - 1) ln(1 - Y).
        With an empty batch only the prior term remains.
        """
        log_y, log_1y = self._node_log_ys_vars(tape, pvars, y_mode, rng)
        al = ad.softplus(pvars["raw_left"])
        ar = ad.softplus(pvars["raw_right"])
        prior = ((al - 1.0) * log_y + (ar - 1.0) * log_1y).sum()
        x_values = self._validate_points(x.value if isinstance(x, ad.Var) else x)
        if x_values.shape[0] == 0:
            return prior
        t = _tables(self.levels)
        log_mass = ad.matmul(log_y, t["m_left"].T) + ad.matmul(log_1y, t["m_right"].T)
        g = log_mass - self._log_nu_vars(tape, pvars)
        leaf = self.route(x_values)
        flat = np.arange(self.dims)[None, :] * self.n_leaves + leaf
        data = ad.take(g, flat).sum(axis=1).sum()
        return data + prior

    def log_joint_posterior(self, x, y_mode="posterior-mean", rng=None):
        tape = ad.Tape()
        out = self.log_joint_posterior_vars(tape, self._pvars_on(tape), x, y_mode, rng)
        return float(out.value)

    # -- conjugate updates, sampling, uncertainty -------------------------

    def branch_counts(self, x):
        """Left/right routing counts per node: two (D, n_nodes) int arrays."""
        leaf = self.route(x)
        t = _tables(self.levels)
        n = self.n_nodes
        counts_left = np.zeros((self.dims, n), dtype=np.int64)
        counts_right = np.zeros((self.dims, n), dtype=np.int64)
        d_idx = np.broadcast_to(np.arange(self.dims), leaf.shape)
        for j in range(self.levels):
            node = t["node_of_level"][j][leaf]
            bit = t["bit_of_level"][j][leaf]
            flat = d_idx * n + node
            np.add.at(counts_left.reshape(-1), flat[bit == 0], 1)
            np.add.at(counts_right.reshape(-1), flat[bit == 1], 1)
        return counts_left, counts_right

    def conjugate_update(self, x, prior_alphas=1.0, count_scale=1.0):
        """Closed-form Beta-Binomial refresh: alpha = prior + scale * counts.

        Returns a new model; the receiver is left untouched.  `prior_alphas`
        is a scalar or a pair of (D, n_nodes) arrays for the left/right
        prior pseudo-counts.
        """
        counts_left, counts_right = self.branch_counts(x)
        if np.isscalar(prior_alphas):
            prior_left = prior_right = float(prior_alphas)
        else:
            prior_left, prior_right = prior_alphas
        alpha_left = prior_left + count_scale * counts_left
        alpha_right = prior_right + count_scale * counts_right
        return replace(
            self,
            raw_left=special.inv_softplus(alpha_left),
            raw_right=special.inv_softplus(alpha_right),
            split_raw=None if self.split_raw is None else self.split_raw.copy(),
        )

    def sample_branch_probabilities(self, rng):
        """One Beta draw per node: a (D, n_nodes) random branching measure."""
        al, ar = self.alphas()
        out = np.empty_like(al)
        for d in range(self.dims):
            for i in range(self.n_nodes):
                out[d, i] = BetaDist(al[d, i], ar[d, i]).sample(rng)
        return out

    def sample_latent(self, n, rng, y_mode="posterior-mean"):
        """Alias used by estimators treating the tree as their base density."""
        return self.sample(n, rng, y_mode)

    def sample(self, n, rng, y_mode="posterior-mean"):
        """Draw n points: descend by Bernoulli(Y) branches, then uniform in the leaf."""
        if y_mode == "posterior-mean":
            al, ar = self.alphas()
            y = al / (al + ar)
        elif y_mode == "sampled":
            y = self.sample_branch_probabilities(rng)
        else:
            raise ValueError(f"unknown y_mode: {y_mode}")
        betas = self.split_betas()
        out = np.empty((n, self.dims))
        for d in range(self.dims):
            lo = np.zeros(n)
            hi = np.ones(n)
            prefix = np.zeros(n, dtype=np.int64)
            for j in range(self.levels):
                node = (1 << j) - 1 + prefix
                go_left = rng.random(n) < y[d, node]
                split = lo + (hi - lo) * betas[d, node]
                hi = np.where(go_left, split, hi)
                lo = np.where(go_left, lo, split)
                prefix = 2 * prefix + (~go_left)
            # uniform on the half-open cell (lo, hi]
            out[:, d] = hi - (hi - lo) * rng.random(n)
        return out

    def variance_map(self, depth=None):
        """Per-dimension mean Beta variance over the deepest internal nodes.

        A small value means the splits at the finest level are confidently
        pinned down; `depth` (1-based, default the deepest level) selects
        which level to average over.
        """
        depth = self.levels if depth is None else depth
        if not 1 <= depth <= self.levels:
            raise ValueError("depth out of range")
        start = (1 << (depth - 1)) - 1
        stop = (1 << depth) - 1
        al, ar = self.alphas()
        al = al[:, start:stop]
        ar = ar[:, start:stop]
        total = al + ar
        var = al * ar / (total * total * (total + 1.0))
        return var.mean(axis=1)
