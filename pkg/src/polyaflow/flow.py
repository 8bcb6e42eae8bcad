"""Volume-tracked invertible maps and the estimator that pairs them with a base density.

The transport is a stack of three layer kinds:

* additive coupling: half the coordinates pass through untouched and
  parameterize an MLP shift of the other half, so the Jacobian is unit
  triangular and the log-determinant is exactly zero;
* diagonal scaling: z = exp(log_scale) * x with log-determinant
  sum(log_scale);
* sigmoid squash: an elementwise logistic map onto (0, 1)^D used when the
  base density lives on the unit cube, with log-determinant
  sum(log sigmoid(u) + log sigmoid(-u)).

`forward` maps data space to the base space; `inverse` is exact and runs
in plain numpy.  Layer parameters initialize so the whole stack starts at
(scaled) identity: coupling output layers are zero, log scales are zero.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import special

_UNIT_EPS = 1e-6


@dataclass
class CouplingLayer:
    """Additive coupling: coordinates where mask is True drive a shift of the rest."""

    mask: np.ndarray                  # bool (D,)
    weights: list                     # [W0, b0, W1, b1, ...] dense MLP stack
    activation: str = "tanh"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if not self.mask.any() or self.mask.all():
            raise ValueError("coupling mask must pass some and shift some coordinates")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unsupported activation: {self.activation}")

    def net_apply(self, h):
        act = np.tanh if self.activation == "tanh" else lambda v: np.maximum(v, 0.0)
        n_dense = len(self.weights) // 2
        for i in range(n_dense):
            h = h @ self.weights[2 * i] + self.weights[2 * i + 1]
            if i < n_dense - 1:
                h = act(h)
        return h


@dataclass
class ScalingLayer:
    """Diagonal rescale z = exp(log_scale) * x."""

    log_scale: np.ndarray

    def __post_init__(self):
        self.log_scale = np.asarray(self.log_scale, dtype=np.float64)


@dataclass
class SigmoidLayer:
    """Parameter-free logistic squash onto (0, 1)^D."""


def _mask_matrices(mask):
    """Scatter/gather matrices for the masked (pass) and unmasked (shift) coords."""
    d = mask.size
    pass_cols = np.eye(d)[:, mask]
    shift_cols = np.eye(d)[:, ~mask]
    return pass_cols, shift_cols


@dataclass
class FlowModel:
    """Ordered stack of invertible layers over D-dimensional points."""

    dims: int
    layers: list = field(default_factory=list)

    def parameter_arrays(self):
        """Trainable arrays keyed 'c{i}_W{j}' / 'c{i}_b{j}' / 's{i}_log_scale'."""
        params = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, CouplingLayer):
                for j, w in enumerate(layer.weights):
                    tag = "W" if j % 2 == 0 else "b"
                    params[f"c{i}_{tag}{j // 2}"] = w
            elif isinstance(layer, ScalingLayer):
                params[f"s{i}_log_scale"] = layer.log_scale
        return params

    def forward_vars(self, tape, pvars, x):
        """Map a data batch to base space on the tape: returns (z Var, log_det Var).

        `x` may be an (N, D) array or an existing Var.  log_det is (N,).
        """
        z = x if isinstance(x, ad.Var) else tape.leaf(np.asarray(x, dtype=np.float64))
        n_pts = z.value.shape[0]
        log_det = tape.leaf(np.zeros(n_pts))
        for i, layer in enumerate(self.layers):
            try:
                if isinstance(layer, CouplingLayer):
                    pass_cols, shift_cols = _mask_matrices(layer.mask)
                    h = ad.matmul(z, pass_cols)
                    weights = [pvars[f"c{i}_{'W' if j % 2 == 0 else 'b'}{j // 2}"]
                               for j in range(len(layer.weights))]
                    shift = _apply_net_vars(weights, layer.activation, h)
                    z = z + ad.matmul(shift, shift_cols.T)
                elif isinstance(layer, ScalingLayer):
                    ls = pvars[f"s{i}_log_scale"]
                    z = z * ad.exp(ls)
                    log_det = log_det + ls.sum()
                elif isinstance(layer, SigmoidLayer):
                    log_det = log_det + (ad.log_sigmoid(z) + ad.log_sigmoid(-z)).sum(axis=1)
                    z = ad.sigmoid(z)
                else:
                    raise TypeError(f"unknown layer type: {type(layer).__name__}")
            except FloatingPointError as err:
                raise FloatingPointError(f"non-finite value in flow layer {i}") from err
        return z, log_det

    def forward(self, x):
        """Numpy wrapper: returns (z, log_det) arrays."""
        tape = ad.Tape()
        pvars = {k: tape.leaf(v) for k, v in self.parameter_arrays().items()}
        z, log_det = self.forward_vars(tape, pvars, x)
        return z.value, log_det.value

    def inverse(self, z):
        """Exact inverse of forward, in plain numpy."""
        x = np.array(z, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims:
            raise ValueError(f"points must be (N, {self.dims})")
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            if isinstance(layer, CouplingLayer):
                shift = layer.net_apply(x[:, layer.mask])
                x[:, ~layer.mask] -= shift
            elif isinstance(layer, ScalingLayer):
                x = x / np.exp(layer.log_scale)
            elif isinstance(layer, SigmoidLayer):
                if np.any(x <= 0.0) or np.any(x >= 1.0):
                    raise ValueError(
                        "sigmoid inverse requires values strictly inside (0, 1)"
                    )
                x = np.log(x) - np.log1p(-x)
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"non-finite value inverting flow layer {i}")
        return x

    @property
    def has_sigmoid(self):
        return any(isinstance(layer, SigmoidLayer) for layer in self.layers)


def _apply_net_vars(weights, activation, h):
    act = ad.tanh if activation == "tanh" else ad.relu
    n_dense = len(weights) // 2
    for i in range(n_dense):
        h = ad.matmul(h, weights[2 * i]) + weights[2 * i + 1]
        if i < n_dense - 1:
            h = act(h)
    return h


def build_flow(dims, n_coupling=1, hidden=(50, 50), activation="tanh",
               scaling=True, sigmoid=False, rng=None):
    """Assemble a standard stack: couplings, then scaling, then optional sigmoid.

    Coupling masks alternate between even and odd coordinates.  Hidden
    weights are Gaussian with 1/sqrt(fan_in) scale; each output layer is
    zero so the stack starts as the identity (before scaling/sigmoid).
    With dims == 1 there is nothing to couple and `n_coupling` is ignored.
    """
    rng = rng or np.random.default_rng(0)
    layers = []
    if dims >= 2:
        for i in range(n_coupling):
            mask = (np.arange(dims) % 2) == (i % 2)
            n_in = int(mask.sum())
            n_out = dims - n_in
            sizes = [n_in, *hidden, n_out]
            weights = []
            for a, b in zip(sizes[:-1], sizes[1:]):
                weights.append(rng.standard_normal((a, b)) / np.sqrt(a))
                weights.append(np.zeros(b))
            weights[-2] = np.zeros_like(weights[-2])   # zero output layer
            layers.append(CouplingLayer(mask, weights, activation))
    if scaling:
        layers.append(ScalingLayer(np.zeros(dims)))
    if sigmoid:
        layers.append(SigmoidLayer())
    return FlowModel(dims, layers)


@dataclass
class DensityEstimator:
    """A flow transport composed with a base density.

    The base must expose parameter_arrays(), log_density_vars(tape, pvars,
    z, ...), and sample_latent(n, rng) (names prefixed 'prior/'; flow
    parameters are prefixed 'flow/').  Bases supported on the unit cube
    should sit behind a flow whose last layer is the sigmoid squash; their
    inputs are clamped to [1e-6, 1 - 1e-6] before evaluation.
    """

    flow: FlowModel
    base: object
    smooth_base: bool = False

    def parameter_arrays(self):
        params = {f"flow/{k}": v for k, v in self.flow.parameter_arrays().items()}
        params.update({f"prior/{k}": v for k, v in self.base.parameter_arrays().items()})
        return params

    def _split_pvars(self, pvars):
        flow_vars = {k[5:]: v for k, v in pvars.items() if k.startswith("flow/")}
        base_vars = {k[6:]: v for k, v in pvars.items() if k.startswith("prior/")}
        return flow_vars, base_vars

    def log_likelihood_vars(self, tape, pvars, x, **base_kwargs):
        """(N,) Var of log model density at data points x."""
        flow_vars, base_vars = self._split_pvars(pvars)
        z, log_det = self.flow.forward_vars(tape, flow_vars, x)
        if self.flow.has_sigmoid:
            z = ad.clip(z, _UNIT_EPS, 1.0 - _UNIT_EPS)
        if self.smooth_base:
            base_kwargs = {**base_kwargs, "smooth": True}
        base_ll = self.base.log_density_vars(tape, base_vars, z, **base_kwargs)
        return base_ll + log_det

    def log_likelihood(self, x, **base_kwargs):
        """Numpy wrapper: (N,) array of log densities."""
        tape = ad.Tape()
        pvars = {k: tape.leaf(v) for k, v in self.parameter_arrays().items()}
        return self.log_likelihood_vars(tape, pvars, x, **base_kwargs).value

    def latent(self, x):
        """Base-space coordinates of data points (numpy)."""
        z, _ = self.flow.forward(x)
        if self.flow.has_sigmoid:
            z = np.clip(z, _UNIT_EPS, 1.0 - _UNIT_EPS)
        return z

    def sample(self, n, rng, **base_kwargs):
        """Draw from the model: sample the base, then invert the flow."""
        z = self.base.sample_latent(n, rng, **base_kwargs)
        if self.flow.has_sigmoid:
            z = np.clip(z, _UNIT_EPS, 1.0 - _UNIT_EPS)
        return self.flow.inverse(z)
