"""Training loop, Adam optimizer, and evaluation metrics.

One optimization step records the whole loss on a fresh tape, runs the
reverse sweep, and applies Adam in place to the live parameter arrays.
Flow and base ("prior") parameters take separate learning rates, selected
by key prefix.  With `conjugate=True` and a tree base, the tree's alphas
are refreshed by the closed-form Beta-Binomial update (exponentially
blended across batches) instead of gradient steps.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import special
from .baselines import FixedPrior, LearnableHistogram
from .distributions import beta_kl_vars
from .flow import DensityEstimator, build_flow
from .polya_tree import PolyaTreeModel

PRIORS = ("vpt", "gaussian", "logistic", "histogram")


@dataclass
class TrainConfig:
    """Everything that determines a training run except the data and the rng."""

    prior: str = "vpt"
    levels: int = 3
    partition_mode: str = "dyadic"
    bins: int = 0                 # histogram cells; 0 means 2**levels
    flow_layers: int = 1
    hidden: tuple = (50, 50)
    activation: str = "tanh"
    epochs: int = 1000
    batch_size: int = 256
    lr_flow: float = 1e-2
    lr_prior: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 100
    seed: int = 0
    conjugate: bool = False
    conjugate_blend: float = 0.9
    kl_weight: float = 0.0
    smooth_base: bool = False
    polyak: bool = False
    polyak_decay: float = 0.999
    lr_decay: bool = False
    lr_decay_factor: float = 0.5
    lr_decay_patience: int = 20

    def __post_init__(self):
        if self.prior not in PRIORS:
            raise ValueError(f"prior must be one of {PRIORS}")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class TrainReport:
    """Per-epoch history plus final held-out metrics."""

    train_nll: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    best_epoch: int = -1
    final: dict = field(default_factory=dict)

    def substantive_fields(self):
        """Everything that must reproduce bit-for-bit under a fixed seed."""
        return {
            "train_nll": self.train_nll,
            "val_nll": self.val_nll,
            "best_epoch": self.best_epoch,
            "final": self.final,
        }


class Adam:
    """Per-key Adam with bias correction; updates arrays in place."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads, lr_of):
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for key, p in params.items():
            g = grads[key]
            m = self.m.setdefault(key, np.zeros_like(p))
            v = self.v.setdefault(key, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            step = (m / correct1) / (np.sqrt(v / correct2) + self.eps)
            p -= lr_of(key) * step


def build_estimator(config, dims, rng):
    """Assemble the flow + base pair a config describes."""
    if config.prior == "vpt":
        base = PolyaTreeModel.uniform(config.levels, dims, config.partition_mode)
    elif config.prior == "histogram":
        base = LearnableHistogram.uniform(config.bins or 2**config.levels, dims)
    else:
        base = FixedPrior(config.prior, dims)
    unit_cube = config.prior in ("vpt", "histogram")
    flow = build_flow(
        dims,
        n_coupling=config.flow_layers,
        hidden=config.hidden,
        activation=config.activation,
        scaling=True,
        sigmoid=unit_cube,
        rng=rng,
    )
    smooth = config.smooth_base and config.prior == "vpt"
    return DensityEstimator(flow, base, smooth_base=smooth)


def _snapshot(params):
    return {k: v.copy() for k, v in params.items()}


def _load(params, saved):
    for k, v in params.items():
        v[...] = saved[k]


def train(config, dataset, rng=None, estimator=None):
    """Fit an estimator on dataset.train, early-stopping on dataset.val.

    Returns (estimator, TrainReport).  The run is a pure function of
    (config, dataset, seed): reports and parameters reproduce bitwise.
    A non-finite loss aborts with a RuntimeError naming epoch and batch.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    init_rng = np.random.default_rng(int(rng.integers(0, 2**63)))
    shuffle_rng = np.random.default_rng(int(rng.integers(0, 2**63)))

    x_train = dataset.train
    x_val = dataset.val
    if x_train.shape[0] == 0:
        raise ValueError("training split is empty")
    if estimator is None:
        estimator = build_estimator(config, dataset.dims, init_rng)

    conjugate = config.conjugate and isinstance(estimator.base, PolyaTreeModel)
    optimizer = Adam(config.adam_beta1, config.adam_beta2, config.adam_eps)
    lr_scale = 1.0

    def lr_of(key):
        base_lr = config.lr_flow if key.startswith("flow/") else config.lr_prior
        return base_lr * lr_scale

    report = TrainReport()
    n_train = x_train.shape[0]
    best_val = np.inf
    best_saved = _snapshot(estimator.parameter_arrays())
    since_best = 0
    since_decay = 0
    ema = _snapshot(estimator.parameter_arrays()) if config.polyak else None

    for epoch in range(config.epochs):
        tic = time.perf_counter()
        perm = shuffle_rng.permutation(n_train)
        weighted_nll = 0.0
        for b, start in enumerate(range(0, n_train, config.batch_size)):
            xb = x_train[perm[start:start + config.batch_size]]
            try:
                loss, data_nll = _step(estimator, optimizer, lr_of, xb, config, conjugate,
                                       n_train)
            except FloatingPointError as err:
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {b}: {err}"
                ) from err
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {b}")
            weighted_nll += data_nll * xb.shape[0]
            if ema is not None:
                for k, v in estimator.parameter_arrays().items():
                    ema[k] = config.polyak_decay * ema[k] + (1.0 - config.polyak_decay) * v
        report.train_nll.append(weighted_nll / n_train)

        if ema is not None:
            current = _snapshot(estimator.parameter_arrays())
            _load(estimator.parameter_arrays(), ema)
        val_nll = (-avg_log_likelihood(estimator, x_val)
                   if x_val.shape[0] else report.train_nll[-1])
        if ema is not None:
            deploy = _snapshot(estimator.parameter_arrays())
            _load(estimator.parameter_arrays(), current)
        else:
            deploy = None
        report.val_nll.append(val_nll)
        report.epoch_seconds.append(time.perf_counter() - tic)

        if val_nll < best_val:
            best_val = val_nll
            report.best_epoch = epoch
            best_saved = deploy if deploy is not None else _snapshot(
                estimator.parameter_arrays()
            )
            since_best = 0
            since_decay = 0
        else:
            since_best += 1
            since_decay += 1
            if config.lr_decay and since_decay >= config.lr_decay_patience:
                lr_scale *= config.lr_decay_factor
                since_decay = 0
            if since_best >= config.patience:
                break

    _load(estimator.parameter_arrays(), best_saved)
    report.final = {"val_nll": best_val}
    if dataset.test.shape[0]:
        report.final["test_nll"] = -avg_log_likelihood(estimator, dataset.test)
        report.final["test_bpd"] = bits_per_dim(estimator, dataset.test)
    return estimator, report


def _step(estimator, optimizer, lr_of, xb, config, conjugate, n_train):
    """One gradient (and optionally conjugate) update; returns (loss, data NLL)."""
    tape = ad.Tape()
    params = estimator.parameter_arrays()
    pvars = {k: tape.leaf(v) for k, v in params.items()}
    ll = estimator.log_likelihood_vars(tape, pvars, xb)
    loss = -ll.mean()
    data_nll = float(loss.value)
    if config.kl_weight > 0.0 and isinstance(estimator.base, PolyaTreeModel):
        al = ad.softplus(pvars["prior/raw_left"])
        ar = ad.softplus(pvars["prior/raw_right"])
        loss = loss + config.kl_weight * beta_kl_vars(al, ar, 1.0, 1.0).sum()
    ad.backward(loss)
    grads = {k: pvars[k].grad for k in params}
    if conjugate:
        updated = {k: v for k, v in params.items() if k.startswith("flow/")}
        optimizer.step(updated, grads, lr_of)
        base = estimator.base
        z = estimator.latent(xb)
        scale = n_train / xb.shape[0]
        refreshed = base.conjugate_update(z, prior_alphas=1.0, count_scale=scale)
        blend = config.conjugate_blend
        old_l, old_r = base.alphas()
        new_l, new_r = refreshed.alphas()
        base.raw_left[...] = special.inv_softplus(blend * old_l + (1.0 - blend) * new_l)
        base.raw_right[...] = special.inv_softplus(blend * old_r + (1.0 - blend) * new_r)
    else:
        optimizer.step(params, grads, lr_of)
    return float(loss.value), data_nll


# -- metrics ----------------------------------------------------------------


def avg_log_likelihood(estimator, x):
    """Mean log model density over a split, in nats per point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty (N, D) array")
    return float(estimator.log_likelihood(x).mean())


def bits_per_dim(estimator, x):
    """-avg_log_likelihood converted to base-2 bits per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    return -avg_log_likelihood(estimator, x) / (x.shape[1] * np.log(2.0))


def sse_calibration(estimator, x, rng, n_samples=10000):
    """Mean squared standardized residual of x under the model's own moments.

    Moments come from `n_samples` fresh model draws; a model whose samples
    have zero spread in any dimension cannot be standardized against.
    Well-calibrated models land near 1.
    """
    samples = estimator.sample(n_samples, rng)
    mu = samples.mean(axis=0)
    sd = samples.std(axis=0)
    if not np.all(np.isfinite(sd)) or np.any(sd <= 0.0):
        raise RuntimeError("degenerate model samples: zero spread in some dimension")
    z = (np.asarray(x, dtype=np.float64) - mu) / sd
    return float(np.mean(z * z))


def density_grid(estimator, bounds, resolution):
    """Model density on a 2-D lattice: (resolution^2, 3) columns x, y, density.

    `bounds` is (lo, hi) applied to both axes or ((xlo, xhi), (ylo, yhi)).
    Rows iterate x in the outer loop and y in the inner loop.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape == (2,):
        bounds = np.stack([bounds, bounds])
    if bounds.shape != (2, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError("bounds must be (lo, hi) or ((xlo, xhi), (ylo, yhi))")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    xs = np.linspace(bounds[0, 0], bounds[0, 1], resolution)
    ys = np.linspace(bounds[1, 0], bounds[1, 1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.reshape(-1), gy.reshape(-1)])
    dens = np.exp(estimator.log_likelihood(pts))
    return np.column_stack([pts, dens])
