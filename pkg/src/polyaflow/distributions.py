"""Beta, diagonal-Gaussian, and logistic distributions with closed-form KLs.

The Beta sampler draws two Gamma variates by the Marsaglia-Tsang
squeeze method (with the standard U^(1/a) boost below shape 1) and
normalizes, so the only randomness primitives consumed from numpy's
Generator are uniforms and normals.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import special

_EPS = 1e-12


def _sample_gamma(shape, rng, size):
    """Gamma(shape, 1) draws via Marsaglia & Tsang (2000), vectorized.

    For shape < 1 the boost Gamma(a) = Gamma(a + 1) * U^(1/a) is applied.
    """
    shape = float(shape)
    if shape <= 0.0:
        raise ValueError("gamma shape must be positive")
    boost_needed = shape < 1.0
    a = shape + 1.0 if boost_needed else shape
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.empty(size, dtype=np.float64)
    todo = np.ones(size, dtype=bool)
    while todo.any():
        n = int(todo.sum())
        x = rng.standard_normal(n)
        v = (1.0 + c * x) ** 3
        u = rng.random(n)
        ok = v > 0.0
        x2 = x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            squeeze = u < 1.0 - 0.0331 * x2 * x2
            slower = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(np.where(ok, v, 1.0)))
        accept = ok & (squeeze | slower)
        idx = np.flatnonzero(todo)[accept]
        out[idx] = d * v[accept]
        todo[idx] = False
    if boost_needed:
        u = rng.random(size)
        out = out * u ** (1.0 / shape)
    return out


@dataclass(frozen=True)
class BetaDist:
    """Beta(alpha, beta) on (0, 1)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("Beta parameters must be strictly positive")

    def log_pdf(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any((y <= 0.0) | (y >= 1.0)):
            raise ValueError("Beta log_pdf requires y in the open interval (0, 1)")
        out = (
            (self.alpha - 1.0) * np.log(y)
            + (self.beta - 1.0) * np.log1p(-y)
            - special.log_beta(self.alpha, self.beta)
        )
        return float(out) if np.ndim(y) == 0 else out

    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    def variance(self):
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))

    def sample(self, rng, size=None):
        """Draw via two Gamma variates; output clamped to [1e-12, 1 - 1e-12]."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        g1 = _sample_gamma(self.alpha, rng, n)
        g2 = _sample_gamma(self.beta, rng, n)
        y = g1 / (g1 + g2)
        y = np.clip(y, _EPS, 1.0 - _EPS)
        if scalar:
            return float(y[0])
        return y.reshape(size)


def beta_kl(p, q):
    """KL(Beta(a,b) || Beta(c,d)) in closed form."""
    a, b = p.alpha, p.beta
    c, d = q.alpha, q.beta
    psi_ab = special.digamma(a + b)
    return (
        special.log_beta(c, d)
        - special.log_beta(a, b)
        + (a - c) * (special.digamma(a) - psi_ab)
        + (b - d) * (special.digamma(b) - psi_ab)
    )


def beta_kl_vars(alpha_p, beta_p, alpha_q, beta_q):
    """Tape version of beta_kl, elementwise over Var arrays of matching shape.

    The second pair may be Vars or plain arrays/floats (lifted as
    constants); gradients flow through the first pair.
    """
    tape = alpha_p.tape
    aq = alpha_q if isinstance(alpha_q, ad.Var) else tape.leaf(alpha_q)
    bq = beta_q if isinstance(beta_q, ad.Var) else tape.leaf(beta_q)
    log_beta_p = ad.lgamma(alpha_p) + ad.lgamma(beta_p) - ad.lgamma(alpha_p + beta_p)
    log_beta_q = ad.lgamma(aq) + ad.lgamma(bq) - ad.lgamma(aq + bq)
    psi_ab = ad.digamma(alpha_p + beta_p)
    return (
        log_beta_q
        - log_beta_p
        + (alpha_p - aq) * (ad.digamma(alpha_p) - psi_ab)
        + (beta_p - bq) * (ad.digamma(beta_p) - psi_ab)
    )


@dataclass(frozen=True)
class DiagGaussian:
    """Gaussian with diagonal covariance; mean and variance are (D,) arrays."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(
            self, "variance", np.atleast_1d(np.asarray(self.variance, dtype=np.float64))
        )
        if self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance must have matching shapes")
        if np.any(self.variance <= 0.0):
            raise ValueError("variance must be strictly positive")

    @property
    def dims(self):
        return self.mean.shape[0]

    def log_pdf(self, x):
        """Log density; x is (D,) or (N, D), returns float or (N,)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        z2 = (pts - self.mean) ** 2 / self.variance
        out = -0.5 * (z2.sum(axis=1) + np.log(2.0 * np.pi * self.variance).sum())
        return float(out[0]) if single else out

    def sample(self, rng, n):
        return self.mean + np.sqrt(self.variance) * rng.standard_normal((n, self.dims))


def gaussian_kl(p, q):
    """KL between diagonal Gaussians of equal dimension, in closed form."""
    if p.dims != q.dims:
        raise ValueError("dimension mismatch")
    ratio = p.variance / q.variance
    gap = (q.mean - p.mean) ** 2 / q.variance
    return 0.5 * float(np.sum(np.log(q.variance) - np.log(p.variance) - 1.0 + ratio + gap))


@dataclass(frozen=True)
class LogisticDist:
    """Logistic(location, scale) on the real line."""

    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("scale must be strictly positive")

    def log_pdf(self, x):
        """Stable evaluation: -u - 2*softplus(-u) - log(s), u = (x - loc)/s."""
        x = np.asarray(x, dtype=np.float64)
        u = (x - self.location) / self.scale
        out = -u - 2.0 * special.softplus(-u) - np.log(self.scale)
        return float(out) if np.ndim(x) == 0 else out

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.location + self.scale * (np.log(u) - np.log1p(-u))
