"""Deterministic autoencoder and the full training objective.

The encoder is a plain MLP (no sampling anywhere), so residuals abducted from
its output are exact functions of the input. The objective combines a
dual-path reconstruction (direct latents and structurally regenerated
latents), a residual-vs-prior maximum mean discrepancy with a multi-scale
kernel, the edge sparsity prior, and the permutation entropy penalty.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import MLP


class DivergenceError(RuntimeError):
    """Raised when a loss component or gradient stops being finite."""


@dataclass
class LossWeights:
    lambda_scm: float = 1.0
    beta: float = 10.0
    gamma1: float = 0.05
    gamma2: float = 1.0
    kernel: str = "rbf"
    bandwidths: list = field(default=None)
    sparsity_prior: float = 0.01

    def __post_init__(self):
        for name in ("lambda_scm", "beta", "gamma1", "gamma2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.kernel not in ("rbf", "imq"):
            raise ValueError(f"kernel must be 'rbf' or 'imq', got '{self.kernel}'")
        if self.bandwidths is not None:
            if len(self.bandwidths) == 0 or any(b <= 0 for b in self.bandwidths):
                raise ValueError("bandwidths must be a non-empty list of positive reals")


class Autoencoder:
    """Deterministic encoder/decoder pair of MLPs."""

    def __init__(self, x_dim, z_dim, enc_hidden, dec_hidden, activation, rng):
        self.x_dim = x_dim
        self.z_dim = z_dim
        self.encoder = MLP([x_dim, *enc_hidden, z_dim], activation, rng)
        self.decoder = MLP([z_dim, *dec_hidden, x_dim], activation, rng)

    def encode(self, x):
        x = ad.as_tensor(x)
        if x.data.shape[1] != self.x_dim:
            raise ValueError(f"encode: expected {self.x_dim} input columns, got {x.data.shape[1]}")
        return self.encoder(x)

    def decode(self, z):
        z = ad.as_tensor(z)
        if z.data.shape[1] != self.z_dim:
            raise ValueError(f"decode: expected {self.z_dim} latent columns, got {z.data.shape[1]}")
        return self.decoder(z)

    def encode_values(self, x):
        return self.encode(Tensor(np.asarray(x, dtype=np.float64))).data

    def decode_values(self, z):
        return self.decode(Tensor(np.asarray(z, dtype=np.float64))).data

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()


def reconstruction_loss(x, x_hat, x_hat_scm, lambda_scm):
    """Mean squared reconstruction error of both decoding paths.

    mean_batch ||x - x_hat||^2 + lambda_scm * mean_batch ||x - x_hat_scm||^2
    """
    x = ad.as_tensor(x)
    direct = ad.tensor_mean(ad.tensor_sum(ad.square(ad.sub(x, x_hat)), axis=1))
    if lambda_scm == 0.0:
        return direct
    regen = ad.tensor_mean(ad.tensor_sum(ad.square(ad.sub(x, x_hat_scm)), axis=1))
    return ad.add(direct, ad.mul(regen, lambda_scm))


def default_bandwidths(kernel, dim):
    """Multi-scale defaults: RBF widths around sqrt(dim/2), IMQ offsets around 2*dim."""
    if kernel == "rbf":
        base = np.sqrt(dim / 2.0)
        return [s * base for s in (0.25, 0.5, 1.0, 2.0, 4.0)]
    if kernel == "imq":
        base = 2.0 * dim
        return [s * base for s in (0.1, 0.5, 1.0, 2.0, 10.0)]
    raise ValueError(f"kernel must be 'rbf' or 'imq', got '{kernel}'")


def _pairwise_sq_dists(x, y):
    n, m = x.data.shape[0], y.data.shape[0]
    xx = ad.reshape(ad.tensor_sum(ad.square(x), axis=1), (n, 1))
    yy = ad.reshape(ad.tensor_sum(ad.square(y), axis=1), (1, m))
    cross = ad.matmul(x, ad.transpose(y))
    return ad.add(ad.add(xx, yy), ad.mul(cross, -2.0))


def _kernel_matrix(sq_dists, kernel, bandwidths):
    total = None
    for b in bandwidths:
        if kernel == "rbf":
            term = ad.exp(ad.mul(sq_dists, -1.0 / (2.0 * b * b)))
        else:  # imq
            term = ad.div(Tensor(np.full(sq_dists.shape, b)), ad.add(sq_dists, b))
        total = term if total is None else ad.add(total, term)
    return total


def mmd_loss(sample, prior_sample, kernel="rbf", bandwidths=None):
    """Unbiased squared maximum mean discrepancy between two samples.

    Within-sample kernel means exclude the diagonal, so the estimate is
    centered at zero when both samples share a distribution. Arguments are
    ordered canonically before evaluation, making the estimator symmetric to
    the last bit.
    """
    sample = ad.as_tensor(sample)
    prior = ad.as_tensor(prior_sample)
    if (sample.data.shape, sample.data.tobytes()) > (prior.data.shape, prior.data.tobytes()):
        sample, prior = prior, sample
    n, m = sample.data.shape[0], prior.data.shape[0]
    if n < 2 or m < 2:
        raise ValueError(f"mmd_loss: needs at least 2 samples per side, got {n} and {m}")
    if bandwidths is None:
        bandwidths = default_bandwidths(kernel, sample.data.shape[1])

    k_xx = _kernel_matrix(_pairwise_sq_dists(sample, sample), kernel, bandwidths)
    k_yy = _kernel_matrix(_pairwise_sq_dists(prior, prior), kernel, bandwidths)
    k_xy = _kernel_matrix(_pairwise_sq_dists(sample, prior), kernel, bandwidths)

    off_x = Tensor(1.0 - np.eye(n))
    off_y = Tensor(1.0 - np.eye(m))
    within_x = ad.mul(ad.tensor_sum(ad.mul(k_xx, off_x)), 1.0 / (n * (n - 1)))
    within_y = ad.mul(ad.tensor_sum(ad.mul(k_yy, off_y)), 1.0 / (m * (m - 1)))
    cross = ad.mul(ad.tensor_mean(k_xy), -2.0)
    return ad.add(ad.add(within_x, within_y), cross)


def total_loss(components, weights, gamma1_effective=None):
    """Weighted sum of the four loss components.

    ``components`` maps recon/indep/sparse/ent to scalar tensors. A non-finite
    component aborts with the offending name.
    """
    gamma1 = weights.gamma1 if gamma1_effective is None else gamma1_effective
    for name in ("recon", "indep", "sparse", "ent"):
        value = float(components[name].data)
        if not np.isfinite(value):
            raise DivergenceError(f"loss component '{name}' is not finite ({value})")
    weighted = ad.add(
        components["recon"],
        ad.add(
            ad.mul(components["indep"], weights.beta),
            ad.add(ad.mul(components["sparse"], gamma1), ad.mul(components["ent"], weights.gamma2)),
        ),
    )
    return weighted
