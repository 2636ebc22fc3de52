"""Shared oracles for the test suite.

The gradient oracle is central finite differences, kept deliberately
independent of the autodiff engine: it perturbs raw numpy buffers and calls a
scalar-valued function twice per coordinate.
"""

import numpy as np
import pytest


def numeric_grad(fn, arrays, step=1e-5):
    """Central finite differences of ``fn(*arrays)`` w.r.t. each array.

    ``fn`` must return a plain float and must not mutate its inputs.
    """
    grads = []
    for k, base in enumerate(arrays):
        base = np.asarray(base, dtype=np.float64)
        grad = np.zeros_like(base)
        flat = base.ravel()
        gflat = grad.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            hi = fn(*arrays)
            flat[idx] = keep - step
            lo = fn(*arrays)
            flat[idx] = keep
            gflat[idx] = (hi - lo) / (2.0 * step)
        grads.append(grad)
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=2e-6):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def composite_loss(model, x, prior, weights, tau_edges, eps_fixed=None):
    """Soft-mode composite objective built from the library's pieces.

    ``eps_fixed`` freezes the residuals fed to the regeneration path at given
    values; the finite-difference oracle needs that because the model's
    regeneration path treats residuals as constants (stop-gradient), which a
    naive perturbation of the full forward pass cannot see.
    """
    from latentanm import autodiff as ad
    from latentanm import wae
    from latentanm.autodiff import Tensor
    from latentanm.dag import assemble_adjacency, edge_matrix, permutation_entropy, soft_permutation, sparsity_loss
    from latentanm.mechanisms import abduct, predict, regenerate

    z = model.autoencoder.encode(Tensor(x))
    pi_soft = soft_permutation(model.dag.perm_scores, model.dag.tau_perm)
    u_soft = edge_matrix(model.dag.edge_logits, tau_edges, hard=False)
    adjacency = assemble_adjacency(pi_soft, u_soft)
    z_hat = predict(z, adjacency, model.mechanisms)
    eps = abduct(z, z_hat)
    z_scm = regenerate(eps if eps_fixed is None else Tensor(eps_fixed), adjacency, model.mechanisms)
    components = {
        "recon": wae.reconstruction_loss(Tensor(x), model.autoencoder.decode(z), model.autoencoder.decode(z_scm), weights.lambda_scm),
        "indep": wae.mmd_loss(eps, prior, weights.kernel, weights.bandwidths),
        "sparse": sparsity_loss(u_soft, weights.sparsity_prior),
        "ent": permutation_entropy(pi_soft),
    }
    return wae.total_loss(components, weights), eps.data.copy()
