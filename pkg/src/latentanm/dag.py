"""Differentiable DAG parameterization.

A directed acyclic graph over n nodes is factored into a permutation (the
topological order, relaxed through a differentiable sort of per-node scores)
and a strictly upper-triangular gate matrix of edge probabilities. Hardening
either factor keeps gradients alive through a straight-through estimator, and
any hard (permutation, gates) pair composes into an acyclic adjacency by
construction.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

_LOG_EPS = 1e-12


@dataclass
class DagParams:
    """Trainable graph parameters: ordering scores and edge gate logits.

    Entries of ``edge_logits`` on or below the diagonal are never read.
    """

    perm_scores: Tensor
    edge_logits: Tensor
    tau_perm: float = 1.0
    tau_edges: float = 5.0

    def __post_init__(self):
        if self.tau_perm <= 0 or self.tau_edges <= 0:
            raise ValueError("temperatures must be strictly positive")

    @property
    def n(self):
        return self.perm_scores.data.shape[0]

    @classmethod
    def init(cls, n, rng, tau_perm=1.0, tau_edges=5.0, logit_bias=0.5):
        # positive gate bias: start from a dense graph so sparsity warmup has
        # edges to prune rather than none to grow
        scores = Tensor(rng.normal(0.0, 0.5, size=n))
        logits = Tensor(logit_bias + 0.01 * rng.normal(size=(n, n)))
        return cls(perm_scores=scores, edge_logits=logits, tau_perm=tau_perm, tau_edges=tau_edges)

    def parameters(self):
        return [self.perm_scores, self.edge_logits]


def soft_permutation(perm_scores, tau_perm):
    """Row-stochastic relaxation of the permutation that sorts scores descending.

    Row i is softmax_j(-|sorted_desc(scores)[i] - scores[j]| / tau).
    """
    if tau_perm <= 0:
        raise ValueError(f"tau_perm must be positive, got {tau_perm}")
    scores = ad.as_tensor(perm_scores)
    n = scores.data.shape[0]
    order = np.argsort(-scores.data, kind="stable")
    sorted_scores = ad.getitem(scores, order)
    diff = ad.sub(ad.reshape(sorted_scores, (n, 1)), ad.reshape(scores, (1, n)))
    return ad.softmax_temp(ad.neg(ad.absolute(diff)), tau_perm, axis=1)


def harden_permutation(pi_soft):
    """Resolve a row-stochastic matrix into an exact permutation matrix.

    Rows claim columns greedily in order of descending row maximum; a row whose
    argmax column is taken falls back to its best unclaimed column. Argmax ties
    break toward the lowest column index, so the outcome is deterministic even
    for degenerate inputs. The result is wrapped with a straight-through
    estimator against the soft input.
    """
    pi_soft = ad.as_tensor(pi_soft)
    p = pi_soft.data
    n = p.shape[0]
    hard = np.zeros_like(p)
    taken = np.zeros(n, dtype=bool)
    for row in np.argsort(-p.max(axis=1), kind="stable"):
        masked = np.where(taken, -np.inf, p[row])
        col = int(np.argmax(masked))
        hard[row, col] = 1.0
        taken[col] = True
    return ad.straight_through(hard, pi_soft)


def edge_matrix(edge_logits, tau_edges, hard=False):
    """Strictly upper-triangular gate matrix sigmoid(logits / tau).

    With ``hard`` the gates are thresholded at 0.5 (straight-through backward).
    """
    if tau_edges <= 0:
        raise ValueError(f"tau_edges must be positive, got {tau_edges}")
    logits = ad.as_tensor(edge_logits)
    n = logits.data.shape[0]
    mask = np.triu(np.ones((n, n)), k=1)
    soft = ad.mul(ad.sigmoid(ad.mul(logits, 1.0 / tau_edges)), Tensor(mask))
    if not hard:
        return soft
    return ad.straight_through((soft.data > 0.5).astype(np.float64), soft)


def assemble_adjacency(pi, u):
    """Compose permutation and upper-triangular gates into an adjacency matrix."""
    pi, u = ad.as_tensor(pi), ad.as_tensor(u)
    if pi.shape != u.shape:
        raise ValueError(f"assemble_adjacency: shapes {pi.shape} and {u.shape} differ")
    return ad.matmul(ad.matmul(ad.transpose(pi), u), pi)


def sparsity_loss(u_soft, prior_p):
    """Mean binary cross entropy of upper-triangular gates against a flat prior."""
    if not 0.0 < prior_p < 1.0:
        raise ValueError(f"sparsity prior must lie in (0, 1), got {prior_p}")
    u_soft = ad.as_tensor(u_soft)
    n = u_soft.data.shape[0]
    upper = ad.clip(ad.getitem(u_soft, np.triu_indices(n, 1)), _LOG_EPS, 1.0 - _LOG_EPS)
    bce = ad.neg(ad.add(ad.mul(ad.log(upper), prior_p), ad.mul(ad.log(ad.sub(1.0, upper)), 1.0 - prior_p)))
    return ad.tensor_mean(bce)


def permutation_entropy(pi_soft):
    """Mean Shannon entropy of the soft permutation's rows (nats)."""
    pi_soft = ad.as_tensor(pi_soft)
    plogp = ad.mul(pi_soft, ad.log(ad.clip(pi_soft, _LOG_EPS, 1.0)))
    return ad.neg(ad.tensor_mean(ad.tensor_sum(plogp, axis=1)))


# ---------------------------------------------------------------------------
# plain-array graph utilities


def hard_adjacency(params, tau_edges=None):
    """Non-differentiable binary adjacency implied by the current parameters."""
    tau = params.tau_edges if tau_edges is None else tau_edges
    pi = harden_permutation(soft_permutation(params.perm_scores, params.tau_perm))
    u = edge_matrix(params.edge_logits, tau, hard=True)
    a = assemble_adjacency(pi, u)
    return np.rint(a.data).astype(int)


def topological_order(adjacency):
    """Kahn's algorithm; raises ValueError if the graph has a cycle."""
    adj = np.asarray(adjacency)
    n = adj.shape[0]
    indegree = (adj != 0).sum(axis=0).astype(int)
    frontier = sorted(i for i in range(n) if indegree[i] == 0)
    order = []
    while frontier:
        v = frontier.pop(0)
        order.append(v)
        for w in range(n):
            if adj[v, w]:
                indegree[w] -= 1
                if indegree[w] == 0:
                    frontier.append(w)
    if len(order) != n:
        raise ValueError("graph contains a cycle")
    return order


def has_cycle(adjacency):
    try:
        topological_order(adjacency)
        return False
    except ValueError:
        return True


def export_graph(params, tau_edges=None):
    """JSON-ready dict: node order, binary adjacency, soft edge probabilities."""
    tau = params.tau_edges if tau_edges is None else tau_edges
    pi_hard = harden_permutation(soft_permutation(params.perm_scores, params.tau_perm)).data
    u_soft = edge_matrix(params.edge_logits, tau, hard=False).data
    adjacency = hard_adjacency(params, tau)
    # row k of the hard permutation marks which node sits at position k
    node_order = [int(np.argmax(pi_hard[k])) for k in range(params.n)]
    soft_adjacency = pi_hard.T @ u_soft @ pi_hard
    return {
        "node_order": node_order,
        "adjacency": adjacency.tolist(),
        "edge_probabilities": soft_adjacency.tolist(),
    }
