"""Per-node additive-noise mechanisms over a latent vector.

Each node i owns an MLP f_i that reads the full latent vector gated by column
i of the adjacency matrix. Abduction recovers the exogenous residual of every
node; regeneration rebuilds the latent vector from residuals by traversing the
graph in topological order; counterfactuals follow abduction, action (hard
assignment of intervened nodes), and prediction of downstream nodes.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dag import topological_order
from .nn import MLP


@dataclass
class MechanismSet:
    """n mechanism networks, one per latent node; each maps R^n -> R."""

    mlps: list
    activation: str
    hidden_dim: int
    n: int = field(init=False)

    def __post_init__(self):
        self.n = len(self.mlps)

    @classmethod
    def init(cls, n, hidden_dim, activation, rng):
        if activation not in ("tanh", "silu", "gelu"):
            raise ValueError(f"mechanism activation must be smooth (tanh/silu/gelu), got '{activation}'")
        mlps = [MLP([n, hidden_dim, hidden_dim, 1], activation, rng) for _ in range(n)]
        return cls(mlps=mlps, activation=activation, hidden_dim=hidden_dim)

    def parameters(self):
        return [p for mlp in self.mlps for p in mlp.parameters()]


def predict(z, adjacency, mechanisms):
    """Predicted value of each node from its gated parents: column i is f_i(z * A[:, i]).

    A root node (all-zero column) yields a constant column, the mechanism's
    response to the zero vector.
    """
    z = ad.as_tensor(z)
    adjacency = ad.as_tensor(adjacency)
    n = mechanisms.n
    if z.data.ndim != 2 or z.data.shape[1] != n:
        raise ValueError(f"predict: latent batch must be (N, {n}), got {z.shape}")
    if adjacency.data.shape != (n, n):
        raise ValueError(f"predict: adjacency must be ({n}, {n}), got {adjacency.shape}")
    columns = []
    for i in range(n):
        gate = ad.getitem(adjacency, (slice(None), i))
        columns.append(mechanisms.mlps[i](ad.mul(z, gate)))
    return ad.concat(columns, axis=1)


def abduct(z, z_hat):
    """Exogenous residuals: z - z_hat, elementwise."""
    z, z_hat = ad.as_tensor(z), ad.as_tensor(z_hat)
    if z.shape != z_hat.shape:
        raise ValueError(f"abduct: shapes {z.shape} and {z_hat.shape} differ")
    return ad.sub(z, z_hat)


def regenerate(eps_hat, adjacency, mechanisms):
    """Rebuild the latent vector from residuals along the graph's topological order.

    Residual gradients are detached: the forward value reproduces the encoded
    latents exactly when the residuals were abducted with the same mechanisms
    and graph, while the backward pass credits the mechanism and structure
    parameters rather than cancelling against the abduction path.
    """
    eps_hat = ad.as_tensor(eps_hat)
    adjacency = ad.as_tensor(adjacency)
    n = mechanisms.n
    pattern = (adjacency.data > 0.5).astype(int)
    order = topological_order(pattern)
    n_rows = eps_hat.data.shape[0]
    eps_const = eps_hat.data  # detached by construction: wrapped as fresh constants below
    columns = [None] * n
    zero_col = Tensor(np.zeros((n_rows, 1)))
    for i in order:
        parents_so_far = ad.concat([columns[j] if columns[j] is not None else zero_col for j in range(n)], axis=1)
        gate = ad.getitem(adjacency, (slice(None), i))
        predicted = mechanisms.mlps[i](ad.mul(parents_so_far, gate))
        columns[i] = ad.add(predicted, Tensor(eps_const[:, i : i + 1]))
    return ad.concat(columns, axis=1)


def _validate_interventions(interventions, n):
    pairs = list(interventions.items()) if isinstance(interventions, dict) else list(interventions)
    seen = set()
    for index, _ in pairs:
        if not 0 <= index < n:
            raise ValueError(f"intervention index {index} out of range for {n} nodes")
        if index in seen:
            raise ValueError(f"duplicate intervention on node {index}")
        seen.add(index)
    return pairs


def _descendants_of(pattern, sources):
    n = pattern.shape[0]
    reached = set()
    frontier = list(sources)
    while frontier:
        v = frontier.pop()
        for w in range(n):
            if pattern[v, w] and w not in reached:
                reached.add(w)
                frontier.append(w)
    return reached


def counterfactual(z, interventions, adjacency, mechanisms):
    """Three-step counterfactual: abduct residuals, assign do-values, predict descendants.

    ``z`` is an (N, n) array of factual latents; ``interventions`` maps node
    index to the assigned constant. Nodes with no directed path from any
    intervened node keep their factual values bit for bit.
    """
    z = np.asarray(z, dtype=np.float64)
    n = mechanisms.n
    pattern = (np.asarray(adjacency, dtype=np.float64) > 0.5).astype(int)
    pairs = _validate_interventions(interventions, n)
    order = topological_order(pattern)

    z_hat = predict(Tensor(z), Tensor(pattern.astype(np.float64)), mechanisms).data
    eps_hat = z - z_hat

    intervened = {index: value for index, value in pairs}
    downstream = _descendants_of(pattern, intervened.keys())
    z_cf = z.copy()
    for i in order:
        if i in intervened:
            z_cf[:, i] = intervened[i]
        elif i in downstream:
            gated = z_cf * pattern[:, i]
            z_cf[:, i] = mechanisms.mlps[i].forward_values(gated)[:, 0] + eps_hat[:, i]
        # otherwise: untouched by the intervention, keep the factual value
    return z_cf
