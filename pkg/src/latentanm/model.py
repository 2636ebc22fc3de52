"""The full causal autoencoder: encoder/decoder, DAG layer, and mechanisms.

One forward pass encodes a batch, hardens the graph (straight-through),
abducts residuals, regenerates latents along the graph, decodes both latent
versions, and reports every loss component.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import dag as dag_mod
from . import mechanisms as mech_mod
from . import wae
from .dag import DagParams
from .mechanisms import MechanismSet
from .wae import Autoencoder


@dataclass
class ModelConfig:
    x_dim: int = 10
    z_dim: int = 4
    enc_hidden: list = field(default_factory=lambda: [64, 64])
    dec_hidden: list = field(default_factory=lambda: [64, 64])
    activation: str = "silu"
    mech_hidden: int = 16
    mech_activation: str = "tanh"
    tau_perm: float = 1.0

    def validate(self):
        if self.x_dim < 1 or self.z_dim < 1:
            raise ValueError("x_dim and z_dim must be positive")
        if self.tau_perm <= 0:
            raise ValueError("tau_perm must be positive")


class CausalAutoencoder:
    def __init__(self, config, rng):
        config.validate()
        self.config = config
        self.autoencoder = Autoencoder(
            config.x_dim, config.z_dim, config.enc_hidden, config.dec_hidden, config.activation, rng
        )
        self.dag = DagParams.init(config.z_dim, rng, tau_perm=config.tau_perm)
        self.mechanisms = MechanismSet.init(config.z_dim, config.mech_hidden, config.mech_activation, rng)

    # -- parameter bookkeeping -------------------------------------------------

    def param_groups(self):
        """Disjoint, exhaustive trainable groups: main nets, edge gates, ordering scores."""
        return {
            "main": self.autoencoder.parameters() + self.mechanisms.parameters(),
            "edges": [self.dag.edge_logits],
            "perm": [self.dag.perm_scores],
        }

    def parameters(self):
        return [p for group in self.param_groups().values() for p in group]

    # -- forward ---------------------------------------------------------------

    def loss_components(self, x, prior_sample, weights, tau_edges=None, gamma1_effective=None, hard=True):
        """Run the full objective on one batch.

        Returns a dict with the four component tensors, the weighted ``total``
        tensor, and float snapshots for logging. ``hard`` switches the graph
        to straight-through discrete mode (training default); the soft mode
        exists for gradient checking, where the forward pass must be smooth.
        """
        tau = self.dag.tau_edges if tau_edges is None else tau_edges
        x = ad.as_tensor(x)
        z = self.autoencoder.encode(x)

        pi_soft = dag_mod.soft_permutation(self.dag.perm_scores, self.dag.tau_perm)
        pi = dag_mod.harden_permutation(pi_soft) if hard else pi_soft
        u_soft = dag_mod.edge_matrix(self.dag.edge_logits, tau, hard=False)
        u = dag_mod.edge_matrix(self.dag.edge_logits, tau, hard=True) if hard else u_soft
        adjacency = dag_mod.assemble_adjacency(pi, u)

        z_hat = mech_mod.predict(z, adjacency, self.mechanisms)
        eps_hat = mech_mod.abduct(z, z_hat)
        z_scm = mech_mod.regenerate(eps_hat, adjacency, self.mechanisms)

        x_hat = self.autoencoder.decode(z)
        x_hat_scm = self.autoencoder.decode(z_scm)

        components = {
            "recon": wae.reconstruction_loss(x, x_hat, x_hat_scm, weights.lambda_scm),
            "indep": wae.mmd_loss(eps_hat, prior_sample, weights.kernel, weights.bandwidths),
            "sparse": dag_mod.sparsity_loss(u_soft, weights.sparsity_prior),
            "ent": dag_mod.permutation_entropy(pi_soft),
        }
        components["total"] = wae.total_loss(components, weights, gamma1_effective)
        components["values"] = {name: float(components[name].data) for name in ("recon", "indep", "sparse", "ent", "total")}
        return components

    # -- inference helpers -------------------------------------------------------

    def encode_values(self, x):
        return self.autoencoder.encode_values(x)

    def hard_graph(self, tau_edges=None):
        return dag_mod.hard_adjacency(self.dag, tau_edges)

    def counterfactual_latents(self, z, interventions, tau_edges=None):
        return mech_mod.counterfactual(z, interventions, self.hard_graph(tau_edges), self.mechanisms)

    def counterfactual_observations(self, x, interventions, tau_edges=None):
        z = self.encode_values(x)
        z_cf = self.counterfactual_latents(z, interventions, tau_edges)
        return self.autoencoder.decode_values(z_cf)

    # -- serialization -----------------------------------------------------------

    def named_parameters(self):
        named = {}
        for group, params in self.param_groups().items():
            for k, p in enumerate(params):
                named[f"{group}.{k}"] = p
        return named

    def state_dict(self):
        return {
            "config": {
                "x_dim": self.config.x_dim,
                "z_dim": self.config.z_dim,
                "enc_hidden": list(self.config.enc_hidden),
                "dec_hidden": list(self.config.dec_hidden),
                "activation": self.config.activation,
                "mech_hidden": self.config.mech_hidden,
                "mech_activation": self.config.mech_activation,
                "tau_perm": self.config.tau_perm,
            },
            "params": {name: pack_array(p.data) for name, p in self.named_parameters().items()},
            "tau_edges": self.dag.tau_edges,
        }

    def load_state_dict(self, state):
        named = self.named_parameters()
        if set(named) != set(state["params"]):
            raise ValueError("checkpoint parameters do not match this model's layout")
        for name, packed in state["params"].items():
            value = unpack_array(packed)
            if value.shape != named[name].data.shape:
                raise ValueError(f"checkpoint shape mismatch for '{name}'")
            named[name].data = value
        self.dag.tau_edges = float(state.get("tau_edges", self.dag.tau_edges))

    def snapshot(self):
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def restore(self, snapshot):
        for name, p in self.named_parameters().items():
            p.data = snapshot[name].copy()


def pack_array(arr):
    arr = np.asarray(arr)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def unpack_array(packed):
    return np.asarray(packed["data"], dtype=np.float64).reshape(packed["shape"])


def model_from_state(state, rng=None):
    cfg = ModelConfig(**state["config"])
    model = CausalAutoencoder(cfg, rng if rng is not None else np.random.default_rng(0))
    model.load_state_dict(state)
    return model
