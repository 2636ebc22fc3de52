"""Training loop: per-group Adam, edge-temperature annealing, sparsity warmup.

The three parameter groups (functional nets, edge gates, ordering scores) get
separate learning rates; edge temperature decays geometrically over the first
part of training; the sparsity weight is held at zero until warmup completes.
Everything is driven by explicit numpy generators so a (config, seed) pair
reproduces history bit for bit, including across checkpoint resume.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .model import pack_array, unpack_array, model_from_state
from .wae import DivergenceError


@dataclass
class TrainConfig:
    lr_main: float = 0.001
    lr_edges: float = 0.005
    lr_perm: float = 0.01
    tau_edges_start: float = 5.0
    tau_edges_end: float = 0.5
    anneal_frac: float = 0.5
    warmup_epochs: int = 10
    sparsity_delay: float = 0.2
    max_epochs: int = 1000
    patience: int = 30
    batch_size: int = 64
    val_frac: float = 0.1
    seed: int = 0

    def validate(self):
        if min(self.lr_main, self.lr_edges, self.lr_perm) < 0:
            raise ValueError("learning rates must be non-negative")
        if not self.tau_edges_start >= self.tau_edges_end > 0:
            raise ValueError("edge temperature must satisfy start >= end > 0")
        if not 0 <= self.warmup_epochs < self.max_epochs:
            raise ValueError("warmup_epochs must lie in [0, max_epochs)")
        if not 0.0 <= self.sparsity_delay <= 1.0:
            raise ValueError("sparsity_delay is a fraction of max_epochs")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (the MMD term needs pairs)")
        if not 0.0 < self.val_frac < 1.0:
            raise ValueError("val_frac must lie in (0, 1)")


def effective_warmup(config):
    """Epochs with the sparsity weight pinned at zero: warmup plus the delay fraction."""
    return config.warmup_epochs + config.sparsity_delay * config.max_epochs


def schedule(epoch, config, gamma1):
    """Edge temperature and effective sparsity weight for this epoch.

    The temperature interpolates geometrically from start to end over the
    anneal horizon and holds there; gamma1 is exactly zero before warmup ends.
    """
    if not 0 <= epoch < config.max_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.max_epochs})")
    horizon = max(1, int(round(config.anneal_frac * config.max_epochs)))
    frac = min(epoch, horizon) / horizon
    tau = config.tau_edges_start * (config.tau_edges_end / config.tau_edges_start) ** frac
    gamma1_eff = 0.0 if epoch < effective_warmup(config) else gamma1
    return tau, gamma1_eff


class Adam:
    """Adam with one learning rate per named parameter group."""

    def __init__(self, groups, beta1=0.9, beta2=0.999, eps=1e-8):
        # groups: {name: (params, lr)}
        self.groups = groups
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.moments = {
            name: [(np.zeros_like(p.data), np.zeros_like(p.data)) for p in params]
            for name, (params, _) in groups.items()
        }

    def zero_grad(self):
        for params, _ in self.groups.values():
            for p in params:
                p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for name, (params, lr) in self.groups.items():
            for p, (m, v) in zip(params, self.moments[name]):
                g = p.grad if p.grad is not None else np.zeros_like(p.data)
                if not np.all(np.isfinite(g)):
                    raise DivergenceError(f"non-finite gradient in parameter group '{name}'")
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def state_dict(self):
        return {
            "step_count": self.step_count,
            "moments": {
                name: [[pack_array(m), pack_array(v)] for m, v in pairs] for name, pairs in self.moments.items()
            },
        }

    def load_state_dict(self, state):
        self.step_count = int(state["step_count"])
        for name, pairs in state["moments"].items():
            self.moments[name] = [(unpack_array(m), unpack_array(v)) for m, v in pairs]


@dataclass
class FitResult:
    history: list
    best_epoch: int
    best_val: float
    stopped_early: bool
    state: dict = field(repr=False, default=None)


HISTORY_FIELDS = ("epoch", "recon", "indep", "sparse", "ent", "total", "val_total", "tau_edges", "gamma1_effective")


def _loss_on(model, x, weights, tau, gamma1_eff, prior):
    comps = model.loss_components(x, prior, weights, tau_edges=tau, gamma1_effective=gamma1_eff, hard=True)
    return comps


def fit(model, x_train, config, weights, resume_state=None, stop_after=None):
    """Mini-batch training with early stopping on a held-out validation split.

    Returns the per-epoch history and leaves the model loaded with the best
    validation parameters. ``result.state`` carries everything needed to
    resume: current (not best) parameters, optimizer moments, generator state,
    and the epoch counter. ``stop_after`` pauses after that many epochs in
    this invocation (the schedule still follows ``config.max_epochs``), which
    is how budgeted runs checkpoint and continue later.
    """
    config.validate()
    x_train = np.asarray(x_train, dtype=np.float64)
    if x_train.shape[0] < 2:
        raise ValueError("training set must contain at least 2 rows")

    seq = np.random.SeedSequence(config.seed)
    split_seed, stream_seed = seq.spawn(2)
    split_rng = np.random.default_rng(split_seed)

    n_total = x_train.shape[0]
    n_val = max(2, int(round(config.val_frac * n_total)))
    order = split_rng.permutation(n_total)
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_val, x_fit = x_train[val_idx], x_train[train_idx]

    groups = {
        "main": (model.param_groups()["main"], config.lr_main),
        "edges": (model.param_groups()["edges"], config.lr_edges),
        "perm": (model.param_groups()["perm"], config.lr_perm),
    }
    optimizer = Adam(groups)
    train_rng = np.random.default_rng(stream_seed)

    history = []
    best_val = np.inf
    best_epoch = -1
    best_snapshot = model.snapshot()
    start_epoch = 0

    if resume_state is not None:
        model.load_state_dict(resume_state["model"])
        optimizer.load_state_dict(resume_state["optimizer"])
        train_rng.bit_generator.state = resume_state["rng_state"]
        history = [dict(row) for row in resume_state["history"]]
        best_val = resume_state["best_val"]
        best_epoch = resume_state["best_epoch"]
        best_snapshot = {k: unpack_array(v) for k, v in resume_state["best_params"].items()}
        start_epoch = resume_state["epoch"] + 1

    z_dim = model.config.z_dim
    stopped_early = False
    epochs_since_best = 0 if best_epoch < 0 else history[-1]["epoch"] - best_epoch

    for epoch in range(start_epoch, config.max_epochs):
        tau, gamma1_eff = schedule(epoch, config, weights.gamma1)
        model.dag.tau_edges = tau
        perm = train_rng.permutation(len(x_fit))
        sums = {k: 0.0 for k in ("recon", "indep", "sparse", "ent", "total")}
        n_seen = 0
        for lo in range(0, len(x_fit), config.batch_size):
            batch = x_fit[perm[lo : lo + config.batch_size]]
            if batch.shape[0] < 2:
                continue  # a single leftover row cannot feed the MMD estimator
            prior = train_rng.standard_normal((batch.shape[0], z_dim))
            try:
                comps = _loss_on(model, batch, weights, tau, gamma1_eff, prior)
            except DivergenceError as err:
                raise DivergenceError(f"epoch {epoch}: {err}") from None
            optimizer.zero_grad()
            ad.backward(comps["total"])
            optimizer.step()
            for key, value in comps["values"].items():
                sums[key] += value * batch.shape[0]
            n_seen += batch.shape[0]

        val_prior = train_rng.standard_normal((len(x_val), z_dim))
        val_comps = _loss_on(model, x_val, weights, tau, gamma1_eff, val_prior)
        val_total = val_comps["values"]["total"]
        if not np.isfinite(val_total):
            raise DivergenceError(f"epoch {epoch}: validation loss diverged")

        row = {
            "epoch": epoch,
            **{k: sums[k] / max(n_seen, 1) for k in ("recon", "indep", "sparse", "ent", "total")},
            "val_total": val_total,
            "tau_edges": tau,
            "gamma1_effective": gamma1_eff,
        }
        history.append(row)

        if val_total < best_val:
            best_val = val_total
            best_epoch = epoch
            best_snapshot = model.snapshot()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > config.patience:
                stopped_early = True
                break

        if stop_after is not None and epoch - start_epoch + 1 >= stop_after:
            break

    state = {
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "rng_state": train_rng.bit_generator.state,
        "history": history,
        "best_val": best_val,
        "best_epoch": best_epoch,
        "best_params": {k: pack_array(v) for k, v in best_snapshot.items()},
        "epoch": history[-1]["epoch"] if history else -1,
        "tau_edges_final": model.dag.tau_edges,
    }
    model.restore(best_snapshot)
    return FitResult(history=history, best_epoch=best_epoch, best_val=best_val, stopped_early=stopped_early, state=state)


# ---------------------------------------------------------------------------
# checkpoint files


def save_checkpoint(path, fit_state, train_config, weights):
    payload = {
        "format": 1,
        "train_config": asdict(train_config),
        "loss_weights": {
            "lambda_scm": weights.lambda_scm,
            "beta": weights.beta,
            "gamma1": weights.gamma1,
            "gamma2": weights.gamma2,
            "kernel": weights.kernel,
            "bandwidths": weights.bandwidths,
            "sparsity_prior": weights.sparsity_prior,
        },
        **fit_state,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        return json.load(fh)


def model_from_checkpoint(checkpoint, use_best=True):
    """Rebuild the model; by default load the best-validation parameters."""
    model = model_from_state(checkpoint["model"])
    if use_best:
        best = {k: unpack_array(v) for k, v in checkpoint["best_params"].items()}
        model.restore(best)
        model.dag.tau_edges = float(checkpoint.get("tau_edges_final", model.dag.tau_edges))
    return model


def write_history_csv(path, history):
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in HISTORY_FIELDS])
