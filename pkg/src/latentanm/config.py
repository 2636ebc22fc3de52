"""Experiment configuration: one JSON document drives data generation,
model construction, training, and evaluation.

Defaults follow the tuned sweep ranges; every section round-trips through
``to_dict``/``from_dict`` and the JSON file format without loss.
"""

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .model import ModelConfig
from .synthetic import MixerSpec, DEFAULT_SIZES
from .training import TrainConfig
from .wae import LossWeights


@dataclass
class GeneratorConfig:
    name: str = "pendulum"
    eta: float = 0.1
    n_train: int = None
    n_test: int = None
    seed: int = 0
    # random_anm extras
    n: int = 4
    edge_prob: float = 0.4
    # chain2 extras
    mech: str = "tanh"
    noise: str = "uniform"

    def __post_init__(self):
        if self.name not in DEFAULT_SIZES:
            raise ValueError(f"unknown generator '{self.name}'; choose from {sorted(DEFAULT_SIZES)}")
        default_train, default_test = DEFAULT_SIZES[self.name]
        if self.n_train is None:
            self.n_train = default_train
        if self.n_test is None:
            self.n_test = default_test
        if self.n_train <= 0 or self.n_test <= 0:
            raise ValueError("dataset sizes must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")

    def params(self):
        if self.name == "random_anm":
            return {"n": self.n, "edge_prob": self.edge_prob, "eta": self.eta}
        if self.name == "chain2":
            return {"mech": self.mech, "noise": self.noise}
        return {"eta": self.eta}


@dataclass
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    mixer: MixerSpec = field(default_factory=MixerSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "runs"

    def validate(self):
        self.model.validate()
        self.train.validate()
        if not self.seeds:
            raise ValueError("config needs at least one seed")
        if self.mixer.kind == "identity" and self.model.x_dim != _factor_count(self.generator):
            raise ValueError(
                f"identity mixer: model.x_dim must equal the factor count {_factor_count(self.generator)}"
            )
        if self.mixer.kind not in ("identity", "componentwise_distortion") and self.model.x_dim != self.mixer.output_dim:
            raise ValueError(f"model.x_dim {self.model.x_dim} must match mixer.output_dim {self.mixer.output_dim}")

    def to_dict(self):
        return {
            "generator": asdict(self.generator),
            "mixer": asdict(self.mixer),
            "model": asdict(self.model),
            "weights": asdict(self.weights),
            "train": asdict(self.train),
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {"generator", "mixer", "model", "weights", "train", "seeds", "out_dir"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        sections = {
            "generator": GeneratorConfig,
            "mixer": MixerSpec,
            "model": ModelConfig,
            "weights": LossWeights,
            "train": TrainConfig,
        }
        kwargs = {}
        for name, klass in sections.items():
            section = data.get(name, {})
            allowed = set(klass.__dataclass_fields__)
            bad = set(section) - allowed
            if bad:
                raise ValueError(f"unknown keys in config section '{name}': {sorted(bad)}")
            kwargs[name] = klass(**section)
        kwargs["seeds"] = list(data.get("seeds", [0]))
        kwargs["out_dir"] = data.get("out_dir", "runs")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_file(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self):
        digest = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()
        return digest[:10]


def _factor_count(generator):
    if generator.name == "random_anm":
        return generator.n
    if generator.name == "chain2":
        return 2
    return 4


def factor_count(config):
    return _factor_count(config.generator)


def apply_overrides(config_dict, overrides):
    """Set dotted-path keys ('weights.beta') in a nested config dict."""
    out = json.loads(json.dumps(config_dict))
    for path, value in overrides.items():
        node = out
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out
