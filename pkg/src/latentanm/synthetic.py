"""Ground-truth structural-equation data generators.

Every generator draws exogenous factors, propagates them through fixed
physical or randomly drawn mechanisms, injects Gaussian noise into endogenous
nodes scaled as eta times the noise-free signal's standard deviation, then
standardizes all factor columns and re-expresses the true mechanisms in the
standardized units, so abduction with the stored mechanisms recovers the
injected noise exactly. Observations are produced by a smooth mixing function
applied to the standardized factors.
"""

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

PENDULUM_TRAIN, PENDULUM_TEST = 5899, 1409
FLOW_TRAIN, FLOW_TEST = 6533, 1567


@dataclass
class GroundTruthSCM:
    """True graph and mechanisms behind a generated batch.

    ``mechanisms[i]`` maps the full standardized factor matrix (N, n) to the
    noise-free prediction for node i; it is None for exogenous nodes.
    ``noise_std`` is the per-node exogenous standard deviation in the
    standardized units of the emitted factors.
    """

    n_factors: int
    adjacency: np.ndarray
    mechanisms: list
    noise_std: np.ndarray
    noise_scale_eta: float

    def parents(self, i):
        return [j for j in range(self.n_factors) if self.adjacency[j, i]]

    def true_residuals(self, s):
        """Abduct with the true mechanisms: s_i - h_i(parents), or s_i at roots."""
        s = np.asarray(s, dtype=np.float64)
        residuals = np.empty_like(s)
        for i in range(self.n_factors):
            if self.mechanisms[i] is None:
                residuals[:, i] = s[:, i]
            else:
                residuals[:, i] = s[:, i] - self.mechanisms[i](s)
        return residuals


@dataclass
class SampleBatch:
    s: np.ndarray
    x: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.s.shape[0] != self.x.shape[0]:
            raise ValueError("factor and observation row counts differ")


@dataclass
class MixerSpec:
    """Recipe for the observation map; weights are derived from the seed."""

    kind: str = "random_smooth_mlp"
    output_dim: int = 10
    seed: int = 0
    coefficients: list = None

    def __post_init__(self):
        if self.kind not in ("identity", "affine", "random_smooth_mlp", "componentwise_distortion"):
            raise ValueError(f"unknown mixer kind '{self.kind}'")


# ---------------------------------------------------------------------------
# mixing


def _orthogonal(rows, cols, rng):
    q, _ = np.linalg.qr(rng.standard_normal((max(rows, cols), max(rows, cols))))
    return q[:rows, :cols]


def apply_mixer(s, spec):
    """Deterministic smooth map from standardized factors to observations."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[1]
    if spec.kind == "identity":
        return s.copy()
    if spec.kind == "componentwise_distortion":
        return apply_componentwise_distortion(s, spec.coefficients)
    d = spec.output_dim
    if d < n:
        raise ValueError(f"mixer output_dim {d} is below the factor count {n}")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "affine":
        w = _orthogonal(n, d, rng) * rng.uniform(0.8, 1.5)
        b = rng.normal(0.0, 0.3, size=d)
        return s @ w + b
    # random_smooth_mlp: two layers, tanh in the middle, orthogonal weights;
    # the 0.9 gain keeps tanh off its saturated tails for unit-scale factors
    w1 = _orthogonal(n, d, rng) * 0.9
    b1 = rng.normal(0.0, 0.1, size=d)
    w2 = _orthogonal(d, d, rng)
    b2 = rng.normal(0.0, 0.1, size=d)
    return np.tanh(s @ w1 + b1) @ w2 + b2


def apply_componentwise_distortion(s, coefficients):
    """Per-coordinate transform psi(t) = a*t + b + c*t^2.

    Coefficients may be scalars (treated as the quadratic weight c with a=1,
    b=0) or (a, b, c) triples. Each transform must be strictly monotone over
    the observed range of its coordinate.
    """
    s = np.asarray(s, dtype=np.float64)
    if len(coefficients) != s.shape[1]:
        raise ValueError(f"expected {s.shape[1]} coefficient entries, got {len(coefficients)}")
    out = np.empty_like(s)
    for i, coef in enumerate(coefficients):
        a, b, c = (1.0, 0.0, float(coef)) if np.isscalar(coef) else tuple(float(v) for v in coef)
        col = s[:, i]
        slope = a + 2.0 * c * col
        if not (np.all(slope > 0) or np.all(slope < 0)):
            raise ValueError(
                f"distortion (a={a}, b={b}, c={c}) is not strictly monotone on coordinate {i}'s observed range"
            )
        out[:, i] = a * col + b + c * col * col
    return out


def min_pairwise_distance(x):
    """Distance from each row to its nearest distinct neighbor (min over rows)."""
    dist, _ = cKDTree(x).query(x, k=2)
    return float(dist[:, 1].min())


# ---------------------------------------------------------------------------
# standardization plumbing


def _standardize(raw, adjacency, raw_mechanisms, raw_noise_std, eta):
    """Shift and scale columns to zero mean, unit variance; re-home mechanisms.

    ``raw_mechanisms[i]`` acts on the raw factor matrix. The wrapped versions
    take standardized input, undo the affine map, apply the raw mechanism, and
    restandardize the output, so residuals are preserved exactly (up to the
    affine scale) in the new units.
    """
    mean = raw.mean(axis=0)
    scale = raw.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    s = (raw - mean) / scale

    def wrap(mech, i):
        if mech is None:
            return None

        def standardized(s_full, _mech=mech, _i=i):
            return (_mech(s_full * scale + mean) - mean[_i]) / scale[_i]

        return standardized

    mechanisms = [wrap(m, i) for i, m in enumerate(raw_mechanisms)]
    noise_std = np.asarray(raw_noise_std, dtype=np.float64) / scale
    scm = GroundTruthSCM(
        n_factors=raw.shape[1],
        adjacency=np.asarray(adjacency, dtype=int),
        mechanisms=mechanisms,
        noise_std=noise_std,
        noise_scale_eta=eta,
    )
    return s, scm


def _finish(s, scm, mixer, generator, seed, eta):
    spec = mixer if mixer is not None else MixerSpec(seed=seed)
    if spec.kind == "identity" or spec.kind == "componentwise_distortion":
        spec.output_dim = s.shape[1]
    x = apply_mixer(s, spec)
    batch = SampleBatch(s=s, x=x, meta={"generator": generator, "seed": seed, "eta": eta})
    return batch, scm, spec


def _check_n_eta(n_samples, eta):
    if n_samples <= 0:
        raise ValueError(f"sample count must be positive, got {n_samples}")
    if eta < 0:
        raise ValueError(f"noise scale eta must be non-negative, got {eta}")


# ---------------------------------------------------------------------------
# generators


def gen_pendulum(n_samples, eta=0.1, seed=0, mixer=None):
    """Pendulum projection system: {angle, light} -> {shadow_len, shadow_pos}.

    A unit pendulum hangs from a pivot at height 2; the shadow is the segment
    between the ground projections of pivot and tip along the light direction
    (angle measured from the ground plane). shadow_len is the segment length,
    shadow_pos its midpoint.
    """
    _check_n_eta(n_samples, eta)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(np.deg2rad(-40.0), np.deg2rad(40.0), size=n_samples)
    light = rng.uniform(np.deg2rad(60.0), np.deg2rad(120.0), size=n_samples)
    unit_len = rng.standard_normal(n_samples)
    unit_pos = rng.standard_normal(n_samples)

    def shadow_len_raw(theta_v, light_v):
        return np.abs(np.sin(theta_v) - np.cos(theta_v) / np.tan(light_v))

    def shadow_pos_raw(theta_v, light_v):
        cot = 1.0 / np.tan(light_v)
        x_pivot = 2.0 * cot
        x_tip = np.sin(theta_v) + (2.0 - np.cos(theta_v)) * cot
        return 0.5 * (x_pivot + x_tip)

    len_signal = shadow_len_raw(theta, light)
    pos_signal = shadow_pos_raw(theta, light)
    len_sigma = eta * len_signal.std()
    pos_sigma = eta * pos_signal.std()
    raw = np.column_stack([theta, light, len_signal + len_sigma * unit_len, pos_signal + pos_sigma * unit_pos])

    adjacency = np.zeros((4, 4), dtype=int)
    adjacency[0, 2] = adjacency[0, 3] = adjacency[1, 2] = adjacency[1, 3] = 1
    raw_mechs = [
        None,
        None,
        lambda s_full: shadow_len_raw(s_full[:, 0], s_full[:, 1]),
        lambda s_full: shadow_pos_raw(s_full[:, 0], s_full[:, 1]),
    ]
    raw_noise_std = [theta.std(), light.std(), len_sigma, pos_sigma]
    s, scm = _standardize(raw, adjacency, raw_mechs, raw_noise_std, eta)
    batch, scm, _ = _finish(s, scm, mixer, "pendulum", seed, eta)
    return batch, scm


def gen_flow(n_samples, eta=0.1, seed=0, mixer=None):
    """Tank-flow system: ball size and hole position drive height and outflow.

    height = 1 + 0.5 * size^3 (Archimedes displacement of the submerged ball),
    flow = sqrt(max(height - hole, 0)) (Torricelli with the hole position as
    the head offset). The declared graph carries the benchmark's four edges
    {size->height, size->flow, hole->flow, height->flow}.
    """
    _check_n_eta(n_samples, eta)
    rng = np.random.default_rng(seed)
    size = rng.uniform(0.5, 1.5, size=n_samples)
    hole = rng.uniform(0.0, 1.0, size=n_samples)
    unit_height = rng.standard_normal(n_samples)
    unit_flow = rng.standard_normal(n_samples)

    def height_raw(size_v):
        return 1.0 + 0.5 * size_v**3

    def flow_raw(height_v, hole_v):
        return np.sqrt(np.maximum(height_v - hole_v, 0.0))

    height_signal = height_raw(size)
    height_sigma = eta * height_signal.std()
    height = height_signal + height_sigma * unit_height
    flow_signal = flow_raw(height, hole)
    flow_sigma = eta * flow_signal.std()
    flow = flow_signal + flow_sigma * unit_flow
    raw = np.column_stack([size, hole, height, flow])

    adjacency = np.zeros((4, 4), dtype=int)
    adjacency[0, 2] = adjacency[0, 3] = adjacency[1, 3] = adjacency[2, 3] = 1
    raw_mechs = [
        None,
        None,
        lambda s_full: height_raw(s_full[:, 0]),
        lambda s_full: flow_raw(s_full[:, 2], s_full[:, 1]),
    ]
    raw_noise_std = [size.std(), hole.std(), height_sigma, flow_sigma]
    s, scm = _standardize(raw, adjacency, raw_mechs, raw_noise_std, eta)
    batch, scm, _ = _finish(s, scm, mixer, "flow", seed, eta)
    return batch, scm


def _random_mechanism(n, parent_idx, rng, hidden=8):
    w1 = rng.normal(0.0, 1.0, size=(len(parent_idx), hidden))
    b1 = rng.normal(0.0, 0.3, size=hidden)
    w2 = rng.normal(0.0, 1.2 / np.sqrt(hidden), size=hidden)
    idx = np.asarray(parent_idx)

    def mech(s_full):
        return np.tanh(s_full[:, idx] @ w1 + b1) @ w2

    return mech


def gen_random_anm(n, edge_prob, n_samples, eta=0.1, seed=0, mixer=None):
    """Random additive-noise system on a random topological order.

    Edges appear independently with probability ``edge_prob`` between ordered
    pairs; mechanisms are small random tanh networks; roots are standard
    normal.
    """
    if not 2 <= n <= 16:
        raise ValueError(f"node count must lie in [2, 16], got {n}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {edge_prob}")
    _check_n_eta(n_samples, eta)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    adjacency = np.zeros((n, n), dtype=int)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < edge_prob:
                adjacency[order[a], order[b]] = 1

    raw = np.zeros((n_samples, n))
    raw_mechs = [None] * n
    raw_noise_std = np.zeros(n)
    for node in order:
        parents = [j for j in range(n) if adjacency[j, node]]
        if not parents:
            raw[:, node] = rng.standard_normal(n_samples)
            raw_noise_std[node] = raw[:, node].std()
            continue
        mech = _random_mechanism(n, parents, rng)
        signal = mech(raw)
        sigma = eta * signal.std()
        raw[:, node] = signal + sigma * rng.standard_normal(n_samples)
        raw_mechs[node] = mech
        raw_noise_std[node] = sigma
    s, scm = _standardize(raw, adjacency, raw_mechs, raw_noise_std, eta)
    batch, scm, _ = _finish(s, scm, mixer, "random_anm", seed, eta)
    return batch, scm


def gen_chain2(n_samples, seed=0, mech="tanh", noise="uniform", noise_scale=0.3, mixer=None):
    """Two-node chain s1 -> s2 with a known mechanism, kept in raw units.

    The factor ranges stay within roughly [-1.1, 1.1] so quadratic
    component-wise distortions with moderate curvature remain monotone. Used
    by the identifiability verifiers and as a fast toy training target.
    """
    if n_samples <= 0:
        raise ValueError(f"sample count must be positive, got {n_samples}")
    rng = np.random.default_rng(seed)
    s1 = rng.standard_normal(n_samples)

    if mech == "tanh":
        h2 = lambda s_full: 0.8 * np.tanh(1.5 * s_full[:, 0])
    elif mech == "linear":
        h2 = lambda s_full: 0.7 * s_full[:, 0]
    else:
        raise ValueError(f"chain mechanism must be 'tanh' or 'linear', got '{mech}'")

    if noise == "uniform":
        n2 = rng.uniform(-noise_scale, noise_scale, size=n_samples)
        sigma2 = noise_scale / np.sqrt(3.0)
    elif noise == "normal":
        n2 = rng.normal(0.0, noise_scale, size=n_samples)
        sigma2 = noise_scale
    else:
        raise ValueError(f"chain noise must be 'uniform' or 'normal', got '{noise}'")

    s = np.column_stack([s1, np.zeros(n_samples)])
    s[:, 1] = h2(s) + n2
    adjacency = np.array([[0, 1], [0, 0]], dtype=int)
    scm = GroundTruthSCM(
        n_factors=2,
        adjacency=adjacency,
        mechanisms=[None, h2],
        noise_std=np.array([1.0, sigma2]),
        noise_scale_eta=0.0,
    )
    mixer_spec = mixer if mixer is not None else MixerSpec(kind="identity", output_dim=2, seed=seed)
    batch, scm, _ = _finish(s, scm, mixer_spec, "chain2", seed, 0.0)
    return batch, scm


def gen_spurious_encoding(batch, scm):
    """The mechanism-absorbing encoding of a two-node chain: z1 = s1, z2 = s2 - h2(s1).

    Both output columns equal the chain's exogenous noises, so they are
    mutually independent even though the factors were causally linked.
    """
    if scm.n_factors != 2 or scm.mechanisms[1] is None:
        raise ValueError("spurious encoding requires a two-node chain with a known mechanism")
    s = batch.s
    z = np.column_stack([s[:, 0], s[:, 1] - scm.mechanisms[1](s)])
    return z


GENERATORS = {
    "pendulum": gen_pendulum,
    "flow": gen_flow,
    "random_anm": gen_random_anm,
    "chain2": gen_chain2,
}

DEFAULT_SIZES = {
    "pendulum": (PENDULUM_TRAIN, PENDULUM_TEST),
    "flow": (FLOW_TRAIN, FLOW_TEST),
    "random_anm": (4000, 1000),
    "chain2": (2000, 500),
}


def generate_dataset(generator, n_train, n_test, seed=0, mixer=None, **params):
    """Draw train and test jointly (shared standardization and mixer), then split."""
    if generator not in GENERATORS:
        raise ValueError(f"unknown generator '{generator}'; choose from {sorted(GENERATORS)}")
    total = n_train + n_test
    if generator == "random_anm":
        batch, scm = gen_random_anm(
            params.get("n", 4), params.get("edge_prob", 0.4), total, params.get("eta", 0.1), seed, mixer
        )
    elif generator == "chain2":
        batch, scm = gen_chain2(total, seed, params.get("mech", "tanh"), params.get("noise", "uniform"), mixer=mixer)
    else:
        batch, scm = GENERATORS[generator](total, params.get("eta", 0.1), seed, mixer)
    train = SampleBatch(s=batch.s[:n_train], x=batch.x[:n_train], meta={**batch.meta, "split": "train"})
    test = SampleBatch(s=batch.s[n_train:], x=batch.x[n_train:], meta={**batch.meta, "split": "test"})
    return train, test, scm


# ---------------------------------------------------------------------------
# persistence: CSV factors+observations with a JSON sidecar


def _write_csv(path, batch):
    n, d = batch.s.shape[1], batch.x.shape[1]
    header = [f"s_{i}" for i in range(n)] + [f"x_{j}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for srow, xrow in zip(batch.s, batch.x):
            writer.writerow([repr(float(v)) for v in srow] + [repr(float(v)) for v in xrow])


def save_dataset(directory, train, test, scm, mixer_spec):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_csv(directory / "train.csv", train)
    _write_csv(directory / "test.csv", test)
    sidecar = {
        "generator": train.meta.get("generator"),
        "seed": train.meta.get("seed"),
        "eta": train.meta.get("eta"),
        "n_factors": scm.n_factors,
        "adjacency": scm.adjacency.tolist(),
        "noise_std": scm.noise_std.tolist(),
        "mixer": asdict(mixer_spec),
        "n_train": int(train.s.shape[0]),
        "n_test": int(test.s.shape[0]),
    }
    with open(directory / "scm.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    n = sum(1 for name in header if name.startswith("s_"))
    return rows[:, :n], rows[:, n:]


def load_dataset(directory):
    directory = Path(directory)
    with open(directory / "scm.json") as fh:
        sidecar = json.load(fh)
    s_train, x_train = _read_csv(directory / "train.csv")
    s_test, x_test = _read_csv(directory / "test.csv")
    train = SampleBatch(s=s_train, x=x_train, meta={"split": "train", **{k: sidecar.get(k) for k in ("generator", "seed", "eta")}})
    test = SampleBatch(s=s_test, x=x_test, meta={"split": "test", **{k: sidecar.get(k) for k in ("generator", "seed", "eta")}})
    return train, test, sidecar
