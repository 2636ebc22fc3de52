"""Command-line harness: generate, train, evaluate, verify, sweep.

Every command validates its configuration before touching the filesystem, and
all outputs are fully determined by (config, seed).
"""

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics, synthetic, training
from .config import ExperimentConfig, apply_overrides
from .model import CausalAutoencoder
from .wae import DivergenceError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 3
EXIT_UNEXPECTED_PATTERN = 4


def _load_config(path):
    return ExperimentConfig.from_file(path)


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args):
    config = _load_config(args.config)
    gen = config.generator
    seed = gen.seed if args.seed is None else args.seed
    out = Path(args.out) if args.out else Path(config.out_dir) / f"data-{gen.name}-{seed}"
    train, test, scm = synthetic.generate_dataset(
        gen.name, gen.n_train, gen.n_test, seed=seed, mixer=config.mixer, **gen.params()
    )
    synthetic.save_dataset(out, train, test, scm, config.mixer)
    print(f"wrote {train.s.shape[0]} train and {test.s.shape[0]} test rows to {out}")
    return EXIT_OK


def _build_model(config, seed):
    model_rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    return CausalAutoencoder(config.model, model_rng)


def cmd_train(args):
    config = _load_config(args.config)
    seed = config.seeds[0] if args.seed is None else args.seed
    train_batch, _, sidecar = synthetic.load_dataset(args.data)
    if train_batch.x.shape[1] != config.model.x_dim:
        raise ValueError(
            f"dataset has {train_batch.x.shape[1]} observation columns but model.x_dim is {config.model.x_dim}"
        )
    out = Path(args.out) if args.out else Path(config.out_dir) / f"run-{config.config_hash()}-{seed}"

    model = _build_model(config, seed)
    train_cfg = config.train
    train_cfg.seed = seed
    resume_state = training.load_checkpoint(args.resume) if args.resume else None
    try:
        result = training.fit(model, train_batch.x, train_cfg, config.weights, resume_state=resume_state)
    except DivergenceError as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    training.save_checkpoint(out / "checkpoint.json", result.state, train_cfg, config.weights)
    training.write_history_csv(out / "history.csv", result.history)
    print(
        f"trained {len(result.history)} epochs (best epoch {result.best_epoch}, val {result.best_val:.6f}); "
        f"checkpoint at {out / 'checkpoint.json'}"
    )
    return EXIT_OK


def cmd_evaluate(args):
    checkpoint = training.load_checkpoint(args.checkpoint)
    model = training.model_from_checkpoint(checkpoint)
    _, test_batch, sidecar = synthetic.load_dataset(args.data)
    adjacency = sidecar.get("adjacency")
    if adjacency is None:
        print("notice: dataset sidecar has no ground-truth graph; SHD/SID skipped", file=sys.stderr)
    report = metrics.evaluate_model(model, test_batch.s, test_batch.x, adjacency_true=adjacency)
    out = args.out or "report.json"
    _write_json(out, report)
    summary = ", ".join(f"{k}={report[k]}" for k in ("mmi", "mig", "shd", "sid") if k in report)
    print(f"evaluation: {summary} -> {out}")
    return EXIT_OK


def cmd_verify(args):
    seed = args.seed if args.seed is not None else 0
    if args.which == "theorem1":
        report = metrics.theorem1_verdict(seed=seed)
        expected = report["expected_pattern"]
        print(
            "theorem1: affine {} (p={:.4f}), quadratic {} (p={:.4f})".format(
                "PASS" if report["affine"]["passed"] else "REJECT",
                report["affine"]["pvalue"],
                "REJECT" if report["quadratic"]["reject"] else "PASS",
                report["quadratic"]["pvalue"],
            )
        )
    elif args.which == "prop1":
        report = metrics.verify_prop1(seed=seed)
        expected = report["expected_pattern"]
        print(
            "prop1: spurious encoding {} (p={:.4f}), raw chain {} (p={:.4f})".format(
                "PASS" if report["spurious_passes"] else "REJECT",
                report["spurious_pvalue"],
                "REJECT" if report["raw_fails"] else "PASS",
                report["raw_pvalue"],
            )
        )
    else:
        raise ValueError(f"unknown verifier '{args.which}'")
    if args.out:
        _write_json(args.out, report)
    return EXIT_OK if expected else EXIT_UNEXPECTED_PATTERN


SWEEP_COLUMNS = ["config_hash", "seed", "status", "mmi", "mig", "shd", "sid", "epochs", "val_total"]


def _run_single(config, seed):
    """One full generate-train-evaluate cycle; returns a metrics row dict."""
    gen = config.generator
    train_batch, test_batch, scm = synthetic.generate_dataset(
        gen.name, gen.n_train, gen.n_test, seed=gen.seed, mixer=config.mixer, **gen.params()
    )
    model = _build_model(config, seed)
    train_cfg = config.train
    train_cfg.seed = seed
    result = training.fit(model, train_batch.x, train_cfg, config.weights)
    report = metrics.evaluate_model(model, test_batch.s, test_batch.x, adjacency_true=scm.adjacency)
    return {
        "mmi": report["mmi"],
        "mig": report["mig"],
        "shd": report.get("shd"),
        "sid": report.get("sid"),
        "epochs": len(result.history),
        "val_total": result.best_val,
    }


def _sweep_grid(grid):
    if not grid:
        yield {}
        return
    keys = sorted(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, combo))


def cmd_sweep(args):
    with open(args.config) as fh:
        raw = json.load(fh)
    grid = raw.pop("grid", {})
    seeds = raw.pop("sweep_seeds", None)
    base = ExperimentConfig.from_dict(raw)
    if seeds is None:
        seeds = base.seeds
    metric = args.metric or "mmi"
    if metric not in ("mmi", "mig", "shd", "sid"):
        raise ValueError(f"unknown selection metric '{metric}'")
    out = Path(args.out) if args.out else Path(base.out_dir) / "sweep.csv"

    rows = []
    summaries = []
    for overrides in _sweep_grid(grid):
        combo = ExperimentConfig.from_dict(apply_overrides(base.to_dict(), overrides))
        chash = combo.config_hash()
        per_seed = []
        for seed in seeds:
            row = {"config_hash": chash, "seed": seed}
            try:
                row.update(_run_single(combo, seed))
                row["status"] = "ok"
                per_seed.append(row)
            except Exception as err:  # keep sweeping; the row records the failure
                row["status"] = f"failed: {type(err).__name__}"
            rows.append(row)
        summary = {"config_hash": chash, "seed": "summary", "status": f"n={len(per_seed)}"}
        for key in ("mmi", "mig", "shd", "sid", "val_total"):
            values = [r[key] for r in per_seed if r.get(key) is not None]
            if values:
                mean = float(np.mean(values))
                std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                summary[key] = f"{mean:.6f}±{std:.6f}"
                summary[f"_{key}_mean"] = mean
        summaries.append(summary)
        rows.append(summary)

    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row.get(col, "") for col in SWEEP_COLUMNS])

    ascending = metric in ("shd", "sid")
    ranked = [s for s in summaries if f"_{metric}_mean" in s]
    ranked.sort(key=lambda s: s[f"_{metric}_mean"], reverse=not ascending)
    print(f"sweep: {len(rows)} rows -> {out}")
    for rank, summary in enumerate(ranked, start=1):
        print(f"  #{rank} {summary['config_hash']} {metric}={summary[f'_{metric}_mean']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="latentanm", description="Latent causal structure learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a dataset (CSV + JSON sidecar)")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train a model on a generated dataset")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--resume", default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a checkpoint against ground truth")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_evaluate)

    p_verify = sub.add_parser("verify", help="run a numerical identifiability verifier")
    p_verify.add_argument("--which", choices=["theorem1", "prop1"], required=True)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="grid sweep with multi-seed aggregation")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--metric", default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
