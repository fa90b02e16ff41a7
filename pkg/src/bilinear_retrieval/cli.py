"""Experiment runner.

Commands: gen-data, sketch-bench, gradcheck, train, eval, ablate. Every
command resolves one experiment config (profile -> config file -> flags),
writes it into the output directory, and embeds its hash in the metrics it
emits. Metrics files contain no timestamps or timings, so a fixed seed
reproduces them byte for byte; wall-clock numbers go to a separate
timings.json and stdout.

Exit codes: 0 ok, 2 configuration/usage error, 3 numerical failure,
4 threshold miss in --assert mode.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import sketch as sk
from .config import load_experiment_config, write_resolved_config
from .errors import ConfigError, ManifestError, NumericalError
from .experiments import (
    VARIANTS,
    evaluate_model,
    metric_row,
    train_variant,
    variant_config,
)
from .model import ToyModel, build_toy_model
from .retrieval import RetrievalReport
from .synthdata import generate_dataset, read_dataset, write_dataset
from .training import grad_check, make_targets, run_training

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def _load_bundle(data_dir: str):
    manifest = Path(data_dir) / "manifest.txt"
    if not manifest.exists():
        raise ConfigError(f"no manifest.txt under {data_dir}")
    return read_dataset(manifest)


def cmd_gen_data(args) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    write_resolved_config(cfg, out)
    bundle = generate_dataset(cfg.synth)
    manifest = write_dataset(bundle, out)
    print(
        f"wrote {len(bundle.train)} train / {len(bundle.query)} query / "
        f"{len(bundle.gallery)} gallery records, "
        f"{len(bundle.confusable_pairs)} confusable pairs -> {manifest}"
    )
    return EXIT_OK


def cmd_sketch_bench(args) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    config_hash = write_resolved_config(cfg, out)
    rng = np.random.default_rng(cfg.seed)
    results = {}
    timings = {}
    for c in args.c_list:
        x = rng.standard_normal(c)
        y = rng.standard_normal(c)
        exact = float(x @ y)
        for d in args.d_list:
            estimates = np.empty(args.trials)
            t0 = time.perf_counter()
            for t in range(args.trials):
                params = sk.make_sketch_params(c, d, cfg.seed * 7_919 + 104_729 * t + d)
                estimates[t] = float(sk.project(x, params) @ sk.project(y, params))
            elapsed = time.perf_counter() - t0
            err = estimates - exact
            key = f"C{c}_d{d}"
            entry = {
                "exact": exact,
                "mean_estimate": float(estimates.mean()),
                "mean_error": float(err.mean()),
                "mean_abs_error": float(np.abs(err).mean()),
                "trials": args.trials,
            }
            if args.trials > 1:
                std = float(err.std(ddof=1))
                entry["std_error"] = std
                entry["stderr"] = std / float(np.sqrt(args.trials))
            results[key] = entry
            timings[key] = {"sketch_seconds": elapsed}
    _dump_json(out / "sketch_bench.json", {"config_hash": config_hash, "seed": cfg.seed, "results": results})
    _dump_json(out / "timings.json", timings)
    for key, entry in results.items():
        print(f"{key}: mean_abs_error={entry['mean_abs_error']:.4f} (exact={entry['exact']:.4f})")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    config_hash = write_resolved_config(cfg, out)
    bundle = generate_dataset(cfg.synth)
    model = build_toy_model(cfg.arch, seed=cfg.seed)
    rec = bundle.train[0]
    report = grad_check(
        model,
        rec.image,
        make_targets(rec, cfg.arch),
        tolerance=args.tolerance,
        num_coords=args.coords,
        seed=cfg.seed,
    )
    payload = {
        "config_hash": config_hash,
        "seed": cfg.seed,
        "max_rel_error": report.max_rel_error,
        "checked": report.checked,
        "skipped_kinks": report.skipped_kinks,
        "tolerance": report.tolerance,
        "passed": report.passed,
        "worst_coordinate": list(report.worst_coordinate) if report.worst_coordinate else None,
    }
    _dump_json(out / "gradcheck.json", payload)
    print(
        f"gradcheck: max_rel_error={report.max_rel_error:.3e} over {report.checked} "
        f"coords ({report.skipped_kinks} skipped at kinks) -> "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    if args.assert_thresholds and not report.passed:
        return EXIT_THRESHOLD
    return EXIT_OK


def _write_history_csv(path: Path, history) -> None:
    keys = ["phase", "epoch", "lr", "total", "ce", "attr", "lm"]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
        writer.writeheader()
        for row in history.rows:
            writer.writerow({k: row.get(k, "") for k in keys})


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    config_hash = write_resolved_config(cfg, out)
    bundle = _load_bundle(args.data)
    if bundle.spec != cfg.synth:
        print("note: dataset spec differs from config synth section", file=sys.stderr)
    variant = args.variant or "ahbn"
    t0 = time.perf_counter()
    model, history, vcfg = train_variant(cfg, bundle, variant)
    elapsed = time.perf_counter() - t0
    model.save(out / "checkpoint")
    _write_history_csv(out / "loss_curve.csv", history)
    final = history.last("joint") or {}
    _dump_json(
        out / "train_metrics.json",
        {
            "config_hash": config_hash,
            "seed": cfg.seed,
            "variant": variant,
            "final_joint_losses": {
                k: final[k] for k in ("total", "ce", "attr", "lm") if k in final
            },
            "epochs": vcfg.train.max_epochs,
        },
    )
    _dump_json(out / "timings.json", {"train_seconds": elapsed})
    print(f"trained {variant} in {elapsed:.1f}s; final losses: "
          f"{ {k: round(v, 4) for k, v in final.items() if k in ('total', 'ce', 'attr', 'lm')} }")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    config_hash = write_resolved_config(cfg, out)
    model = ToyModel.load(args.checkpoint)
    bundle = _load_bundle(args.data)
    report = evaluate_model(model, bundle, cfg, config_hash)
    (out / "metrics.json").write_text(report.to_json())
    summary = ", ".join(f"acc@{k}={v:.3f}" for k, v in sorted(report.acc_at_k.items()))
    print(f"eval: {summary}; mAP={report.map if report.map is None else round(report.map, 4)}")
    if args.assert_thresholds and args.min_top1 is not None:
        if report.acc_at_k.get(1, 0.0) < args.min_top1:
            print(f"top-1 {report.acc_at_k.get(1, 0.0):.3f} below required {args.min_top1}")
            return EXIT_THRESHOLD
    return EXIT_OK


def cmd_ablate(args, parser) -> int:
    cfg = load_experiment_config(args.config, args.profile, args.seed)
    out = Path(args.out)
    config_hash = write_resolved_config(cfg, out)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            parser.error(f"unknown variant {v!r}; choose from {sorted(VARIANTS)}")
    bundle = _load_bundle(args.data)
    rows = {}
    timings = {}
    for variant in variants:
        t0 = time.perf_counter()
        model, _, vcfg = train_variant(cfg, bundle, variant)
        report = evaluate_model(model, bundle, vcfg, config_hash)
        timings[variant] = {"seconds": time.perf_counter() - t0}
        rows[variant] = metric_row(report)
        print(f"{variant}: " + ", ".join(
            f"{k}={v:.3f}" for k, v in rows[variant].items() if isinstance(v, float)
        ))
    payload = {"config_hash": config_hash, "seed": cfg.seed, "rows": rows}
    coherent = None
    if "ahbn-unit-alphas" in rows and "two-branch-256lm" in rows:
        coherent = rows["ahbn-unit-alphas"] == rows["two-branch-256lm"]
        payload["unit_alpha_coherence"] = coherent
        print(f"unit-alpha coherence vs two-branch-256lm: {coherent}")
    _dump_json(out / "ablation.json", payload)
    _dump_json(out / "timings.json", timings)
    with (out / "ablation.csv").open("w", newline="") as fh:
        fieldnames = ["variant"] + sorted(next(iter(rows.values())).keys()) if rows else ["variant"]
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for variant, row in rows.items():
            writer.writerow({"variant": variant, **row})
    if args.assert_thresholds and coherent is False:
        return EXIT_THRESHOLD
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilinear-retrieval",
        description="Two-branch co-attentive bilinear embedding experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON config file overriding the profile")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--profile", choices=("desk", "paper-shape"), default=None)
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--assert",
            dest="assert_thresholds",
            action="store_true",
            help="exit 4 when a required threshold is missed",
        )

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    common(p)

    p = sub.add_parser("sketch-bench", help="inner-product accuracy of the sketch vs dimension")
    common(p)
    p.add_argument("--c-list", type=int, nargs="+", default=[64])
    p.add_argument("--d-list", type=int, nargs="+", default=[16, 64, 256])
    p.add_argument("--trials", type=int, default=200)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    common(p)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=200)

    p = sub.add_parser("train", help="two-phase training on a generated dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--variant", choices=sorted(VARIANTS), default=None)

    p = sub.add_parser("eval", help="retrieval evaluation of a checkpoint")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--min-top1", type=float, default=None)

    p = sub.add_parser("ablate", help="train+eval a list of model variants")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--variants", default="single-branch,two-branch-256lm,ahbn")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            return cmd_gen_data(args)
        if args.command == "sketch-bench":
            return cmd_sketch_bench(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "ablate":
            return cmd_ablate(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ManifestError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
