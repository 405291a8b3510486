"""Command-line pipeline: generate, train, predict, eval, bench.

Every command reads its options from an optional JSON config file plus
command-line flags; flags win.  Exit codes: 0 success, 2 validation error,
3 training did not converge, 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import InvariantError, RelwinError, ValidationError
from .evaluation import curve_to_csv, evaluate_model, overlap_curve, summarize
from .fileio import write_json_doc
from .inference import infer_brute, infer_fast
from .model import TrainOptions, load_model, save_model, train_localization_model
from .synthdata import GenConfig, generate_scenes, load_dataset, save_dataset

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_INVARIANT = 4

PREDICTIONS_SCHEMA_VERSION = "1.0"
SUMMARY_SCHEMA_VERSION = "1.0"
BENCH_SCHEMA_VERSION = "1.0"

# Test-split scenes draw from a disjoint rng-index namespace.
_TEST_INDEX_OFFSET = 1 << 20

# name -> (type, default, help); None defaults mean "required".
_SPECS = {
    "generate": {
        "out_dir": (str, None, "directory for train/test split files"),
        "seed": (int, 0, "master seed"),
        "train_scenes": (int, 200, "number of training scenes"),
        "test_scenes": (int, 100, "number of test scenes"),
        "candidates": (int, 120, "candidate windows per scene"),
        "extent_width": (float, 640.0, "image extent width"),
        "extent_height": (float, 480.0, "image extent height"),
        "scale_min": (float, 0.2, "min ground-truth side, fraction of extent"),
        "scale_max": (float, 0.55, "max ground-truth side, fraction of extent"),
        "near_fraction": (float, 0.3, "fraction of near-ground-truth candidates"),
        "feature_dim": (int, 8, "appearance vector dimension"),
        "noise": (float, 0.05, "appearance noise level"),
        "container": (bool, False, "generate container-scenario scenes"),
        "gzip": (bool, False, "gzip the split files"),
    },
    "train": {
        "dataset": (str, None, "training split file"),
        "model_out": (str, None, "output model document"),
        "log_out": (str, "", "training log (JSON lines); default <model_out>.log.jsonl"),
        "gamma": (float, 1.0, "slack penalty"),
        "epsilon": (float, 1e-3, "constraint violation tolerance"),
        "max_rounds": (int, 100, "cutting-plane round cap"),
        "kernel_iterations": (int, 10, "kernel search sweeps"),
        "kernel_length": (float, 1.0, "initial kernel length scale"),
        "kernel_signal": (float, 1.0, "initial kernel signal variance"),
        "kernel_noise": (float, 5e-3, "initial kernel noise variance"),
        "subsample": (int, 512, "GP training subsample cap"),
        "features": (str, "full", "feature set: full or score_only"),
        "seed": (int, 0, "subsampling seed"),
        "threads": (int, 1, "worker threads (results are thread-count independent)"),
    },
    "predict": {
        "model": (str, None, "model document"),
        "dataset": (str, None, "dataset split file"),
        "out": (str, None, "output predictions document"),
        "threads": (int, 1, "worker threads (results are thread-count independent)"),
    },
    "eval": {
        "model": (str, None, "model document"),
        "dataset": (str, None, "dataset split file"),
        "curve_out": (str, None, "output curve CSV"),
        "summary_out": (str, None, "output summary document"),
        "threads": (int, 1, "worker threads (results are thread-count independent)"),
    },
    "bench": {
        "model": (str, None, "model document"),
        "dataset": (str, None, "dataset split file"),
        "out": (str, None, "output benchmark document"),
        "max_scenes": (int, 0, "benchmark at most this many scenes (0 = all)"),
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relwin",
        description="Window localization by relation-aware scoring: data "
                    "generation, training, prediction, evaluation, benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, spec in _SPECS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file; explicit flags override it")
        for key, (typ, default, help_text) in spec.items():
            flag = "--" + key.replace("_", "-")
            suffix = " (required)" if default is None else f" (default: {default})"
            if typ is bool:
                p.add_argument(flag, action=argparse.BooleanOptionalAction,
                               default=None, help=help_text + suffix)
            else:
                p.add_argument(flag, type=typ, default=None, help=help_text + suffix)
    return parser


def _merge_options(command: str, args: argparse.Namespace) -> dict:
    spec = _SPECS[command]
    merged = {key: default for key, (_, default, _) in spec.items()}
    if args.config is not None:
        try:
            raw = Path(args.config).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config file: {exc}") from exc
        try:
            loaded = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError("config file must contain a JSON object")
        for key, value in loaded.items():
            if key not in spec:
                raise ValidationError(f"unknown config key {key!r} for command {command!r}")
            typ = spec[key][0]
            try:
                merged[key] = typ(value) if not isinstance(value, typ) else value
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from exc
    for key in spec:
        flag_value = getattr(args, key)
        if flag_value is not None:
            merged[key] = flag_value
    missing = [k for k, v in merged.items() if v is None]
    if missing:
        raise ValidationError(f"missing required option(s): {', '.join(sorted(missing))}")
    return merged


def cmd_generate(opts: dict) -> int:
    cfg = GenConfig(
        seed=opts["seed"],
        n_candidates=opts["candidates"],
        extent=(opts["extent_width"], opts["extent_height"]),
        scale_range=(opts["scale_min"], opts["scale_max"]),
        near_fraction=opts["near_fraction"],
        container_scenario=opts["container"],
        feature_dim=opts["feature_dim"],
        noise=opts["noise"],
    )
    if opts["train_scenes"] < 1 or opts["test_scenes"] < 0:
        raise ValidationError("train_scenes must be >= 1 and test_scenes >= 0")
    out_dir = Path(opts["out_dir"])
    suffix = ".json.gz" if opts["gzip"] else ".json"
    train = generate_scenes(cfg, opts["train_scenes"], start=0, id_prefix="train")
    save_dataset(out_dir / f"train{suffix}", train, "train", cfg)
    test = generate_scenes(cfg, opts["test_scenes"], start=_TEST_INDEX_OFFSET,
                           id_prefix="test")
    save_dataset(out_dir / f"test{suffix}", test, "test", cfg)
    print(f"wrote {len(train)} train / {len(test)} test scenes to {out_dir}")
    return EXIT_OK


def cmd_train(opts: dict) -> int:
    dataset = load_dataset(opts["dataset"])
    train_opts = TrainOptions(
        gamma=opts["gamma"],
        epsilon=opts["epsilon"],
        max_rounds=opts["max_rounds"],
        kernel_length=opts["kernel_length"],
        kernel_signal=opts["kernel_signal"],
        kernel_noise=opts["kernel_noise"],
        kernel_iterations=opts["kernel_iterations"],
        gp_subsample=opts["subsample"],
        seed=opts["seed"],
        features=opts["features"],
        threads=opts["threads"],
    )
    model, state = train_localization_model(dataset.scenes, train_opts)
    save_model(model, opts["model_out"])
    log_path = Path(opts["log_out"]) if opts["log_out"] else Path(
        str(opts["model_out"]) + ".log.jsonl")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("w") as handle:
        for record in state.log:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
        handle.write(json.dumps({
            "converged": state.converged,
            "rounds": state.rounds,
            "working_set_size": len(state.constraints),
        }, sort_keys=True) + "\n")
    status = "converged" if state.converged else "did NOT converge"
    print(f"training {status} after {state.rounds} round(s); "
          f"model written to {opts['model_out']}")
    return EXIT_OK if state.converged else EXIT_NO_CONVERGENCE


def cmd_predict(opts: dict) -> int:
    model = load_model(opts["model"])
    dataset = load_dataset(opts["dataset"])
    threads = int(opts["threads"])
    if threads < 1:
        raise ValidationError("threads must be at least 1")

    def one(scene):
        ctx = model.context_for(scene)
        result = infer_fast(model.weights, ctx)
        return {
            "scene_id": scene.scene_id,
            "best_index": int(result.best_index),
            "window": scene.windows[result.best_index].tolist(),
            "score": float(result.best_score),
        }

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, dataset.scenes))
    else:
        records = [one(s) for s in dataset.scenes]
    write_json_doc(opts["out"], {
        "schema_version": PREDICTIONS_SCHEMA_VERSION,
        "kind": "relwin/predictions",
        "records": records,
    })
    print(f"wrote {len(records)} predictions to {opts['out']}")
    return EXIT_OK


def cmd_eval(opts: dict) -> int:
    model = load_model(opts["model"])
    dataset = load_dataset(opts["dataset"])
    threads = int(opts["threads"])
    if threads < 1:
        raise ValidationError("threads must be at least 1")
    if all(s.ground_truth is None for s in dataset.scenes):
        raise ValidationError("dataset has no ground truth to evaluate against")
    report = evaluate_model(model, dataset.scenes, threads=threads)
    curve = overlap_curve(report.records)
    curve_path = Path(opts["curve_out"])
    curve_path.parent.mkdir(parents=True, exist_ok=True)
    curve_path.write_text(curve_to_csv(curve))
    summary = dict(summarize(report))
    summary["schema_version"] = SUMMARY_SCHEMA_VERSION
    summary["kind"] = "relwin/eval_summary"
    write_json_doc(opts["summary_out"], summary)
    print(f"evaluated {len(report.records)} scene(s), skipped {report.skipped}; "
          f"mean overlap {summary['mean_overlap']:.4f}")
    return EXIT_OK


def cmd_bench(opts: dict) -> int:
    model = load_model(opts["model"])
    dataset = load_dataset(opts["dataset"])
    scenes = dataset.scenes
    limit = int(opts["max_scenes"])
    if limit > 0:
        scenes = scenes[:limit]
    if not scenes:
        raise ValidationError("benchmark needs at least one scene")
    records = []
    for scene in scenes:
        ctx = model.context_for(scene)
        brute = infer_brute(model.weights, ctx)
        fast = infer_fast(model.weights, ctx)
        agree = (brute.best_index == fast.best_index
                 and abs(brute.best_score - fast.best_score) <= 1e-9)
        if not agree:
            raise InvariantError(
                f"scene {scene.scene_id}: brute ({brute.best_index}, {brute.best_score!r}) "
                f"!= fast ({fast.best_index}, {fast.best_score!r})")
        n = ctx.n
        records.append({
            "scene_id": scene.scene_id,
            "n_candidates": n,
            "brute_seconds": brute.elapsed_seconds,
            "fast_seconds": fast.elapsed_seconds,
            "speedup": brute.elapsed_seconds / max(fast.elapsed_seconds, 1e-12),
            "full_evaluations": fast.full_evaluations,
            "full_evaluation_ratio": fast.full_evaluations / n,
            "agree": True,
        })
    aggregate = {
        "scenes": len(records),
        "total_brute_seconds": float(sum(r["brute_seconds"] for r in records)),
        "total_fast_seconds": float(sum(r["fast_seconds"] for r in records)),
        "mean_speedup": float(np.mean([r["speedup"] for r in records])),
        "overall_speedup": float(sum(r["brute_seconds"] for r in records)
                                 / max(sum(r["fast_seconds"] for r in records), 1e-12)),
        "mean_full_evaluation_ratio": float(np.mean([r["full_evaluation_ratio"]
                                                     for r in records])),
        "all_agree": True,
    }
    write_json_doc(opts["out"], {
        "schema_version": BENCH_SCHEMA_VERSION,
        "kind": "relwin/bench",
        "records": records,
        "aggregate": aggregate,
    })
    print(f"benchmarked {len(records)} scene(s): overall speedup "
          f"{aggregate['overall_speedup']:.1f}x, mean full-evaluation ratio "
          f"{aggregate['mean_full_evaluation_ratio']:.3f}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge_options(args.command, args)
        return _COMMANDS[args.command](opts)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except RelwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
