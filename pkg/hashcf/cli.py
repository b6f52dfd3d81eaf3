"""
Command-line entry point.

    python -m hashcf prepare [--synthetic]
    python -m hashcf train --model vh-phd
    python -m hashcf eval --model vh-phd [--plot]
    python -m hashcf rank --model vh-phd --user 0 --k 10
    python -m hashcf bench-distance
    python -m hashcf bench-convergence [--sampling-study]
    python -m hashcf report [RUN_DIR ...]

Settings come from `--config` (JSON or YAML) with every given flag taking
precedence. Artifacts are written below `--out`:

    data/                      splits, id maps, manifest.json
    model/<kind>/              model.json + model.bin, code files, train_log.csv
    eval/<kind>/               report.json, per_user.csv, curves/
    bench/                     distance and convergence tables
"""
import argparse
import glob
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from hashcf.core.baselines import MFParams, evaluate_mf, mf_train, quantize
from hashcf.core.bitcode import CodeMatrix, NegatedItemStore, counting_argsort, hamming_many, rank_items
from hashcf.core.config import DATASET_FORMATS, LOG_LEVELS, MODEL_KINDS, RunConfig, get_default_config, merge_configs
from hashcf.core.errors import ArtifactNotFoundError, ConfigurationError, EntityLookupError, HashCFError
from hashcf.core.vhmodel import EncoderParams, SamplingPolicy, export_codes, train
from hashcf.data.ratings import RatingsDataset, dedup_first, filter_min_ratings, parse_ratings, split
from hashcf.data.synthetic import SYNTHETIC_DEFAULTS, planted_ratings, write_ratings_csv
from hashcf.eval.curves import plot_curve, report_curves, user_keys, write_curve_csv
from hashcf.eval.metrics import evaluate
from hashcf.storage.checkpoint_storage import CheckpointStorage
from hashcf.storage.code_storage import read_codes, write_codes

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("prepare", "train", "eval", "rank", "bench-distance", "bench-convergence", "report")
CHECKPOINT = "model"
REPORT_COLUMNS = ["model", "bits", "seed", "ndcg5", "ndcg10", "mrr"]


def _k_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got '{text}'")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--bits", type=int)
    common.add_argument("--model", choices=MODEL_KINDS)
    common.add_argument("--out", help="output directory")
    common.add_argument("--dataset", help="ratings file")
    common.add_argument("--format", choices=DATASET_FORMATS)
    common.add_argument("--k", type=_k_list, dest="ks", help="comma-separated cutoffs, e.g. 5,10")
    common.add_argument("--log-level", choices=LOG_LEVELS, dest="log_level")

    parser = argparse.ArgumentParser(prog="hashcf", description="Hashing-based collaborative filtering toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    prepare = subparsers.add_parser("prepare", parents=[common], help="parse, filter and split a ratings file")
    prepare.add_argument("--synthetic", action="store_true", default=None,
                         help="generate the bundled planted dataset instead of reading --dataset")
    subparsers.add_parser("train", parents=[common], help="train a model and export its codes")
    evaluate_cmd = subparsers.add_parser("eval", parents=[common], help="evaluate a trained model")
    evaluate_cmd.add_argument("--plot", action="store_true", help="also render curve images")
    evaluate_cmd.add_argument("--full-catalog", action="store_true", default=None, dest="full_catalog")
    rank = subparsers.add_parser("rank", parents=[common], help="print a user's top-k items")
    rank.add_argument("--user", type=int)
    bench = subparsers.add_parser("bench-distance", parents=[common], help="distance kernel throughput")
    bench.add_argument("--n", type=int, dest="bench_n")
    bench.add_argument("--reps", type=int, dest="bench_reps")
    convergence = subparsers.add_parser("bench-convergence", parents=[common], help="PHD vs Hamming convergence")
    convergence.add_argument("--epochs", type=int)
    convergence.add_argument("--sampling-study", action="store_true", dest="sampling_study")
    report = subparsers.add_parser("report", parents=[common], help="join evaluation reports into one table")
    report.add_argument("runs", nargs="*", help="run directories (default: --out)")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_yaml(args.config) if args.config else get_default_config()
    overrides = {name: getattr(args, name, None) for name in
                 ("seed", "bits", "model", "out", "dataset", "format", "ks", "log_level", "synthetic",
                  "full_catalog", "user", "bench_n", "bench_reps", "epochs")}
    return merge_configs(base, overrides)


def _dirs(config: RunConfig) -> Dict[str, str]:
    return {
        "data": os.path.join(config.out, "data"),
        "model": os.path.join(config.out, "model", config.model),
        "eval": os.path.join(config.out, "eval", config.model),
        "bench": os.path.join(config.out, "bench"),
    }


def _load_dataset(config: RunConfig) -> RatingsDataset:
    directory = _dirs(config)["data"]
    if not os.path.exists(os.path.join(directory, "manifest.json")):
        raise ArtifactNotFoundError(f"prepared dataset not found in {directory}; run 'prepare' first")
    return RatingsDataset.load(directory)


def cmd_prepare(config: RunConfig, args) -> int:
    directory = _dirs(config)["data"]
    if config.synthetic:
        planted = planted_ratings(**{**SYNTHETIC_DEFAULTS, "bits": config.bits, "seed": config.seed,
                                     "rating_min": config.rating_min, "rating_max": config.rating_max})
        source = os.path.join(directory, "synthetic.csv")
        write_ratings_csv(planted.interactions, source)
        fmt = "csv"
    else:
        if not config.dataset:
            raise ConfigurationError("no dataset given; pass --dataset PATH or --synthetic")
        if not os.path.exists(config.dataset):
            raise ArtifactNotFoundError(f"dataset not found: {config.dataset}")
        source, fmt = config.dataset, config.format
    interactions = parse_ratings(source, fmt, config.rating_min, config.rating_max)
    interactions = filter_min_ratings(dedup_first(interactions), config.min_count, config.fixpoint_filter)
    dataset = split(interactions, config.proportions, config.split_seed, config.temporal_split)
    dataset.save(directory, min_count=config.min_count, config_hash=config.config_hash())
    print(f"prepared {dataset.n_users} users, {dataset.n_items} items -> {directory}")
    return 0


def _write_code_files(directory: str, users: CodeMatrix, items: CodeMatrix):
    write_codes(os.path.join(directory, "users.bhcf"), users)
    write_codes(os.path.join(directory, "items.bhcf"), items)
    write_codes(os.path.join(directory, "items_neg.bhcf"), NegatedItemStore.from_items(items))


def cmd_train(config: RunConfig, args) -> int:
    dataset = _load_dataset(config)
    directory = _dirs(config)["model"]
    os.makedirs(directory, exist_ok=True)
    storage = CheckpointStorage(directory)
    if config.model.startswith("vh"):
        result = train(dataset, config.train_config())
        tables = {"user_table": result.params.user_table, "item_table": result.params.item_table}
        codes = export_codes(result.params)
        _write_code_files(directory, codes.users, codes.items)
        kind, m = "vh", result.params.m
    else:
        result = mf_train(dataset, config.mf_config())
        tables = result.params.tables()
        if config.model != "mf":
            users, items = quantize(result.params, config.model.split("-")[1], config.pooled_thresholds)
            _write_code_files(directory, users, items)
        kind, m = "mf", result.params.d
    storage.save(CHECKPOINT, kind, m, tables, config.to_dict(), config.config_hash(), config.seed,
                 epoch=result.best_epoch,
                 metrics={"val_ndcg10": result.best_ndcg, "val_loss": result.best_val_loss})
    result.log.to_csv(os.path.join(directory, "train_log.csv"))
    print(f"trained {config.model} (best epoch {result.best_epoch}) -> {directory}")
    return 0


def _load_checkpoint(config: RunConfig):
    return CheckpointStorage(_dirs(config)["model"]).load(CHECKPOINT)


def _mf_keys_report(config: RunConfig):
    path = os.path.join(config.out, "eval", "mf", "per_user.csv")
    if not os.path.exists(path):
        return None
    return pd.read_csv(path)


def cmd_eval(config: RunConfig, args) -> int:
    meta, tables = _load_checkpoint(config)
    dataset = _load_dataset(config)
    metadata = dict(model=config.model, seed=config.seed, config_hash=meta.config_hash, ks=config.ks,
                    full_catalog=config.full_catalog)
    if config.model.startswith("vh"):
        params = EncoderParams(tables["user_table"], tables["item_table"])
        codes = export_codes(params, SamplingPolicy(config.eval_sampling), np.random.default_rng(config.seed))
        scorer = "phd" if config.model == "vh-phd" else "hamming"
        items = codes.negated_items if scorer == "phd" else codes.items
        report = evaluate(codes.users, items, dataset, scorer, **metadata)
    elif config.model == "mf":
        report = evaluate_mf(MFParams.from_tables(tables), dataset, **metadata)
    else:
        users, items = quantize(MFParams.from_tables(tables), config.model.split("-")[1], config.pooled_thresholds)
        report = evaluate(users, items, dataset, "hamming", **metadata)

    keys = user_keys(dataset)
    mf_frame = report.per_user if config.model == "mf" else _mf_keys_report(config)
    if mf_frame is not None and "ndcg10" in mf_frame:
        keys["key_mf"] = mf_frame.set_index("user")["ndcg10"].reindex(keys.index).to_numpy()
    report.with_keys(keys)

    directory = _dirs(config)["eval"]
    curve_dir = os.path.join(directory, "curves")
    os.makedirs(curve_dir, exist_ok=True)
    report.to_json(os.path.join(directory, "report.json"))
    report.to_csv(os.path.join(directory, "per_user.csv"))
    if "ndcg10" in report.per_user and report.n_users >= 2:
        for name, curve in report_curves(report, keys, config.curve_window).items():
            write_curve_csv(curve, os.path.join(curve_dir, f"{name}.csv"))
            if args.plot:
                plot_curve(curve, os.path.join(curve_dir, f"{name}.png"), title=f"{config.model}: {name}",
                           label=config.model, xlabel=name)
    summary = ", ".join(f"{k}={v:.4f}" for k, v in report.aggregates.items())
    print(f"{config.model} m={report.m} users={report.n_users}: {summary}")
    return 0


def _original_item_ids(config: RunConfig) -> Optional[np.ndarray]:
    path = os.path.join(_dirs(config)["data"], "items.csv")
    if not os.path.exists(path):
        return None
    return pd.read_csv(path, dtype=str)["original_id"].to_numpy(dtype=object)


def cmd_rank(config: RunConfig, args) -> int:
    k = max(config.ks)
    user = config.user
    directory = _dirs(config)["model"]
    if config.model == "mf":
        _, tables = _load_checkpoint(config)
        params = MFParams.from_tables(tables)
        if not 0 <= user < params.user_vectors.shape[0]:
            raise EntityLookupError(f"user {user} out of range [0, {params.user_vectors.shape[0]})")
        scores = params.user_scores(user)
        order = np.lexsort((np.arange(scores.size), -scores))[:k]
        ranking = [(int(i), float(scores[i])) for i in order]
    else:
        name = "items_neg.bhcf" if config.model == "vh-phd" else "items.bhcf"
        paths = [os.path.join(directory, "users.bhcf"), os.path.join(directory, name)]
        for path in paths:
            if not os.path.exists(path):
                raise ArtifactNotFoundError(f"code file not found: {path}; run 'train' first")
        users, items = read_codes(paths[0]), read_codes(paths[1])
        if not 0 <= user < len(users):
            raise EntityLookupError(f"user {user} out of range [0, {len(users)})")
        if config.model == "vh-phd":
            ranking = rank_items(users[user], items, k)
        else:
            distances = hamming_many(users[user], items)
            ranking = [(int(i), int(distances[i])) for i in counting_argsort(distances, users.m)[:k]]
    original = _original_item_ids(config)
    for position, (item, score) in enumerate(ranking, start=1):
        label = original[item] if original is not None and item < len(original) else item
        print(f"{position}\t{item}\t{label}\t{score}")
    return 0


def cmd_bench_distance(config: RunConfig, args) -> int:
    from hashcf.bench.distance import bench_distance, write_bench_results

    results = bench_distance(config.bench_n, config.bits, config.bench_reps, config.seed)
    paths = write_bench_results(results, _dirs(config)["bench"], config.seed, config.config_hash())
    for r in results:
        print(f"{r.kernel}\t{r.mean_seconds:.6f}s\t{r.overhead_pct:+.1f}%")
    print(f"-> {paths['csv']}")
    return 0


def cmd_bench_convergence(config: RunConfig, args) -> int:
    from hashcf.bench.convergence import bench_convergence, sampling_study, write_convergence

    dataset = _load_dataset(config)
    directory = _dirs(config)["bench"]
    train_config = config.train_config()
    if args.sampling_study:
        frame = sampling_study(dataset, train_config, config.bench_seeds)
        os.makedirs(directory, exist_ok=True)
        frame.to_csv(os.path.join(directory, "sampling_study.csv"), index=False, lineterminator="\n",
                     float_format="%.10g")
        print(frame.groupby(["train_sampling", "eval_sampling"], sort=False)["ndcg10"].mean().to_string())
        return 0
    table = bench_convergence(dataset, train_config, config.epochs, config.bench_seeds)
    write_convergence(table, directory)
    print(table.summary().to_string(index=False))
    return 0


def collect_reports(run_dirs: Sequence[str]) -> pd.DataFrame:
    """One row per evaluation report found below the run directories, plus a mean row per (model, bits)."""
    rows = []
    for run_dir in run_dirs:
        for path in sorted(glob.glob(os.path.join(run_dir, "eval", "*", "report.json"))):
            with open(path) as handle:
                report = json.load(handle)
            metrics = report["metrics"]
            rows.append({"model": report["model"], "bits": report["m"], "seed": str(report["seed"]),
                         "ndcg5": metrics.get("ndcg5", np.nan), "ndcg10": metrics.get("ndcg10", np.nan),
                         "mrr": metrics.get("mrr", np.nan)})
    if not rows:
        raise ArtifactNotFoundError(f"no evaluation reports found under {', '.join(run_dirs)}")
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS).sort_values(["model", "bits", "seed"], kind="stable")
    means = frame.groupby(["model", "bits"], sort=True)[["ndcg5", "ndcg10", "mrr"]].mean().reset_index()
    means["seed"] = "mean"
    return pd.concat([frame, means[REPORT_COLUMNS]], ignore_index=True).sort_values(
        ["model", "bits"], kind="stable").reset_index(drop=True)


def cmd_report(config: RunConfig, args) -> int:
    frame = collect_reports(args.runs or [config.out])
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, "report.csv")
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.4f")
    print(frame.to_string(index=False))
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "rank": cmd_rank,
    "bench-distance": cmd_bench_distance,
    "bench-convergence": cmd_bench_convergence,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns 0 on success, 1 on a pipeline failure (argparse exits 2 on usage errors)."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        logging.getLogger().setLevel(config.log_level)
        return COMMANDS[args.command](config, args)
    except (HashCFError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
