"""
Convergence comparison of PHD and Hamming training, and the sampling-policy study.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from hashcf.core.config import TrainConfig
from hashcf.core.errors import ConfigurationError
from hashcf.core.vhmodel import SamplingPolicy, export_codes, train
from hashcf.eval.metrics import evaluate

logger = logging.getLogger(__name__)

SAMPLING_COMBINATIONS = [("stochastic", "deterministic"), ("deterministic", "deterministic"),
                         ("stochastic", "stochastic"), ("deterministic", "stochastic")]


@dataclass
class ConvergenceRun:
    dissimilarity: str
    seed: int
    val_loss: np.ndarray
    mean_batch_seconds: float

    @property
    def epochs(self) -> int:
        return len(self.val_loss)


def epochs_to_reach(curve: Sequence[float], target: float) -> Optional[int]:
    """First (1-based) epoch whose value is at or below target; None if never reached."""
    hits = np.flatnonzero(np.asarray(curve, dtype=np.float64) <= target)
    return int(hits[0]) + 1 if hits.size else None


@dataclass
class ConvergenceTable:
    runs: List[ConvergenceRun] = field(default_factory=list)

    def curves(self) -> pd.DataFrame:
        """Long format: dissimilarity, seed, epoch, val_loss."""
        rows = [(r.dissimilarity, r.seed, epoch + 1, float(loss))
                for r in self.runs for epoch, loss in enumerate(r.val_loss)]
        return pd.DataFrame(rows, columns=["dissimilarity", "seed", "epoch", "val_loss"])

    def run(self, dissimilarity: str, seed: int) -> ConvergenceRun:
        for r in self.runs:
            if r.dissimilarity == dissimilarity and r.seed == seed:
                return r
        raise KeyError((dissimilarity, seed))

    def summary(self) -> pd.DataFrame:
        """Per seed: epochs PHD needs to reach Hamming's final validation loss, and batch timings."""
        rows = []
        for seed in sorted({r.seed for r in self.runs}):
            phd, hamming = self.run("phd", seed), self.run("hamming", seed)
            target = float(hamming.val_loss[-1])
            reached = epochs_to_reach(phd.val_loss, target)
            rows.append({
                "seed": seed,
                "hamming_final_val_loss": target,
                "hamming_epochs": hamming.epochs,
                "phd_epochs_to_reach": np.nan if reached is None else reached,
                "phd_batch_seconds": phd.mean_batch_seconds,
                "hamming_batch_seconds": hamming.mean_batch_seconds,
            })
        return pd.DataFrame(rows)


def bench_convergence(dataset, config: TrainConfig, epochs: int, seeds: Sequence[int]) -> ConvergenceTable:
    """
    Train PHD and Hamming models with identical settings for a fixed number of epochs.

    Early stopping is disabled so both curves span all epochs.
    """
    if not seeds:
        raise ConfigurationError("need at least one seed")
    table = ConvergenceTable()
    for seed in seeds:
        for kind in ("phd", "hamming"):
            run_config = TrainConfig(**{**config.to_dict(), "dissimilarity": kind, "seed": int(seed),
                                        "epochs": epochs, "patience": None})
            result = train(dataset, run_config)
            table.runs.append(ConvergenceRun(kind, int(seed), result.log.column("val_loss"),
                                             result.mean_batch_seconds))
            logger.info("%s seed %d: final val_loss %.5f, %.6fs per batch", kind, seed,
                        table.runs[-1].val_loss[-1], result.mean_batch_seconds)
    return table


def sampling_study(dataset, config: TrainConfig, seeds: Sequence[int], split: str = "test") -> pd.DataFrame:
    """
    NDCG@10 of every train/eval sampling combination.

    One model is trained per (training policy, seed); its test codes are then
    exported deterministically and stochastically.
    """
    rows = []
    for seed in seeds:
        for train_mode in ("stochastic", "deterministic"):
            run_config = TrainConfig(**{**config.to_dict(), "train_sampling": train_mode, "seed": int(seed)})
            params = train(dataset, run_config).params
            for eval_mode in ("deterministic", "stochastic"):
                codes = export_codes(params, SamplingPolicy(eval_mode), np.random.default_rng(seed))
                items = codes.negated_items if config.dissimilarity == "phd" else codes.items
                report = evaluate(codes.users, items, dataset, config.dissimilarity, split=split, ks=(10,))
                rows.append({"train_sampling": train_mode, "eval_sampling": eval_mode, "seed": int(seed),
                             "ndcg10": report.aggregates["ndcg10"]})
                logger.info("train=%s eval=%s seed=%d NDCG@10=%.5f", train_mode, eval_mode, seed,
                            report.aggregates["ndcg10"])
    frame = pd.DataFrame(rows)
    order = {combo: i for i, combo in enumerate(SAMPLING_COMBINATIONS)}
    frame["_order"] = [order[(t, e)] for t, e in zip(frame["train_sampling"], frame["eval_sampling"])]
    return frame.sort_values(["_order", "seed"], kind="stable").drop(columns="_order").reset_index(drop=True)


def write_convergence(table: ConvergenceTable, directory: str):
    os.makedirs(directory, exist_ok=True)
    table.curves().to_csv(os.path.join(directory, "convergence_curves.csv"), index=False, lineterminator="\n",
                          float_format="%.10g")
    table.summary().to_csv(os.path.join(directory, "convergence_summary.csv"), index=False, lineterminator="\n",
                           float_format="%.10g")
