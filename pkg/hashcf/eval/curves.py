"""
User-bucket analyses: per-user NDCG@10 ordered by a user property and smoothed.

Three orderings are supported: the user's NDCG@10 under real-valued MF
(`mf-ndcg`), the number of items the user rated (`n-rated`), and the mean
popularity of the user's rated items (`avg-item-popularity`), where an item's
popularity is the fraction of users who rated it.
"""
from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Dict, Optional

import numpy as np
import pandas as pd

from hashcf.core.errors import ConfigurationError, EvaluationError

if TYPE_CHECKING:
    from hashcf.data.ratings import RatingsDataset
    from .metrics import EvalReport

logger = logging.getLogger(__name__)

CURVE_KEYS = {"mf-ndcg": "key_mf", "n-rated": "key_nrated", "avg-item-popularity": "key_pop"}


def item_popularity(dataset: "RatingsDataset", split: str = "train") -> np.ndarray:
    """Fraction of all users who rated each item in the split."""
    frame = dataset.split(split)
    counts = np.bincount(frame.drop_duplicates(["user", "item"])["item"].to_numpy(), minlength=dataset.n_items)
    return counts / max(dataset.n_users, 1)


def user_keys(dataset: "RatingsDataset", mf_report: Optional["EvalReport"] = None,
              split: str = "train") -> pd.DataFrame:
    """Per-user ordering keys indexed by user id; key_mf is NaN without an MF report."""
    frame = dataset.split(split)
    popularity = item_popularity(dataset, split)
    users = np.arange(dataset.n_users)
    n_rated = np.bincount(frame["user"].to_numpy(), minlength=dataset.n_users)
    pop_sum = np.bincount(frame["user"].to_numpy(), weights=popularity[frame["item"].to_numpy()],
                          minlength=dataset.n_users)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg_pop = np.where(n_rated > 0, pop_sum / np.maximum(n_rated, 1), np.nan)
    keys = pd.DataFrame({"key_nrated": n_rated.astype(np.float64), "key_pop": avg_pop}, index=users)
    keys.index.name = "user"
    if mf_report is not None:
        keys["key_mf"] = mf_report.per_user.set_index("user")["ndcg10"].reindex(users).to_numpy()
    else:
        keys["key_mf"] = np.nan
    return keys


def bucket_curve(values, keys, window: int = 500) -> pd.DataFrame:
    """
    Sort users by key and smooth their metric with a centered moving average.

    The window holds min(window, n) users and is shifted inward at both ends so
    that every point averages exactly that many users.

    Args:
        values: Per-user metric values.
        keys: Per-user ordering key, aligned with `values`.
        window (int): Number of neighbouring users averaged per point.

    Returns:
        pd.DataFrame: Columns `x` (sorted key) and `y` (smoothed metric).
    """
    values = np.asarray(values, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    if values.shape != keys.shape:
        raise EvaluationError("values and keys must align")
    present = ~(np.isnan(values) | np.isnan(keys))
    values, keys = values[present], keys[present]
    n = values.size
    if n < 2:
        raise EvaluationError(f"a bucket curve needs at least 2 users, got {n}")
    if window < 1:
        raise ConfigurationError("window must be at least 1")
    order = np.argsort(keys, kind="stable")
    x, y = keys[order], values[order]
    width = min(window, n)
    starts = np.clip(np.arange(n) - width // 2, 0, n - width)
    cumulative = np.concatenate([[0.0], np.cumsum(y)])
    smoothed = (cumulative[starts + width] - cumulative[starts]) / width
    return pd.DataFrame({"x": x, "y": smoothed})


def report_curves(report: "EvalReport", keys: pd.DataFrame, window: int = 500,
                  metric: str = "ndcg10") -> Dict[str, pd.DataFrame]:
    """Every available bucket curve of one report; orderings without key values are skipped."""
    values = report.per_user.set_index("user")[metric]
    curves = {}
    for name, column in CURVE_KEYS.items():
        key = keys[column].reindex(values.index)
        if key.notna().sum() < 2:
            logger.info("Skipping '%s' curve: key not available", name)
            continue
        curves[name] = bucket_curve(values.to_numpy(), key.to_numpy(), window)
    return curves


def write_curve_csv(curve: pd.DataFrame, path: str):
    curve[["x", "y"]].to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


def plot_curve(curve: pd.DataFrame, path: str, title: str = "", label: Optional[str] = None,
               xlabel: str = "", ylabel: str = "NDCG@10"):
    """Render one curve to an image file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve["x"], curve["y"], label=label)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if label:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
