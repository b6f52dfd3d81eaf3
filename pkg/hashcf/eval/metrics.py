"""
Ranking metrics over per-user held-out items.

Each user's candidate items (their test items, or the whole catalog) are ranked
by the scorer, ascending dissimilarity for hash codes and descending inner
product for real vectors, with ties broken by ascending item id. NDCG@k and
the reciprocal rank of the first maximally rated item are computed per user and
averaged over users with a non-empty split.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from hashcf.core.bitcode import CodeMatrix, NegatedItemStore, counting_argsort, hamming_many, phd_many
from hashcf.core.errors import ConfigurationError, EvaluationError, InvalidInputError
from hashcf.core.utils import dump_json
from hashcf.storage.schemas import ReportSummary

if TYPE_CHECKING:
    from hashcf.data.ratings import RatingsDataset

logger = logging.getLogger(__name__)

SCORERS = ("phd", "hamming", "inner-product")
KEY_COLUMNS = ("key_mf", "key_nrated", "key_pop")


def ndcg_at_k(ratings: Sequence[float], k: int) -> Optional[float]:
    """
    NDCG@k of a ranked list of relevances, DCG = sum (2^rel - 1) / log2(pos + 1).

    Args:
        ratings: Relevances in ranked order.
        k (int): Cutoff, at least 1.

    Returns:
        The NDCG in [0, 1]; 1.0 when the ideal DCG is 0; None for an empty list.
    """
    if k < 1:
        raise InvalidInputError(f"k must be at least 1, got {k}")
    rels = np.asarray(ratings, dtype=np.float64)
    if rels.size == 0:
        return None
    if np.any(rels < 0):
        raise InvalidInputError("relevances must be non-negative")
    top = min(k, rels.size)
    discounts = 1.0 / np.log2(np.arange(2, top + 2))
    dcg = float(np.sum((2.0 ** rels[:top] - 1.0) * discounts))
    ideal = np.sort(rels)[::-1]
    idcg = float(np.sum((2.0 ** ideal[:top] - 1.0) * discounts))
    if idcg == 0.0:
        return 1.0
    return dcg / idcg


def reciprocal_rank(ratings: Sequence[float]) -> Optional[float]:
    """1 / position of the first item carrying the maximum rating; None for an empty list."""
    rels = np.asarray(ratings, dtype=np.float64)
    if rels.size == 0:
        return None
    return 1.0 / (int(np.argmax(rels == rels.max())) + 1)


@dataclass
class RankedList:
    """One user's candidates in ranked order with their scores and true ratings."""
    user: int
    items: np.ndarray
    scores: np.ndarray
    ratings: np.ndarray

    def __len__(self) -> int:
        return len(self.items)

    def ndcg(self, k: int) -> Optional[float]:
        return ndcg_at_k(self.ratings, k)

    def reciprocal_rank(self) -> Optional[float]:
        return reciprocal_rank(self.ratings)


@dataclass
class EvalReport:
    per_user: pd.DataFrame
    aggregates: Dict[str, float]
    model: str = ""
    m: int = 0
    seed: int = 0
    scorer: str = "phd"
    split: str = "test"
    full_catalog: bool = False
    ks: Sequence[int] = (5, 10)
    config_hash: Optional[str] = None
    zero_relevance_users: int = 0
    keys: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def n_users(self) -> int:
        return len(self.per_user)

    def metric(self, name: str) -> np.ndarray:
        return self.per_user[name].to_numpy(dtype=np.float64)

    def summary(self) -> ReportSummary:
        return ReportSummary(model=self.model, m=self.m, seed=self.seed, scorer=self.scorer, split=self.split,
                             full_catalog=self.full_catalog, n_users=self.n_users,
                             metrics={k: round(v, 12) for k, v in self.aggregates.items()},
                             config_hash=self.config_hash)

    def to_json(self, path: str):
        dump_json(self.summary().model_dump(), path)

    def with_keys(self, keys: pd.DataFrame) -> "EvalReport":
        """Attach per-user ordering keys (a frame indexed by user with KEY_COLUMNS)."""
        self.keys = keys
        return self

    def per_user_frame(self) -> pd.DataFrame:
        frame = self.per_user.copy()
        for column in KEY_COLUMNS:
            if self.keys is not None and column in self.keys:
                frame[column] = self.keys[column].reindex(frame["user"]).to_numpy()
            else:
                frame[column] = np.nan
        return frame

    def to_csv(self, path: str):
        """Per-user CSV `user,ndcg5,ndcg10,rr,key_mf,key_nrated,key_pop`."""
        self.per_user_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


def _item_store(item_repr, scorer: str):
    if scorer == "phd":
        if isinstance(item_repr, NegatedItemStore):
            return item_repr
        if isinstance(item_repr, CodeMatrix):
            return NegatedItemStore.from_items(item_repr)
    elif scorer == "hamming":
        if isinstance(item_repr, CodeMatrix):
            return item_repr
        if isinstance(item_repr, NegatedItemStore):
            return item_repr.originals()
    elif isinstance(item_repr, np.ndarray) and item_repr.ndim == 2:
        return item_repr
    raise ConfigurationError(f"item representation {type(item_repr).__name__} does not fit scorer '{scorer}'")


def _check_coverage(kind: str, count: int, needed: np.ndarray):
    missing = needed[needed >= count]
    if missing.size:
        raise EvaluationError(f"no representation for {kind} {int(missing.min())} ({count} available)")


def rank_user(user: int, user_repr, items_repr, scorer: str, candidates: np.ndarray,
              relevance: np.ndarray) -> RankedList:
    """Rank one user's candidates (sorted ascending by item id) with the given scorer."""
    if scorer == "inner-product":
        scores = items_repr[candidates] @ user_repr[user]
        order = np.lexsort((candidates, -scores))
    else:
        query = user_repr[user]
        if scorer == "phd":
            scores = phd_many(query, items_repr, rows=candidates)
        else:
            scores = hamming_many(query, items_repr, rows=candidates)
        order = counting_argsort(scores, query.m)
    return RankedList(user, candidates[order], scores[order], relevance[order])


def evaluate(user_repr: Union[CodeMatrix, np.ndarray], item_repr, dataset: "RatingsDataset", scorer: str = "phd",
             split: str = "test", ks: Sequence[int] = (5, 10), full_catalog: bool = False, model: str = "",
             m: Optional[int] = None, seed: int = 0, config_hash: Optional[str] = None) -> EvalReport:
    """
    Score every user's held-out items and aggregate NDCG@k and MRR.

    Args:
        user_repr: User codes (CodeMatrix) or user vectors (n_users x d array for inner-product).
        item_repr: NegatedItemStore/CodeMatrix for the code scorers, an item vector array otherwise.
        dataset (RatingsDataset): Supplies the split and the catalog size.
        scorer (str): One of 'phd', 'hamming', 'inner-product'.
        split (str): Which split provides the candidates and the ground truth.
        ks: NDCG cutoffs.
        full_catalog (bool): Rank the whole catalog; unrated items have relevance 0.

    Returns:
        EvalReport: Per-user metrics and their means over users with a non-empty split.
    """
    if scorer not in SCORERS:
        raise ConfigurationError(f"unknown scorer '{scorer}', expected one of {SCORERS}")
    ks = tuple(int(k) for k in ks)
    items_repr = _item_store(item_repr, scorer)
    if scorer == "inner-product":
        user_repr = np.asarray(user_repr, dtype=np.float64)
        items_repr = np.asarray(items_repr, dtype=np.float64)
        if user_repr.ndim != 2 or user_repr.shape[1] != items_repr.shape[1]:
            raise ConfigurationError("user and item vectors must be 2-D with equal dimension")
        width = user_repr.shape[1]
    elif not isinstance(user_repr, CodeMatrix):
        raise ConfigurationError(f"scorer '{scorer}' needs user codes")
    else:
        width = user_repr.m
    n_user_repr = user_repr.shape[0] if scorer == "inner-product" else len(user_repr)
    n_item_repr = items_repr.shape[0] if scorer == "inner-product" else len(items_repr)

    groups = dataset.user_groups(split)
    frame = dataset.split(split)
    _check_coverage("user", n_user_repr, frame["user"].to_numpy())
    _check_coverage("item", n_item_repr, np.arange(dataset.n_items) if full_catalog else frame["item"].to_numpy())

    catalog = np.arange(dataset.n_items, dtype=np.int64)
    rows, zero_relevance = [], 0
    for user in sorted(groups):
        items, ratings = groups[user]
        if full_catalog:
            candidates = catalog
            relevance = np.zeros(dataset.n_items, dtype=np.float64)
            relevance[items] = ratings
        else:
            candidates, relevance = np.asarray(items, dtype=np.int64), ratings
        ranked = rank_user(user, user_repr, items_repr, scorer, candidates, relevance)
        if not np.any(ranked.ratings > 0):
            zero_relevance += 1
        row = {"user": user}
        for k in ks:
            row[f"ndcg{k}"] = ranked.ndcg(k)
        row["rr"] = ranked.reciprocal_rank()
        rows.append(row)
    if zero_relevance:
        logger.warning("%d user(s) have only zero relevances; their NDCG is 1 by convention", zero_relevance)

    columns = ["user"] + [f"ndcg{k}" for k in ks] + ["rr"]
    per_user = pd.DataFrame(rows, columns=columns)
    aggregates = {f"ndcg{k}": float(per_user[f"ndcg{k}"].mean()) if rows else math.nan for k in ks}
    aggregates["mrr"] = float(per_user["rr"].mean()) if rows else math.nan
    skipped = dataset.n_users - len(rows)
    if skipped:
        logger.warning("%d user(s) have no %s items and are skipped", skipped, split)
    return EvalReport(per_user, aggregates, model=model, m=width if m is None else m, seed=seed, scorer=scorer,
                      split=split, full_catalog=full_catalog, ks=ks, config_hash=config_hash,
                      zero_relevance_users=zero_relevance)
