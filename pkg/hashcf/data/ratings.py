"""
Rating dataset ingestion: parsing, deduplication, filtering and per-user splits.

Users and items carry dense integer ids throughout; the original ids from the
source file are kept in `user_ids` / `item_ids` (dense id -> original id).
"""
import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from hashcf.core.errors import ConfigurationError, ParseError
from hashcf.core.utils import dump_json, sha256_file
from hashcf.storage.schemas import DatasetManifest

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
DEFAULT_PROPORTIONS = (0.425, 0.075, 0.50)
_COLUMNS = ["user", "item", "rating", "timestamp"]


@dataclass
class Interactions:
    """User-item-rating(-timestamp) rows with dense ids and the original-id side maps."""
    frame: pd.DataFrame
    user_ids: np.ndarray
    item_ids: np.ndarray
    rating_min: float = 1.0
    rating_max: float = 5.0

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def replace(self, frame: pd.DataFrame) -> "Interactions":
        return Interactions(frame.reset_index(drop=True), self.user_ids, self.item_ids,
                            self.rating_min, self.rating_max)


def _empty_interactions(rating_min: float, rating_max: float) -> Interactions:
    frame = pd.DataFrame({"user": pd.Series(dtype=np.int64), "item": pd.Series(dtype=np.int64),
                          "rating": pd.Series(dtype=np.float64), "timestamp": pd.Series(dtype=np.float64)})
    return Interactions(frame, np.array([], dtype=object), np.array([], dtype=object), rating_min, rating_max)


def _read_raw(path: str, fmt: str) -> Tuple[pd.DataFrame, int]:
    """Returns the raw string table and the file line number of its first row."""
    if fmt == "movielens-dat":
        raw = pd.read_csv(path, sep="::", engine="python", header=None, names=_COLUMNS,
                          dtype=str, skip_blank_lines=False)
        return raw, 1
    if fmt == "csv":
        raw = pd.read_csv(path, dtype=str, skip_blank_lines=False)
        raw.columns = [c.strip() for c in raw.columns]
        missing = {"user", "item", "rating"} - set(raw.columns)
        if missing:
            raise ParseError(f"csv header lacks column(s) {sorted(missing)}", 1)
        if "timestamp" not in raw.columns:
            raw["timestamp"] = None
        return raw[_COLUMNS], 2
    raise ConfigurationError(f"unknown ratings format '{fmt}'")


def parse_ratings(path: str, fmt: str = "movielens-dat", rating_min: float = 1.0,
                  rating_max: float = 5.0) -> Interactions:
    """
    Parse a ratings file.

    Args:
        path (str): File to read.
        fmt (str): 'movielens-dat' (user::item::rating::timestamp) or
            'csv' (header user,item,rating[,timestamp]).
        rating_min (float): Lowest admissible rating.
        rating_max (float): Highest admissible rating.

    Returns:
        Interactions: Rows in file order with dense ids in order of first appearance.

    Raises:
        ParseError: On a malformed line or an out-of-range rating; carries the line number.
        ConfigurationError: On an unknown format.
    """
    if fmt not in ("movielens-dat", "csv"):
        raise ConfigurationError(f"unknown ratings format '{fmt}'")
    if os.path.getsize(path) == 0:
        return _empty_interactions(rating_min, rating_max)
    try:
        raw, first_line = _read_raw(path, fmt)
    except pd.errors.EmptyDataError:
        return _empty_interactions(rating_min, rating_max)
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"malformed line: {exc}", int(match.group(1)) if match else None) from exc

    raw = raw[~raw.isna().all(axis=1)]
    line_numbers = raw.index.to_numpy() + first_line
    for column in ("user", "item", "rating"):
        bad = raw[column].isna().to_numpy()
        if bad.any():
            raise ParseError(f"missing '{column}' field", int(line_numbers[bad.argmax()]))

    ratings = pd.to_numeric(raw["rating"], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.isnan(ratings)
    if bad.any():
        raise ParseError(f"rating is not a number: {raw['rating'].iloc[bad.argmax()]!r}", int(line_numbers[bad.argmax()]))
    bad = (ratings < rating_min) | (ratings > rating_max)
    if bad.any():
        raise ParseError(f"rating {ratings[bad.argmax()]} outside [{rating_min}, {rating_max}]",
                         int(line_numbers[bad.argmax()]))

    timestamps = pd.to_numeric(raw["timestamp"], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.isnan(timestamps) & raw["timestamp"].notna().to_numpy()
    if bad.any():
        raise ParseError(f"timestamp is not a number: {raw['timestamp'].iloc[bad.argmax()]!r}",
                         int(line_numbers[bad.argmax()]))

    user_codes, user_ids = pd.factorize(raw["user"].str.strip())
    item_codes, item_ids = pd.factorize(raw["item"].str.strip())
    frame = pd.DataFrame({"user": user_codes.astype(np.int64), "item": item_codes.astype(np.int64),
                          "rating": ratings, "timestamp": timestamps})
    logger.info("Parsed %d ratings from %s (%d users, %d items)", len(frame), path, len(user_ids), len(item_ids))
    return Interactions(frame, np.asarray(user_ids, dtype=object), np.asarray(item_ids, dtype=object),
                        rating_min, rating_max)


def dedup_first(interactions: Interactions) -> Interactions:
    """
    Keep only the first rating of every (user, item) pair.

    "First" is the earliest timestamp; rows without a timestamp sort after
    timestamped ones, and ties fall back to file order. Surviving rows keep
    their file order.
    """
    frame = interactions.frame
    keyed = frame.assign(_ts=frame["timestamp"].fillna(np.inf), _order=np.arange(len(frame)))
    kept = (keyed.sort_values(["_ts", "_order"], kind="stable")
                 .drop_duplicates(["user", "item"], keep="first")
                 .sort_values("_order", kind="stable")
                 .drop(columns=["_ts", "_order"]))
    removed = len(frame) - len(kept)
    if removed:
        logger.info("Removed %d repeated ratings", removed)
    return interactions.replace(kept)


def _reindex(interactions: Interactions, frame: pd.DataFrame) -> Interactions:
    users, user_index = np.unique(frame["user"].to_numpy(), return_inverse=True)
    items, item_index = np.unique(frame["item"].to_numpy(), return_inverse=True)
    frame = frame.assign(user=user_index.astype(np.int64), item=item_index.astype(np.int64))
    return Interactions(frame.reset_index(drop=True), interactions.user_ids[users], interactions.item_ids[items],
                        interactions.rating_min, interactions.rating_max)


def filter_min_ratings(interactions: Interactions, min_count: int = 10, fixpoint: bool = False) -> Interactions:
    """
    Drop items, then users, with fewer than `min_count` ratings and re-index densely.

    One pass by default: an item that falls below the threshold only because
    users were removed is kept. `fixpoint=True` repeats until nothing changes.
    """
    if min_count < 1:
        raise ConfigurationError("min_count must be at least 1")
    frame = interactions.frame
    while True:
        before = len(frame)
        frame = frame[frame.groupby("item")["item"].transform("size") >= min_count]
        frame = frame[frame.groupby("user")["user"].transform("size") >= min_count]
        if not fixpoint or len(frame) == before:
            break
    result = _reindex(interactions, frame)
    logger.info("Filtered to %d ratings, %d users, %d items (min_count=%d%s)", len(result), result.n_users,
                result.n_items, min_count, ", fixpoint" if fixpoint else "")
    return result


@dataclass
class RatingsDataset:
    train: pd.DataFrame
    validation: pd.DataFrame
    test: pd.DataFrame
    n_users: int
    n_items: int
    rating_min: float = 1.0
    rating_max: float = 5.0
    seed: int = 0
    proportions: Tuple[float, float, float] = DEFAULT_PROPORTIONS
    user_ids: Optional[np.ndarray] = None
    item_ids: Optional[np.ndarray] = None
    dropped_users: int = 0
    temporal: bool = False
    _groups: Dict[str, Dict[int, Tuple[np.ndarray, np.ndarray]]] = field(default_factory=dict, repr=False, compare=False)

    def split(self, name: str) -> pd.DataFrame:
        if name not in SPLITS:
            raise ConfigurationError(f"unknown split '{name}'")
        return getattr(self, name)

    def user_groups(self, name: str) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        """user -> (items sorted ascending, their ratings) for one split."""
        if name not in self._groups:
            frame = self.split(name).sort_values(["user", "item"], kind="stable")
            users = frame["user"].to_numpy()
            items = frame["item"].to_numpy()
            ratings = frame["rating"].to_numpy(dtype=np.float64)
            bounds = np.flatnonzero(np.diff(users)) + 1
            groups = {}
            for start, stop in zip(np.r_[0, bounds], np.r_[bounds, len(users)]):
                if stop > start:
                    groups[int(users[start])] = (items[start:stop], ratings[start:stop])
            self._groups[name] = groups
        return self._groups[name]

    def items_of_user(self, user: int, name: str = "train") -> np.ndarray:
        """I_u: items the user rated in a split."""
        group = self.user_groups(name).get(int(user))
        return group[0] if group else np.empty(0, dtype=np.int64)

    def users_of_item(self, item: int, name: str = "train") -> np.ndarray:
        """U_i: users who rated the item in a split."""
        frame = self.split(name)
        return np.sort(frame.loc[frame["item"] == item, "user"].to_numpy())

    def save(self, directory: str, min_count: Optional[int] = None, config_hash: Optional[str] = None) -> DatasetManifest:
        """Persist the splits as CSV `user,item,rating` plus a JSON manifest."""
        os.makedirs(directory, exist_ok=True)
        files = {}
        for name in SPLITS:
            path = os.path.join(directory, f"{name}.csv")
            self.split(name)[["user", "item", "rating"]].to_csv(path, index=False, lineterminator="\n")
            files[name] = sha256_file(path)
        for kind, ids in (("users", self.user_ids), ("items", self.item_ids)):
            if ids is not None:
                pd.DataFrame({"index": np.arange(len(ids)), "original_id": ids}).to_csv(
                    os.path.join(directory, f"{kind}.csv"), index=False, lineterminator="\n")
        manifest = DatasetManifest(
            n_users=self.n_users, n_items=self.n_items, n_train=len(self.train),
            n_validation=len(self.validation), n_test=len(self.test),
            rating_min=self.rating_min, rating_max=self.rating_max, seed=self.seed,
            proportions=list(self.proportions), min_count=min_count, dropped_users=self.dropped_users,
            temporal=self.temporal, config_hash=config_hash, files=files,
        )
        dump_json(manifest.model_dump(), os.path.join(directory, "manifest.json"))
        logger.info("Saved dataset splits to %s", directory)
        return manifest

    @classmethod
    def load(cls, directory: str) -> "RatingsDataset":
        with open(os.path.join(directory, "manifest.json")) as handle:
            manifest = DatasetManifest.model_validate_json(handle.read())
        splits = {}
        for name in SPLITS:
            path = os.path.join(directory, f"{name}.csv")
            digest = sha256_file(path)
            if manifest.files.get(name) not in (None, digest):
                logger.warning("%s does not match the manifest hash", path)
            splits[name] = pd.read_csv(path, dtype={"user": np.int64, "item": np.int64, "rating": np.float64},
                                       float_precision="round_trip")
        ids = {}
        for kind in ("users", "items"):
            path = os.path.join(directory, f"{kind}.csv")
            ids[kind] = pd.read_csv(path, dtype=str)["original_id"].to_numpy(dtype=object) if os.path.exists(path) else None
        return cls(splits["train"], splits["validation"], splits["test"], manifest.n_users, manifest.n_items,
                   manifest.rating_min, manifest.rating_max, manifest.seed, tuple(manifest.proportions),
                   ids["users"], ids["items"], manifest.dropped_users, manifest.temporal)


def _check_proportions(proportions: Sequence[float]):
    if len(proportions) != 3 or any(p <= 0 for p in proportions):
        raise ConfigurationError("proportions must be three positive fractions")
    if abs(sum(proportions) - 1.0) > 1e-9:
        raise ConfigurationError("proportions must sum to 1")


def split(interactions: Interactions, proportions: Sequence[float] = DEFAULT_PROPORTIONS,
          seed: int = 0, temporal: bool = False) -> RatingsDataset:
    """
    Split every user's ratings into train/validation/test.

    Per user, the ratings are shuffled with a generator seeded once by `seed`
    (users visited in ascending id order), or ordered by timestamp when
    `temporal` is set. Train takes floor(p_train * n), validation
    floor(p_val * n), test the remainder. Users left without training ratings
    are dropped and the remaining users are re-indexed.
    """
    _check_proportions(proportions)
    rng = np.random.default_rng(seed)
    frame = interactions.frame.reset_index(drop=True)
    parts: Dict[str, List[np.ndarray]] = {name: [] for name in SPLITS}
    dropped: List[int] = []
    for user, rows in frame.groupby("user", sort=True):
        if temporal:
            index = rows.sort_values("timestamp", kind="stable").index.to_numpy()
        else:
            index = rng.permutation(rows.index.to_numpy())
        n = len(index)
        n_train = math.floor(proportions[0] * n + 1e-9)
        n_val = math.floor(proportions[1] * n + 1e-9)
        if n_train == 0:
            dropped.append(int(user))
            continue
        parts["train"].append(index[:n_train])
        parts["validation"].append(index[n_train:n_train + n_val])
        parts["test"].append(index[n_train + n_val:])
    if dropped:
        logger.warning("Dropped %d user(s) whose training split would be empty", len(dropped))

    kept_users = np.setdiff1d(np.arange(interactions.n_users), np.array(dropped, dtype=np.int64))
    remap = np.full(interactions.n_users, -1, dtype=np.int64)
    remap[kept_users] = np.arange(len(kept_users))

    def take(name):
        index = np.concatenate(parts[name]) if parts[name] else np.empty(0, dtype=np.int64)
        rows = frame.loc[index, ["user", "item", "rating"]]
        rows = rows.assign(user=remap[rows["user"].to_numpy()])
        return rows.sort_values(["user", "item"], kind="stable").reset_index(drop=True)

    dataset = RatingsDataset(
        take("train"), take("validation"), take("test"), len(kept_users), interactions.n_items,
        interactions.rating_min, interactions.rating_max, seed, tuple(proportions),
        interactions.user_ids[kept_users] if len(interactions.user_ids) else None,
        interactions.item_ids if len(interactions.item_ids) else None,
        len(dropped), temporal,
    )
    logger.info("Split %d users: %d train / %d validation / %d test ratings", dataset.n_users,
                len(dataset.train), len(dataset.validation), len(dataset.test))
    return dataset
