"""
Planted synthetic ratings: random user/item codes, ratings from g(PHD) plus noise.

Used by the test-suite and by `prepare --synthetic`, so nothing needs a download.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from hashcf.core.bitcode import CodeMatrix, NegatedItemStore
from hashcf.core.errors import ConfigurationError
from hashcf.core.vhmodel import AffineRatingMap
from .ratings import Interactions

logger = logging.getLogger(__name__)

SYNTHETIC_DEFAULTS = dict(n_users=100, n_items=80, bits=8, density=0.5, noise_std=0.1, seed=0)


@dataclass
class PlantedDataset:
    interactions: Interactions
    user_codes: CodeMatrix
    item_codes: CodeMatrix
    rating_map: AffineRatingMap

    @property
    def negated_items(self) -> NegatedItemStore:
        return NegatedItemStore.from_items(self.item_codes)

    def true_dissimilarity(self, user: int, item: int) -> int:
        return int(np.bitwise_count(self.user_codes.words[user] & ~self.item_codes.words[item]).sum())


def planted_ratings(n_users: int = 100, n_items: int = 80, bits: int = 8, density: float = 0.5,
                    noise_std: float = 0.1, seed: int = 0, rating_min: float = 1.0,
                    rating_max: float = 5.0) -> PlantedDataset:
    """
    Draw planted codes and rate a random subset of items per user.

    Every user rates max(3, round(density * n_items)) distinct items; the
    rating is g(phd(z_u, z_i)) + N(0, noise_std^2), clipped to the rating range.
    Timestamps are the row order so temporal splits stay reproducible.
    """
    if n_users < 1 or n_items < 3:
        raise ConfigurationError("need at least 1 user and 3 items")
    if not 0 < density <= 1:
        raise ConfigurationError("density must be in (0, 1]")
    if noise_std < 0:
        raise ConfigurationError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    users = CodeMatrix.random(n_users, bits, rng)
    items = CodeMatrix.random(n_items, bits, rng)
    rating_map = AffineRatingMap(rating_min, rating_max, bits)
    per_user = min(n_items, max(3, int(round(density * n_items))))

    user_col = np.repeat(np.arange(n_users, dtype=np.int64), per_user)
    item_col = np.concatenate([np.sort(rng.choice(n_items, per_user, replace=False)) for _ in range(n_users)])
    distances = np.bitwise_count(users.words[user_col] & ~items.words[item_col]).sum(axis=1, dtype=np.int64)
    ratings = rating_map(distances.astype(np.float64)) + rng.normal(0.0, noise_std, size=distances.size)
    ratings = np.clip(ratings, rating_min, rating_max)

    frame = pd.DataFrame({"user": user_col, "item": item_col, "rating": ratings,
                          "timestamp": np.arange(len(user_col), dtype=np.float64)})
    interactions = Interactions(frame, np.array([str(u) for u in range(n_users)], dtype=object),
                                np.array([str(i) for i in range(n_items)], dtype=object), rating_min, rating_max)
    logger.info("Planted %d ratings over %d users, %d items, %d bits", len(frame), n_users, n_items, bits)
    return PlantedDataset(interactions, users, items, rating_map)


def write_ratings_csv(interactions: Interactions, path: str):
    """Write `user,item,rating,timestamp` with the original ids, readable by parse_ratings(fmt='csv')."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame = interactions.frame
    out = pd.DataFrame({
        "user": interactions.user_ids[frame["user"].to_numpy()],
        "item": interactions.item_ids[frame["item"].to_numpy()],
        "rating": frame["rating"].round(6),
        "timestamp": frame["timestamp"].astype("Int64"),
    })
    out.to_csv(path, index=False, lineterminator="\n")
