import os

import numpy as np
import pandas as pd
import pytest

from hashcf.data.ratings import RatingsDataset, split
from hashcf.data.synthetic import planted_ratings


def make_dataset(train, validation=(), test=(), n_users=None, n_items=None, rating_min=1.0, rating_max=5.0):
    """RatingsDataset from (user, item, rating) triples."""
    frames = [pd.DataFrame(list(rows), columns=["user", "item", "rating"]).astype(
        {"user": np.int64, "item": np.int64, "rating": np.float64}) for rows in (train, validation, test)]
    everything = pd.concat(frames)
    n_users = int(everything["user"].max()) + 1 if n_users is None else n_users
    n_items = int(everything["item"].max()) + 1 if n_items is None else n_items
    return RatingsDataset(*frames, n_users=n_users, n_items=n_items, rating_min=rating_min, rating_max=rating_max)


@pytest.fixture
def planted():
    return planted_ratings(n_users=60, n_items=40, bits=8, density=0.5, noise_std=0.1, seed=3)


@pytest.fixture
def planted_dataset(planted):
    return split(planted.interactions, seed=0)


@pytest.fixture
def ratings_file(tmp_path):
    def write(text, name="ratings.dat"):
        path = os.path.join(tmp_path, name)
        with open(path, "w") as handle:
            handle.write(text)
        return path
    return write
