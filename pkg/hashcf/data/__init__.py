from .ratings import (
    Interactions, RatingsDataset, parse_ratings, dedup_first, filter_min_ratings, split,
    SPLITS, DEFAULT_PROPORTIONS,
)
from .synthetic import PlantedDataset, planted_ratings, write_ratings_csv, SYNTHETIC_DEFAULTS

__all__ = [
    'Interactions', 'RatingsDataset', 'parse_ratings', 'dedup_first', 'filter_min_ratings', 'split',
    'SPLITS', 'DEFAULT_PROPORTIONS',
    'PlantedDataset', 'planted_ratings', 'write_ratings_csv', 'SYNTHETIC_DEFAULTS',
]
