# Core functionality exports
from .core import (
    HashCode,
    CodeMatrix,
    NegatedItemStore,
    phd,
    hamming,
    rank_items,
    TrainConfig,
    MFConfig,
    RunConfig,
    train,
    export_codes,
    mf_train,
    quantize,
    HashCFError,
)
from .data import RatingsDataset, parse_ratings, split, planted_ratings
from .eval import evaluate, ndcg_at_k, reciprocal_rank

__version__ = "0.1.0"

# Package-level initialization
def _initialize_package():
    """Internal package initialization routine"""
    # Configure default logging
    import logging
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

_initialize_package()

__all__ = [
    # Codes and kernels
    'HashCode',
    'CodeMatrix',
    'NegatedItemStore',
    'phd',
    'hamming',
    'rank_items',

    # Models
    'TrainConfig',
    'MFConfig',
    'RunConfig',
    'train',
    'export_codes',
    'mf_train',
    'quantize',
    'HashCFError',

    # Data and evaluation
    'RatingsDataset',
    'parse_ratings',
    'split',
    'planted_ratings',
    'evaluate',
    'ndcg_at_k',
    'reciprocal_rank',

    # Version
    '__version__'
]
