from .errors import (
    HashCFError, InvalidInputError, DimensionError, ConfigurationError, ParseError, EntityLookupError,
    EvaluationError, ResourceError, ChecksumMismatchError, TrainingDivergedError, ArtifactNotFoundError,
)
from .config import TrainConfig, MFConfig, RunConfig, get_default_config, merge_configs
from .bitcode import (
    HashCode, CodeMatrix, NegatedItemStore, pack_bits, popcount, hamming, project, phd, phd_fast, negate,
    hamming_many, phd_many, counting_argsort, rank_items,
)
from .instrumentation import BatchTimer, trace
from .stopping import DivergenceGuard, EarlyStopping
from .vhmodel import (
    EncoderParams, SamplingPolicy, AffineRatingMap, NoiseSchedule, VariationalHashingModel,
    encode_probs, sample_code, reconstruct_rating, kl_term, batch_loss_and_grads, train, export_codes,
)
from .baselines import MFParams, mf_train, mf_predict, quantize, tune_l2, evaluate_mf

__all__ = [
    'HashCFError', 'InvalidInputError', 'DimensionError', 'ConfigurationError', 'ParseError',
    'EntityLookupError', 'EvaluationError', 'ResourceError', 'ChecksumMismatchError',
    'TrainingDivergedError', 'ArtifactNotFoundError',
    'TrainConfig', 'MFConfig', 'RunConfig', 'get_default_config', 'merge_configs',
    'HashCode', 'CodeMatrix', 'NegatedItemStore', 'pack_bits', 'popcount', 'hamming', 'project', 'phd',
    'phd_fast', 'negate', 'hamming_many', 'phd_many', 'counting_argsort', 'rank_items',
    'BatchTimer', 'trace', 'DivergenceGuard', 'EarlyStopping',
    'EncoderParams', 'SamplingPolicy', 'AffineRatingMap', 'NoiseSchedule', 'VariationalHashingModel',
    'encode_probs', 'sample_code', 'reconstruct_rating', 'kl_term', 'batch_loss_and_grads', 'train',
    'export_codes',
    'MFParams', 'mf_train', 'mf_predict', 'quantize', 'tune_l2', 'evaluate_mf',
]
