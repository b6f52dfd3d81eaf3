from .code_storage import read_codes, write_codes, encode_codes, decode_codes
from .checkpoint_storage import CheckpointStorage
from .metric_storage import TrainingLog, EpochRecord
from .schemas import DatasetManifest, CheckpointMeta, ReportSummary

__all__ = [
    'read_codes', 'write_codes', 'encode_codes', 'decode_codes',
    'CheckpointStorage', 'TrainingLog', 'EpochRecord',
    'DatasetManifest', 'CheckpointMeta', 'ReportSummary',
]
