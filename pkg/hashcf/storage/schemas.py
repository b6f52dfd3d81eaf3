from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class DatasetManifest(BaseModel):
    n_users: int
    n_items: int
    n_train: int
    n_validation: int
    n_test: int
    rating_min: float
    rating_max: float
    seed: int
    proportions: List[float]
    min_count: Optional[int] = None
    dropped_users: int = 0
    temporal: bool = False
    config_hash: Optional[str] = None
    files: Dict[str, str] = Field(default_factory=dict, description="split name -> sha256 of its CSV")


class TableEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int
    nbytes: int


class CheckpointMeta(BaseModel):
    kind: str
    m: int
    epoch: Optional[int] = None
    seed: int
    config: Dict
    config_hash: str
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)
    tables: List[TableEntry]
    byte_order: str = "little"
    dtype: str = "float32"


class ReportSummary(BaseModel):
    model: str
    m: int
    seed: int
    scorer: str
    split: str
    full_catalog: bool = False
    n_users: int
    metrics: Dict[str, float]
    config_hash: Optional[str] = None
