from dataclasses import asdict, dataclass, fields
from typing import List

import numpy as np
import pandas as pd


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_ndcg10: float
    noise_var: float


class TrainingLog:
    """Per-epoch training metrics, written as CSV."""

    HEADER = [f.name for f in fields(EpochRecord)]

    def __init__(self):
        self.records: List[EpochRecord] = []

    def add(self, epoch: int, train_loss: float, val_loss: float, val_ndcg10: float, noise_var: float):
        self.records.append(EpochRecord(epoch, float(train_loss), float(val_loss), float(val_ndcg10), float(noise_var)))

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(r) for r in self.records], columns=self.HEADER)
        return frame.astype({"epoch": np.int64})

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def from_csv(cls, path: str) -> "TrainingLog":
        frame = pd.read_csv(path, float_precision="round_trip")
        log = cls()
        for row in frame[cls.HEADER].itertuples(index=False):
            log.add(int(row.epoch), row.train_loss, row.val_loss, row.val_ndcg10, row.noise_var)
        return log
