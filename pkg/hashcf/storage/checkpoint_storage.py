import json
import logging
import os
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from hashcf.core.errors import ArtifactNotFoundError, ParseError
from hashcf.core.utils import bytes_to_array, dump_json, tensor_to_bytes
from .schemas import CheckpointMeta, TableEntry

logger = logging.getLogger(__name__)


class CheckpointStorage:
    """
    Checkpoints as a JSON metadata file plus a raw little-endian float32 blob.

    `<name>.json` lists every table with its shape and byte offset inside
    `<name>.bin`.
    """

    def __init__(self, directory: str):
        self.directory = directory

    def paths(self, name: str) -> Tuple[str, str]:
        base = os.path.join(self.directory, name)
        return base + ".json", base + ".bin"

    def exists(self, name: str) -> bool:
        return all(os.path.exists(p) for p in self.paths(name))

    def save(self, name: str, kind: str, m: int, tables: Dict[str, np.ndarray], config: Dict,
             config_hash: str, seed: int, epoch: Optional[int] = None,
             metrics: Optional[Dict[str, float]] = None) -> CheckpointMeta:
        os.makedirs(self.directory, exist_ok=True)
        meta_path, blob_path = self.paths(name)
        entries, offset = [], 0
        with open(blob_path, "wb") as blob:
            for table_name, table in tables.items():
                data = tensor_to_bytes(torch.as_tensor(np.asarray(table)))
                blob.write(data)
                entries.append(TableEntry(name=table_name, shape=list(np.shape(table)), offset=offset, nbytes=len(data)))
                offset += len(data)
        meta = CheckpointMeta(kind=kind, m=m, epoch=epoch, seed=seed, config=config,
                              config_hash=config_hash, metrics=metrics or {}, tables=entries)
        dump_json(meta.model_dump(), meta_path)
        logger.info("Saved %s checkpoint '%s' (%d tables, %d bytes)", kind, meta_path, len(entries), offset)
        return meta

    def load(self, name: str) -> Tuple[CheckpointMeta, Dict[str, np.ndarray]]:
        meta_path, blob_path = self.paths(name)
        if not self.exists(name):
            raise ArtifactNotFoundError(f"checkpoint not found: {meta_path}")
        with open(meta_path) as handle:
            meta = CheckpointMeta.model_validate(json.load(handle))
        with open(blob_path, "rb") as blob:
            data = blob.read()
        tables = {}
        for entry in meta.tables:
            chunk = data[entry.offset:entry.offset + entry.nbytes]
            if len(chunk) != entry.nbytes or entry.nbytes != 4 * int(np.prod(entry.shape)):
                raise ParseError(f"checkpoint table '{entry.name}' is truncated or mis-sized")
            tables[entry.name] = bytes_to_array(chunk, tuple(entry.shape))
        return meta, tables
