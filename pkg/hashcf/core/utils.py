import hashlib
import json
import platform
from typing import Any, Dict

import numpy as np
import torch

_TORCH_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def tensor_to_bytes(tensor: torch.Tensor) -> bytes:
    """
    Convert a PyTorch tensor to little-endian float32 bytes.

    Args:
        tensor (torch.Tensor): The input tensor.

    Returns:
        bytes: The tensor data as bytes.
    """
    return tensor.detach().cpu().numpy().astype('<f4').tobytes()


def bytes_to_array(data: bytes, shape: tuple) -> np.ndarray:
    """
    Convert little-endian float32 bytes back to a native float32 array.

    Args:
        data (bytes): The table data as bytes.
        shape (tuple): The shape of the table.

    Returns:
        np.ndarray: The reconstructed table.
    """
    return np.frombuffer(data, dtype='<f4').astype(np.float32).reshape(shape)


def torch_dtype(name: str) -> torch.dtype:
    return _TORCH_DTYPES[name]


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dump_json(obj: Any, path: str):
    """Write JSON with sorted keys so identical inputs give identical bytes."""
    with open(path, "w") as handle:
        json.dump(obj, handle, sort_keys=True, indent=2)
        handle.write("\n")


def build_metadata() -> Dict[str, str]:
    """Interpreter and library versions recorded next to timing results."""
    import numba

    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "machine": platform.machine(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "torch": torch.__version__,
    }


def format_size(size_bytes: int) -> str:
    """
    Format a size in bytes to a human-readable string.

    Returns:
        str: Formatted size string (e.g., "1.23 MB").
    """
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if size_bytes < 1024.0:
            return f"{size_bytes:.2f} {unit}"
        size_bytes /= 1024.0
    return f"{size_bytes:.2f} PB"
