"""
Throughput of the distance kernels on random codes.

One fixed query is scored against n random codes per repetition with three
kernels: Hamming (XOR + popcount), PHD over stored negated item codes
(AND + popcount) and a float32 inner product of d = m values. Every kernel
returns the sum of its distances; that checksum is compared against a
vectorised numpy reference before anything is timed.
"""
import logging
import os
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from numba import njit

from hashcf.core.bitcode import n_words, tail_mask
from hashcf.core.errors import ChecksumMismatchError, ResourceError
from hashcf.core.utils import build_metadata, dump_json, format_size

logger = logging.getLogger(__name__)

KERNELS = ("hamming", "phd_fast", "inner-product")


@njit(nogil=True, cache=True)
def popcount_u64(x):
    """SWAR popcount of one uint64 word."""
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(nogil=True, cache=True)
def hamming_kernel(codes, query):
    total = np.uint64(0)
    for i in range(codes.shape[0]):
        for w in range(codes.shape[1]):
            total += popcount_u64(codes[i, w] ^ query[w])
    return total


@njit(nogil=True, cache=True)
def phd_fast_kernel(negated_codes, query):
    total = np.uint64(0)
    for i in range(negated_codes.shape[0]):
        for w in range(negated_codes.shape[1]):
            total += popcount_u64(negated_codes[i, w] & query[w])
    return total


@njit(nogil=True, cache=True)
def inner_product_kernel(vectors, query):
    total = 0.0
    for i in range(vectors.shape[0]):
        acc = np.float32(0.0)
        for j in range(vectors.shape[1]):
            acc += vectors[i, j] * query[j]
        total += acc
    return total


@dataclass
class BenchResult:
    kernel: str
    n: int
    m: int
    reps: int
    mean_seconds: float
    overhead_pct: float
    checksum: float


@dataclass
class BenchInputs:
    codes: np.ndarray
    negated_codes: np.ndarray
    query: np.ndarray
    vectors: np.ndarray
    query_vector: np.ndarray


def generate_inputs(n: int, m: int, seed: int) -> BenchInputs:
    """Random codes, their negations and float32 vectors; allocation failures become ResourceError."""
    rng = np.random.default_rng(seed)
    words = n_words(m)
    mask = tail_mask(m)
    try:
        codes = rng.integers(0, np.iinfo(np.uint64).max, size=(n, words), dtype=np.uint64, endpoint=True) & mask
        negated = ~codes & mask
        vectors = rng.standard_normal((n, m), dtype=np.float32)
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate inputs for n={n:,} codes of {m} bits; lower n") from exc
    query = rng.integers(0, np.iinfo(np.uint64).max, size=words, dtype=np.uint64, endpoint=True) & mask
    query_vector = rng.standard_normal(m, dtype=np.float32)
    logger.info("Generated %d codes of %d bits (%s in memory)", n, m,
                format_size(codes.nbytes + negated.nbytes + vectors.nbytes))
    return BenchInputs(codes, negated, query, vectors, query_vector)


def reference_checksums(inputs: BenchInputs) -> Dict[str, float]:
    """Checksums from the definitions: popcount(a XOR q), popcount(q AND NOT i), <v, q>."""
    hamming = int(np.bitwise_count(inputs.codes ^ inputs.query).sum(dtype=np.uint64))
    phd = int(np.bitwise_count(inputs.query & ~inputs.codes).sum(dtype=np.uint64))
    inner = float((inputs.vectors.astype(np.float64) @ inputs.query_vector.astype(np.float64)).sum())
    return {"hamming": hamming, "phd_fast": phd, "inner-product": inner}


def _run(kernel: str, inputs: BenchInputs):
    if kernel == "hamming":
        return hamming_kernel(inputs.codes, inputs.query)
    if kernel == "phd_fast":
        return phd_fast_kernel(inputs.negated_codes, inputs.query)
    return inner_product_kernel(inputs.vectors, inputs.query_vector)


def _checksum_matches(kernel: str, value, expected) -> bool:
    if kernel == "inner-product":
        return bool(np.isclose(float(value), expected, rtol=1e-4, atol=1e-2 * max(1.0, abs(expected)) ** 0.5))
    return int(value) == int(expected)


def verify_kernels(inputs: BenchInputs) -> Dict[str, float]:
    """Run every kernel once (which also compiles it) and compare against the numpy reference."""
    expected = reference_checksums(inputs)
    observed = {}
    for kernel in KERNELS:
        value = _run(kernel, inputs)
        if not _checksum_matches(kernel, value, expected[kernel]):
            raise ChecksumMismatchError(f"{kernel}: kernel checksum {value} != reference {expected[kernel]}")
        observed[kernel] = float(value)
    return observed


def bench_distance(n: int = 10_000_000, m: int = 64, reps: int = 100, seed: int = 0) -> List[BenchResult]:
    """
    Mean wall time per full scan for each kernel, single-threaded.

    Kernels are interleaved within each repetition; only the scan itself is
    timed. Overhead is relative to the Hamming mean.
    """
    if n < 1 or reps < 1:
        raise ResourceError("n and reps must be at least 1")
    inputs = generate_inputs(n, m, seed)
    checksums = verify_kernels(inputs)
    timings = {kernel: np.empty(reps) for kernel in KERNELS}
    for rep in range(reps):
        for kernel in KERNELS:
            start = time.perf_counter()
            value = _run(kernel, inputs)
            timings[kernel][rep] = time.perf_counter() - start
            if float(value) != checksums[kernel]:
                raise ChecksumMismatchError(f"{kernel}: checksum changed between repetitions")
        logger.debug("rep %d: %s", rep, {k: round(float(v[rep]), 6) for k, v in timings.items()})

    baseline = float(timings["hamming"].mean())
    results = []
    for kernel in KERNELS:
        mean = float(timings[kernel].mean())
        overhead = 0.0 if kernel == "hamming" else 100.0 * (mean / baseline - 1.0)
        results.append(BenchResult(kernel, n, m, reps, mean, overhead, checksums[kernel]))
        logger.info("%-14s n=%d m=%d reps=%d mean=%.6fs overhead=%+.1f%%", kernel, n, m, reps, mean, overhead)
    return results


def write_bench_results(results: List[BenchResult], directory: str, seed: int,
                        config_hash: Optional[str] = None) -> Dict[str, str]:
    """CSV `kernel,n,m,reps,mean_seconds,overhead_pct` plus a JSON summary with build metadata."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "distance.csv")
    json_path = os.path.join(directory, "distance.json")
    frame = pd.DataFrame([asdict(r) for r in results])
    frame[["kernel", "n", "m", "reps", "mean_seconds", "overhead_pct"]].to_csv(
        csv_path, index=False, lineterminator="\n", float_format="%.6g")
    dump_json({"results": [asdict(r) for r in results], "seed": seed, "config_hash": config_hash,
               "build": build_metadata()}, json_path)
    return {"csv": csv_path, "json": json_path}
