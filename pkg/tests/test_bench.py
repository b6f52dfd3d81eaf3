import json
import os

import numpy as np
import pandas as pd
import pytest

from hashcf.bench.convergence import bench_convergence, epochs_to_reach, sampling_study, write_convergence
from hashcf.bench.distance import (
    bench_distance, generate_inputs, hamming_kernel, phd_fast_kernel, reference_checksums, verify_kernels,
    write_bench_results,
)
from hashcf.core.bitcode import CodeMatrix, HashCode, NegatedItemStore, hamming_many, phd_many
from hashcf.core.config import TrainConfig
from hashcf.core.errors import ChecksumMismatchError, ResourceError


def test_kernels_match_reference():
    inputs = generate_inputs(1000, 64, seed=0)
    observed = verify_kernels(inputs)
    expected = reference_checksums(inputs)
    assert observed["hamming"] == expected["hamming"]
    assert observed["phd_fast"] == expected["phd_fast"]


def test_kernels_agree_with_code_matrix_scans():
    rng = np.random.default_rng(5)
    codes = CodeMatrix.random(200, 100, rng)
    query = CodeMatrix.random(1, 100, rng)[0]
    store = NegatedItemStore.from_items(codes)
    query_words = np.array(query.words)
    assert int(hamming_kernel(np.array(codes.words), query_words)) == int(hamming_many(query, codes).sum())
    assert int(phd_fast_kernel(np.array(store.codes.words), query_words)) == int(phd_many(query, store).sum())


def test_phd_fast_of_all_ones_query_equals_hamming():
    inputs = generate_inputs(500, 128, seed=1)
    inputs.query[:] = HashCode.ones(128).words
    assert int(phd_fast_kernel(inputs.negated_codes, inputs.query)) == int(hamming_kernel(inputs.codes,
                                                                                          inputs.query))


def test_tampered_inputs_fail_verification():
    inputs = generate_inputs(100, 64, seed=2)
    inputs.negated_codes[0, 0] ^= np.uint64(1)
    with pytest.raises(ChecksumMismatchError):
        verify_kernels(inputs)


def test_bench_distance_small(tmp_path):
    results = bench_distance(n=2000, m=64, reps=3, seed=0)
    by_kernel = {r.kernel: r for r in results}
    assert set(by_kernel) == {"hamming", "phd_fast", "inner-product"}
    assert by_kernel["hamming"].overhead_pct == 0.0
    assert all(r.mean_seconds > 0 and r.reps == 3 for r in results)
    expected = reference_checksums(generate_inputs(2000, 64, seed=0))
    assert by_kernel["phd_fast"].checksum == expected["phd_fast"]

    paths = write_bench_results(results, str(tmp_path), seed=0, config_hash="h")
    frame = pd.read_csv(paths["csv"])
    assert list(frame.columns) == ["kernel", "n", "m", "reps", "mean_seconds", "overhead_pct"]
    with open(paths["json"]) as handle:
        summary = json.load(handle)
    assert summary["seed"] == 0 and "numba" in json.dumps(summary["build"])


def test_bench_distance_rejects_bad_sizes():
    with pytest.raises(ResourceError):
        bench_distance(n=0, reps=1)


def test_epochs_to_reach():
    assert epochs_to_reach([3.0, 2.0, 1.0], 2.0) == 2
    assert epochs_to_reach([3.0, 2.5], 1.0) is None
    assert epochs_to_reach([0.5], 1.0) == 1


def test_bench_convergence_is_deterministic(tmp_path, planted_dataset):
    config = TrainConfig(bits=8, batch_size=64, learning_rate=0.01)
    first = bench_convergence(planted_dataset, config, epochs=3, seeds=[0])
    second = bench_convergence(planted_dataset, config, epochs=3, seeds=[0])
    pd.testing.assert_frame_equal(first.curves(), second.curves())
    assert first.run("phd", 0).epochs == 3 and first.run("hamming", 0).epochs == 3
    summary = first.summary()
    assert summary.loc[0, "hamming_epochs"] == 3
    write_convergence(first, str(tmp_path))
    assert os.path.exists(os.path.join(tmp_path, "convergence_summary.csv"))


def test_sampling_study_covers_all_combinations(planted_dataset):
    frame = sampling_study(planted_dataset, TrainConfig(bits=8, epochs=2, batch_size=64), seeds=[0])
    assert list(zip(frame["train_sampling"], frame["eval_sampling"])) == [
        ("stochastic", "deterministic"), ("deterministic", "deterministic"),
        ("stochastic", "stochastic"), ("deterministic", "stochastic")]
    assert frame["ndcg10"].between(0, 1).all()


@pytest.mark.slow
def test_phd_fast_throughput_is_close_to_hamming():
    results = {r.kernel: r for r in bench_distance(n=10_000_000, m=64, reps=100, seed=0)}
    assert abs(results["phd_fast"].overhead_pct) <= 5.0
    assert results["inner-product"].mean_seconds >= 10 * results["hamming"].mean_seconds
