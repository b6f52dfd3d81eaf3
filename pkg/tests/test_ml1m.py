import os

import numpy as np
import pytest

from hashcf.bench.convergence import bench_convergence, sampling_study
from hashcf.core.config import TrainConfig
from hashcf.core.vhmodel import export_codes, train
from hashcf.data.ratings import dedup_first, filter_min_ratings, parse_ratings, split
from hashcf.eval.metrics import evaluate

ML1M = os.environ.get("HASHCF_ML1M")
SEEDS = (0, 1, 2)

pytestmark = [pytest.mark.slow, pytest.mark.skipif(not ML1M, reason="HASHCF_ML1M is not set")]


@pytest.fixture(scope="module")
def ml1m():
    return split(filter_min_ratings(dedup_first(parse_ratings(ML1M)), 10), seed=0)


def test_ml1m_parses_with_published_counts():
    interactions = parse_ratings(ML1M)
    assert len(interactions) == 1_000_209
    assert interactions.n_users == 6040 and interactions.n_items == 3706
    assert filter_min_ratings(interactions, 10).n_users == 6040


def _test_metrics(dataset, dissimilarity, seed):
    result = train(dataset, TrainConfig(bits=32, dissimilarity=dissimilarity, seed=seed))
    codes = export_codes(result.params)
    items = codes.negated_items if dissimilarity == "phd" else codes.items
    return evaluate(codes.users, items, dataset, dissimilarity, split="test", ks=(5, 10)).aggregates


def test_phd_codes_reach_published_accuracy_and_beat_hamming(ml1m):
    phd = [_test_metrics(ml1m, "phd", seed) for seed in SEEDS]
    hamming = [_test_metrics(ml1m, "hamming", seed) for seed in SEEDS]
    phd_ndcg, phd_mrr = np.mean([r["ndcg10"] for r in phd]), np.mean([r["mrr"] for r in phd])
    assert phd_ndcg == pytest.approx(0.7360, abs=0.03)
    assert phd_mrr == pytest.approx(0.6940, abs=0.04)
    assert phd_ndcg > np.mean([r["ndcg10"] for r in hamming])
    assert phd_mrr > np.mean([r["mrr"] for r in hamming])


def test_phd_converges_in_half_the_epochs(ml1m):
    table = bench_convergence(ml1m, TrainConfig(bits=32), epochs=50, seeds=list(SEEDS))
    summary = table.summary()
    assert summary["phd_epochs_to_reach"].notna().all()
    assert summary["phd_epochs_to_reach"].mean() <= 0.5 * summary["hamming_epochs"].mean()
    phd_seconds, hamming_seconds = summary["phd_batch_seconds"].mean(), summary["hamming_batch_seconds"].mean()
    assert abs(phd_seconds - hamming_seconds) < 0.1 * hamming_seconds


def test_deterministic_evaluation_wins(ml1m):
    frame = sampling_study(ml1m, TrainConfig(bits=32), seeds=list(SEEDS))
    means = frame.groupby(["train_sampling", "eval_sampling"])["ndcg10"].mean()
    assert means["stochastic", "deterministic"] >= means["deterministic", "deterministic"] - 0.005
    worst_deterministic = min(means["stochastic", "deterministic"], means["deterministic", "deterministic"])
    best_stochastic = max(means["stochastic", "stochastic"], means["deterministic", "stochastic"])
    assert worst_deterministic > best_stochastic
