import math

import numpy as np
import pytest
import torch

from hashcf.core.bitcode import CodeMatrix, HashCode
from hashcf.core.config import TrainConfig
from hashcf.core.errors import ConfigurationError, EntityLookupError
from hashcf.core.vhmodel import (
    STOCHASTIC, AffineRatingMap, EncoderParams, NoiseSchedule, batch_loss_and_grads, encode_probs,
    export_codes, kl_bits, kl_term, reconstruct_rating, sample_code, train,
)
from hashcf.data.ratings import split
from hashcf.data.synthetic import planted_ratings
from tests.conftest import make_dataset


def _params(rng, n_users=5, n_items=5, m=8, scale=1.0):
    return EncoderParams(rng.normal(0, scale, (n_users, m)), rng.normal(0, scale, (n_items, m)))


def test_encode_probs():
    params = EncoderParams(np.array([[0.0, 100.0, 1.0]]), np.zeros((1, 3)))
    probs = encode_probs(params, "user", 0)
    assert probs[0] == 0.5
    assert probs[1] == pytest.approx(1.0)
    assert probs[2] == pytest.approx(0.7310585786300049)
    with pytest.raises(EntityLookupError):
        encode_probs(params, "item", 1)


def test_sample_code_deterministic():
    assert sample_code(np.full(6, 0.9)) == HashCode.ones(6)
    assert str(sample_code(np.array([0.9, 0.1]))) == "10"


def test_sample_code_stochastic_frequency():
    rng = np.random.default_rng(0)
    probs = np.array([0.49, 0.5, 0.51, 0.2, 0.8] * 100)
    counts = np.zeros_like(probs)
    for _ in range(400):
        counts += sample_code(probs, STOCHASTIC, rng).bits()
    # 40k draws per distinct probability
    frequency = (counts / 400).reshape(100, 5).mean(axis=0)
    np.testing.assert_allclose(frequency, probs[:5], atol=0.01)


def test_rating_map_and_reconstruction():
    rating_map = AffineRatingMap(1.0, 5.0, 64)
    assert rating_map(0) == 5.0 and rating_map(64) == 1.0 and rating_map(32) == 3.0
    small = AffineRatingMap(1.0, 5.0, 4)
    assert reconstruct_rating(HashCode.from_string("1111"), HashCode.from_string("1111"), small) == 5.0
    assert reconstruct_rating(HashCode.from_string("1111"), HashCode.from_string("0000"), small) == 1.0
    assert reconstruct_rating(HashCode.from_string("0000"), HashCode.from_string("1111"), small, "hamming") == 1.0
    with pytest.raises(ConfigurationError):
        AffineRatingMap(5.0, 1.0, 4)


def test_kl_term_values():
    assert kl_term(np.full(8, 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert kl_term([0.75]) == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5), rel=1e-9)
    assert kl_term([1.0]) == pytest.approx(math.log(2), rel=1e-5)


def test_kl_gradient_vanishes_at_zero_embeddings():
    embedding = torch.zeros(3, 8, dtype=torch.float64, requires_grad=True)
    kl_bits(torch.sigmoid(embedding)).sum().backward()
    assert torch.count_nonzero(embedding.grad) == 0


def test_noise_schedule_decays():
    noise = NoiseSchedule(1.0, 0.5)
    noise.step()
    noise.step()
    assert noise.variance == 0.25
    assert torch.all(NoiseSchedule(0.0).sample((4,), torch.Generator()) == 0)


def test_zero_loss_on_exact_planted_batch():
    planted = planted_ratings(n_users=5, n_items=5, bits=8, density=1.0, noise_std=0.0, seed=2)
    params = EncoderParams(np.where(planted.user_codes.bits() == 1, 5.0, -5.0),
                           np.where(planted.item_codes.bits() == 1, 5.0, -5.0))
    config = TrainConfig(bits=8, kl_weight=0.0, train_sampling="deterministic", dtype="float64")
    loss, grads = batch_loss_and_grads(planted.interactions.frame, params, config, planted.rating_map)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.abs(grads.user_table).max() == pytest.approx(0.0, abs=1e-12)
    assert np.abs(grads.item_table).max() == pytest.approx(0.0, abs=1e-12)


def test_gradients_match_finite_differences_of_relaxed_loss():
    rng = np.random.default_rng(7)
    params = _params(rng)
    users, items = np.meshgrid(np.arange(5), np.arange(5), indexing="ij")
    batch = (users.ravel(), items.ravel(), rng.uniform(1, 5, 25))
    config = TrainConfig(bits=8, kl_weight=0.1, dtype="float64")
    rating_map = AffineRatingMap(1.0, 5.0, 8)
    _, grads = batch_loss_and_grads(batch, params, config, rating_map, straight_through=False)

    def loss_at(user_table, item_table):
        return batch_loss_and_grads(batch, EncoderParams(user_table, item_table), config, rating_map,
                                    straight_through=False)[0]

    eps = 1e-6
    for _ in range(100):
        table = rng.integers(2)
        row, col = rng.integers(5), rng.integers(8)
        plus = [params.user_table.copy(), params.item_table.copy()]
        minus = [params.user_table.copy(), params.item_table.copy()]
        plus[table][row, col] += eps
        minus[table][row, col] -= eps
        numeric = (loss_at(*plus) - loss_at(*minus)) / (2 * eps)
        analytic = (grads.user_table, grads.item_table)[table][row, col]
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)


def test_batch_rejects_unknown_ids():
    params = _params(np.random.default_rng(0))
    with pytest.raises(EntityLookupError):
        batch_loss_and_grads(([0], [9], [3.0]), params, TrainConfig(bits=8), AffineRatingMap(1, 5, 8))


def test_export_codes_is_deterministic_and_consistent():
    params = _params(np.random.default_rng(1), n_users=7, n_items=9)
    first, second = export_codes(params), export_codes(params)
    assert first.users == second.users and first.items == second.items
    np.testing.assert_array_equal(first.users.bits(), (params.user_table > 0).astype(np.uint8))
    assert first.negated_items.codes == first.items.negate()
    assert isinstance(first.users, CodeMatrix)


def test_train_rejects_empty_split():
    dataset = make_dataset([], [(0, 0, 3.0)], n_users=1, n_items=1)
    with pytest.raises(ConfigurationError):
        train(dataset, TrainConfig(bits=8, epochs=1))


def test_train_is_reproducible(planted_dataset):
    config = TrainConfig(bits=8, epochs=3, batch_size=64, learning_rate=0.01, seed=4)
    first, second = train(planted_dataset, config), train(planted_dataset, config)
    np.testing.assert_array_equal(first.params.user_table, second.params.user_table)
    np.testing.assert_array_equal(first.params.item_table, second.params.item_table)
    np.testing.assert_array_equal(first.log.column("train_loss"), second.log.column("train_loss"))
    assert len(first.log) == 3
    assert first.best_epoch in (1, 2, 3)


def test_train_clamps_embeddings(planted_dataset):
    config = TrainConfig(bits=8, epochs=2, batch_size=32, learning_rate=1.0, clamp=0.5, seed=1)
    result = train(planted_dataset, config)
    assert np.abs(result.params.user_table).max() <= 0.5 + 1e-6


def test_planted_codes_are_recovered():
    planted = planted_ratings(n_users=100, n_items=60, bits=8, density=0.5, noise_std=0.1, seed=0)
    dataset = split(planted.interactions, seed=0)
    config = TrainConfig(bits=8, epochs=200, batch_size=100, learning_rate=0.01, patience=30, seed=0)
    result = train(dataset, config)
    assert result.best_ndcg >= 0.95
    ndcg = result.log.column("val_ndcg10")
    assert ndcg[result.best_epoch - 1] == pytest.approx(result.best_ndcg)
    assert ndcg.max() == pytest.approx(result.best_ndcg)


def test_planted_ratings_are_fitted_on_a_small_instance():
    planted = planted_ratings(n_users=5, n_items=5, bits=8, density=1.0, noise_std=0.0, seed=2)
    triples = list(planted.interactions.frame[["user", "item", "rating"]].itertuples(index=False, name=None))
    # validation repeats the training triples
    dataset = make_dataset(triples, triples, triples, n_users=5, n_items=5)
    config = TrainConfig(bits=8, epochs=200, batch_size=5, learning_rate=0.05, kl_weight=0.0, noise_variance=0.0,
                         train_sampling="deterministic", patience=None, seed=0)
    result = train(dataset, config)
    assert result.log.column("val_loss").min() < 0.05
