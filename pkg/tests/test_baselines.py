import numpy as np
import pytest

from hashcf.core.baselines import MFParams, evaluate_mf, mf_predict, mf_train, quantize, tune_l2
from hashcf.core.config import MFConfig
from hashcf.core.errors import ConfigurationError, EntityLookupError
from hashcf.storage.code_storage import decode_codes, encode_codes
from tests.conftest import make_dataset


def _rank_one_dataset(n_users=30, n_items=20, seed=0):
    rng = np.random.default_rng(seed)
    p, q = rng.uniform(1, 2, n_users), rng.uniform(1, 2, n_items)
    parts = {"train": [], "validation": [], "test": []}
    for u in range(n_users):
        items = rng.permutation(n_items)
        for position, i in enumerate(items):
            name = "train" if position < 12 else "validation" if position < 14 else "test"
            parts[name].append((u, int(i), float(p[u] * q[i])))
    return make_dataset(parts["train"], parts["validation"], parts["test"], n_users, n_items)


def test_mf_predict_examples():
    params = MFParams(np.array([[1.0, 2.0], [0.0, 0.0]]), np.array([[3.0, -1.0]]))
    assert mf_predict(params, 0, 0) == 1.0
    assert mf_predict(params, 1, 0) == 0.0
    swapped = MFParams(params.item_vectors, params.user_vectors)
    assert mf_predict(swapped, 0, 0) == mf_predict(params, 0, 0)
    with pytest.raises(EntityLookupError):
        mf_predict(params, 2, 0)


def test_quantize_mean_example():
    params = MFParams(np.array([[-1.0], [1.0]]), np.array([[0.0], [2.0], [4.0]]))
    users, items = quantize(params, "mean")
    assert [str(c) for c in users] == ["0", "1"]
    assert [str(c) for c in items] == ["0", "0", "1"]


def test_quantize_constant_dimension_gives_zeros():
    params = MFParams(np.array([[3.0, 1.0], [3.0, 2.0]]), np.array([[5.0, 0.0], [5.0, 1.0]]))
    users, items = quantize(params, "median")
    assert users.bits()[:, 0].sum() == 0 and items.bits()[:, 0].sum() == 0


def test_median_quantization_balances_bits():
    rng = np.random.default_rng(0)
    params = MFParams(rng.normal(size=(101, 16)), rng.normal(size=(50, 16)))
    users, items = quantize(params, "median")
    for codes in (users, items):
        ones = codes.bits().sum(axis=0).astype(np.int64)
        assert np.all(np.abs(2 * ones - len(codes)) <= 1)
    assert decode_codes(encode_codes(users))[0] == users


def test_pooled_thresholds_use_both_tables():
    params = MFParams(np.array([[0.0], [1.0]]), np.array([[10.0], [11.0]]))
    users, items = quantize(params, "mean", pooled=True)
    assert [str(c) for c in users] == ["0", "0"]
    assert [str(c) for c in items] == ["1", "1"]
    with pytest.raises(ConfigurationError):
        quantize(params, "mode")


def test_rank_one_ratings_are_recovered():
    dataset = _rank_one_dataset()
    config = MFConfig(dim=1, learning_rate=0.02, l2=0.0, epochs=600, batch_size=400, patience=None)
    result = mf_train(dataset, config)
    assert np.sqrt(result.log.column("val_loss").min()) < 0.05
    val_mse = result.log.column("val_loss")
    assert val_mse[9] <= val_mse[0]


def test_heavy_regularisation_shrinks_predictions():
    dataset = _rank_one_dataset(seed=1)
    result = mf_train(dataset, MFConfig(dim=2, learning_rate=0.05, l2=100.0, epochs=30, patience=None))
    predictions = [mf_predict(result.params, u, i) for u in range(5) for i in range(5)]
    assert np.max(np.abs(predictions)) < 0.1


def test_mf_training_is_reproducible():
    dataset = _rank_one_dataset(seed=2)
    config = MFConfig(dim=4, epochs=3, seed=9)
    first, second = mf_train(dataset, config), mf_train(dataset, config)
    np.testing.assert_array_equal(first.params.user_vectors, second.params.user_vectors)
    np.testing.assert_array_equal(first.params.item_vectors, second.params.item_vectors)


def test_mf_with_bias_round_trips_tables():
    dataset = _rank_one_dataset(seed=3)
    result = mf_train(dataset, MFConfig(dim=2, epochs=2, use_bias=True))
    assert result.params.has_bias
    restored = MFParams.from_tables(result.params.tables())
    assert mf_predict(restored, 1, 2) == pytest.approx(mf_predict(result.params, 1, 2))
    report = evaluate_mf(result.params, dataset)
    assert 0.0 <= report.aggregates["ndcg10"] <= 1.0


def test_mf_rejects_empty_train():
    dataset = make_dataset([], [(0, 0, 1.0)], n_users=1, n_items=1)
    with pytest.raises(ConfigurationError):
        mf_train(dataset, MFConfig(dim=2))


def test_tune_l2_picks_a_grid_value():
    dataset = _rank_one_dataset(seed=4)
    best, result, scores = tune_l2(dataset, MFConfig(dim=2, epochs=2), grid=(1e-3, 1e-1))
    assert best in (1e-3, 1e-1)
    assert set(scores) == {1e-3, 1e-1}
    assert result.config.l2 == best
