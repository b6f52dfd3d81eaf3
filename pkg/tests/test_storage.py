import os

import numpy as np
import pytest

from hashcf.core.bitcode import CodeMatrix, NegatedItemStore
from hashcf.core.errors import ArtifactNotFoundError, ParseError
from hashcf.storage.checkpoint_storage import CheckpointStorage
from hashcf.storage.code_storage import decode_codes, encode_codes, read_codes, write_codes
from hashcf.storage.metric_storage import TrainingLog


def test_code_file_round_trip(tmp_path):
    codes = CodeMatrix.random(37, 70, np.random.default_rng(0))
    path = os.path.join(tmp_path, "codes.bhcf")
    write_codes(path, codes)
    assert read_codes(path) == codes
    assert os.path.getsize(path) == 16 + 37 * 2 * 8


def test_negated_flag_survives(tmp_path):
    store = NegatedItemStore.from_items(CodeMatrix.random(5, 32, np.random.default_rng(1)))
    path = os.path.join(tmp_path, "neg.bhcf")
    write_codes(path, store)
    loaded = read_codes(path)
    assert isinstance(loaded, NegatedItemStore)
    assert loaded.codes == store.codes


def test_identical_codes_give_identical_bytes():
    codes = CodeMatrix.random(10, 64, np.random.default_rng(2))
    assert encode_codes(codes) == encode_codes(CodeMatrix(codes.words.copy(), 64))


@pytest.mark.parametrize("mutate", [
    lambda data: b"XXXX" + data[4:],
    lambda data: data[:4] + bytes([9]) + data[5:],
    lambda data: data[:-3],
    lambda data: data[:10],
])
def test_corrupt_code_files_raise_parse_error(mutate):
    data = encode_codes(CodeMatrix.random(3, 16, np.random.default_rng(3)))
    with pytest.raises(ParseError):
        decode_codes(mutate(data))


def test_checkpoint_round_trip(tmp_path):
    storage = CheckpointStorage(str(tmp_path))
    tables = {"user_table": np.arange(12, dtype=np.float32).reshape(3, 4),
              "item_table": -np.ones((2, 4), dtype=np.float32)}
    storage.save("model", "vh", 4, tables, {"bits": 4}, "abc", seed=7, epoch=3, metrics={"val_ndcg10": 0.5})
    meta, loaded = storage.load("model")
    assert meta.kind == "vh" and meta.m == 4 and meta.seed == 7 and meta.epoch == 3
    assert meta.config_hash == "abc"
    for name, table in tables.items():
        np.testing.assert_array_equal(loaded[name], table)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(ArtifactNotFoundError, match="checkpoint not found"):
        CheckpointStorage(str(tmp_path)).load("model")


def test_truncated_checkpoint_blob(tmp_path):
    storage = CheckpointStorage(str(tmp_path))
    storage.save("model", "mf", 2, {"user_vectors": np.ones((2, 2), dtype=np.float32)}, {}, "h", seed=0)
    _, blob = storage.paths("model")
    with open(blob, "r+b") as handle:
        handle.truncate(8)
    with pytest.raises(ParseError):
        storage.load("model")


def test_training_log_csv_round_trip(tmp_path):
    log = TrainingLog()
    log.add(1, 2.5, 0.1 + 0.2, 0.7, 0.9999)
    log.add(2, 1.5, float("nan"), 0.8, 0.9998)
    path = os.path.join(tmp_path, "log.csv")
    log.to_csv(path)
    with open(path) as handle:
        assert handle.readline().strip() == "epoch,train_loss,val_loss,val_ndcg10,noise_var"
    loaded = TrainingLog.from_csv(path)
    assert len(loaded) == 2
    np.testing.assert_array_equal(loaded.column("train_loss"), [2.5, 1.5])
    assert np.isnan(loaded.column("val_loss")[1])
    assert loaded.column("val_loss")[0] == 0.1 + 0.2
    assert loaded.records[1].epoch == 2
