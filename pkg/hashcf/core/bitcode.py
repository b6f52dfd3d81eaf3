"""
Packed binary hash codes and the bit-level distance kernels.

Bit mapping: bit j = 1 encodes the code value +1, bit j = 0 encodes -1. Bit j
lives in word j // 64 at position j % 64 (little-endian word order). Bits at
positions >= m are always zero.

Under this mapping the projection of an item code onto a user code is a
wordwise AND, and the projected Hamming dissimilarity (PHD) is
popcount(u AND NOT i).
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from numba import njit

from .errors import DimensionError, InvalidInputError

logger = logging.getLogger(__name__)

WORD_BITS = 64
MAX_BITS = 65535  # bit length is stored as u16 in code files
_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def n_words(m: int) -> int:
    return (m + WORD_BITS - 1) // WORD_BITS


def tail_mask(m: int) -> np.ndarray:
    """Word mask selecting the first m bits."""
    mask = np.full(n_words(m), _ALL_ONES, dtype=np.uint64)
    rest = m % WORD_BITS
    if rest:
        mask[-1] = np.uint64((1 << rest) - 1)
    return mask


def _check_m(m: int):
    if not 1 <= m <= MAX_BITS:
        raise InvalidInputError(f"bit length must be in [1, {MAX_BITS}], got {m}")


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    n, m = bits.shape
    width = n_words(m) * WORD_BITS
    padded = np.zeros((n, width), dtype=np.uint64)
    padded[:, :m] = bits
    shifts = np.arange(WORD_BITS, dtype=np.uint64)
    return np.bitwise_or.reduce(padded.reshape(n, -1, WORD_BITS) << shifts, axis=2)


def _unpack_rows(words: np.ndarray, m: int) -> np.ndarray:
    positions = np.arange(m)
    word_index = positions // WORD_BITS
    shifts = (positions % WORD_BITS).astype(np.uint64)
    return ((words[:, word_index] >> shifts) & np.uint64(1)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class HashCode:
    words: np.ndarray
    m: int

    def __post_init__(self):
        _check_m(self.m)
        words = np.array(self.words, dtype=np.uint64).reshape(-1)
        if words.shape[0] != n_words(self.m):
            raise InvalidInputError(f"{self.m} bits need {n_words(self.m)} words, got {words.shape[0]}")
        if np.any(words & ~tail_mask(self.m)):
            raise InvalidInputError("bits at positions >= m must be zero")
        words.flags.writeable = False
        object.__setattr__(self, "words", words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HashCode):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.m, self.words.tobytes()))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits())

    def __repr__(self) -> str:
        return f"HashCode('{self}')"

    def bits(self) -> np.ndarray:
        """0/1 array of length m, bit 0 first."""
        return _unpack_rows(self.words[None, :], self.m)[0]

    def values(self) -> np.ndarray:
        """Code entries in {-1, +1}."""
        return 2 * self.bits().astype(np.int8) - 1

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    @classmethod
    def from_string(cls, text: str) -> "HashCode":
        """Parse a 0/1 string listing bit 0 first, e.g. '1010'."""
        if not text or set(text) - {"0", "1"}:
            raise InvalidInputError(f"not a bit string: {text!r}")
        return cls(_pack_rows(np.array([[int(c) for c in text]], dtype=np.uint64))[0], len(text))

    @classmethod
    def zeros(cls, m: int) -> "HashCode":
        return cls(np.zeros(n_words(m), dtype=np.uint64), m)

    @classmethod
    def ones(cls, m: int) -> "HashCode":
        return cls(tail_mask(m), m)


def pack_bits(bits: Sequence[int]) -> HashCode:
    """
    Pack a sequence of code values in {-1, +1} into a HashCode.

    Raises:
        InvalidInputError: On an empty or over-long sequence or a value other than -1/+1.
    """
    values = np.asarray(bits)
    if values.ndim != 1:
        raise InvalidInputError("expected a flat sequence of -1/+1 values")
    _check_m(values.shape[0])
    if not np.all((values == 1) | (values == -1)):
        raise InvalidInputError("code values must be -1 or +1")
    return HashCode(_pack_rows((values == 1)[None, :].astype(np.uint64))[0], values.shape[0])


def _same_m(a: HashCode, b: HashCode):
    if a.m != b.m:
        raise DimensionError(f"bit length mismatch: {a.m} vs {b.m}")


def popcount(code: HashCode) -> int:
    return code.popcount()


def hamming(a: HashCode, b: HashCode) -> int:
    _same_m(a, b)
    return int(np.bitwise_count(a.words ^ b.words).sum())


def project(u: HashCode, i: HashCode) -> HashCode:
    """Mask the item code by the user code (wordwise AND)."""
    _same_m(u, i)
    return HashCode(u.words & i.words, u.m)


def phd(u: HashCode, i: HashCode) -> int:
    """Projected Hamming dissimilarity: popcount(u XOR (u AND i))."""
    _same_m(u, i)
    return int(np.bitwise_count((u.words ^ (u.words & i.words)) & tail_mask(u.m)).sum())


def phd_fast(u: HashCode, i_neg: HashCode) -> int:
    """PHD against a stored negated item code: popcount(u AND i_neg)."""
    _same_m(u, i_neg)
    return int(np.bitwise_count(u.words & i_neg.words).sum())


def negate(code: HashCode) -> HashCode:
    return HashCode(~code.words & tail_mask(code.m), code.m)


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """n codes of m bits packed row-wise into an (n, ceil(m/64)) uint64 array."""
    words: np.ndarray
    m: int

    def __post_init__(self):
        _check_m(self.m)
        words = np.array(self.words, dtype=np.uint64, order="C")
        if words.ndim != 2 or words.shape[1] != n_words(self.m):
            raise InvalidInputError(f"expected shape (n, {n_words(self.m)}), got {words.shape}")
        if np.any(words & ~tail_mask(self.m)):
            raise InvalidInputError("bits at positions >= m must be zero")
        words.flags.writeable = False
        object.__setattr__(self, "words", words)

    def __len__(self) -> int:
        return self.words.shape[0]

    def __getitem__(self, index: int) -> HashCode:
        return HashCode(self.words[index], self.m)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.words, other.words)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "CodeMatrix":
        """Pack an (n, m) array of 0/1 (or bool) values."""
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise InvalidInputError("expected an (n, m) bit array")
        if not np.all((bits == 0) | (bits == 1)):
            raise InvalidInputError("bit array must contain only 0 and 1")
        return cls(_pack_rows(bits.astype(np.uint64)), bits.shape[1])

    @classmethod
    def from_codes(cls, codes: Iterable[HashCode]) -> "CodeMatrix":
        codes = list(codes)
        if not codes:
            raise InvalidInputError("need at least one code")
        for code in codes[1:]:
            _same_m(codes[0], code)
        return cls(np.stack([c.words for c in codes]), codes[0].m)

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "CodeMatrix":
        words = rng.integers(0, np.iinfo(np.uint64).max, size=(n, n_words(m)), dtype=np.uint64, endpoint=True)
        return cls(words & tail_mask(m), m)

    def bits(self) -> np.ndarray:
        return _unpack_rows(self.words, self.m)

    def rows(self, indices) -> "CodeMatrix":
        return CodeMatrix(self.words[np.asarray(indices, dtype=np.int64)], self.m)

    def negate(self) -> "CodeMatrix":
        return CodeMatrix(~self.words & tail_mask(self.m), self.m)


@dataclass(frozen=True)
class NegatedItemStore:
    """Item codes stored as NOT z_i so PHD costs one AND plus a popcount."""
    codes: CodeMatrix

    @classmethod
    def from_items(cls, items: CodeMatrix) -> "NegatedItemStore":
        return cls(items.negate())

    @property
    def m(self) -> int:
        return self.codes.m

    def __len__(self) -> int:
        return len(self.codes)

    def originals(self) -> CodeMatrix:
        return self.codes.negate()


def _check_query(query: HashCode, codes: CodeMatrix):
    if query.m != codes.m:
        raise DimensionError(f"bit length mismatch: {query.m} vs {codes.m}")


def hamming_many(query: HashCode, codes: CodeMatrix, rows=None) -> np.ndarray:
    """Hamming distance from one query to every (or the selected) row."""
    _check_query(query, codes)
    words = codes.words if rows is None else codes.words[rows]
    return np.bitwise_count(words ^ query.words).sum(axis=1, dtype=np.int64)


def phd_many(query: HashCode, store: Union[NegatedItemStore, CodeMatrix], rows=None) -> np.ndarray:
    """PHD from one user code to every (or the selected) negated item code."""
    codes = store.codes if isinstance(store, NegatedItemStore) else store
    _check_query(query, codes)
    words = codes.words if rows is None else codes.words[rows]
    return np.bitwise_count(words & query.words).sum(axis=1, dtype=np.int64)


@njit(nogil=True)
def _counting_argsort(keys, n_buckets):
    counts = np.zeros(n_buckets + 1, dtype=np.int64)
    for i in range(keys.shape[0]):
        counts[keys[i] + 1] += 1
    for b in range(1, n_buckets + 1):
        counts[b] += counts[b - 1]
    order = np.empty(keys.shape[0], dtype=np.int64)
    for i in range(keys.shape[0]):
        key = keys[i]
        order[counts[key]] = i
        counts[key] += 1
    return order


def counting_argsort(keys: np.ndarray, max_key: int) -> np.ndarray:
    """
    Stable ascending argsort of integer keys in [0, max_key] in O(n + max_key).

    Equal keys keep their input order.
    """
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if keys.size == 0:
        return np.empty(0, dtype=np.int64)
    if keys.min() < 0 or keys.max() > max_key:
        raise InvalidInputError(f"keys must lie in [0, {max_key}]")
    return _counting_argsort(keys, max_key + 1)


def rank_items(u: HashCode, store: NegatedItemStore, k: int) -> List[Tuple[int, int]]:
    """
    Rank all stored items for user code u by ascending PHD.

    Ties are broken by ascending item index.

    Returns:
        The first min(k, len(store)) (item index, dissimilarity) pairs.
    """
    if k <= 0:
        raise InvalidInputError(f"k must be positive, got {k}")
    if len(store) == 0:
        return []
    distances = phd_many(u, store)
    order = counting_argsort(distances, u.m)[:k]
    return [(int(i), int(distances[i])) for i in order]
