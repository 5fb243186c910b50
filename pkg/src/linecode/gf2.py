"""Bit-packed GF(2) vectors and matrices.

Matrices are stored row-major as ``uint64`` words (bit ``j`` of a row lives in
word ``j // 64`` at position ``j % 64``).  Vectors on the simulation hot path
are plain Python ints wrapped in :class:`BitVector`; bit ``i`` of the vector is
``(value >> i) & 1``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD = 64
_U1 = np.uint64(1)


def n_words(cols: int) -> int:
    return (cols + WORD - 1) // WORD


@dataclass(frozen=True, slots=True)
class BitVector:
    """Fixed-length vector over GF(2) backed by an int."""

    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError(f"BitVector length must be positive, got {self.length}")
        if self.value < 0 or self.value >> self.length:
            raise ValueError("BitVector value has bits outside its length")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitVector:
        value = 0
        length = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"bit {i} is {b!r}, expected 0 or 1")
            value |= b << i
            length += 1
        return cls(value, length)

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(0, length)

    @classmethod
    def unit(cls, length: int, index: int) -> BitVector:
        if not 0 <= index < length:
            raise IndexError(index)
        return cls(1 << index, length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        return (self.value >> (i % self.length)) & 1

    def __iter__(self):
        v = self.value
        for _ in range(self.length):
            yield v & 1
            v >>= 1

    def __xor__(self, other: BitVector) -> BitVector:
        if other.length != self.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")
        return BitVector(self.value ^ other.value, self.length)

    def bits(self) -> list[int]:
        return list(self)

    def weight(self) -> int:
        return self.value.bit_count()

    def is_zero(self) -> bool:
        return self.value == 0


class RankDeficientError(ValueError):
    """Raised by :func:`eliminate_decode` when the system is not solvable.

    ``rank`` is the rank reached and ``missing_pivots`` lists the columns for
    which no pivot row exists.
    """

    def __init__(self, rank: int, missing_pivots: list[int]):
        self.rank = rank
        self.missing_pivots = missing_pivots
        super().__init__(
            f"insufficient rank {rank}: no pivot for columns {missing_pivots}"
        )


def _int_to_words(value: int, nw: int) -> np.ndarray:
    return np.frombuffer(value.to_bytes(nw * 8, "little"), dtype="<u8").astype(np.uint64)


def _words_to_int(words: np.ndarray) -> int:
    return int.from_bytes(np.ascontiguousarray(words, dtype="<u8").tobytes(), "little")


class BitMatrix:
    """Dense GF(2) matrix, rows packed into 64-bit words."""

    __slots__ = ("_words", "_cols")

    def __init__(self, words: np.ndarray, cols: int):
        words = np.asarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != n_words(cols):
            raise ValueError(f"word array of shape {words.shape} does not fit {cols} columns")
        if cols < 0:
            raise ValueError("negative column count")
        tail = cols % WORD
        if tail and words.shape[0] and np.any(words[:, -1] >> np.uint64(tail)):
            raise ValueError("bits set beyond the last column")
        self._words = words
        self._words.flags.writeable = False
        self._cols = cols

    # construction -----------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BitMatrix:
        if rows < 0 or cols < 0:
            raise ValueError("negative dimension")
        return cls(np.zeros((rows, n_words(cols)), dtype=np.uint64), cols)

    @classmethod
    def identity(cls, n: int) -> BitMatrix:
        return cls.from_rows([1 << i for i in range(n)], n)

    @classmethod
    def from_array(cls, a) -> BitMatrix:
        a = np.asarray(a)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        if a.size and not np.isin(a, (0, 1)).all():
            raise ValueError("entries must be 0 or 1")
        return cls(pack_bits(a), a.shape[1])

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector | int], cols: int | None = None) -> BitMatrix:
        values = []
        for r in rows:
            if isinstance(r, BitVector):
                if cols is None:
                    cols = r.length
                elif r.length != cols:
                    raise ValueError("rows have different lengths")
                values.append(r.value)
            else:
                values.append(int(r))
        if cols is None:
            raise ValueError("cols is required when no BitVector rows are given")
        nw = n_words(cols)
        words = np.zeros((len(values), nw), dtype=np.uint64)
        for i, v in enumerate(values):
            if v < 0 or v >> cols:
                raise ValueError(f"row {i} has bits outside {cols} columns")
            words[i] = _int_to_words(v, nw)
        return cls(words, cols)

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> BitMatrix:
        words = random_words((rows,), cols, rng)
        return cls(words, cols)

    # shape and access -------------------------------------------------------

    @property
    def rows(self) -> int:
        return self._words.shape[0]

    @property
    def cols(self) -> int:
        return self._cols

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self._cols

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self._cols):
            raise IndexError(f"({i}, {j}) outside {self.shape}")
        return int((self._words[i, j // WORD] >> np.uint64(j % WORD)) & _U1)

    def row(self, i: int) -> BitVector:
        if not 0 <= i < self.rows:
            raise IndexError(i)
        return BitVector(_words_to_int(self._words[i]), self._cols)

    def row_ints(self) -> list[int]:
        return [_words_to_int(w) for w in self._words]

    def to_array(self) -> np.ndarray:
        if self.rows == 0 or self._cols == 0:
            return np.zeros(self.shape, dtype=np.uint8)
        raw = np.ascontiguousarray(self._words, dtype="<u8").view(np.uint8)
        return np.unpackbits(raw, axis=1, bitorder="little")[:, : self._cols]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._words, other._words)

    def __repr__(self) -> str:
        return f"BitMatrix(rows={self.rows}, cols={self._cols})"

    # algebra ----------------------------------------------------------------

    def transpose(self) -> BitMatrix:
        return BitMatrix.from_array(self.to_array().T)

    def vstack(self, other: BitMatrix) -> BitMatrix:
        if other.cols != self._cols:
            raise ValueError("column mismatch")
        return BitMatrix(np.vstack([self._words, other._words]), self._cols)

    def take_rows(self, index: Sequence[int]) -> BitMatrix:
        return BitMatrix(self._words[list(index)], self._cols)

    def __matmul__(self, other: BitMatrix) -> BitMatrix:
        if self._cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        out = np.zeros((self.rows, n_words(other.cols)), dtype=np.uint64)
        a = self.to_array().astype(bool)
        for i in range(self.rows):
            sel = other._words[a[i]]
            if len(sel):
                out[i] = np.bitwise_xor.reduce(sel, axis=0)
        return BitMatrix(out, other.cols)

    def rank(self) -> int:
        return rank(self)


def pack_bits(a) -> np.ndarray:
    """Pack a 0/1 array along its last axis into little-endian uint64 words."""
    a = np.asarray(a, dtype=np.uint8)
    cols = a.shape[-1]
    nw = n_words(cols)
    packed = np.packbits(a, axis=-1, bitorder="little")
    buf = np.zeros(a.shape[:-1] + (nw * 8,), dtype=np.uint8)
    buf[..., : packed.shape[-1]] = packed
    return buf.view("<u8").astype(np.uint64).reshape(a.shape[:-1] + (nw,))


def random_words(batch_shape: tuple[int, ...], cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random rows of ``cols`` bits, shape ``batch_shape + (n_words(cols),)``."""
    nw = n_words(cols)
    count = int(np.prod(batch_shape, dtype=np.int64)) * nw
    words = rng.bit_generator.random_raw(count).astype(np.uint64).reshape(*batch_shape, nw)
    tail = cols % WORD
    if tail and nw:
        words[..., -1] &= np.uint64((1 << tail) - 1)
    return words


def batch_rank(stack: np.ndarray, cols: int) -> np.ndarray:
    """GF(2) ranks of a stack of packed matrices.

    ``stack`` has shape ``(B, rows, words)``; returns an int array of length B.
    Pivots are taken column by column, lowest free row index first.
    """
    m = np.array(stack, dtype=np.uint64, copy=True)
    if m.ndim != 3:
        raise ValueError("expected a (batch, rows, words) array")
    b, n, _ = m.shape
    ranks = np.zeros(b, dtype=np.int64)
    if b == 0 or n == 0 or cols == 0:
        return ranks
    free = np.ones((b, n), dtype=bool)
    idx = np.arange(b)
    for c in range(cols):
        if not free.any():
            break
        w = c // WORD
        bit = ((m[:, :, w] >> np.uint64(c % WORD)) & _U1).astype(bool)
        cand = bit & free
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = cand.argmax(axis=1)
        prow = m[idx, piv, w:]
        elim = cand
        elim[idx, piv] = False
        elim &= has[:, None]
        m[:, :, w:] ^= np.where(elim[:, :, None], prow[:, None, :], np.uint64(0))
        free[idx[has], piv[has]] = False
        ranks += has
    return ranks


def rank(m: BitMatrix) -> int:
    """Row rank of ``m`` over GF(2); the input is left unchanged."""
    if m.rows == 0 or m.cols == 0:
        return 0
    return int(batch_rank(m.words[None], m.cols)[0])


def random_row(length: int, rng: random.Random) -> BitVector:
    """Uniform random vector of ``length`` bits drawn from ``rng``."""
    if length <= 0:
        raise ValueError("length must be positive")
    return BitVector(rng.getrandbits(length), length)


def eliminate_decode(m: BitMatrix, payloads: Sequence[BitVector]) -> list[BitVector]:
    """Solve ``m @ x = payloads`` for the message vectors ``x``.

    Gauss-Jordan elimination on the augmented rows.  Raises
    :class:`RankDeficientError` when ``rank(m) < m.cols``.
    """
    if len(payloads) != m.rows:
        raise ValueError(f"{len(payloads)} payloads for {m.rows} rows")
    if not payloads:
        if m.cols == 0:
            return []
        raise RankDeficientError(0, list(range(m.cols)))
    dim = payloads[0].length
    if any(p.length != dim for p in payloads):
        raise ValueError("payloads have different dimensions")
    cols = m.cols
    aug = [g | (p.value << cols) for g, p in zip(m.row_ints(), payloads)]
    pivot_rows: list[int] = []
    missing: list[int] = []
    used = [False] * len(aug)
    for c in range(cols):
        bit = 1 << c
        r = next((i for i, row in enumerate(aug) if not used[i] and row & bit), None)
        if r is None:
            missing.append(c)
            continue
        used[r] = True
        pr = aug[r]
        for i, row in enumerate(aug):
            if i != r and row & bit:
                aug[i] = row ^ pr
        pivot_rows.append(r)
    if missing:
        raise RankDeficientError(len(pivot_rows), missing)
    return [BitVector(aug[r] >> cols, dim) for r in pivot_rows]


class XorBasis:
    """Incremental echelon basis of int-encoded GF(2) vectors.

    Each stored row is keyed by its highest set bit.  An optional payload int
    rides along with every row so that rows can later be solved for messages.
    """

    __slots__ = ("_rows", "_payloads")

    def __init__(self) -> None:
        self._rows: dict[int, int] = {}
        self._payloads: dict[int, int] = {}

    @property
    def rank(self) -> int:
        return len(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def reduce(self, v: int, payload: int = 0) -> tuple[int, int]:
        rows = self._rows
        while v:
            h = v.bit_length() - 1
            r = rows.get(h)
            if r is None:
                break
            v ^= r
            payload ^= self._payloads[h]
        return v, payload

    def insert(self, v: int, payload: int = 0) -> bool:
        """Add ``v``; returns True iff it increased the rank."""
        rows = self._rows
        while v:
            h = v.bit_length() - 1
            r = rows.get(h)
            if r is None:
                rows[h] = v
                self._payloads[h] = payload
                return True
            v ^= r
            payload ^= self._payloads[h]
        return False

    def contains(self, v: int) -> bool:
        return self.reduce(v)[0] == 0

    def vectors(self) -> list[int]:
        return list(self._rows.values())

    def solve(self, length: int, known: dict[int, int] | None = None) -> list[int]:
        """Back-substitute into per-column payloads.

        Columns listed in ``known`` are taken as solved already; every other
        column below ``length`` must be a pivot of this basis.
        """
        known = known or {}
        missing = [h for h in range(length) if h not in known and h not in self._rows]
        if missing:
            raise RankDeficientError(length - len(missing), missing)
        out = [0] * length
        for c, v in known.items():
            out[c] = v
        for h in range(length):
            if h in known:
                continue
            row = self._rows[h] ^ (1 << h)
            acc = self._payloads[h]
            while row:
                low = row & -row
                acc ^= out[low.bit_length() - 1]
                row ^= low
            out[h] = acc
        return out


def span_rank(vectors: Iterable[int]) -> int:
    basis = XorBasis()
    for v in vectors:
        basis.insert(v)
    return basis.rank
