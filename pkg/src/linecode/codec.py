"""Dense, chunked and precoded-chunked coding at source, relay and sink.

Global encoding vectors are restricted to their chunk: a packet of chunk ``c``
carries an ``alpha``-bit vector whose bit ``j`` is the coefficient of symbol
``c * alpha + j``.  A dense code is the one-chunk case.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import reduce
from itertools import compress
from operator import xor
from typing import Sequence

from .gf2 import BitMatrix, BitVector, RankDeficientError, XorBasis


@dataclass(frozen=True)
class PrecodeConfig:
    """Systematic random linear precode.

    ``k_prime(k)`` intermediate symbols are produced from ``k`` messages so that
    any erasure of an ``erasure_fraction`` share of them still leaves
    ``k + margin`` random-enough rows.
    """

    gamma_a: float
    gamma_b: float
    margin: int | None = None
    epsilon: float = 1e-3

    def __post_init__(self) -> None:
        if not 0 <= self.gamma_a < 1 or not 0 <= self.gamma_b < 1:
            raise ValueError("gamma_a and gamma_b must lie in [0, 1)")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.margin is not None and self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.erasure_fraction >= 1:
            raise ValueError("(1 + gamma_a) * gamma_b must be below 1")

    @property
    def erasure_fraction(self) -> float:
        return (1 + self.gamma_a) * self.gamma_b

    @property
    def extra(self) -> int:
        if self.margin is not None:
            return self.margin
        return math.ceil(math.log2(1 / self.epsilon))

    def k_prime(self, k: int) -> int:
        # k / (1 - x) = (1 + x + O(x^2)) k
        return math.ceil((k + self.extra) / (1 - self.erasure_fraction) - 1e-9)

    def rate(self, k: int) -> float:
        return k / self.k_prime(k)

    def max_messages(self, k_prime: int) -> int:
        """Largest message count whose precode fits in ``k_prime`` symbols."""
        k = max(0, math.floor(k_prime * (1 - self.erasure_fraction)) - self.extra)
        while k > 0 and self.k_prime(k) > k_prime:
            k -= 1
        while self.k_prime(k + 1) <= k_prime:
            k += 1
        return k


@dataclass(frozen=True)
class CodeConfig:
    """Message size ``k`` split into ``q`` chunks, optionally behind a precode.

    With a precode the chunks partition the ``k_prime`` intermediate symbols
    instead of the ``k`` messages.
    """

    k: int
    q: int = 1
    payload_dim: int | None = None
    precode: PrecodeConfig | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.n_symbols % self.q:
            raise ValueError(f"q={self.q} does not divide {self.n_symbols} coded symbols")
        if self.payload_dim is not None and self.payload_dim < 1:
            raise ValueError("payload_dim must be positive")

    @property
    def n_symbols(self) -> int:
        """Symbols carried by the chunked code (messages or intermediates)."""
        return self.precode.k_prime(self.k) if self.precode else self.k

    @property
    def alpha(self) -> int:
        return self.n_symbols // self.q

    @property
    def dense(self) -> bool:
        return self.q == 1 and self.precode is None


@dataclass(frozen=True, slots=True)
class Packet:
    chunk_id: int
    gev: BitVector
    payload: BitVector | None = None


class NodeBuffer:
    """Everything a relay has received, per chunk, in arrival order."""

    __slots__ = ("alpha", "payload_dim", "gevs", "payloads")

    def __init__(self, q: int, alpha: int, payload_dim: int | None = None):
        self.alpha = alpha
        self.payload_dim = payload_dim
        self.gevs: list[list[int]] = [[] for _ in range(q)]
        self.payloads: list[list[int]] = [[] for _ in range(q)]

    def add(self, pkt: Packet) -> None:
        self.gevs[pkt.chunk_id].append(pkt.gev.value)
        self.payloads[pkt.chunk_id].append(pkt.payload.value if pkt.payload is not None else 0)

    def count(self, chunk_id: int) -> int:
        return len(self.gevs[chunk_id])

    def packets(self, chunk_id: int) -> list[Packet]:
        if self.payload_dim is None:
            return [Packet(chunk_id, BitVector(g, self.alpha)) for g in self.gevs[chunk_id]]
        return [
            Packet(chunk_id, BitVector(g, self.alpha), BitVector(v, self.payload_dim))
            for g, v in zip(self.gevs[chunk_id], self.payloads[chunk_id])
        ]


def select_chunk(q: int, rng: random.Random) -> int:
    if q < 1:
        raise ValueError("q must be at least 1")
    return rng.randrange(q)


def _combine(values: Sequence[int], coeffs: int, m: int) -> int:
    bits = bin(coeffs)[2:].zfill(m)[::-1]
    return reduce(xor, compress(values, map("1".__eq__, bits)), 0)


def source_emit(
    cfg: CodeConfig,
    chunk_id: int,
    rng: random.Random,
    symbols: Sequence[int] | None = None,
) -> Packet:
    """Fresh uniform combination of the symbols of ``chunk_id``.

    ``symbols`` holds the payload ints of all coded symbols; when given the
    packet carries the matching payload.
    """
    if not 0 <= chunk_id < cfg.q:
        raise ValueError(f"chunk {chunk_id} outside [0, {cfg.q})")
    a = cfg.alpha
    gev = rng.getrandbits(a)
    payload = None
    if symbols is not None:
        if cfg.payload_dim is None:
            raise ValueError("payload symbols given but payload_dim is unset")
        lo = chunk_id * a
        payload = BitVector(_combine(symbols[lo : lo + a], gev, a), cfg.payload_dim)
    return Packet(chunk_id, BitVector(gev, a), payload)


def node_recode(buf: NodeBuffer, chunk_id: int, rng: random.Random) -> Packet | None:
    """Random GF(2) combination of the buffered packets of ``chunk_id``.

    One coefficient is drawn per buffered packet, so the all-zero combination
    can come out.  Returns None when nothing of that chunk has arrived yet.
    """
    gevs = buf.gevs[chunk_id]
    m = len(gevs)
    if m == 0:
        return None
    coeffs = rng.getrandbits(m)
    gev = _combine(gevs, coeffs, m)
    payload = None
    if buf.payload_dim is not None:
        payload = BitVector(_combine(buf.payloads[chunk_id], coeffs, m), buf.payload_dim)
    return Packet(chunk_id, BitVector(gev, buf.alpha), payload)


class SinkState:
    """Per-chunk decoding matrices at the sink.

    Only innovative rows are kept; dependent arrivals just bump counters.
    """

    def __init__(self, q: int, alpha: int):
        self.q = q
        self.alpha = alpha
        self.bases = [XorBasis() for _ in range(q)]
        self.decode_time: list[float | None] = [None] * q
        self.n_decoded = 0
        self.received = 0
        self.innovative = 0

    def rank(self, chunk_id: int | None = None) -> int:
        if chunk_id is None:
            return sum(b.rank for b in self.bases)
        return self.bases[chunk_id].rank

    def decoded(self, chunk_id: int) -> bool:
        return self.decode_time[chunk_id] is not None

    def chunk_messages(self, chunk_id: int) -> list[int]:
        return self.bases[chunk_id].solve(self.alpha)


def sink_ingest(state: SinkState, pkt: Packet, now: float) -> SinkState:
    state.received += 1
    c = pkt.chunk_id
    basis = state.bases[c]
    if basis.rank == state.alpha:
        return state
    payload = pkt.payload.value if pkt.payload is not None else 0
    if basis.insert(pkt.gev.value, payload):
        state.innovative += 1
        if basis.rank == state.alpha:
            state.decode_time[c] = now
            state.n_decoded += 1
    return state


# precode ---------------------------------------------------------------------


def precode_generator(k: int, pc: PrecodeConfig, rng: random.Random) -> list[int]:
    """Generator rows as ints: identity on top, uniform parity rows below."""
    k_prime = pc.k_prime(k)
    if k_prime < k:
        raise ValueError("k_prime < k")
    return [1 << i for i in range(k)] + [rng.getrandbits(k) for _ in range(k_prime - k)]


def precode_encode(
    messages: Sequence[BitVector], pc: PrecodeConfig, rng: random.Random
) -> tuple[list[BitVector], BitMatrix]:
    """Systematic encoding: the first ``k`` outputs are the messages."""
    k = len(messages)
    if k == 0:
        raise ValueError("no messages")
    dim = messages[0].length
    rows = precode_generator(k, pc, rng)
    values = [m.value for m in messages]
    out = list(messages) + [
        BitVector(_combine(values, g, k), dim) for g in rows[k:]
    ]
    return out, BitMatrix.from_rows(rows, k)


def _split_systematic(rows: Sequence[int], values: Sequence[int] | None):
    known: dict[int, int] = {}
    rest: list[tuple[int, int]] = []
    for i, g in enumerate(rows):
        v = values[i] if values is not None else 0
        if g and g & (g - 1) == 0:
            known.setdefault(g.bit_length() - 1, v)
        else:
            rest.append((g, v))
    return known, rest


def precode_rank(rows: Sequence[int], k: int) -> int:
    """Rank of int-encoded generator rows, fast when most rows are unit vectors."""
    known, rest = _split_systematic(rows, None)
    mask = ((1 << k) - 1) ^ sum(1 << c for c in known)
    basis = XorBasis()
    for g, _ in rest:
        basis.insert(g & mask)
        if len(known) + basis.rank == k:
            break
    return len(known) + basis.rank


def precode_decode(generator_rows: BitMatrix, survivors: Sequence[BitVector]) -> list[BitVector]:
    """Recover the messages from surviving intermediate symbols.

    ``generator_rows`` holds the generator rows of the survivors, aligned with
    ``survivors``.  Raises :class:`RankDeficientError` unless the rows have
    rank ``k``.
    """
    if generator_rows.rows != len(survivors):
        raise ValueError(
            f"{generator_rows.rows} generator rows for {len(survivors)} survivors"
        )
    k = generator_rows.cols
    if not survivors:
        raise RankDeficientError(0, list(range(k)))
    dim = survivors[0].length
    rows = generator_rows.row_ints()
    known, rest = _split_systematic(rows, [s.value for s in survivors])
    unknown_mask = ((1 << k) - 1) ^ sum(1 << c for c in known)
    basis = XorBasis()
    for g, v in rest:
        hit = g & ~unknown_mask
        while hit:
            low = hit & -hit
            v ^= known[low.bit_length() - 1]
            hit ^= low
        basis.insert(g & unknown_mask, v)
    if len(known) + basis.rank < k:
        missing = [c for c in range(k) if c not in known]
        raise RankDeficientError(len(known) + basis.rank, missing)
    # the residual basis has its pivots exactly on the unknown columns
    return [BitVector(v, dim) for v in basis.solve(k, known)]
