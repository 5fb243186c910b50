"""One trial of a coded transfer over a line network ``v_0 -> ... -> v_L``.

Two engines share the traffic and seeding rules:

``"gev"``
    carries real global encoding vectors (and payloads in payload mode)
    through :mod:`linecode.codec`.
``"rank"``
    tracks only the per-chunk subspace dimension at each node.  A uniformly
    random combination of a node's buffer is uniform over the buffer's span,
    and every node's span sits inside its upstream neighbour's, so a packet
    crossing link ``i`` raises ``d_i`` with probability ``1 - 2**(d_i - d_{i-1})``
    whatever the actual vectors are.  The dimension process is therefore
    exactly the one the ``gev`` engine produces, at O(1) cost per event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import seeding
from .codec import (
    CodeConfig,
    NodeBuffer,
    SinkState,
    _combine,
    node_recode,
    precode_decode,
    precode_generator,
    precode_rank,
    select_chunk,
    sink_ingest,
    source_emit,
)
from .gf2 import BitMatrix, BitVector, XorBasis
from .traffic import TrafficSpec, equivalent_min_param, opportunities

ENGINES = ("gev", "rank")


@dataclass(frozen=True)
class NetworkConfig:
    """Line network, code and traffic for one family of trials.

    ``horizon_cap`` defaults to ``4 * n / p`` with ``n`` the number of coded
    symbols and ``p`` the minimum equivalent rate.  ``upstream_first=False``
    switches simultaneous events to downstream-first order, so that a packet
    received at time ``t`` is only forwarded after ``t``.
    """

    code: CodeConfig
    traffic: TrafficSpec
    horizon_cap: float | None = None
    payload_mode: bool = False
    engine: str = "gev"
    upstream_first: bool = True

    def __post_init__(self) -> None:
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.horizon_cap is not None and not self.horizon_cap > 0:
            raise ValueError("horizon_cap must be positive")
        if self.payload_mode and self.engine != "gev":
            raise ValueError("payload mode needs the gev engine")
        if self.payload_mode and self.code.payload_dim is None:
            raise ValueError("payload mode needs code.payload_dim")

    @property
    def L(self) -> int:
        return self.traffic.L

    @property
    def horizon(self) -> float:
        if self.horizon_cap is not None:
            return self.horizon_cap
        return 4 * self.code.n_symbols / equivalent_min_param(self.traffic).p


@dataclass(frozen=True)
class TrialResult:
    coding_delay: float
    censored: bool
    chunk_decode_times: tuple[float | None, ...]
    packets_sent: tuple[int, ...]
    packets_successful: tuple[int, ...]
    seed: int
    decoded_messages: tuple[int, ...] | None = None
    sink_received: int = 0

    @property
    def q(self) -> int:
        return len(self.chunk_decode_times)


def trial_seed(master_seed: int, index: int) -> int:
    return seeding.mix(master_seed, index)


def trial_messages(code: CodeConfig, seed: int) -> list[int]:
    """Message payloads a payload-mode trial with ``seed`` transmits."""
    rng = seeding.stream(seed, seeding.MESSAGES)
    return [rng.getrandbits(code.payload_dim) for _ in range(code.k)]


def undecodable_fraction_at(tr: TrialResult, n_t: float) -> float:
    """Share of chunks not decoded by time ``n_t``."""
    if n_t < 0:
        raise ValueError("n_t must be non-negative")
    late = sum(1 for t in tr.chunk_decode_times if t is None or t > n_t)
    return late / len(tr.chunk_decode_times)


@dataclass
class _Precode:
    k: int
    alpha: int
    threshold: float
    rows: list[int] = field(default_factory=list)

    def done(self, decode_time: Sequence[float | None], n_decoded: int) -> bool:
        if n_decoded * self.alpha < self.threshold:
            return False
        surv = [
            self.rows[c * self.alpha + j]
            for c, t in enumerate(decode_time)
            if t is not None
            for j in range(self.alpha)
        ]
        return precode_rank(surv, self.k) == self.k


def _precode_state(code: CodeConfig, seed: int) -> _Precode | None:
    pc = code.precode
    if pc is None:
        return None
    rows = precode_generator(code.k, pc, seeding.stream(seed, seeding.PRECODE))
    return _Precode(code.k, code.alpha, (1 - pc.erasure_fraction) * code.n_symbols - 1e-9, rows)


def _streams(cfg: NetworkConfig, seed: int):
    traffic = (
        seeding.stream(seed, seeding.TRAFFIC, 1),
        seeding.stream(seed, seeding.TRAFFIC, 2),
    )
    chunks = [seeding.stream(seed, seeding.CHUNKS, n) for n in range(cfg.L)]
    coeffs = [seeding.stream(seed, seeding.COEFFS, n) for n in range(cfg.L)]
    return traffic, chunks, coeffs


def run_trial(cfg: NetworkConfig, seed: int, trace: list | None = None) -> TrialResult:
    """Simulate until the sink can decode or the horizon runs out.

    A censored trial has ``coding_delay == inf``.  When ``trace`` is a list,
    ``(time, total sink rank)`` is appended after every delivery to the sink.
    """
    if cfg.engine == "rank":
        return _run_rank(cfg, seed, trace)
    return _run_gev(cfg, seed, trace)


def _finish(cfg, seed, delay, decode_time, sent, succ, received, messages=None) -> TrialResult:
    censored = delay is None
    return TrialResult(
        coding_delay=math.inf if censored else delay,
        censored=censored,
        chunk_decode_times=tuple(decode_time),
        packets_sent=tuple(sent),
        packets_successful=tuple(succ),
        seed=seed,
        decoded_messages=None if messages is None else tuple(messages),
        sink_received=received,
    )


def _run_gev(cfg: NetworkConfig, seed: int, trace: list | None) -> TrialResult:
    code = cfg.code
    q, a, L = code.q, code.alpha, cfg.L
    (sched_rng, loss_rng), chunk_rngs, coeff_rngs = _streams(cfg, seed)
    precode = _precode_state(code, seed)

    symbols = None
    pdim = None
    if cfg.payload_mode:
        pdim = code.payload_dim
        symbols = trial_messages(code, seed)
        if precode is not None:
            symbols = symbols + [_combine(symbols, g, code.k) for g in precode.rows[code.k :]]

    bufs = [None] + [NodeBuffer(q, a, pdim) for _ in range(1, L)]
    sink = SinkState(q, a)
    sent = [0] * L
    succ = [0] * L
    delay = None
    for t, i, ok in opportunities(
        cfg.traffic, sched_rng, loss_rng, cfg.horizon, cfg.upstream_first
    ):
        node = i - 1
        c = select_chunk(q, chunk_rngs[node])
        if node and bufs[node].count(c) == 0:
            continue
        sent[node] += 1
        if not ok:
            continue
        succ[node] += 1
        if node == 0:
            pkt = source_emit(code, c, coeff_rngs[0], symbols)
        else:
            pkt = node_recode(bufs[node], c, coeff_rngs[node])
        if i < L:
            bufs[i].add(pkt)
            continue
        before = sink.n_decoded
        sink_ingest(sink, pkt, t)
        if trace is not None:
            trace.append((t, sink.rank()))
        if sink.n_decoded != before:
            if precode is None:
                if sink.n_decoded == q:
                    delay = t
                    break
            elif precode.done(sink.decode_time, sink.n_decoded):
                delay = t
                break

    messages = None
    if cfg.payload_mode and delay is not None:
        if precode is None:
            messages = [m for c in range(q) for m in sink.chunk_messages(c)]
        else:
            idx, vals = [], []
            for c in range(q):
                if sink.decoded(c):
                    idx.extend(range(c * a, (c + 1) * a))
                    vals.extend(sink.chunk_messages(c))
            gen = BitMatrix.from_rows([precode.rows[j] for j in idx], code.k)
            decoded = precode_decode(gen, [BitVector(v, pdim) for v in vals])
            messages = [m.value for m in decoded]
    return _finish(cfg, seed, delay, sink.decode_time, sent, succ, sink.received, messages)


def _run_rank(cfg: NetworkConfig, seed: int, trace: list | None) -> TrialResult:
    code = cfg.code
    q, a, L = code.q, code.alpha, cfg.L
    (sched_rng, loss_rng), chunk_rngs, coeff_rngs = _streams(cfg, seed)
    precode = _precode_state(code, seed)

    dim = [[a] * q] + [[0] * q for _ in range(L)]
    held = [[1] * q] + [[0] * q for _ in range(L)]
    decode_time: list[float | None] = [None] * q
    n_decoded = 0
    sink_rank = 0
    received = 0
    draws = [r.random for r in coeff_rngs]
    sent = [0] * L
    succ = [0] * L
    delay = None
    for t, i, ok in opportunities(
        cfg.traffic, sched_rng, loss_rng, cfg.horizon, cfg.upstream_first
    ):
        node = i - 1
        c = select_chunk(q, chunk_rngs[node])
        if not held[node][c]:
            continue
        sent[node] += 1
        if not ok:
            continue
        succ[node] += 1
        held[i][c] += 1
        up = dim[node][c]
        cur = dim[i][c]
        u = draws[node]()
        if cur < up and u >= 2.0 ** (cur - up):
            dim[i][c] = cur + 1
            if i == L:
                sink_rank += 1
                if cur + 1 == a:
                    decode_time[c] = t
                    n_decoded += 1
                    if precode is None:
                        if n_decoded == q:
                            delay = t
                    elif precode.done(decode_time, n_decoded):
                        delay = t
        if i == L:
            received += 1
            if trace is not None:
                trace.append((t, sink_rank))
            if delay is not None:
                break
    return _finish(cfg, seed, delay, decode_time, sent, succ, received)


def run_dense_trial(cfg: NetworkConfig, seed: int) -> TrialResult:
    """Dense-code trial written without any chunk machinery.

    Consumes the traffic and coefficient streams exactly like
    :func:`run_trial` on a one-chunk code, which makes it a reference for the
    chunked path.
    """
    code = cfg.code
    if code.q != 1 or code.precode is not None:
        raise ValueError("dense trials need q == 1 and no precode")
    k, L = code.k, cfg.L
    (sched_rng, loss_rng), _, coeff_rngs = _streams(cfg, seed)
    buffers: list[list[int]] = [[] for _ in range(L)]
    basis = XorBasis()
    sent = [0] * L
    succ = [0] * L
    received = 0
    delay = None
    for t, i, ok in opportunities(
        cfg.traffic, sched_rng, loss_rng, cfg.horizon, cfg.upstream_first
    ):
        node = i - 1
        if node and not buffers[node]:
            continue
        sent[node] += 1
        if not ok:
            continue
        succ[node] += 1
        if node == 0:
            v = coeff_rngs[0].getrandbits(k)
        else:
            held = buffers[node]
            coeffs = coeff_rngs[node].getrandbits(len(held))
            v = 0
            for j, g in enumerate(held):
                if coeffs >> j & 1:
                    v ^= g
        if i < L:
            buffers[i].append(v)
            continue
        received += 1
        if basis.insert(v) and basis.rank == k:
            delay = t
            break
    return _finish(cfg, seed, delay, [delay], sent, succ, received)
