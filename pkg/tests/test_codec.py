import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecode.codec import (
    CodeConfig,
    NodeBuffer,
    Packet,
    PrecodeConfig,
    SinkState,
    node_recode,
    precode_decode,
    precode_encode,
    precode_generator,
    precode_rank,
    select_chunk,
    sink_ingest,
    source_emit,
)
from linecode.gf2 import BitMatrix, BitVector, RankDeficientError, rank, span_rank
from linecode.stats import wilson


def xor_of(values, coeffs):
    out = 0
    for v, c in zip(values, coeffs):
        if c:
            out ^= v
    return out


# configs ---------------------------------------------------------------------


def test_code_config_validation():
    c = CodeConfig(64, q=4)
    assert c.alpha == 16 and not c.dense
    assert CodeConfig(64).dense
    with pytest.raises(ValueError):
        CodeConfig(10, q=3)
    with pytest.raises(ValueError):
        CodeConfig(0)
    with pytest.raises(ValueError):
        CodeConfig(8, q=0)


def test_precode_sizes():
    pc = PrecodeConfig(0.25, 0.08, margin=10)
    assert pc.k_prime(3676) == 4096
    assert pc.max_messages(4096) == 3676
    assert pc.rate(3676) < 1
    assert PrecodeConfig(0.25, 0.08).extra == 10  # ceil(log2(1/1e-3))
    # k' / k exceeds 1 + (1 + ga) gb: erasing that share still leaves k + margin
    for k in (16, 100, 1000):
        kp = pc.k_prime(k)
        assert kp * (1 - pc.erasure_fraction) >= k + pc.extra - 1e-9
        assert kp >= (1 + pc.erasure_fraction) * k
    with pytest.raises(ValueError):
        PrecodeConfig(1.0, 0.1)
    with pytest.raises(ValueError):
        PrecodeConfig(0.9, 0.9)


def test_precoded_code_chunks_intermediates():
    pc = PrecodeConfig(0.25, 0.08, margin=10)
    c = CodeConfig(3676, q=64, precode=pc)
    assert c.n_symbols == 4096 and c.alpha == 64


# chunk selection ---------------------------------------------------------------


def test_select_chunk():
    rng = random.Random(1)
    assert {select_chunk(1, rng) for _ in range(100)} == {0}
    with pytest.raises(ValueError):
        select_chunk(0, rng)
    r1, r2 = random.Random(9), random.Random(9)
    assert [select_chunk(7, r1) for _ in range(50)] == [select_chunk(7, r2) for _ in range(50)]


def test_select_chunk_uniform():
    rng = random.Random(123)
    n = 100_000
    counts = [0] * 4
    for _ in range(n):
        counts[select_chunk(4, rng)] += 1
    for c in counts:
        lo, hi = wilson(c, n, 0.999)
        assert lo <= 0.25 <= hi


# source and relays -------------------------------------------------------------


def test_source_emit_dense_and_payload():
    cfg = CodeConfig(8, q=2, payload_dim=12)
    rng = random.Random(5)
    msgs = [rng.getrandbits(12) for _ in range(8)]
    for _ in range(50):
        c = select_chunk(2, rng)
        pkt = source_emit(cfg, c, rng, msgs)
        assert pkt.gev.length == 4 and pkt.chunk_id == c
        chunk = msgs[c * 4 : c * 4 + 4]
        assert pkt.payload.value == xor_of(chunk, pkt.gev.bits())
    with pytest.raises(ValueError):
        source_emit(cfg, 2, rng)
    dense = source_emit(CodeConfig(32), 0, rng)
    assert dense.gev.length == 32


def test_source_emit_covers_all_short_vectors():
    cfg = CodeConfig(2)
    seen = {source_emit(cfg, 0, random.Random(s)).gev.value for s in range(64)}
    assert seen == {0, 1, 2, 3}


def test_node_recode_single_packet_copy_or_zero():
    buf = NodeBuffer(1, 3, payload_dim=4)
    p = Packet(0, BitVector(0b101, 3), BitVector(0b1001, 4))
    buf.add(p)
    outs = {node_recode(buf, 0, random.Random(s)) for s in range(32)}
    assert outs == {p, Packet(0, BitVector(0, 3), BitVector(0, 4))}


def test_node_recode_empty_chunk():
    buf = NodeBuffer(2, 3)
    buf.add(Packet(0, BitVector(1, 3)))
    assert node_recode(buf, 1, random.Random(0)) is None


@given(st.lists(st.integers(0, 2**10 - 1), min_size=1, max_size=12), st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_node_recode_stays_in_span(gevs, seed):
    buf = NodeBuffer(1, 10, payload_dim=6)
    rng = random.Random(seed)
    for g in gevs:
        buf.add(Packet(0, BitVector(g, 10), BitVector(rng.getrandbits(6), 6)))
    out = node_recode(buf, 0, rng)
    assert span_rank(gevs + [out.gev.value]) == span_rank(gevs)
    # payload is combined with the same coefficients as the gev
    m = BitMatrix.from_rows(gevs + [out.gev.value], 10)
    assert rank(m) == span_rank(gevs)


def test_node_recode_payload_consistency():
    rng = random.Random(3)
    msgs = [rng.getrandbits(16) for _ in range(6)]
    cfg = CodeConfig(6, payload_dim=16)
    buf = NodeBuffer(1, 6, payload_dim=16)
    for _ in range(5):
        buf.add(source_emit(cfg, 0, rng, msgs))
    for _ in range(20):
        out = node_recode(buf, 0, rng)
        assert out.payload.value == xor_of(msgs, out.gev.bits())


# sink --------------------------------------------------------------------------


def test_sink_alpha_one():
    s = SinkState(2, 1)
    sink_ingest(s, Packet(1, BitVector(0, 1)), 1.0)
    assert not s.decoded(1)
    sink_ingest(s, Packet(1, BitVector(1, 1)), 2.0)
    assert s.decoded(1) and s.decode_time[1] == 2.0 and not s.decoded(0)


def test_sink_duplicate_packet():
    s = SinkState(1, 4)
    p = Packet(0, BitVector(0b0110, 4))
    sink_ingest(s, p, 1)
    sink_ingest(s, p, 2)
    assert s.rank(0) == 1 and s.received == 2 and s.innovative == 1


def test_sink_decode_time_any_order():
    rows = [0b0001, 0b0011, 0b0111, 0b1111]
    for perm in itertools.permutations(rows):
        s = SinkState(1, 4)
        for t, g in enumerate(perm, start=1):
            sink_ingest(s, Packet(0, BitVector(g, 4)), t)
        assert s.decode_time[0] == 4
        sink_ingest(s, Packet(0, BitVector(1, 4)), 9)
        assert s.decode_time[0] == 4  # recorded once


def test_sink_rank_never_exceeds_alpha():
    s = SinkState(1, 5)
    rng = random.Random(0)
    for t in range(200):
        sink_ingest(s, Packet(0, BitVector(rng.getrandbits(5), 5)), t)
        assert s.rank(0) <= 5


# precode -----------------------------------------------------------------------


def test_precode_identity_limit():
    pc = PrecodeConfig(0.0, 0.0, margin=0)
    assert pc.k_prime(10) == 10
    msgs = [BitVector(i + 1, 8) for i in range(10)]
    out, gen = precode_encode(msgs, pc, random.Random(0))
    assert out == msgs and gen == BitMatrix.identity(10)


def test_precode_outputs_follow_generator():
    pc = PrecodeConfig(0.5, 0.5, margin=0)
    assert pc.k_prime(4) == 16
    rng = random.Random(2)
    msgs = [BitVector(rng.getrandbits(8), 8) for _ in range(4)]
    out, gen = precode_encode(msgs, pc, rng)
    assert out[:4] == msgs
    for i, o in enumerate(out):
        assert o.value == xor_of([m.value for m in msgs], gen.row(i).bits())


def test_precode_decode_cases():
    pc = PrecodeConfig(0.25, 0.2, margin=4)
    rng = random.Random(8)
    k = 12
    msgs = [BitVector(rng.getrandbits(10), 10) for _ in range(k)]
    out, gen = precode_encode(msgs, pc, rng)
    assert precode_decode(gen, out) == msgs
    assert precode_decode(gen.take_rows(range(k)), out[:k]) == msgs
    with pytest.raises(RankDeficientError):
        precode_decode(gen.take_rows(range(k - 1)), out[: k - 1])
    with pytest.raises(ValueError):
        precode_decode(gen.take_rows(range(3)), out[:4])


@given(st.integers(0, 2**32), st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_precode_success_iff_rank_k(seed, n_keep):
    pc = PrecodeConfig(0.25, 0.2, margin=2)
    rng = random.Random(seed)
    k = 10
    msgs = [BitVector(rng.getrandbits(6), 6) for _ in range(k)]
    out, gen = precode_encode(msgs, pc, rng)
    keep = sorted(rng.sample(range(len(out)), min(n_keep, len(out))))
    sub = gen.take_rows(keep)
    assert precode_rank(sub.row_ints(), k) == rank(sub)
    if rank(sub) == k:
        assert precode_decode(sub, [out[i] for i in keep]) == msgs
    else:
        with pytest.raises(RankDeficientError):
            precode_decode(sub, [out[i] for i in keep])


def test_precode_erasure_monte_carlo():
    pc = PrecodeConfig(0.25, 0.2, margin=12)
    k = 16
    kp = pc.k_prime(k)
    erase = kp - k - 10
    rng = random.Random(99)
    trials = 10_000
    fails = 0
    for _ in range(trials):
        rows = precode_generator(k, pc, rng)
        keep = rng.sample(range(kp), kp - erase)
        fails += precode_rank([rows[i] for i in keep], k) < k
    lo, _ = wilson(fails, trials, 0.999)
    assert lo <= 2.0**-10
