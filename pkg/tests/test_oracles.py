import itertools
from fractions import Fraction

import numpy as np
import pytest

from linecode.gf2 import BitMatrix, batch_rank, pack_bits, rank
from linecode.oracles import (
    FILLERS,
    HORIZONTAL,
    VERTICAL,
    RbltParams,
    build_rblt,
    dense_single_link_mean_delay,
    density_transfer_check,
    exact_rank_tail,
    full_rank_probability,
    grid_params,
    independent_rows,
    mc_rank_tail,
    mc_rblt_tail,
    rblt_tail_bound,
    rblt_tail_counts,
)


def enumerable():
    return [(n, k) for n in range(1, 21) for k in range(1, n + 1) if n * k <= 20]


# rank tails ------------------------------------------------------------------


def test_exact_rank_tail_pins():
    assert exact_rank_tail(2, 2) == Fraction(10, 16)
    assert exact_rank_tail(4, 2) == Fraction(46, 256)
    assert exact_rank_tail(3, 3) == 1 - Fraction(168, 512)


def test_exact_rank_tail_errors():
    with pytest.raises(ValueError):
        exact_rank_tail(7, 3)
    with pytest.raises(ValueError):
        exact_rank_tail(0, 1)


def test_exact_matches_elimination_enumeration():
    for n, k in [(1, 1), (3, 2), (4, 3), (5, 2), (2, 4), (6, 3)]:
        total = 1 << (n * k)
        bits = ((np.arange(total)[:, None] >> np.arange(n * k)) & 1).reshape(total, n, k)
        deficient = int(np.count_nonzero(batch_rank(pack_bits(bits), k) < k))
        assert exact_rank_tail(n, k) == Fraction(deficient, total)


def test_exact_tail_respects_lemma_and_product():
    for n, k in enumerable():
        tail = exact_rank_tail(n, k)
        assert tail <= Fraction(1, 2 ** (n - k))
        assert tail == 1 - full_rank_probability(n, k)


def test_mc_rank_tail_agrees_with_exact():
    est = mc_rank_tail(4, 2, 50_000, np.random.default_rng(1))
    assert est.lo <= float(Fraction(46, 256)) <= est.hi


def test_mc_square_near_product():
    est = mc_rank_tail(64, 64, 20_000, np.random.default_rng(2))
    prod = 1.0
    for i in range(1, 65):
        prod *= 1 - 2.0**-i
    assert abs((1 - prod) - 0.7112) < 1e-4
    assert est.lo <= 1 - prod <= est.hi
    with pytest.raises(ValueError):
        mc_rank_tail(4, 4, 0, np.random.default_rng(0))


def test_dense_single_link_mean_delay():
    alt = 32 + sum(1 / (2**i - 1) for i in range(1, 33))
    assert dense_single_link_mean_delay(32) == pytest.approx(alt, abs=1e-12)
    assert dense_single_link_mean_delay(1, 0.5) == pytest.approx(4.0)


# RBLT ------------------------------------------------------------------------


def test_rblt_params_validation():
    with pytest.raises(ValueError):
        RbltParams(2, 4, (4,))
    with pytest.raises(ValueError):
        RbltParams(1, 4, (5,), VERTICAL)
    with pytest.raises(ValueError):
        RbltParams(1, 4, (3,), HORIZONTAL)
    with pytest.raises(ValueError):
        RbltParams(1, 4, (4,), "diagonal")
    with pytest.raises(ValueError):
        RbltParams(1, 4, (4,), filler="ones")


def test_rblt_shape_and_zero_filler():
    p = RbltParams(3, 4, (2, 4, 3), VERTICAL, "zero")
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = build_rblt(p, rng)
        assert m.shape == (12, 9)
        a = m.to_array()
        assert not a[0:4, 2:9].any() and not a[4:8, 6:9].any()
    ones = sum(build_rblt(p, rng).to_array()[8:12].sum() for _ in range(50))
    assert 0.4 < ones / (50 * 4 * 9) < 0.6


def test_rblt_single_block_is_dense():
    p = RbltParams(1, 6, (6,), VERTICAL, "zero")
    a = np.array([build_rblt(p, np.random.default_rng(s)).to_array() for s in range(400)])
    assert a.shape == (400, 6, 6)
    assert 0.45 < a.mean() < 0.55


def test_rblt_copied_filler_repeats_diagonal_block():
    p = RbltParams(2, 3, (3, 3), VERTICAL, "copied")
    a = build_rblt(p, np.random.default_rng(4)).to_array()
    assert (a[0:3, 3:6] == a[3:6, 3:6]).all()


def test_rblt_bound_pinned():
    b = rblt_tail_bound(RbltParams(1, 10, (8,), VERTICAL), 5)
    assert b.u_star == 1 and b.n_star == 8
    assert b.value == pytest.approx((1 - 2**-8) * 2.0 ** (-5 + 8 - 10))
    assert round(b.value, 5) == 0.00778
    with pytest.raises(ValueError):
        rblt_tail_bound(RbltParams(1, 10, (8,)), 8)


def test_rblt_bound_monotone_in_gamma():
    for p in grid_params():
        vals = [rblt_tail_bound(p, g).value for g in range(p.n_star)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_rblt_orientations_agree_at_equal_widths():
    for w, r in itertools.product([1, 2, 3], [2, 5, 8]):
        v = RbltParams(w, r, (r,) * w, VERTICAL)
        h = RbltParams(w, r, (r,) * w, HORIZONTAL)
        for g in range(w * r):
            assert rblt_tail_bound(v, g).value == pytest.approx(rblt_tail_bound(h, g).value)


def test_rblt_vacuous_flag():
    b = rblt_tail_bound(RbltParams(2, 4, (4, 4)), 0)
    assert b.vacuous == (b.value >= 1)
    assert rblt_tail_bound(RbltParams(2, 4, (0, 4)), 0).vacuous


def test_mc_rblt_under_bound_small_grid():
    rng = np.random.default_rng(7)
    for p in grid_params(w_max=2, r_max=5):
        for g in range(p.n_star):
            b = rblt_tail_bound(p, g)
            if b.vacuous:
                continue
            est = mc_rblt_tail(p, g, 2000, rng)
            assert est.value <= b.value + est.half_width


def test_rblt_single_block_matches_plain_dense():
    rng = np.random.default_rng(8)
    a = mc_rblt_tail(RbltParams(1, 8, (6,)), 0, 40_000, rng)
    b = mc_rank_tail(8, 6, 40_000, rng)
    assert abs(a.value - b.value) <= a.half_width + b.half_width


def test_square_blocks_zero_filler_tail_exceeds_dense():
    # a zero upper block removes randomness the rank needs, so the tail grows
    rng = np.random.default_rng(9)
    p = RbltParams(2, 4, (4, 4), VERTICAL, "zero")
    counts = rblt_tail_counts(p, 40_000, rng)
    assert counts.sum() == 40_000
    rblt = mc_rblt_tail(p, 0, 40_000, rng)
    dense = mc_rank_tail(8, 8, 40_000, rng)
    assert rblt.lo > dense.hi
    assert rblt.value <= rblt_tail_bound(p, 0).value


# density transfer --------------------------------------------------------------


def test_density_identity():
    chk = density_transfer_check(4, 4, 0, np.random.default_rng(0), T=BitMatrix.identity(4))
    assert chk.passed and chk.exhaustive and chk.gamma == 4


def test_density_repeated_rows():
    T = BitMatrix.from_array([[1, 0, 1], [1, 0, 1], [0, 0, 0]])
    chk = density_transfer_check(3, 3, 0, np.random.default_rng(0), T=T, gamma=1, cols_q=3)
    assert chk.passed and chk.gamma == 1 and len(chk.counts) == 8
    assert independent_rows(T) == [0]


def test_density_rank_two_all_outcomes_equal():
    T = BitMatrix.from_array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
    assert rank(T) == 2
    chk = density_transfer_check(3, 3, 0, np.random.default_rng(0), T=T, gamma=2, cols_q=2)
    assert chk.passed and len(chk.counts) == 16 and len(set(chk.counts)) == 1


def test_density_chi_square_path():
    rng = np.random.default_rng(3)
    chk = density_transfer_check(6, 10, 20_000, rng, gamma=3, cols_q=2)
    assert not chk.exhaustive and chk.passed and chk.p_value >= 1e-3


def test_density_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        density_transfer_check(13, 4, 100, rng)
    with pytest.raises(ValueError):
        density_transfer_check(3, 3, 0, rng, T=BitMatrix.zeros(3, 3))
    with pytest.raises(ValueError):
        density_transfer_check(3, 3, 0, rng, T=BitMatrix.identity(3).take_rows([0, 0, 0]), gamma=2)
    with pytest.raises(ValueError):
        density_transfer_check(6, 10, 10, rng, gamma=3)
    with pytest.raises(ValueError):
        density_transfer_check(3, 3, 0, rng, T=BitMatrix.identity(4))


def test_grid_params_cover_fillers_and_orientations():
    ps = grid_params()
    assert {p.filler for p in ps} == set(FILLERS)
    assert {p.orientation for p in ps} == {VERTICAL, HORIZONTAL}
    assert all(p.w_star <= 3 and p.r_star <= 8 for p in ps)
