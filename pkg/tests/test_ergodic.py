import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncerg.algebra import AlgebraShape, Element, random_element
from ncerg.dyadic import OperatorSequence
from ncerg.errors import NotInvertible
from ncerg.ergodic import (NestedSequence, averaging_family, difference_sequence, ergodic_average,
                           ergodic_averages, jor_sum, long_part_identity_defect, nested_split,
                           sequence_square_stat, split_defects, split_interval, square_stat, transference)
from ncerg.lp import lp_norm
from ncerg.operators import SuperOperator, make_power_bounded, make_unitary_conjugation

from conftest import seeds

PAIR = AlgebraShape((2, 2), (1.0, 2.0))
POWERS = [2 ** k for k in range(12)]


def split_oracle(a, b):
    """Pieces of [a, b) by the literal rule over an explicit list of powers of two."""
    inside = [d for d in POWERS if a <= d < b]
    if not inside:
        return [(a, b)], []
    lo = min(inside)
    hi = max(d for d in POWERS if a <= d <= b)
    short = [iv for iv in [(a, lo), (hi, b)] if iv[0] < iv[1]]
    long = [(lo, hi)] if lo < hi else []
    return short, long


def test_split_examples():
    r = nested_split(NestedSequence("one-sided", (1, 2, 4, 8)))
    assert r.short == () and r.long == ((1, 2), (2, 4), (4, 8))
    r = nested_split(NestedSequence("one-sided", (3, 5)))
    assert r.short == ((3, 4), (4, 5)) and r.long == ()
    r = nested_split(NestedSequence("one-sided", (5, 7)))
    assert r.short == ((5, 7),) and r.long == ()


def test_split_matches_oracle_all_pairs():
    for a in range(1, 300):
        for b in range(a + 1, 300):
            assert split_interval(a, b) == split_oracle(a, b), (a, b)


def test_split_defects_detects_bad_partition():
    seq = NestedSequence("one-sided", (3, 9))
    good = nested_split(seq)
    assert split_defects(seq, good) == []
    broken = type(good)(((3, 9),), (), (((3, 9),),))
    assert any("dyadic point" in d for d in split_defects(seq, broken))


@given(st.lists(st.integers(1, 2000), min_size=1, max_size=8, unique=True))
def test_split_random_sequences(idx):
    seq = NestedSequence("one-sided", tuple(sorted(idx)))
    assert split_defects(seq, nested_split(seq)) == []


def test_nested_sequence_validation():
    with pytest.raises(ValueError):
        NestedSequence("one-sided", (3, 3))
    with pytest.raises(ValueError):
        NestedSequence("one-sided", (0, 2))
    with pytest.raises(ValueError):
        NestedSequence("sideways", (1,))
    assert NestedSequence("two-sided", (2, 5)).interval(5) == (-5, 5)


def test_average_of_identity():
    x = random_element(PAIR, "generic", 0)
    T = SuperOperator.identity(PAIR)
    for n in (0, 1, 7, 40):
        assert ergodic_average(T, x, n).allclose(x, 1e-13)
        assert ergodic_average(T, x, n, "two-sided").allclose(x, 1e-13)


def test_average_cancellation():
    shape = AlgebraShape.single(2)
    T = make_unitary_conjugation(Element.from_blocks(shape, [np.diag([1.0, -1.0])]))
    e12 = Element.from_blocks(shape, [[[0, 1], [0, 0]]])
    assert ergodic_average(T, e12, 1).max_abs() <= 1e-15


def test_average_matches_direct_sum():
    rng = np.random.default_rng(1)
    shape = AlgebraShape((2, 1), (1.0, 2.0))
    T = make_power_bounded(random_element(shape, "positive", rng) + Element.identity(shape),
                           random_element(shape, "unitary", rng))
    x = random_element(shape, "generic", rng)
    got = ergodic_averages(T, x, [0, 3, 10], "two-sided")
    Tinv = np.linalg.inv(T.matrix)
    for n, el in got.items():
        v = x.to_vector()
        total = sum(np.linalg.matrix_power(T.matrix, k) @ v for k in range(n + 1))
        total = total + sum(np.linalg.matrix_power(Tinv, k) @ v for k in range(1, n + 1))
        np.testing.assert_allclose(el.to_vector(), total / (2 * n + 1), atol=1e-10)


def test_mean_ergodic_limit():
    rng = np.random.default_rng(2)
    T = make_unitary_conjugation(random_element(PAIR, "unitary", rng))
    x = random_element(PAIR, "generic", rng)
    lam, vecs = np.linalg.eig(T.matrix)
    fixed = np.abs(lam - 1) < 1e-8
    V = vecs[:, fixed]
    proj = V @ np.linalg.pinv(V) @ x.to_vector()
    gap = np.abs(lam[~fixed] - 1).min()
    xn = np.linalg.norm(x.to_vector())
    prev = None
    for n in (64, 256, 1024, 4096):
        err = np.linalg.norm(ergodic_average(T, x, n).to_vector() - proj)
        assert err <= 2 * xn / ((n + 1) * gap) + 1e-10
        prev = err
    assert prev <= 2 * xn / (4097 * gap) + 1e-10


def test_two_sided_needs_invertible():
    T = SuperOperator(PAIR, np.zeros((PAIR.dim, PAIR.dim)))
    with pytest.raises(NotInvertible):
        ergodic_average(T, random_element(PAIR, "generic", 0), 2, "two-sided")


def test_square_stat_examples():
    x = random_element(PAIR, "generic", 3)
    seq = NestedSequence("one-sided", (1, 4, 9))
    assert square_stat(SuperOperator.identity(PAIR), x, seq, 3).value <= 1e-13
    T = make_unitary_conjugation(random_element(PAIR, "unitary", 4))
    pair = NestedSequence("one-sided", (2, 5))
    d = ergodic_average(T, x, 2) - ergodic_average(T, x, 5)
    for p in (2.0, 3.0):
        assert square_stat(T, x, pair, p).value == pytest.approx(2 ** (1 / p) * lp_norm(d, p).value, rel=1e-12)


def test_jor_bound_unitary():
    rng = np.random.default_rng(5)
    for _ in range(50):
        T = make_unitary_conjugation(random_element(PAIR, "unitary", rng))
        x = random_element(PAIR, "generic", rng)
        idx = sorted(set(int(v) for v in rng.integers(1, 200, size=int(rng.integers(2, 9)))))
        seq = NestedSequence("one-sided", tuple(idx))
        assert square_stat(T, x, seq, 2).value <= 25 * math.sqrt(2) * lp_norm(x, 2).value
        total, xx = jor_sum(T, x, seq)
        assert total <= 625 * xx
        if len(idx) > 1:
            diffs = difference_sequence(T, x, seq)
            assert total == pytest.approx(sum(lp_norm(v, 2).value ** 2 for v in diffs.items))


def test_refinement_triangle_bound():
    rng = np.random.default_rng(6)
    T = make_unitary_conjugation(random_element(PAIR, "unitary", rng))
    x = random_element(PAIR, "generic", rng)
    seq = NestedSequence("one-sided", (3, 11, 37))
    split = nested_split(seq)
    pieces = sorted(split.short + split.long)
    fine = NestedSequence("one-sided", tuple(sorted({a for a, _ in pieces} | {b for _, b in pieces})))
    assert len(fine.pairs) >= len(seq.pairs)
    p = 3.0
    coarse = square_stat(T, x, seq, p).value
    parts = sum(square_stat(T, x, NestedSequence("one-sided", (a, b)), p).value for a, b in pieces)
    assert coarse <= parts * (1 + 1e-12)


def _scalar_f(rng, K):
    shape = AlgebraShape.single(1)
    v = rng.standard_normal(2 ** K)
    return v, OperatorSequence.from_values(shape, {x: Element.from_blocks(shape, [[[c]]]) for x, c in enumerate(v)})


def _scalar_family(v, seq):
    """T_i f on the full range by direct summation over each window."""
    N = max(seq.indices)
    lo, hi = -N, len(v) + N
    pad = np.concatenate([np.zeros(2 * N), v, np.zeros(2 * N)])

    def avg(n):
        a, b = seq.interval(n)
        return np.array([pad[x + a + 2 * N:x + b + 1 + 2 * N].sum() / (b - a + 1) for x in range(lo, hi)])
    return np.array([avg(a) - avg(b) for a, b in seq.pairs])


@pytest.mark.parametrize("mode", ["one-sided", "two-sided"])
@pytest.mark.parametrize("p", [2.0, 3.0])
def test_sequence_stat_scalar_oracle(mode, p):
    rng = np.random.default_rng(7)
    v, f = _scalar_f(rng, 4)
    seq = NestedSequence(mode, (1, 3, 6))
    fam = _scalar_family(v, seq)
    side = (np.sum(np.sum(np.abs(fam) ** 2, axis=0) ** (p / 2))) ** (1 / p)
    rep = sequence_square_stat(f, seq, p, parts=False)
    assert rep.value == pytest.approx(2 ** (1 / p) * side, rel=1e-10)
    assert rep.input_norm == pytest.approx(np.sum(np.abs(v) ** p) ** (1 / p))


def test_sequence_stat_constant_interior():
    shape = AlgebraShape.single(2)
    c = random_element(shape, "hermitian", 8)
    f = OperatorSequence.from_values(shape, {x: c for x in range(128)})
    seq = NestedSequence("one-sided", (2, 5, 9))
    for g in averaging_family(f, seq):
        for x in range(0, 128 - 9):
            assert g.at(x).max_abs() <= 1e-12


def test_sequence_stat_parts_and_kinds():
    rng = np.random.default_rng(9)
    shape = AlgebraShape((2, 1), (1.0, 2.0))
    f = OperatorSequence.from_values(shape, {x: random_element(shape, "positive", rng) for x in range(8)})
    seq = NestedSequence("one-sided", (3, 5, 16, 23))
    rep = sequence_square_stat(f, seq, 2.0)
    assert rep.value <= math.sqrt(3) * math.sqrt(rep.short_value ** 2 + rep.long_value ** 2) + 1e-9
    weak = sequence_square_stat(f, seq, "weak-1")
    assert math.isfinite(weak.ratio) and weak.ratio > 0
    bmo = sequence_square_stat(f, seq, "bmo")
    assert math.isfinite(bmo.ratio) and bmo.ratio >= 0
    assert set(rep.to_json()) == {"kind", "value", "input_norm", "ratio", "short", "long"}


@given(seeds, st.integers(0, 3), st.integers(1, 4))
def test_long_part_identity(seed, k, extra):
    rng = np.random.default_rng(seed)
    shape = AlgebraShape.single(2)
    f = OperatorSequence.from_values(shape, {x: random_element(shape, "generic", rng) for x in range(16)})
    assert long_part_identity_defect(f, k, k + extra) <= 1e-12


def test_transference_examples():
    x = random_element(PAIR, "generic", 10)
    seq = NestedSequence("one-sided", (1, 3, 5))
    rep = transference(SuperOperator.identity(PAIR), x, seq, 64)
    assert rep.defect <= 1e-13 and rep.lhs <= 1e-13
    T = make_unitary_conjugation(random_element(PAIR, "unitary", 11))
    for mode in ("one-sided", "two-sided"):
        rep = transference(T, x, NestedSequence(mode, (1, 3, 5)), 64, p=3.0)
        assert rep.defect <= 1e-10
        assert rep.factor == pytest.approx((70 / 65) ** (1 / 3))
        assert rep.lhs <= rep.orbit_stat * (1 + 1e-9)
        assert rep.orbit_norm <= rep.support_factor * lp_norm(x, 3).value * (1 + 1e-9)
    with pytest.raises(ValueError):
        transference(T, x, seq, 5)
    assert set(rep.to_json()) >= {"defect", "factor", "per_k"}
