import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncerg.algebra import AlgebraShape, Element, block_scalars, random_element
from ncerg.errors import BlockDimMismatch, NotInvertible, NotUnitary, ShapeMismatch, TraceConditionViolated
from ncerg.lp import INF, lp_norm, pairing
from ncerg.operators import (DilationWitness, SuperOperator, YeadonTriple, adjoint_wrt_pairing, apply,
                             class_certify, coin_dilation, compose, convex_combination, dilation_verify,
                             extension_rc_check, inverse, make_power_bounded, make_unitary_conjugation,
                             make_yeadon, power, random_yeadon, sampled_power_sup, trace_condition_defect,
                             trivial_dilation)
from ncerg.rc import ElementSequence, col_row_norm

from conftest import seeds, shapes

PAIR = AlgebraShape((2, 2), (1.0, 2.0))


def random_map(shape, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((shape.dim, shape.dim)) + 1j * rng.standard_normal((shape.dim, shape.dim))
    return SuperOperator(shape, m)


def rand_seq(shape, n, rng):
    return ElementSequence.from_items([random_element(shape, "generic", rng) for _ in range(n)])


def test_power_zero_is_identity():
    T = random_map(PAIR, 0)
    np.testing.assert_array_equal(power(T, 0).matrix, np.eye(PAIR.dim))


@given(shapes(max_blocks=2, max_dim=3), seeds)
def test_compose_acts_in_order(shape, seed):
    T, S = random_map(shape, seed), random_map(shape, seed + 1)
    x = random_element(shape, "generic", seed)
    direct = apply(T, apply(S, x))
    assert (apply(compose(T, S), x) - direct).max_abs() <= 1e-12 * max(1.0, direct.max_abs())


@given(shapes(max_blocks=3, max_dim=3), seeds)
def test_adjoint_wrt_pairing(shape, seed):
    T = random_map(shape, seed)
    Td = adjoint_wrt_pairing(T)
    rng = np.random.default_rng(seed)
    x, y = random_element(shape, "generic", rng), random_element(shape, "generic", rng)
    lhs, rhs = pairing(apply(T, x), y), pairing(x, apply(Td, y))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    np.testing.assert_allclose(adjoint_wrt_pairing(Td).matrix, T.matrix, rtol=0, atol=1e-12)


def test_power_negative_requires_invertible():
    T = SuperOperator(PAIR, np.zeros((PAIR.dim, PAIR.dim)))
    with pytest.raises(NotInvertible):
        power(T, -1)


def test_shape_errors():
    T = random_map(PAIR, 1)
    with pytest.raises(ShapeMismatch):
        apply(T, random_element(AlgebraShape.single(2), "generic", 0))
    with pytest.raises(ShapeMismatch):
        compose(T, random_map(AlgebraShape.single(2), 2))


def test_unitary_conjugation_identity():
    T = make_unitary_conjugation(Element.identity(PAIR))
    np.testing.assert_allclose(T.matrix, np.eye(PAIR.dim), atol=1e-15)


@pytest.mark.parametrize("p", [1.0, 1.7, 2.0, 3.0, INF])
def test_unitary_conjugation_isometry(p):
    rng = np.random.default_rng(3)
    T = make_unitary_conjugation(random_element(PAIR, "unitary", rng))
    for _ in range(20):
        x = random_element(PAIR, "generic", rng)
        assert lp_norm(apply(T, x), p).value == pytest.approx(lp_norm(x, p).value, rel=1e-10)


def test_unitary_conjugation_inverse():
    u = random_element(PAIR, "unitary", 4)
    T = make_unitary_conjugation(u)
    np.testing.assert_allclose(inverse(T).matrix, make_unitary_conjugation(u.adjoint()).matrix, atol=1e-12)
    with pytest.raises(NotUnitary):
        make_unitary_conjugation(2 * u)


def _swap_triple(p, modes=("hom", "hom"), w=None):
    eye = np.eye(2)
    return YeadonTriple(PAIR, (1, 0), modes, (eye, eye), Element.identity(PAIR) if w is None else w, p)


def test_yeadon_swap_beta_and_isometry():
    tr = _swap_triple(3.0)
    np.testing.assert_allclose(tr.beta, [2 ** (-1 / 3), 2 ** (1 / 3)])
    T = make_yeadon(tr)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = random_element(PAIR, "generic", rng)
        assert lp_norm(apply(T, x), 3).value == pytest.approx(lp_norm(x, 3).value, rel=1e-9)


def test_yeadon_identity_case():
    eye = np.eye(2)
    tr = YeadonTriple(PAIR, (0, 1), ("hom", "hom"), (eye, eye), Element.identity(PAIR), 1.5)
    np.testing.assert_allclose(make_yeadon(tr).matrix, np.eye(PAIR.dim), atol=1e-15)


def test_yeadon_anti_block():
    shape = AlgebraShape((2, 3), (1.0, 1.0))
    rng = np.random.default_rng(6)
    tr = YeadonTriple(shape, (0, 1), ("anti", "hom"), (np.eye(2), np.eye(3)), Element.identity(shape), 1.5)
    x, y = random_element(shape, "generic", rng), random_element(shape, "generic", rng)
    J = tr.J
    np.testing.assert_allclose(J(x @ y).blocks[0], (J(y) @ J(x)).blocks[0], atol=1e-12)
    np.testing.assert_allclose(J(x @ y).blocks[1], (J(x) @ J(y)).blocks[1], atol=1e-12)
    T = make_yeadon(tr)
    for p in (1.0, 1.5, 3.0, INF):
        assert class_certify(T, f"isometry:{p}", trials=30, seed=1).passed


def test_yeadon_errors():
    with pytest.raises(BlockDimMismatch):
        YeadonTriple(AlgebraShape((2, 3), (1.0, 1.0)), (1, 0), ("hom", "hom"), (np.eye(2), np.eye(3)),
                     Element.identity(AlgebraShape((2, 3), (1.0, 1.0))), 2.0)
    with pytest.raises(TraceConditionViolated):
        make_yeadon(_swap_triple(3.0), b=Element.identity(PAIR))
    with pytest.raises(NotUnitary):
        _swap_triple(3.0, w=2 * Element.identity(PAIR))


@given(st.sampled_from([PAIR, AlgebraShape((2, 2, 1), (1.0, 3.0, 0.5)), AlgebraShape((3, 3), (0.5, 2.0))]),
       seeds, st.sampled_from([1.0, 1.3, 1.5, 2.5, 3.0, 4.0]), st.booleans())
def test_random_yeadon_properties(shape, seed, p, positive):
    tr = random_yeadon(shape, p, seed, positive=positive)
    assert trace_condition_defect(tr, trials=20, seed=seed) <= 1e-10
    T = make_yeadon(tr)
    iso = class_certify(T, f"isometry:{p}", trials=20, seed=seed)
    assert iso.passed and iso.constructed
    assert class_certify(T, "lamperti", trials=50, seed=seed).passed
    rng = np.random.default_rng(seed)
    b = tr.b
    for _ in range(3):
        x = random_element(shape, "generic", rng)
        assert (b @ tr.J(x) - tr.J(x) @ b).max_abs() <= 1e-12
    if positive:
        assert class_certify(T, "positive", trials=20, seed=seed).passed


def test_yeadon_json_round_trip():
    tr = random_yeadon(PAIR, 1.5, 7)
    back = YeadonTriple.from_json(tr.to_json())
    np.testing.assert_array_equal(make_yeadon(back).matrix, make_yeadon(tr).matrix)
    assert "b" not in tr.to_json()


def test_yeadon_modulus_identity():
    rng = np.random.default_rng(8)
    for _ in range(10):
        tr = random_yeadon(AlgebraShape((2, 2, 3), (1.0, 2.0, 0.5)), 1.5, rng, positive=True)
        T = make_yeadon(tr)
        e, f = tr.central_projections()
        b2 = tr.b @ tr.b
        x = random_element(tr.shape, "generic", rng)
        tx = apply(T, x)
        rhs = b2 @ tr.J(x.adjoint() @ x) @ e + b2 @ tr.J(x @ x.adjoint()) @ f
        assert (tx.adjoint() @ tx - rhs).op_norm() <= 1e-10 * max(1.0, rhs.op_norm())


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
def test_column_row_exchange(p):
    rng = np.random.default_rng(int(p * 10))
    for _ in range(5):
        T = make_yeadon(random_yeadon(PAIR, p, rng))
        seq = rand_seq(PAIR, 3, rng)
        img = ElementSequence.from_items([apply(T, x) for x in seq.items])
        lhs = sum(col_row_norm(img, p, s).value ** p for s in ("column", "row"))
        rhs = sum(col_row_norm(seq, p, s).value ** p for s in ("column", "row"))
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_extension_examples():
    rng = np.random.default_rng(9)
    seq = rand_seq(PAIR, 2, rng)
    T3 = make_yeadon(random_yeadon(PAIR, 3.0, rng))
    assert extension_rc_check(T3, 3.0, seq).ratio == pytest.approx(1.0, abs=1e-8)
    Tw = make_yeadon(random_yeadon(PAIR, 1.5, rng))
    assert extension_rc_check(Tw, 1.5, seq).ratio <= 1.02
    Tpos = make_yeadon(random_yeadon(PAIR, 1.5, rng, positive=True))
    assert extension_rc_check(Tpos, 1.5, seq).ratio == pytest.approx(1.0, abs=0.02)


def test_power_bounded_identity_similarity():
    u = random_element(PAIR, "unitary", 10)
    T = make_power_bounded(Element.identity(PAIR), u)
    assert T.certificates["power-bounded"] == pytest.approx(1.0)
    np.testing.assert_allclose(T.matrix, make_unitary_conjugation(u).matrix, atol=1e-12)


def test_power_bounded_kappa_16():
    shape = AlgebraShape.single(2)
    a = Element.from_blocks(shape, [np.diag([2.0, 0.5])])
    u = random_element(shape, "unitary", 11)
    T = make_power_bounded(a, u)
    kappa = T.certificates["power-bounded"]
    assert kappa == pytest.approx(16.0)
    ks = list(range(-64, 65))
    for p in (1.0, 2.0, 3.0):
        assert sampled_power_sup(T, p, ks, samples=5, seed=1) <= kappa
    for k in (1, 7, 64):
        np.testing.assert_allclose(compose(power(T, k), power(T, -k)).matrix, np.eye(shape.dim), atol=1e-10)
    with pytest.raises(NotInvertible):
        make_power_bounded(Element.from_blocks(shape, [np.diag([1.0, 0.0])]), u)


def test_averaging_map_is_not_lamperti():
    shape = AlgebraShape.single(2)
    one = Element.identity(shape)
    avg = SuperOperator.from_function(shape, lambda x: one * (x.trace() / one.trace()))
    rep = class_certify(avg, "lamperti", trials=5, seed=0)
    assert not rep.passed and rep.max_violation == pytest.approx(0.25)


def test_identity_passes_all_classes():
    T = SuperOperator.identity(PAIR)
    for cls in ("lamperti", "positive", "isometry:1.5", "isometry:inf"):
        rep = class_certify(T, cls, trials=20, seed=0)
        assert rep.max_violation <= 1e-12 and rep.passed


def test_convex_lamperti_is_contraction():
    rng = np.random.default_rng(12)
    for p in (1.5, 2.0, 3.0):
        parts = [make_yeadon(random_yeadon(PAIR, p, rng)) for _ in range(2)]
        parts.append(make_unitary_conjugation(random_element(PAIR, "unitary", rng)))
        T = convex_combination(rng.dirichlet(np.ones(3)), parts)
        for _ in range(20):
            x = random_element(PAIR, "generic", rng)
            assert lp_norm(apply(T, x), p).value <= lp_norm(x, p).value * (1 + 1e-12)
    with pytest.raises(ValueError):
        convex_combination([0.5, 0.6], parts[:2])


def test_trivial_dilation():
    T = make_unitary_conjugation(random_element(PAIR, "unitary", 13))
    rep = dilation_verify(T, trivial_dilation(T, 6), samples=10)
    assert rep.defect <= 1e-12 and rep.passed


def test_coin_dilation_and_fault_injection():
    shape = AlgebraShape.single(2)
    rng = np.random.default_rng(14)
    u1, u2 = random_element(shape, "unitary", rng), random_element(shape, "unitary", rng)
    T = convex_combination([0.5, 0.5], [make_unitary_conjugation(u1), make_unitary_conjugation(u2)])
    W = coin_dilation(u1, u2, 4)
    rep = dilation_verify(T, W, samples=20, seed=1)
    assert rep.defect <= 1e-9 and rep.passed
    bad = DilationWitness(W.horizon, W.Q, compose(W.U, W.U), W.J, W.p)
    assert dilation_verify(T, bad, samples=20, seed=1).defect > 0.1


def test_dilation_shape_mismatch():
    T = SuperOperator.identity(PAIR)
    other = SuperOperator.identity(AlgebraShape.single(2))
    with pytest.raises(ShapeMismatch):
        dilation_verify(T, DilationWitness(2, other, other, other))


def test_block_scalars_is_central():
    b = block_scalars(PAIR, [2.0, 3.0])
    x = random_element(PAIR, "generic", 15)
    assert (b @ x - x @ b).max_abs() <= 1e-15
