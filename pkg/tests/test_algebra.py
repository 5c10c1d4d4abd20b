import math

import numpy as np
import pytest
from hypothesis import given

from ncerg import config
from ncerg.algebra import (AlgebraShape, Element, Indicator, Interval, Power, eig_hermitian,
                           elements_equal_bitwise, func_calc, modulus, random_element, trace_and_support)
from ncerg.errors import InvalidFunctionSpec, NotPositive, NotSelfAdjoint, ShapeMismatch
from ncerg.jacobi import jacobi_eigh

from conftest import dense, diag, mat, seeds, shapes


def test_eig_diagonal_input():
    es = eig_hermitian(diag(3.0, 1.0))
    np.testing.assert_allclose(es.block_eigenvalues()[0], [3.0, 1.0])
    np.testing.assert_allclose(np.abs(dense(es.basis)[0]), np.eye(2), atol=1e-14)


def test_eig_pauli_x():
    es = eig_hermitian(mat([[0, 1], [1, 0]]))
    np.testing.assert_allclose(es.block_eigenvalues()[0], [1.0, -1.0], atol=1e-14)


@given(shapes(), seeds)
def test_eig_reconstruction(shape, seed):
    h = random_element(shape, "hermitian", seed)
    rec = eig_hermitian(h).reconstruct()
    assert (rec - h).fro_norm() <= 1e-10 * max(1.0, h.fro_norm())


@given(shapes(), seeds)
def test_eigenvalues_match_lapack(shape, seed):
    h = random_element(shape, "hermitian", seed)
    es = eig_hermitian(h)
    for ev, b in zip(es.block_eigenvalues(), h.blocks):
        np.testing.assert_allclose(ev, np.linalg.eigvalsh(b)[::-1], atol=1e-11)


def test_eig_degenerate_cluster_is_orthonormal():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    a = q @ np.diag([2, 2, 2, 1, 1, 0]) @ q.conj().T
    w, v = jacobi_eigh(a[None])
    np.testing.assert_allclose(v[0].conj().T @ v[0], np.eye(6), atol=1e-12)
    np.testing.assert_allclose(w[0], [2, 2, 2, 1, 1, 0], atol=1e-12)


def test_eig_rejects_non_selfadjoint():
    with pytest.raises(NotSelfAdjoint):
        eig_hermitian(mat([[0, 1], [0, 0]]))


def test_indicator_diagonal():
    p = func_calc(diag(0.5, 2.0), Indicator(Interval(1.0, math.inf)))
    np.testing.assert_allclose(dense(p)[0], np.diag([0, 1]), atol=1e-14)


def test_modulus_of_matrix_unit():
    np.testing.assert_allclose(dense(modulus(mat([[0, 1], [0, 0]])))[0], np.diag([0, 1]), atol=1e-14)


def test_indicator_excludes_zero_eigenvalue():
    zero = Element.zeros(AlgebraShape.single(2))
    p = func_calc(zero, Indicator(Interval(0.0, 1.0, hi_closed=True)))
    assert p.max_abs() == 0.0


def test_indicator_endpoint_semantics():
    x = diag(1.0, 2.0)
    closed = func_calc(x, Indicator(Interval(0.0, 1.0, hi_closed=True)))
    opened = func_calc(x, Indicator(Interval(0.0, 1.0)))
    np.testing.assert_allclose(dense(closed)[0], np.diag([1, 0]), atol=1e-14)
    assert opened.max_abs() <= 1e-14


def test_negative_power_at_zero_is_invalid():
    with pytest.raises(InvalidFunctionSpec):
        func_calc(diag(1.0, 0.0), Power(-0.5))


def test_square_root_squares_back():
    x = random_element(AlgebraShape((3, 2), (1.0, 2.0)), "positive", 5)
    r = func_calc(x, Power(0.5))
    assert (r @ r - x).fro_norm() <= 1e-10 * x.fro_norm()


@given(shapes(), seeds)
def test_spectral_projection_is_exact(shape, seed):
    h = random_element(shape, "hermitian", seed)
    p = func_calc(h, Indicator(Interval(0.0, math.inf)))
    assert (p @ p - p).max_abs() <= 1e-12
    assert (p - p.adjoint()).max_abs() <= 1e-12


@given(shapes(), seeds)
def test_modulus_properties(shape, seed):
    x = random_element(shape, "generic", seed)
    m = modulus(x)
    assert m.is_positive()
    assert (m @ m - x.adjoint() @ x).fro_norm() <= 1e-10 * max(1.0, x.fro_norm() ** 2)


def test_trace_and_support_examples():
    tr, s = trace_and_support(Element.identity(AlgebraShape.single(3)))
    assert tr == pytest.approx(3.0)
    np.testing.assert_allclose(dense(s)[0], np.eye(3), atol=1e-14)
    tr, s = trace_and_support(diag(1.0, 0.0, weight=2.0))
    assert tr == pytest.approx(2.0)
    np.testing.assert_allclose(dense(s)[0], np.diag([1, 0]), atol=1e-14)


def test_support_of_rank_one():
    rng = np.random.default_rng(11)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v /= np.linalg.norm(v)
    shape = AlgebraShape.single(3, 1.5)
    x = Element.from_blocks(shape, [np.outer(v, v.conj())])
    tr, s = trace_and_support(x)
    assert tr.real == pytest.approx(1.5)
    np.testing.assert_allclose(dense(s)[0], np.outer(v, v.conj()), atol=1e-12)


def test_support_requires_positive():
    with pytest.raises(NotPositive):
        trace_and_support(diag(1.0, -1.0))


@given(shapes(), seeds)
def test_trace_faithful_and_cyclic(shape, seed):
    rng = np.random.default_rng(seed)
    x = random_element(shape, "generic", rng)
    y = random_element(shape, "generic", rng)
    assert (x.adjoint() @ x).trace().real > 0
    assert abs((x @ y).trace() - (y @ x).trace()) <= 1e-10 * max(1.0, x.fro_norm() * y.fro_norm())
    assert abs((x + 2 * y).trace() - x.trace() - 2 * y.trace()) <= 1e-10 * (1 + x.fro_norm() + y.fro_norm())


@given(shapes(), seeds)
def test_random_kinds(shape, seed):
    u = random_element(shape, "unitary", seed)
    assert (u.adjoint() @ u - Element.identity(shape)).op_norm() <= 1e-12
    pos = random_element(shape, "positive", seed)
    assert min(np.linalg.eigvalsh(b).min() for b in pos.blocks) >= -1e-12
    proj = random_element(shape, "projection", seed)
    assert (proj @ proj - proj).max_abs() <= 1e-12


def test_random_element_is_deterministic():
    shape = AlgebraShape((2, 3), (1.0, 0.5))
    for kind in ("hermitian", "positive", "unitary", "projection", "generic"):
        assert elements_equal_bitwise(random_element(shape, kind, 42), random_element(shape, kind, 42))


def test_json_round_trip():
    x = random_element(AlgebraShape((2, 1, 2), (1.0, 2.0, 0.5)), "generic", 1)
    back = Element.from_json(x.to_json())
    assert back == x
    assert AlgebraShape.from_json(x.shape.to_json()) == x.shape


def test_vector_round_trip_and_block_order():
    shape = AlgebraShape((2, 1, 2), (1.0, 2.0, 0.5))
    x = random_element(shape, "generic", 2)
    assert Element.from_vector(shape, x.to_vector()) == x
    assert [b.shape for b in x.blocks] == [(2, 2), (1, 1), (2, 2)]


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        Element.identity(AlgebraShape.single(2)) + Element.identity(AlgebraShape.single(3))


def test_tolerance_override_restores():
    before = config.get()
    with config.override(support=1e-3) as tol:
        assert tol.support == 1e-3
    assert config.get() == before
