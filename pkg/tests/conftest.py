import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from ncerg.algebra import AlgebraShape, Element

settings.register_profile("ncerg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ncerg")


@st.composite
def shapes(draw, max_blocks=3, max_dim=4):
    n = draw(st.integers(1, max_blocks))
    dims = tuple(draw(st.integers(1, max_dim)) for _ in range(n))
    weights = tuple(draw(st.sampled_from([0.5, 1.0, 2.0, 3.0])) for _ in range(n))
    return AlgebraShape(dims, weights)


seeds = st.integers(0, 2 ** 32 - 1)


def diag(*values, weight=1.0):
    shape = AlgebraShape.single(len(values), weight)
    return Element.from_blocks(shape, [np.diag(np.asarray(values, dtype=complex))])


def mat(rows, weight=1.0):
    a = np.asarray(rows, dtype=complex)
    return Element.from_blocks(AlgebraShape.single(a.shape[0], weight), [a])


def dense(x: Element) -> list[np.ndarray]:
    return [np.asarray(b) for b in x.blocks]


@pytest.fixture
def two_block():
    return AlgebraShape((2, 2), (1.0, 2.0))
