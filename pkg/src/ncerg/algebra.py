"""Finite von Neumann algebras: direct sums of matrix blocks with a weighted trace.

Blocks of equal size are stored stacked (``(m, d, d)`` per distinct size) so
that spectral computations run batched. The public ``blocks`` view returns
them in declaration order.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import config
from .errors import (InvalidFunctionSpec, NotPositive, NotSelfAdjoint,
                     ShapeMismatch)
from .jacobi import jacobi_eigh


@dataclass(frozen=True)
class AlgebraShape:
    block_dims: tuple[int, ...]
    trace_weights: tuple[float, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        weights = tuple(float(w) for w in self.trace_weights)
        if not dims or len(dims) != len(weights):
            raise ValueError("block_dims and trace_weights must be nonempty and equally long")
        if any(d < 1 for d in dims):
            raise ValueError("block dimensions must be >= 1")
        if any(not w > 0 for w in weights):
            raise ValueError("trace weights must be positive")
        object.__setattr__(self, "block_dims", dims)
        object.__setattr__(self, "trace_weights", weights)

    @classmethod
    def single(cls, d: int, weight: float = 1.0) -> "AlgebraShape":
        return cls((d,), (weight,))

    @classmethod
    def scalar(cls, n: int = 1) -> "AlgebraShape":
        return cls((1,) * n, (1.0,) * n)

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def dim(self) -> int:
        """Total vector dimension D = sum of d_k^2."""
        return sum(d * d for d in self.block_dims)

    @functools.cached_property
    def groups(self) -> tuple[tuple[int, np.ndarray, np.ndarray], ...]:
        """(d, block indices, weights) for each distinct block size."""
        out = []
        for d in dict.fromkeys(self.block_dims):
            idx = np.array([k for k, dk in enumerate(self.block_dims) if dk == d])
            w = np.array([self.trace_weights[k] for k in idx])
            out.append((d, idx, w))
        return tuple(out)

    def tile(self, n: int) -> "AlgebraShape":
        """Shape of l_inf(n) (x) M: n position-major copies of every block."""
        return AlgebraShape(self.block_dims * n, self.trace_weights * n)

    def total_trace_of_one(self) -> float:
        return float(sum(w * d for d, w in zip(self.block_dims, self.trace_weights)))

    def to_json(self) -> dict:
        return {"blocks": list(self.block_dims), "weights": list(self.trace_weights)}

    @classmethod
    def from_json(cls, obj: dict) -> "AlgebraShape":
        return cls(tuple(obj["blocks"]), tuple(obj["weights"]))


class Element:
    """Immutable element of a finite algebra, one complex matrix per block."""

    __slots__ = ("shape", "data")

    def __init__(self, shape: AlgebraShape, data: Sequence[np.ndarray]):
        data = tuple(np.array(a, dtype=np.complex128) for a in data)
        if len(data) != len(shape.groups):
            raise ShapeMismatch("group count does not match shape")
        for a, (d, idx, _) in zip(data, shape.groups):
            if a.shape != (len(idx), d, d):
                raise ShapeMismatch(f"group array has shape {a.shape}, expected {(len(idx), d, d)}")
            a.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    # construction ---------------------------------------------------------

    @classmethod
    def from_blocks(cls, shape: AlgebraShape, blocks: Sequence[np.ndarray]) -> "Element":
        blocks = [np.asarray(b, dtype=np.complex128) for b in blocks]
        if len(blocks) != shape.n_blocks:
            raise ShapeMismatch(f"expected {shape.n_blocks} blocks, got {len(blocks)}")
        for b, d in zip(blocks, shape.block_dims):
            if b.shape != (d, d):
                raise ShapeMismatch(f"block of shape {b.shape}, expected {(d, d)}")
        data = [np.stack([blocks[k] for k in idx]) for _, idx, _ in shape.groups]
        return cls(shape, data)

    @classmethod
    def zeros(cls, shape: AlgebraShape) -> "Element":
        return cls(shape, [np.zeros((len(idx), d, d)) for d, idx, _ in shape.groups])

    @classmethod
    def identity(cls, shape: AlgebraShape) -> "Element":
        return cls(shape, [np.broadcast_to(np.eye(d), (len(idx), d, d)) for d, idx, _ in shape.groups])

    @classmethod
    def from_vector(cls, shape: AlgebraShape, vec: np.ndarray) -> "Element":
        vec = np.asarray(vec)
        blocks, pos = [], 0
        for d in shape.block_dims:
            blocks.append(vec[pos:pos + d * d].reshape(d, d))
            pos += d * d
        if pos != vec.size:
            raise ShapeMismatch("vector length does not match shape dimension")
        return cls.from_blocks(shape, blocks)

    # views ----------------------------------------------------------------

    @property
    def blocks(self) -> tuple[np.ndarray, ...]:
        out: list = [None] * self.shape.n_blocks
        for a, (_, idx, _) in zip(self.data, self.shape.groups):
            for j, k in enumerate(idx):
                out[k] = a[j]
        return tuple(out)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    def _map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Element":
        return Element(self.shape, [fn(a) for a in self.data])

    def _zip(self, other: "Element", fn) -> "Element":
        if not isinstance(other, Element):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeMismatch("elements live in different algebras")
        return Element(self.shape, [fn(a, b) for a, b in zip(self.data, other.data)])

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return self._zip(other, np.add)

    def __sub__(self, other):
        return self._zip(other, np.subtract)

    def __neg__(self):
        return self._map(np.negative)

    def __mul__(self, c):
        if isinstance(c, Element):
            return NotImplemented
        return self._map(lambda a: a * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._map(lambda a: a / c)

    def __matmul__(self, other):
        return self._zip(other, np.matmul)

    def adjoint(self) -> "Element":
        return self._map(lambda a: np.conj(np.swapaxes(a, -1, -2)))

    @property
    def H(self) -> "Element":
        return self.adjoint()

    def transpose(self) -> "Element":
        return self._map(lambda a: np.swapaxes(a, -1, -2))

    def conj(self) -> "Element":
        return self._map(np.conj)

    # scalar functionals ---------------------------------------------------

    def trace(self) -> complex:
        return complex(sum((w * np.trace(a, axis1=-2, axis2=-1)).sum()
                           for a, (_, _, w) in zip(self.data, self.shape.groups)))

    def fro_norm(self) -> float:
        """Unweighted Frobenius norm over all blocks."""
        return float(math.sqrt(sum(float(np.sum(np.abs(a) ** 2)) for a in self.data)))

    def op_norm(self) -> float:
        """Largest singular value over all blocks."""
        return float(max(np.linalg.norm(a, ord=2, axis=(-2, -1)).max() for a in self.data))

    def max_abs(self) -> float:
        return float(max(np.abs(a).max() for a in self.data))

    # predicates -----------------------------------------------------------

    def is_selfadjoint(self, tol: float | None = None) -> bool:
        tol = config.get().selfadjoint if tol is None else tol
        return (self - self.adjoint()).op_norm() <= tol * max(1.0, self.op_norm())

    def is_positive(self, tol: float | None = None) -> bool:
        tol = config.get().positive if tol is None else tol
        if not self.is_selfadjoint():
            return False
        return min_eigenvalue(self) >= -tol * max(1.0, self.op_norm())

    def is_projection(self, tol: float | None = None) -> bool:
        tol = config.get().projection if tol is None else tol
        return ((self @ self - self).op_norm() <= tol * 10
                and (self - self.adjoint()).op_norm() <= tol * 10)

    def is_unitary(self, tol: float | None = None) -> bool:
        tol = config.get().unitary if tol is None else tol
        one = Element.identity(self.shape)
        return (self.adjoint() @ self - one).op_norm() <= tol and (self @ self.adjoint() - one).op_norm() <= tol

    def allclose(self, other: "Element", atol: float = 1e-12) -> bool:
        return other.shape == self.shape and (self - other).max_abs() <= atol

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.shape == other.shape and all(np.array_equal(a, b) for a, b in zip(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, tuple(a.tobytes() for a in self.data)))

    def __repr__(self):
        return f"Element(blocks={list(self.shape.block_dims)})"

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "shape": self.shape.to_json(),
            "blocks": [[[[float(z.real), float(z.imag)] for z in row] for row in b] for b in self.blocks],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Element":
        shape = AlgebraShape.from_json(obj["shape"])
        blocks = [np.array([[complex(re, im) for re, im in row] for row in b]).reshape(d, d)
                  for b, d in zip(obj["blocks"], shape.block_dims)]
        return cls.from_blocks(shape, blocks)


def scalar_element(shape: AlgebraShape, c: complex) -> Element:
    return Element.identity(shape) * c


def block_scalars(shape: AlgebraShape, values: Sequence[float]) -> Element:
    """Central element with the scalar ``values[k]`` on block ``k``."""
    return Element.from_blocks(shape, [v * np.eye(d) for v, d in zip(values, shape.block_dims)])


# --------------------------------------------------------------------------
# spectral theory


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: tuple[np.ndarray, ...]  # per group, (m, d), descending
    basis: Element
    tolerance: float

    def block_eigenvalues(self) -> tuple[np.ndarray, ...]:
        shape = self.basis.shape
        out: list = [None] * shape.n_blocks
        for ev, (_, idx, _) in zip(self.eigenvalues, shape.groups):
            for j, k in enumerate(idx):
                out[k] = ev[j]
        return tuple(out)

    def reconstruct(self) -> Element:
        v = self.basis
        return Element(v.shape, [u @ (ev[..., :, None] * np.conj(np.swapaxes(u, -1, -2)))
                                 for u, ev in zip(v.data, self.eigenvalues)])


def _require_selfadjoint(x: Element, tol: float | None = None) -> None:
    tol = config.get().selfadjoint if tol is None else tol
    if (x - x.adjoint()).op_norm() > tol * max(1.0, x.op_norm()):
        raise NotSelfAdjoint("element is not selfadjoint")


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def eig_hermitian(x: Element) -> EigenSystem:
    _require_selfadjoint(x)
    vals, vecs = [], []
    for a in x.data:
        w, v = jacobi_eigh(_hermitize(a))
        vals.append(w)
        vecs.append(v)
    for w in vals:
        w.setflags(write=False)
    return EigenSystem(tuple(vals), Element(x.shape, vecs), config.get().jacobi_offdiag)


def eigvalsh_groups(x: Element) -> tuple[np.ndarray, ...]:
    return tuple(jacobi_eigh(_hermitize(a))[0] for a in x.data)


def min_eigenvalue(x: Element) -> float:
    return float(min(w.min() for w in eigvalsh_groups(x)))


def max_eigenvalue(x: Element) -> float:
    return float(max(w.max() for w in eigvalsh_groups(x)))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def contains(self, t: np.ndarray) -> np.ndarray:
        above = t >= self.lo if self.lo_closed else t > self.lo
        below = t <= self.hi if self.hi_closed else t < self.hi
        return above & below


@dataclass(frozen=True)
class Indicator:
    interval: Interval


@dataclass(frozen=True)
class Modulus:
    pass


@dataclass(frozen=True)
class Power:
    alpha: float


def Sqrt() -> Power:
    return Power(0.5)


def apply_spectral(x: Element, fn: Callable[[np.ndarray], np.ndarray]) -> Element:
    """f(x) for selfadjoint x, with f acting on the eigenvalue arrays."""
    es = eig_hermitian(x)
    data = []
    for u, ev in zip(es.basis.data, es.eigenvalues):
        fv = fn(ev)
        data.append(_hermitize(u @ (fv[..., :, None] * np.conj(np.swapaxes(u, -1, -2)))))
    return Element(x.shape, data)


def func_calc(x: Element, spec) -> Element:
    """Borel functional calculus for the supported scalar-function specs."""
    if isinstance(spec, Modulus):
        return apply_spectral(_hermitize_el(x.adjoint() @ x), lambda t: np.sqrt(np.clip(t, 0.0, None)))
    _require_selfadjoint(x)
    if isinstance(spec, Indicator):
        # exact endpoint semantics, no fuzz
        return apply_spectral(x, lambda t: spec.interval.contains(t).astype(float))
    if isinstance(spec, Power):
        a = spec.alpha
        lo = min_eigenvalue(x)
        scale = max(1.0, x.op_norm())
        if lo < -config.get().positive * scale:
            raise InvalidFunctionSpec("t^alpha needs a positive argument")
        if a <= 0 and lo <= config.get().support * scale:
            raise InvalidFunctionSpec("non-positive power at a zero eigenvalue")
        return apply_spectral(x, lambda t: np.clip(t, 0.0, None) ** a)
    raise InvalidFunctionSpec(f"unsupported function spec {spec!r}")


def _hermitize_el(x: Element) -> Element:
    return x._map(_hermitize)


def modulus(x: Element) -> Element:
    return func_calc(x, Modulus())


def spectral_projection(x: Element, interval: Interval) -> Element:
    return func_calc(x, Indicator(interval))


def trace_and_support(x: Element) -> tuple[complex, Element]:
    tr = x.trace()
    if not x.is_positive():
        raise NotPositive("support projection requires a positive element")
    thr = config.get().support * x.op_norm()
    return tr, spectral_projection(x, Interval(thr, math.inf))


def support(x: Element) -> Element:
    return trace_and_support(x)[1]


# --------------------------------------------------------------------------
# random generators

KINDS = ("hermitian", "positive", "unitary", "projection", "generic")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng, m, d):
    return (rng.standard_normal((m, d, d)) + 1j * rng.standard_normal((m, d, d))) / math.sqrt(2)


def haar_unitary(rng, m, d) -> np.ndarray:
    q, r = np.linalg.qr(_ginibre(rng, m, d))
    ph = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (ph / np.abs(ph))[..., None, :]


def random_element(shape: AlgebraShape, kind: str, seed=None) -> Element:
    rng = _rng(seed)
    data = []
    for d, idx, _ in shape.groups:
        m = len(idx)
        if kind == "generic":
            a = _ginibre(rng, m, d)
        elif kind == "hermitian":
            a = _hermitize(_ginibre(rng, m, d))
        elif kind == "positive":
            g = _ginibre(rng, m, d)
            a = _hermitize(np.conj(np.swapaxes(g, -1, -2)) @ g)
        elif kind == "unitary":
            a = haar_unitary(rng, m, d)
        elif kind == "projection":
            w, v = jacobi_eigh(_hermitize(_ginibre(rng, m, d)))
            keep = np.zeros(d)
            keep[: (d + 1) // 2] = 1.0
            a = _hermitize(v @ (keep[:, None] * np.conj(np.swapaxes(v, -1, -2))))
        else:
            raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
        data.append(a)
    return Element(shape, data)


def elements_equal_bitwise(x: Element, y: Element) -> bool:
    return x.shape == y.shape and all(a.tobytes() == b.tobytes() for a, b in zip(x.data, y.data))
