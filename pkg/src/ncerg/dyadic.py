"""Operator-valued sequences on Z: dyadic filtration, averaging, boundary sets, BMO."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import AlgebraShape, Element, _hermitize
from .errors import EmptyInterval, ShapeMismatch
from .jacobi import jacobi_eigh
from .lp import INF, Method, NormReport
from .rc import ElementSequence


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


class OperatorSequence:
    """Finitely supported f: Z -> M, stored densely on positions [start, start + N).

    Group arrays have shape ``(N, m, d, d)``; positions outside the stored
    range read as zero.
    """

    __slots__ = ("shape", "start", "data")

    def __init__(self, shape: AlgebraShape, start: int, data: Sequence[np.ndarray]):
        data = tuple(np.asarray(a, dtype=np.complex128) for a in data)
        n = None
        for a, (d, idx, _) in zip(data, shape.groups):
            if a.ndim != 4 or a.shape[1:] != (len(idx), d, d):
                raise ShapeMismatch("operator sequence data does not match shape")
            n = a.shape[0] if n is None else n
            if a.shape[0] != n:
                raise ShapeMismatch("ragged operator sequence")
            a.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "start", int(start))
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("OperatorSequence is immutable")

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, shape: AlgebraShape, start: int, length: int) -> "OperatorSequence":
        return cls(shape, start, [np.zeros((length, len(idx), d, d)) for d, idx, _ in shape.groups])

    @classmethod
    def from_values(cls, shape: AlgebraShape, values: dict[int, Element], window: int | None = None,
                    start: int | None = None, stop: int | None = None) -> "OperatorSequence":
        """Build from a position -> Element map; ``window=K`` stores [0, 2^K)."""
        if window is not None:
            start, stop = 0, 2 ** window
        if start is None:
            start = min(values) if values else 0
        if stop is None:
            stop = max(values) + 1 if values else start
        data = [np.zeros((stop - start, len(idx), d, d), dtype=np.complex128) for d, idx, _ in shape.groups]
        for pos, el in values.items():
            if not start <= pos < stop:
                raise ValueError(f"position {pos} outside [{start}, {stop})")
            if el.shape != shape:
                raise ShapeMismatch("value from a different algebra")
            for g, a in enumerate(el.data):
                data[g][pos - start] = a
        return cls(shape, start, data)

    @classmethod
    def from_element(cls, shape: AlgebraShape, start: int, big: Element) -> "OperatorSequence":
        n = big.shape.n_blocks // shape.n_blocks
        return cls(shape, start, [a.reshape((n, len(idx), d, d))
                                  for a, (d, idx, _) in zip(big.data, shape.groups)])

    # views ----------------------------------------------------------------

    @property
    def length(self) -> int:
        return self.data[0].shape[0]

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def positions(self) -> range:
        return range(self.start, self.stop)

    def at(self, pos: int) -> Element:
        if self.start <= pos < self.stop:
            return Element(self.shape, [a[pos - self.start] for a in self.data])
        return Element.zeros(self.shape)

    def values(self) -> dict[int, Element]:
        return {x: self.at(x) for x in self.positions}

    def support(self) -> list[int]:
        nz = np.zeros(self.length, dtype=bool)
        for a in self.data:
            nz |= np.any(a != 0, axis=(1, 2, 3))
        return [self.start + i for i in np.nonzero(nz)[0]]

    def to_element(self) -> Element:
        """The same data as an element of l_inf(positions) (x) M."""
        big = self.shape.tile(self.length)
        return Element(big, [a.reshape((-1,) + a.shape[2:]) for a in self.data])

    def extend(self, start: int, stop: int) -> "OperatorSequence":
        """Zero-padded (or cropped) copy on [start, stop)."""
        out = []
        for a in self.data:
            b = np.zeros((stop - start,) + a.shape[1:], dtype=np.complex128)
            lo, hi = max(start, self.start), min(stop, self.stop)
            if hi > lo:
                b[lo - start:hi - start] = a[lo - self.start:hi - self.start]
            out.append(b)
        return OperatorSequence(self.shape, start, out)

    def restrict(self, positions: Iterable[int]) -> "OperatorSequence":
        """Multiply by the indicator of ``positions``."""
        mask = np.zeros(self.length, dtype=bool)
        for x in positions:
            if self.start <= x < self.stop:
                mask[x - self.start] = True
        return OperatorSequence(self.shape, self.start,
                                [np.where(mask[:, None, None, None], a, 0) for a in self.data])

    def _aligned(self, other: "OperatorSequence"):
        if other.shape != self.shape:
            raise ShapeMismatch("sequences over different algebras")
        lo, hi = min(self.start, other.start), max(self.stop, other.stop)
        return self.extend(lo, hi), other.extend(lo, hi)

    def __add__(self, other):
        a, b = self._aligned(other)
        return OperatorSequence(self.shape, a.start, [x + y for x, y in zip(a.data, b.data)])

    def __sub__(self, other):
        a, b = self._aligned(other)
        return OperatorSequence(self.shape, a.start, [x - y for x, y in zip(a.data, b.data)])

    def __mul__(self, c):
        return OperatorSequence(self.shape, self.start, [a * c for a in self.data])

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __matmul__(self, other):
        a, b = self._aligned(other)
        return OperatorSequence(self.shape, a.start, [x @ y for x, y in zip(a.data, b.data)])

    def adjoint(self) -> "OperatorSequence":
        return OperatorSequence(self.shape, self.start, [_adj(a) for a in self.data])

    def sandwich(self, left: "OperatorSequence", right: "OperatorSequence") -> "OperatorSequence":
        return left @ self @ right

    # functionals ----------------------------------------------------------

    def trace_mass(self) -> complex:
        """sum_x tau(f(x))."""
        return complex(sum(np.sum(w[None, :] * np.trace(a, axis1=-2, axis2=-1))
                           for a, (_, _, w) in zip(self.data, self.shape.groups)))

    def l2_norms(self) -> np.ndarray:
        """||f(x)||_{L_2(M)} for every stored position."""
        tot = np.zeros(self.length)
        for a, (_, _, w) in zip(self.data, self.shape.groups):
            tot += np.sum(w[None, :] * np.sum(np.abs(a) ** 2, axis=(-1, -2)), axis=1)
        return np.sqrt(tot)

    def max_abs_diff(self, other: "OperatorSequence") -> float:
        a, b = self._aligned(other)
        return float(max((np.abs(x - y).max() if x.size else 0.0) for x, y in zip(a.data, b.data)))

    def is_positive(self, tol: float = 1e-12) -> bool:
        for a in self.data:
            if a.size == 0:
                continue
            if np.abs(a - _adj(a)).max() > tol * max(1.0, np.abs(a).max()):
                return False
            if jacobi_eigh(_hermitize(a))[0].min() < -tol * max(1.0, np.abs(a).max()):
                return False
        return True

    def to_json(self) -> dict:
        return {"shape": self.shape.to_json(),
                "values": {str(x): self.at(x).to_json()["blocks"] for x in self.support()}}

    @classmethod
    def from_json(cls, obj: dict) -> "OperatorSequence":
        shape = AlgebraShape.from_json(obj["shape"])
        values = {int(k): Element.from_json({"shape": obj["shape"], "blocks": v})
                  for k, v in obj["values"].items()}
        return cls.from_values(shape, values)

    def __repr__(self):
        return f"OperatorSequence(start={self.start}, length={self.length}, blocks={list(self.shape.block_dims)})"


SequenceFamily = Sequence[OperatorSequence]


@dataclass(frozen=True)
class DyadicInterval:
    level: int
    index: int

    @property
    def start(self) -> int:
        return self.index * 2 ** self.level

    @property
    def stop(self) -> int:
        return (self.index + 1) * 2 ** self.level

    @property
    def length(self) -> int:
        return 2 ** self.level

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.level + 1, self.index // 2)

    def quintuple(self) -> tuple[int, int]:
        """5I as a half-open integer range: I widened by 2|I| on both sides."""
        return self.start - 2 * self.length, self.stop + 2 * self.length

    @classmethod
    def containing(cls, x: int, level: int) -> "DyadicInterval":
        return cls(level, x // 2 ** level)


# --------------------------------------------------------------------------
# filtration


def _aligned_range(start: int, stop: int, n: int) -> tuple[int, int]:
    size = 2 ** n
    return (start // size) * size, -((-stop) // size) * size


def cond_expectation(f: OperatorSequence, n: int) -> OperatorSequence:
    """E_n f: constant on each dyadic interval of length 2^n, equal to the plain average."""
    if n < 0:
        raise ValueError("level must be >= 0")
    if n == 0:
        return f
    size = 2 ** n
    lo, hi = _aligned_range(f.start, f.stop, n)
    g = f.extend(lo, hi)
    out = []
    for a in g.data:
        cells = a.reshape((-1, size) + a.shape[1:]).mean(axis=1)
        out.append(np.repeat(cells, size, axis=0))
    return OperatorSequence(f.shape, lo, out)


def cell_averages(f: OperatorSequence, n: int) -> tuple[int, list[np.ndarray]]:
    """(first cell index, per-group arrays (cells, m, d, d)) of the level-n averages."""
    size = 2 ** n
    lo, hi = _aligned_range(f.start, f.stop, n)
    g = f.extend(lo, hi)
    return lo // size, [a.reshape((-1, size) + a.shape[1:]).mean(axis=1) for a in g.data]


def martingale_diff(f: OperatorSequence, n: int) -> OperatorSequence:
    """df_n = f_{n-1} - f_n for n >= 1."""
    if n < 1:
        raise ValueError("martingale differences start at n = 1")
    return cond_expectation(f, n - 1) - cond_expectation(f, n)


# --------------------------------------------------------------------------
# averaging operators


def one_sided(n: int) -> tuple[int, int]:
    """A_n = [0, n]."""
    return 0, n


def two_sided(n: int) -> tuple[int, int]:
    """A_n = [-n, n]."""
    return -n, n


def average(f: OperatorSequence, interval: tuple[int, int]) -> OperatorSequence:
    """M_A f(v) = (1/|A|) sum_{y in A} f(v + y) for the integer interval A = [a, b]."""
    a, b = interval
    if b < a:
        raise EmptyInterval(f"empty interval [{a}, {b}]")
    size = b - a + 1
    lo, hi = f.start - b, f.stop - a
    v = np.arange(lo, hi)
    i_lo = np.clip(v + a - f.start, 0, f.length)
    i_hi = np.clip(v + b + 1 - f.start, 0, f.length)
    out = []
    for arr in f.data:
        csum = np.concatenate([np.zeros((1,) + arr.shape[1:], dtype=arr.dtype), np.cumsum(arr, axis=0)])
        out.append((csum[i_hi] - csum[i_lo]) / size)
    return OperatorSequence(f.shape, lo, out)


def average_direct(f: OperatorSequence, interval: tuple[int, int]) -> OperatorSequence:
    """Slow reference version of :func:`average` summing term by term."""
    a, b = interval
    if b < a:
        raise EmptyInterval(f"empty interval [{a}, {b}]")
    lo, hi = f.start - b, f.stop - a
    out = OperatorSequence.zeros(f.shape, lo, hi - lo)
    data = [np.array(x) for x in out.data]
    for v in range(lo, hi):
        for y in range(a, b + 1):
            el = f.at(v + y)
            for g, blk in enumerate(el.data):
                data[g][v - lo] += blk
    return OperatorSequence(f.shape, lo, [x / (b - a + 1) for x in data])


def L_k(f: OperatorSequence, k: int) -> OperatorSequence:
    """M_{A_{2^k}} f - E_k f with the one-sided A_{2^k} = [0, 2^k]."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return average(f, one_sided(2 ** k)) - cond_expectation(f, k)


# --------------------------------------------------------------------------
# boundary sets


def inner_boundary(points: Iterable[int]) -> set[int]:
    s = set(points)
    return {y for y in s if (y - 1) not in s or (y + 1) not in s}


def boundary_sets(A, shift: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(I(x+A, n), I_1(x+A, n)) as sorted position arrays.

    ``A`` is an integer interval ``(a, b)`` or an explicit finite set of integers.
    """
    if isinstance(A, tuple) and len(A) == 2:
        pts = set(range(A[0] + shift, A[1] + shift + 1))
    else:
        pts = {y + shift for y in A}
    size = 2 ** n
    cells = {y // size for y in inner_boundary(pts)}
    i1 = sorted(y for c in cells for y in range(c * size, (c + 1) * size))
    i0 = sorted(y for y in i1 if y in pts)
    return np.array(i0, dtype=int), np.array(i1, dtype=int)


def keylem_sides(h: OperatorSequence, B, shift: int, n: int) -> tuple[float, float, float]:
    """(lhs, first bound, second bound) of the two Cauchy-Schwarz estimates over boundary cells."""
    I, I1 = boundary_sets(B, shift, n)
    if isinstance(B, tuple) and len(B) == 2:
        pts = range(B[0] + shift, B[1] + shift + 1)
    else:
        pts = [y + shift for y in B]
    total = Element.zeros(h.shape)
    for y in I:
        total = total + h.at(int(y))
    w = [wt for _, _, wt in h.shape.groups]
    lhs = sum(float(np.sum(wt[:, None, None] * np.abs(a) ** 2)) for a, wt in zip(total.data, w))
    en = cond_expectation(h.restrict(pts), n)
    n_en = en.l2_norms()
    first = len(I1) * float(sum(n_en[y - en.start] ** 2 for y in I1 if en.start <= y < en.stop))
    n_h = h.l2_norms()
    second = len(I) * float(sum(n_h[y - h.start] ** 2 for y in I if h.start <= y < h.stop))
    return lhs, first, second


# --------------------------------------------------------------------------
# BMO


def family_range(F: SequenceFamily) -> tuple[int, int]:
    return min(f.start for f in F), max(f.stop for f in F)


def family_to_sequence(F: SequenceFamily, start: int | None = None,
                       stop: int | None = None) -> ElementSequence:
    """(F_i)_i as an element sequence of l_inf(positions) (x) M on a common range."""
    lo, hi = family_range(F)
    lo = lo if start is None else start
    hi = hi if stop is None else stop
    return ElementSequence.from_items([f.extend(lo, hi).to_element() for f in F])


def bmo_norm(F: SequenceFamily, side: str, window: tuple[int, int] | None = None) -> NormReport:
    """Dyadic BMO norm of the column (g = sum F_i (x) e_i1) or row (e_1i) family.

    The supremum runs over dyadic intervals inside ``window`` (default: the
    family's stored range), so it is a lower bound for the norm on all of Z.
    """
    if not F:
        raise ValueError("family must be nonempty")
    shape = F[0].shape
    if any(f.shape != shape for f in F):
        raise ShapeMismatch("family members over different algebras")
    lo, hi = family_range(F) if window is None else window
    arrays = [np.stack([f.extend(lo, hi).data[g] for f in F]) for g in range(len(shape.groups))]
    if side == "row":
        arrays = [_adj(a) for a in arrays]
    elif side != "column":
        raise ValueError("side must be 'row' or 'column'")
    best = 0.0
    n = 0
    while 2 ** n <= hi - lo:
        size = 2 ** n
        first = -((-lo) // size)
        last = hi // size
        if last > first:
            for a in arrays:
                seg = a[:, first * size - lo:last * size - lo]
                cells = seg.reshape((a.shape[0], last - first, size) + a.shape[2:])
                dev = cells - cells.mean(axis=2, keepdims=True)
                osc = np.sum(_adj(dev) @ dev, axis=(0, 2)) / size
                top = jacobi_eigh(_hermitize(osc))[0][..., 0].max()
                best = max(best, float(top))
        n += 1
    return NormReport(math.sqrt(max(best, 0.0)), INF, Method.EXACT, 0.0)
