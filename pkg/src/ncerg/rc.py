"""Row, column and rc square-function norms of finite element sequences.

For p >= 2 the rc norm is the l_p combination of the column and row norms.
For p < 2 it is the infimal sum norm, evaluated by projected subgradient
descent and certified from below by trace duality.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import config
from .algebra import AlgebraShape, Element, _hermitize
from .errors import InvalidP, ShapeMismatch, TooLarge, TooManyItems, OptimizerGapExceeded
from .jacobi import jacobi_eigh
from .lp import (INF, Exponent, Method, NormReport, as_exponent, conjugate,
                 exponent_json, weak_from_spectrum)


class ElementSequence:
    """Finite ordered list of elements of one algebra, stored stacked per group."""

    __slots__ = ("shape", "data")

    def __init__(self, shape: AlgebraShape, data: Sequence[np.ndarray]):
        data = tuple(np.asarray(a, dtype=np.complex128) for a in data)
        n = None
        for a, (d, idx, _) in zip(data, shape.groups):
            if a.ndim != 4 or a.shape[1:] != (len(idx), d, d):
                raise ShapeMismatch("stacked sequence data does not match shape")
            n = a.shape[0] if n is None else n
            if a.shape[0] != n:
                raise ShapeMismatch("ragged sequence")
            a.setflags(write=False)
        if not n:
            raise ValueError("sequence must have at least one item")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("ElementSequence is immutable")

    @classmethod
    def from_items(cls, items: Sequence[Element]) -> "ElementSequence":
        items = list(items)
        if not items:
            raise ValueError("sequence must have at least one item")
        shape = items[0].shape
        if any(it.shape != shape for it in items):
            raise ShapeMismatch("all items must share one shape")
        return cls(shape, [np.stack([it.data[g] for it in items]) for g in range(len(shape.groups))])

    def __len__(self) -> int:
        return self.data[0].shape[0]

    @property
    def items(self) -> tuple[Element, ...]:
        return tuple(Element(self.shape, [a[i] for a in self.data]) for i in range(len(self)))

    def __getitem__(self, i) -> Element:
        return Element(self.shape, [a[i] for a in self.data])

    def map(self, fn) -> "ElementSequence":
        return ElementSequence.from_items([fn(x) for x in self.items])

    def append(self, x: Element) -> "ElementSequence":
        return ElementSequence.from_items(list(self.items) + [x])

    def left_multiply(self, u: Element) -> "ElementSequence":
        return ElementSequence(self.shape, [g[None] @ a for g, a in zip(u.data, self.data)])

    def right_multiply(self, u: Element) -> "ElementSequence":
        return ElementSequence(self.shape, [a @ g[None] for g, a in zip(u.data, self.data)])

    def adjoint(self) -> "ElementSequence":
        return ElementSequence(self.shape, [np.conj(np.swapaxes(a, -1, -2)) for a in self.data])

    def __add__(self, other: "ElementSequence") -> "ElementSequence":
        return ElementSequence(self.shape, [a + b for a, b in zip(self.data, other.data)])

    def __sub__(self, other: "ElementSequence") -> "ElementSequence":
        return ElementSequence(self.shape, [a - b for a, b in zip(self.data, other.data)])

    def to_json(self) -> dict:
        return {"shape": self.shape.to_json(), "items": [x.to_json()["blocks"] for x in self.items]}


def _weights(shape: AlgebraShape):
    return [w for _, _, w in shape.groups]


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


# --------------------------------------------------------------------------
# column / row norms


def _square_sums(data, side: str):
    """Per group sum_n x_n^* x_n (column) or x_n x_n^* (row); item axis is -4."""
    if side == "column":
        return [_hermitize(np.sum(_adj(a) @ a, axis=-4)) for a in data]
    if side == "row":
        return [_hermitize(np.sum(a @ _adj(a), axis=-4)) for a in data]
    raise ValueError(f"side must be 'column' or 'row', got {side!r}")


def _norm_from_square(squares, weights, p: Exponent) -> float:
    vals = [np.sqrt(np.clip(jacobi_eigh(s)[0], 0.0, None)) for s in squares]
    if p is INF:
        return float(max(v.max() for v in vals))
    total = sum(float(np.sum(w[:, None] * v ** p)) for v, w in zip(vals, weights))
    return total ** (1.0 / p)


def col_row_norm(seq: ElementSequence, p, side: str) -> NormReport:
    p = as_exponent(p)
    value = _norm_from_square(_square_sums(seq.data, side), _weights(seq.shape), p)
    return NormReport(value, p, Method.EXACT, config.get().jacobi_offdiag)


def intersection_norm(seq: ElementSequence, p) -> float:
    p = as_exponent(p)
    c = col_row_norm(seq, p, "column").value
    r = col_row_norm(seq, p, "row").value
    if p is INF:
        return max(c, r)
    return (c ** p + r ** p) ** (1.0 / p)


# --------------------------------------------------------------------------
# sum norm (p < 2)


@dataclass(frozen=True)
class SumNormSolution:
    value: float
    p: float
    decomposition: tuple[ElementSequence, ElementSequence]
    dual_lower_bound: float
    gap: float
    flagged: bool = False
    iterations: int = 0
    restarts: int = 0
    method: Method = Method.OPTIMIZER

    def to_json(self, emit_witness: bool = False) -> dict:
        out = {"value": self.value, "p": exponent_json(self.p), "method": self.method.value,
               "dual_lower_bound": self.dual_lower_bound, "gap": self.gap, "flagged": self.flagged}
        if emit_witness:
            out["decomposition"] = [s.to_json() for s in self.decomposition]
        return out


def _pseudo_power(s, expo: float, with_value: bool = False):
    """s^expo on the support of each psd matrix in the stack, plus sum of eigenvalues^(p/2)."""
    mu, v = jacobi_eigh(s)
    mu = np.clip(mu, 0.0, None)
    top = mu.max(axis=-1, keepdims=True)
    on = mu > 1e-13 * np.maximum(top, 1e-300)
    f = np.where(on, np.where(on, mu, 1.0) ** expo, 0.0)
    return v @ (f[..., :, None] * _adj(v)), mu


def _sum_objective_and_grad(y, x, weights, p):
    """G(y) = ||y||_c^p + ||x - y||_r^p and a subgradient in the weighted inner product.

    Arrays carry a leading restart axis: ``(R, n, m, d, d)`` per group.
    """
    val = 0.0
    grads = []
    for yg, xg, w in zip(y, x, weights):
        z = xg - yg
        sc = _hermitize(np.sum(_adj(yg) @ yg, axis=1))
        sr = _hermitize(np.sum(z @ _adj(z), axis=1))
        pc, mc = _pseudo_power(sc, p / 2 - 1)
        pr, mr = _pseudo_power(sr, p / 2 - 1)
        val = val + np.sum(w[None, :, None] * (mc ** (p / 2) + mr ** (p / 2)), axis=(1, 2))
        grads.append(p * (yg @ pc[:, None] - pr[:, None] @ z))
    return val, grads


def _sum_objective(y, x, weights, p, eps2: float = 0.0):
    """G(y); with ``eps2 > 0`` each eigenvalue term mu^(p/2) becomes (mu + eps2)^(p/2) - eps2^(p/2)."""
    val = 0.0
    for yg, xg, w in zip(y, x, weights):
        z = xg - yg
        sc = _hermitize(np.sum(_adj(yg) @ yg, axis=-4))
        sr = _hermitize(np.sum(z @ _adj(z), axis=-4))
        mc = np.clip(jacobi_eigh(sc)[0], 0.0, None)
        mr = np.clip(jacobi_eigh(sr)[0], 0.0, None)
        if eps2:
            off = eps2 ** (p / 2)
            terms = (mc + eps2) ** (p / 2) + (mr + eps2) ** (p / 2) - 2 * off
        else:
            terms = mc ** (p / 2) + mr ** (p / 2)
        val = val + np.sum(w[..., :, None] * terms, axis=(-1, -2))
    return val


def _wnorm(grads, weights):
    return np.sqrt(sum(np.sum(w[None, None, :, None, None] * np.abs(g) ** 2, axis=(1, 2, 3, 4))
                       for g, w in zip(grads, weights)))


def _dual_value(seq: ElementSequence, w: ElementSequence, p: float) -> float:
    """|<x, w>| / ||w||_{rc, p'} : a lower bound on the sum norm."""
    pp = conjugate(p)
    denom = intersection_norm(w, pp)
    if denom == 0:
        return 0.0
    num = abs(sum(np.sum(wt[None, :] * np.einsum("nkij,nkij->nk", a, np.conj(b)))
                  for a, b, wt in zip(seq.data, w.data, _weights(seq.shape))))
    return num / denom


def dual_lower_bound(seq: ElementSequence, p: float, candidates: Sequence[ElementSequence] = (),
                     n_random: int = 200, seed=0) -> float:
    rng = np.random.default_rng(seed)
    best = 0.0
    for w in candidates:
        best = max(best, _dual_value(seq, w, p))
    for _ in range(n_random):
        data = [rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape) for a in seq.data]
        best = max(best, _dual_value(seq, ElementSequence(seq.shape, data), p))
    return best


def sum_norm(seq: ElementSequence, p: float, *, restarts: int = 5, iterations: int = 2000,
             seed=0, n_dual: int = 200) -> SumNormSolution:
    """Infimal (||y||_c^p + ||x - y||_r^p)^(1/p) over decompositions x = y + z, 1 <= p < 2."""
    p = float(as_exponent(p))
    weights = _weights(seq.shape)
    x = [a[None] for a in seq.data]
    scale = math.sqrt(sum(float(np.sum(w[None, :, None, None] * np.abs(a) ** 2))
                          for a, w in zip(seq.data, weights)))
    zero = ElementSequence(seq.shape, [np.zeros_like(a) for a in seq.data])
    if scale == 0.0:
        return SumNormSolution(0.0, p, (zero, zero), 0.0, 0.0, False, 0, restarts)

    rng = np.random.default_rng(seed)
    # restart 0 splits evenly; the others start from random per-item splits plus noise
    y = []
    for a in seq.data:
        t = rng.uniform(0.0, 1.0, size=(restarts, a.shape[0], 1, 1, 1))
        t[0] = 0.5
        noise = rng.standard_normal((restarts,) + a.shape) + 1j * rng.standard_normal((restarts,) + a.shape)
        noise[0] = 0.0
        y.append(t * a[None] + 0.1 * scale / math.sqrt(max(a.size, 1)) * noise)

    best_val = np.full(restarts, np.inf)
    best_y = [g.copy() for g in y]
    step0 = 0.5 * scale
    for t in range(1, iterations + 1):
        val, grads = _sum_objective_and_grad(y, x, weights, p)
        improved = val < best_val
        if improved.any():
            best_val = np.where(improved, val, best_val)
            for bg, g in zip(best_y, y):
                bg[improved] = g[improved]
        gn = _wnorm(grads, weights)
        gn = np.where(gn > 0, gn, 1.0)
        alpha = step0 / math.sqrt(t) / gn
        y = [g - alpha[:, None, None, None, None] * d for g, d in zip(y, grads)]
    val = _sum_objective(y, x, weights, p)
    improved = val < best_val
    best_val = np.where(improved, val, best_val)
    for bg, g in zip(best_y, y):
        bg[improved] = g[improved]

    r = int(np.argmin(best_val))
    value = float(best_val[r]) ** (1.0 / p)
    ybest = ElementSequence(seq.shape, [g[r] for g in best_y])
    zbest = seq - ybest

    candidates = _kkt_candidates(ybest, zbest, p)
    lower = dual_lower_bound(seq, p, candidates, n_random=n_dual, seed=rng)
    gap = (value - lower) / max(value, 1e-12)
    flagged = gap > config.get().optimizer_gap
    if flagged:
        warnings.warn(f"sum-norm duality gap {gap:.3g} exceeds tolerance", OptimizerGapExceeded)
    return SumNormSolution(value, p, (ybest, zbest), lower, gap, flagged, iterations, restarts)


def _kkt_candidates(y: ElementSequence, z: ElementSequence, p: float) -> list[ElementSequence]:
    """Dual directions from the gradients of both halves of the objective at the optimum."""
    wc, wr = [], []
    for yg, zg in zip(y.data, z.data):
        sc = _hermitize(np.sum(_adj(yg) @ yg, axis=0))
        sr = _hermitize(np.sum(zg @ _adj(zg), axis=0))
        pc, _ = _pseudo_power(sc, p / 2 - 1)
        pr, _ = _pseudo_power(sr, p / 2 - 1)
        wc.append(yg @ pc[None])
        wr.append(pr[None] @ zg)
    out = []
    for a in np.linspace(0.0, 1.0, 11):
        out.append(ElementSequence(y.shape, [a * c + (1 - a) * r for c, r in zip(wc, wr)]))
    return out


def rc_norm(seq: ElementSequence, p, **optimizer_kwargs) -> NormReport | SumNormSolution:
    p = as_exponent(p)
    if p is INF or p >= 2:
        return NormReport(intersection_norm(seq, p), p, Method.EXACT, config.get().jacobi_offdiag)
    return sum_norm(seq, p, **optimizer_kwargs)


def rc_value(seq: ElementSequence, p, **kw) -> float:
    return float(rc_norm(seq, p, **kw).value)


# --------------------------------------------------------------------------
# brute-force oracle for the sum norm

_ORACLE_BUDGET = 10 ** 7


def rc_sum_oracle(seq: ElementSequence, p: float, grid_resolution: int | None = None, *,
                  tol: float = 1e-9, max_rounds: int = 4000, seed=0) -> float:
    """Grid search over the real coordinates of y, then a derivative-free local descent.

    Independent of the subgradient path: uses no gradients, only objective values.
    """
    p = float(as_exponent(p))
    if p >= 2:
        raise InvalidP("the sum-norm oracle is for p < 2")
    weights = _weights(seq.shape)
    coords = np.concatenate([np.concatenate([a.real.ravel(), a.imag.ravel()]) for a in seq.data])
    nparam = coords.size
    if grid_resolution is None:
        grid_resolution = max(2, int(math.floor(_ORACLE_BUDGET ** (1.0 / nparam) + 1e-9)))
        while grid_resolution > 2 and grid_resolution ** nparam > 2 ** 16:
            grid_resolution -= 1
    if float(grid_resolution) ** nparam > _ORACLE_BUDGET:
        raise TooLarge(f"{grid_resolution}^{nparam} grid points exceed the 1e7 budget")
    if not np.any(coords):
        return 0.0

    def unpack(params):  # (B, nparam) -> per-group arrays (B, n, m, d, d)
        out, pos = [], 0
        for a in seq.data:
            k = a.size
            re = params[:, pos:pos + k].reshape((-1,) + a.shape)
            im = params[:, pos + k:pos + 2 * k].reshape((-1,) + a.shape)
            out.append(re + 1j * im)
            pos += 2 * k
        return out

    x = [a[None] for a in seq.data]

    def objective(params, eps2=0.0):
        vals = []
        for chunk in np.array_split(params, max(1, len(params) // 4096 + 1)):
            vals.append(_sum_objective(unpack(chunk), x, weights, p, eps2))
        return np.concatenate(vals)

    # grid: each coordinate of y between 0 (all in row part) and x's coordinate (all in column part)
    axes = [np.linspace(0.0, c, grid_resolution) if c != 0 else np.zeros(1) for c in coords]
    best, best_val = None, np.inf
    for block in _grid_blocks(axes, 65536):
        vals = objective(block)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = float(vals[i]), block[i].copy()

    # pattern search with coordinate and random directions; smoothing continuation
    # keeps it from stalling on the kinks at rank-deficient decompositions
    rng = np.random.default_rng(seed)
    scale = float(np.max(np.abs(coords)))
    eye = np.eye(nparam)
    point = best
    for eps2 in [scale ** 2 * 10.0 ** -k for k in range(2, 10, 2)] + [0.0]:
        cur = float(objective(point[None], eps2)[0])
        h = scale / max(grid_resolution - 1, 1)
        for _ in range(max_rounds):
            if h < tol * scale:
                break
            rand = rng.standard_normal((2 * nparam, nparam))
            rand /= np.linalg.norm(rand, axis=1, keepdims=True)
            cand = point[None, :] + h * np.concatenate([eye, -eye, rand])
            vals = objective(cand, eps2)
            i = int(np.argmin(vals))
            if vals[i] < cur:
                cur, point = float(vals[i]), cand[i]
                h *= 1.5
            else:
                h *= 0.5
        true = float(objective(point[None])[0])
        if true < best_val:
            best_val, best = true, point
    return float(best_val) ** (1.0 / p)


def _grid_blocks(axes, block_size):
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, block_size):
        idx = np.arange(start, min(total, start + block_size))
        cols = []
        for a, s in zip(reversed(axes), reversed(sizes)):
            cols.append(a[idx % s])
            idx = idx // s
        yield np.stack(cols[::-1], axis=1)


# --------------------------------------------------------------------------
# Khintchine randomization


def _sign_patterns(n: int) -> np.ndarray:
    """All 2^(n-1) sign vectors with first sign +1 (the modulus is even in eps)."""
    if n == 0:
        return np.ones((1, 0))
    rest = np.array(list(itertools.product((1.0, -1.0), repeat=n - 1))).reshape(2 ** (n - 1), n - 1)
    return np.concatenate([np.ones((rest.shape[0], 1)), rest], axis=1)


def _rademacher_sums(seq: ElementSequence, signs: np.ndarray):
    return [np.einsum("sn,nkij->skij", signs, a) for a in seq.data]


def khintchine_norm(seq: ElementSequence, p, mode: str = "exact", trials: int = 1000,
                    seed=0) -> NormReport:
    """(E ||sum_n eps_n x_n||_p^p)^(1/p) over independent Rademacher signs."""
    p = as_exponent(p)
    if p is INF:
        raise InvalidP("Khintchine average needs finite p")
    n = len(seq)
    weights = _weights(seq.shape)
    if mode == "exact":
        if n > 14:
            raise TooManyItems("exact Khintchine enumeration needs n <= 14")
        signs = _sign_patterns(n)
    elif mode == "monte-carlo":
        rng = np.random.default_rng(seed)
        signs = rng.choice((-1.0, 1.0), size=(trials, n))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sums = _rademacher_sums(seq, signs)
    per = np.zeros(signs.shape[0])
    for a, w in zip(sums, weights):
        if p == 2.0:
            per += np.sum(w[None, :] * np.sum(np.abs(a) ** 2, axis=(-1, -2)), axis=1)
        else:
            s = np.sqrt(np.clip(jacobi_eigh(_hermitize(_adj(a) @ a))[0], 0.0, None))
            per += np.sum(w[None, :, None] * s ** p, axis=(1, 2))
    mean = float(per.mean())
    value = mean ** (1.0 / p)
    if mode == "exact":
        return NormReport(value, p, Method.EXACT, config.get().jacobi_offdiag)
    # delta method for the p-th root
    se_mean = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else float("nan")
    stderr = value / (p * mean) * se_mean if mean > 0 else 0.0
    return NormReport(value, p, Method.MONTE_CARLO, 0.0, stderr)


def weak_rc_surrogate(seq: ElementSequence) -> NormReport:
    """Weak-L_1 quasi-norm of the Rademacher dilation, sign blocks weighted 2^-n."""
    n = len(seq)
    if n > 12:
        raise TooManyItems("weak rc surrogate enumerates 2^n patterns; needs n <= 12")
    signs = _sign_patterns(n)  # each pattern stands for itself and its negative
    vals, wts = [], []
    for a, w in zip(_rademacher_sums(seq, signs), _weights(seq.shape)):
        s = np.sqrt(np.clip(jacobi_eigh(_hermitize(_adj(a) @ a))[0], 0.0, None))
        vals.append(s.ravel())
        wts.append(np.broadcast_to((2.0 / 2 ** n) * w[None, :, None], s.shape).ravel())
    value = weak_from_spectrum(np.concatenate(vals), np.concatenate(wts), 1.0)
    return NormReport(value, 1.0, Method.SURROGATE, config.get().jacobi_offdiag)


def weak_distribution_curve(seq: ElementSequence) -> tuple[np.ndarray, np.ndarray]:
    """Thresholds s (descending) and lambda * tau(chi_(lambda, inf)) evaluated just below each s."""
    n = len(seq)
    if n > 12:
        raise TooManyItems("weak rc surrogate enumerates 2^n patterns; needs n <= 12")
    signs = _sign_patterns(n)
    vals, wts = [], []
    for a, w in zip(_rademacher_sums(seq, signs), _weights(seq.shape)):
        s = np.sqrt(np.clip(jacobi_eigh(_hermitize(_adj(a) @ a))[0], 0.0, None))
        vals.append(s.ravel())
        wts.append(np.broadcast_to((2.0 / 2 ** n) * w[None, :, None], s.shape).ravel())
    v, wt = np.concatenate(vals), np.concatenate(wts)
    keep = v > 0
    v, wt = v[keep], wt[keep]
    order = np.argsort(-v, kind="mergesort")
    v, wt = v[order], wt[order]
    return v, v * np.cumsum(wt)
