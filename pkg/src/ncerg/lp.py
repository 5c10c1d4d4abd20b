"""Noncommutative L_p norms, weak-L_p quasi-norms and the trace pairing."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import config
from .algebra import Element, _hermitize
from .errors import InvalidP, ShapeMismatch
from .jacobi import jacobi_eigh


class _Infinity(enum.Enum):
    INF = "inf"

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"


INF = _Infinity.INF
Exponent = Union[float, _Infinity]


def as_exponent(p) -> Exponent:
    if p is INF or p == "inf" or (isinstance(p, (int, float)) and math.isinf(p)):
        return INF
    p = float(p)
    if not p >= 1.0:
        raise InvalidP(f"p must lie in [1, inf], got {p}")
    return p


def conjugate(p: Exponent) -> Exponent:
    p = as_exponent(p)
    if p is INF:
        return 1.0
    if p == 1.0:
        return INF
    return p / (p - 1.0)


def exponent_json(p: Exponent):
    return "inf" if p is INF else p


class Method(str, enum.Enum):
    EXACT = "exact-spectral"
    OPTIMIZER = "optimizer"
    SURROGATE = "surrogate"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class NormReport:
    value: float
    p: Exponent
    method: Method = Method.EXACT
    tolerance: float = 0.0
    stderr: float | None = None

    def __float__(self):
        return float(self.value)

    def to_json(self) -> dict:
        out = {"value": self.value, "p": exponent_json(self.p), "method": self.method.value}
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return out


# --------------------------------------------------------------------------
# spectra


def singular_values(x: Element) -> tuple[np.ndarray, ...]:
    """Singular values of every block, per group ``(m, d)``, descending."""
    out = []
    for a in x.data:
        g = np.conj(np.swapaxes(a, -1, -2)) @ a
        out.append(np.sqrt(np.clip(jacobi_eigh(_hermitize(g))[0], 0.0, None)))
    return tuple(out)


def _group_weights(x: Element):
    return [w for _, _, w in x.shape.groups]


def schatten_from_spectrum(values, weights, p: Exponent) -> float:
    """(sum_k w_k sum_i s_i^p)^(1/p) for per-group singular values ``(..., m, d)``."""
    if p is INF:
        return float(max((v.max() if v.size else 0.0) for v in values))
    total = 0.0
    for v, w in zip(values, weights):
        total += float(np.sum(np.asarray(w)[..., :, None] * v ** p))
    return total ** (1.0 / p)


def lp_norm(x: Element, p) -> NormReport:
    p = as_exponent(p)
    if p == 2.0:
        value = math.sqrt(sum(float(np.sum(w[:, None, None] * np.abs(a) ** 2))
                              for a, w in zip(x.data, _group_weights(x))))
    else:
        value = schatten_from_spectrum(singular_values(x), _group_weights(x), p)
    return NormReport(value, p, Method.EXACT, config.get().jacobi_offdiag)


def distribution(x: Element, lam: float) -> float:
    """tau(chi_(lam, inf)(|x|))."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return float(sum(np.sum(w[:, None] * (s > lam)) for s, w in zip(singular_values(x), _group_weights(x))))


def weak_from_spectrum(values, weights, p: float) -> float:
    """sup_lam lam * tau(chi_(lam,inf))^(1/p) from singular values and their trace weights.

    ``values`` and ``weights`` are flat arrays of equal length.
    """
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    keep = values > 0
    values, weights = values[keep], weights[keep]
    if values.size == 0:
        return 0.0
    order = np.argsort(-values, kind="mergesort")
    values, weights = values[order], weights[order]
    cum = np.cumsum(weights)
    # ties: the last member of a tie run carries the full cumulative weight
    return float(np.max(values * cum ** (1.0 / p)))


def flat_spectrum(x: Element) -> tuple[np.ndarray, np.ndarray]:
    vals, wts = [], []
    for s, w in zip(singular_values(x), _group_weights(x)):
        vals.append(s.ravel())
        wts.append(np.broadcast_to(w[:, None], s.shape).ravel())
    return np.concatenate(vals), np.concatenate(wts)


def weak_lp_quasinorm(x: Element, p) -> NormReport:
    p = as_exponent(p)
    if p is INF:
        raise InvalidP("weak quasi-norm needs finite p")
    vals, wts = flat_spectrum(x)
    return NormReport(weak_from_spectrum(vals, wts, p), p, Method.EXACT, config.get().jacobi_offdiag)


def pairing(x: Element, y: Element) -> complex:
    """tau(x y^*), conjugate-linear in y."""
    if x.shape != y.shape:
        raise ShapeMismatch("pairing of elements from different algebras")
    return complex(sum(np.sum(w * np.einsum("kij,kij->k", a, np.conj(b)))
                       for a, b, w in zip(x.data, y.data, _group_weights(x))))
