"""Ergodic averages, square-function statistics, the short/long splitter and transference."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import Element
from .dyadic import (OperatorSequence, L_k, average, bmo_norm, cond_expectation, family_range,
                     one_sided, two_sided)
from .errors import NotInvertible, ShapeMismatch
from .lp import INF, Method, NormReport, as_exponent, lp_norm
from .operators import SuperOperator, inverse
from .rc import ElementSequence, rc_norm, weak_rc_surrogate

MODES = ("one-sided", "two-sided")


@dataclass(frozen=True)
class NestedSequence:
    mode: str
    indices: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        idx = tuple(int(n) for n in self.indices)
        if not idx:
            raise ValueError("sequence must be nonempty")
        if idx[0] < 1 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing positive integers")
        object.__setattr__(self, "indices", idx)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.indices, self.indices[1:]))

    def interval(self, n: int) -> tuple[int, int]:
        return one_sided(n) if self.mode == "one-sided" else two_sided(n)

    def to_json(self) -> dict:
        return {"mode": self.mode, "indices": list(self.indices)}


# --------------------------------------------------------------------------
# averages of an operator


def ergodic_averages(T: SuperOperator, x: Element, ns: Sequence[int], mode: str = "one-sided") -> dict[int, Element]:
    """M_n(T)x (one-sided) or B_n(T)x (two-sided) for every n in ``ns``, sharing one power sweep."""
    if x.shape != T.shape:
        raise ShapeMismatch("element is not in the domain of the map")
    ns = sorted(set(int(n) for n in ns))
    if ns and ns[0] < 0:
        raise ValueError("n must be >= 0")
    out: dict[int, Element] = {}
    v = x.to_vector()
    total = v.copy()
    if mode == "one-sided":
        cur, k = v, 0
        for n in ns:
            while k < n:
                cur = T.matrix @ cur
                total = total + cur
                k += 1
            out[n] = Element.from_vector(T.shape, total / (n + 1))
    elif mode == "two-sided":
        if not T.is_invertible():
            raise NotInvertible("two-sided averages need an invertible map")
        Tinv = inverse(T).matrix
        fwd, bwd, k = v, v, 0
        for n in ns:
            while k < n:
                fwd = T.matrix @ fwd
                bwd = Tinv @ bwd
                total = total + fwd + bwd
                k += 1
            out[n] = Element.from_vector(T.shape, total / (2 * n + 1))
    else:
        raise ValueError(f"mode must be one of {MODES}")
    return out


def ergodic_average(T: SuperOperator, x: Element, n: int, mode: str = "one-sided") -> Element:
    return ergodic_averages(T, x, [n], mode)[n]


def difference_sequence(T: SuperOperator, x: Element, seq: NestedSequence) -> ElementSequence:
    avg = ergodic_averages(T, x, seq.indices, seq.mode)
    return ElementSequence.from_items([avg[a] - avg[b] for a, b in seq.pairs])


@dataclass(frozen=True)
class StatReport:
    value: float
    input_norm: float
    norm: object

    @property
    def ratio(self) -> float:
        return self.value / self.input_norm if self.input_norm > 0 else 0.0

    def to_json(self) -> dict:
        return {"value": self.value, "input_norm": self.input_norm, "ratio": self.ratio,
                "method": self.norm.method.value}


def square_stat(T: SuperOperator, x: Element, seq: NestedSequence, p, **optimizer_kwargs) -> StatReport:
    """rc norm of (M_{n_i}x - M_{n_{i+1}}x)_i together with ||x||_p."""
    p = as_exponent(p)
    if len(seq.indices) < 2:
        zero = NormReport(0.0, p, Method.EXACT, 0.0)
        return StatReport(0.0, lp_norm(x, p).value, zero)
    report = rc_norm(difference_sequence(T, x, seq), p, **optimizer_kwargs)
    return StatReport(float(report.value), lp_norm(x, p).value, report)


def jor_sum(T: SuperOperator, x: Element, seq: NestedSequence) -> tuple[float, float]:
    """(sum_i ||M_{n_i}x - M_{n_{i+1}}x||_2^2, ||x||_2^2)."""
    diffs = difference_sequence(T, x, seq) if len(seq.indices) > 1 else None
    total = 0.0 if diffs is None else sum(lp_norm(d, 2).value ** 2 for d in diffs.items)
    return total, lp_norm(x, 2).value ** 2


# --------------------------------------------------------------------------
# short/long splitter


def _is_dyadic(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class SplitResult:
    short: tuple[tuple[int, int], ...]
    long: tuple[tuple[int, int], ...]
    parts: tuple[tuple[tuple[int, int], ...], ...]  # per original interval, in order

    def to_json(self) -> dict:
        return {"short": [list(s) for s in self.short], "long": [list(l) for l in self.long]}


def split_interval(a: int, b: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(short parts, long parts) of [a, b)."""
    if b <= a:
        raise ValueError("need a < b")
    first = 1 << max(0, (a - 1).bit_length())  # least power of two >= a
    if first >= b:
        return [(a, b)], []
    last = 1 << (b.bit_length() - 1)  # greatest power of two <= b
    short, long = [], []
    if a < first:
        short.append((a, first))
    if first < last:
        long.append((first, last))
    if last < b:
        short.append((last, b))
    return short, long


def nested_split(seq: NestedSequence) -> SplitResult:
    short, long, parts = [], [], []
    for a, b in seq.pairs:
        s, l = split_interval(a, b)
        short.extend(s)
        long.extend(l)
        parts.append(tuple(sorted(s + l)))
    return SplitResult(tuple(short), tuple(long), tuple(parts))


def split_defects(seq: NestedSequence, result: SplitResult) -> list[str]:
    """Names of violated splitter invariants (empty when the split is valid)."""
    bad = []
    for (a, b), pieces in zip(seq.pairs, result.parts):
        pos = a
        for lo, hi in pieces:
            if lo != pos or hi <= lo:
                bad.append(f"[{a},{b}) not tiled")
                break
            pos = hi
        else:
            if pos != b:
                bad.append(f"[{a},{b}) not tiled")
    for lo, hi in result.long:
        if not (_is_dyadic(lo) and _is_dyadic(hi)):
            bad.append(f"long [{lo},{hi}) has a non-dyadic endpoint")
    for lo, hi in result.short:
        k = 1
        while k < hi:
            if lo < k < hi:
                bad.append(f"short [{lo},{hi}) has the dyadic point {k} inside")
                break
            k <<= 1
    if sorted(result.short + result.long) != sorted(p for ps in result.parts for p in ps):
        bad.append("parts disagree with short/long lists")
    return bad


# --------------------------------------------------------------------------
# statistics on sequences over Z


def averaging_family(f: OperatorSequence, seq: NestedSequence,
                     pairs: Sequence[tuple[int, int]] | None = None) -> list[OperatorSequence]:
    """(M_{A_a} f - M_{A_b} f) for each pair (default: consecutive indices of ``seq``)."""
    pairs = seq.pairs if pairs is None else pairs
    need = sorted({n for pr in pairs for n in pr})
    avgs = {n: average(f, seq.interval(n)) for n in need}
    fam = [avgs[a] - avgs[b] for a, b in pairs]
    if not fam:
        return fam
    lo, hi = family_range(fam)
    return [g.extend(lo, hi) for g in fam]


def _family_items(fam: Sequence[OperatorSequence]) -> ElementSequence:
    lo, hi = family_range(fam)
    return ElementSequence.from_items([g.extend(lo, hi).to_element() for g in fam])


def _sequence_lp(f: OperatorSequence, p) -> float:
    return lp_norm(f.to_element(), p).value


@dataclass(frozen=True)
class SequenceStatReport:
    kind: str
    value: float
    input_norm: float
    short_value: float | None
    long_value: float | None

    @property
    def ratio(self) -> float:
        return self.value / self.input_norm if self.input_norm > 0 else 0.0

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "input_norm": self.input_norm, "ratio": self.ratio,
                "short": self.short_value, "long": self.long_value}


def _family_stat(fam, kind, p, optimizer_kwargs):
    if not fam:
        return 0.0
    if kind == "weak-1":
        return weak_rc_surrogate(_family_items(fam)).value
    if kind == "bmo":
        return max(bmo_norm(fam, "column").value, bmo_norm(fam, "row").value)
    return float(rc_norm(_family_items(fam), p, **optimizer_kwargs).value)


def sequence_square_stat(f: OperatorSequence, seq: NestedSequence, stat="2", *, parts: bool = True,
                         **optimizer_kwargs) -> SequenceStatReport:
    """Square-function statistic of T_i f = M_{A_{n_i}} f - M_{A_{n_{i+1}}} f over all of Z.

    ``stat`` is an exponent p, ``"weak-1"`` or ``"bmo"``. The input norm is
    ||f||_p, ||f||_1 or ||f||_inf respectively. With ``parts`` the statistic is
    also evaluated over the short and the long pieces of the split sequence.
    """
    if stat in ("weak-1", "bmo"):
        kind, p = stat, None
        in_norm = _sequence_lp(f, 1.0 if stat == "weak-1" else INF)
    else:
        p = as_exponent(stat)
        kind = f"p={p}"
        in_norm = _sequence_lp(f, p)
    value = _family_stat(averaging_family(f, seq), kind, p, optimizer_kwargs)
    short_v = long_v = None
    if parts:
        split = nested_split(seq)
        short_v = _family_stat(averaging_family(f, seq, split.short), kind, p, optimizer_kwargs)
        long_v = _family_stat(averaging_family(f, seq, split.long), kind, p, optimizer_kwargs)
    return SequenceStatReport(kind, float(value), float(in_norm), short_v, long_v)


def long_part_identity_defect(f: OperatorSequence, k: int, l: int) -> float:
    """Max deviation of M_{2^k} f - M_{2^l} f from (L_k f - L_l f) + sum_{j=k+1}^{l} (E_{j-1} f - E_j f)."""
    lhs = average(f, one_sided(2 ** k)) - average(f, one_sided(2 ** l))
    rhs = L_k(f, k) - L_k(f, l)
    for j in range(k + 1, l + 1):
        rhs = rhs + (cond_expectation(f, j - 1) - cond_expectation(f, j))
    return lhs.max_abs_diff(rhs)


# --------------------------------------------------------------------------
# transference


@dataclass(frozen=True)
class TransferenceReport:
    defect: float
    per_k: tuple[float, ...]
    factor: float
    lhs: float
    orbit_stat: float
    orbit_norm: float
    support_factor: float

    def to_json(self) -> dict:
        return {"defect": self.defect, "factor": self.factor, "per_k": list(self.per_k),
                "lhs": self.lhs, "orbit_stat": self.orbit_stat, "orbit_norm": self.orbit_norm,
                "support_factor": self.support_factor}


def orbit_sequence(T: SuperOperator, x: Element, lo: int, hi: int) -> OperatorSequence:
    """f(l) = T^l x for lo <= l <= hi, zero elsewhere."""
    vals = {}
    v = x.to_vector()
    cur = v
    for l in range(0, hi + 1):
        if l >= lo:
            vals[l] = Element.from_vector(T.shape, cur)
        cur = T.matrix @ cur
    if lo < 0:
        Tinv = inverse(T).matrix
        cur = Tinv @ v
        for l in range(-1, lo - 1, -1):
            vals[l] = Element.from_vector(T.shape, cur)
            cur = Tinv @ cur
    return OperatorSequence.from_values(T.shape, vals, start=lo, stop=hi + 1)


def transference(T: SuperOperator, x: Element, seq: NestedSequence, m: int, p=2.0) -> TransferenceReport:
    """Check T^k (M_a - M_b) x = (M'_a - M'_b) f_m (k) for 0 <= k <= m and both sides of the chain.

    ``lhs`` is the square statistic of x; ``orbit_stat`` is the rc norm of the
    transferred family restricted to [0, m], scaled by (m+1)^{-1/p}; ``orbit_norm``
    is ||f_m||_p (m+1)^{-1/p}. ``factor`` is ((m+N+1)/(m+1))^{1/p}; ``support_factor``
    uses the actual orbit length, which is m+2N+1 in two-sided mode.
    """
    p = as_exponent(p)
    N = seq.indices[-1]
    if m <= N:
        raise ValueError("m must exceed the largest index")
    lo = 0 if seq.mode == "one-sided" else -N
    f = orbit_sequence(T, x, lo, m + N)
    fam = averaging_family(f, seq)
    diffs = difference_sequence(T, x, seq) if len(seq.indices) > 1 else ElementSequence.from_items([])
    per_k = []
    cur = [d.to_vector() for d in diffs.items]
    for k in range(m + 1):
        worst = 0.0
        for c, g in zip(cur, fam):
            worst = max(worst, float(np.linalg.norm(c - g.at(k).to_vector())))
        per_k.append(worst)
        cur = [T.matrix @ c for c in cur]
    scale = (m + 1) ** (-1.0 / p) if p is not INF else 1.0
    window = [g.extend(0, m + 1) for g in fam]
    orbit_stat = rc_norm(_family_items(window), p).value * scale if window else 0.0
    factor = ((m + N + 1) / (m + 1)) ** (1.0 / p) if p is not INF else 1.0
    support = ((m + N + 1 - lo) / (m + 1)) ** (1.0 / p) if p is not INF else 1.0
    lhs = square_stat(T, x, seq, p).value
    return TransferenceReport(float(max(per_k)), tuple(per_k), float(factor), float(lhs),
                              float(orbit_stat), float(_sequence_lp(f, p) * scale), float(support))
