"""Cuculescu projections and the noncommutative Calderon-Zygmund decomposition.

Projections are kept at cell granularity internally (one matrix per dyadic
interval of each level) and expanded to position-indexed sequences for the
public results. Every level is re-rounded to an exact projection before it
feeds the next one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import _hermitize
from .dyadic import OperatorSequence, _aligned_range, cond_expectation
from .errors import LambdaNonpositive, NotPositive, NoConvergence
from .jacobi import jacobi_eigh


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _round_projection(a: np.ndarray) -> np.ndarray:
    """Nearest projection: eigenvalues snapped to {0, 1}."""
    mu, v = jacobi_eigh(_hermitize(a))
    keep = (mu > 0.5).astype(float)
    return _hermitize(v @ (keep[..., :, None] * _adj(v)))


def _above(a: np.ndarray, lam: float) -> np.ndarray:
    """chi_(lam, inf)(a) for a stack of Hermitian matrices."""
    mu, v = jacobi_eigh(_hermitize(a))
    keep = (mu > lam).astype(float)
    return _hermitize(v @ (keep[..., :, None] * _adj(v)))


def _max_eig(a: np.ndarray) -> np.ndarray:
    return jacobi_eigh(_hermitize(a))[0][..., 0]


def _pair_average(cells: np.ndarray) -> np.ndarray:
    return 0.5 * (cells[0::2] + cells[1::2])


@dataclass(frozen=True)
class CuculescuResult:
    lam: float
    m_lambda: int
    start: int  # universe [start, stop), aligned at level m_lambda
    stop: int
    q_cells: tuple  # q_cells[n][g]: (cells_n, m, d, d)
    f_cells: tuple  # level averages on the same grid
    shape: object = field(repr=False)

    def _expand(self, cells_by_group, n: int) -> OperatorSequence:
        size = 2 ** n
        return OperatorSequence(self.shape, self.start, [np.repeat(c, size, axis=0) for c in cells_by_group])

    @property
    def q_seq(self) -> list[OperatorSequence]:
        return [self._expand(self.q_cells[n], n) for n in range(self.m_lambda + 1)]

    def q_level(self, n: int) -> OperatorSequence:
        if n >= self.m_lambda:
            return self._expand(self.q_cells[self.m_lambda], self.m_lambda)
        return self._expand(self.q_cells[n], n)

    @property
    def q(self) -> OperatorSequence:
        return self.q_level(0)

    def p_cells(self, n: int) -> list[np.ndarray]:
        """p_I for I in F_n: q_parent - q_I at cell granularity of level n."""
        parent = [np.repeat(c, 2, axis=0) for c in self.q_cells[n + 1]]
        return [a - b for a, b in zip(parent, self.q_cells[n])]

    @property
    def p_seq(self) -> list[OperatorSequence]:
        return [self._expand(self.p_cells(n), n) for n in range(self.m_lambda)]

    def f_level(self, n: int) -> OperatorSequence:
        return self._expand(self.f_cells[n], n)


def _search_bound(f: OperatorSequence, lam: float) -> int:
    span = max(f.stop, 1) - min(f.start, 0)
    K = max(0, math.ceil(math.log2(max(span, 1))))
    mass = float(f.trace_mass().real)
    return K + math.ceil(math.log2(max(mass / lam, 2.0))) + 1


def cuculescu(f: OperatorSequence, lam: float) -> CuculescuResult:
    """Stopping-time projections q_n for the dyadic martingale of a positive f."""
    if not lam > 0:
        raise LambdaNonpositive("lambda must be positive")
    if not f.is_positive(1e-10):
        raise NotPositive("Cuculescu construction needs a positive sequence")
    shape = f.shape
    n_max = _search_bound(f, lam)

    # m_lambda: least m with f_n <= lam for every n >= m (checked up to n_max)
    lo, hi = _aligned_range(f.start, f.stop, n_max)
    cells = [a for a in f.extend(lo, hi).data]
    exceeds = []
    for n in range(n_max + 1):
        if n:
            cells = [_pair_average(c) for c in cells]
        top = max(float(_max_eig(c).max()) if c.size else 0.0 for c in cells)
        exceeds.append(top > lam + 1e-12 * max(1.0, lam))
    if exceeds[-1]:
        raise NoConvergence("f_n still exceeds lambda at the search bound")
    m = 0
    for n in range(n_max, -1, -1):
        if exceeds[n]:
            m = n + 1
            break

    start, stop = _aligned_range(f.start, f.stop, m)
    g = f.extend(start, stop)
    f_cells = [list(g.data)]
    for n in range(1, m + 1):
        f_cells.append([_pair_average(c) for c in f_cells[-1]])

    q_cells: list = [None] * (m + 1)
    q_cells[m] = [np.broadcast_to(np.eye(d), c.shape).copy() for c, (d, _, _) in zip(f_cells[m], shape.groups)]
    for n in range(m - 1, -1, -1):
        parent = [np.repeat(c, 2, axis=0) for c in q_cells[n + 1]]
        level = []
        for qp, fn in zip(parent, f_cells[n]):
            a = qp @ fn @ qp
            level.append(_round_projection(qp - _above(a, lam)))
        q_cells[n] = level
    return CuculescuResult(lam, m, start, stop, tuple(tuple(c) for c in q_cells),
                           tuple(tuple(c) for c in f_cells), shape)


# --------------------------------------------------------------------------
# Calderon-Zygmund


@dataclass(frozen=True)
class CZResult:
    good: OperatorSequence
    bad: tuple  # b_n for n = 0 .. m_lambda - 1
    zeta: OperatorSequence
    cuculescu: CuculescuResult
    zeta_sum: OperatorSequence = field(repr=False, default=None)

    @property
    def b(self) -> OperatorSequence:
        total = OperatorSequence.zeros(self.good.shape, self.good.start, self.good.length)
        for bn in self.bad:
            total = total + bn
        return total


def _zeta(cu: CuculescuResult) -> tuple[OperatorSequence, OperatorSequence]:
    """zeta = (sup_I p_I chi_5I)^perp, on the universe widened by 2^m on each side."""
    m = cu.m_lambda
    shape = cu.shape
    pad = 2 ** m if m else 0
    lo, hi = cu.start - pad, cu.stop + pad
    pos = np.arange(lo, hi)
    total = [np.zeros((hi - lo, len(idx), d, d), dtype=np.complex128) for d, idx, _ in shape.groups]
    for n in range(m):
        size = 2 ** n
        p = cu.p_cells(n)
        n_cells = p[0].shape[0]
        cell = (pos - cu.start) // size
        for g, pc in enumerate(p):
            # x in 5I iff |cell(x) - index(I)| <= 2; ext[j + 2] sums p over cells j-2 .. j+2
            padded = np.zeros((n_cells + 8,) + pc.shape[1:], dtype=np.complex128)
            padded[4:-4] = pc
            ext = sum(padded[k:k + n_cells + 4] for k in range(5))
            ok = (cell >= -2) & (cell < n_cells + 2)
            total[g][ok] += ext[cell[ok] + 2]
    zeta, ssum = [], []
    for t, (d, _, _) in zip(total, shape.groups):
        t = _hermitize(t)
        mu, v = jacobi_eigh(t)
        scale = np.maximum(np.abs(mu).max(axis=-1, keepdims=True), 1.0)
        outside = (mu <= 1e-10 * scale).astype(float)
        zeta.append(_hermitize(v @ (outside[..., :, None] * _adj(v))))
        ssum.append(t)
    return OperatorSequence(shape, lo, zeta), OperatorSequence(shape, lo, ssum)


def cz_decompose(f: OperatorSequence, lam: float) -> CZResult:
    """f = g + sum_n b_n with g = q f q + sum_n p_n f_n p_n."""
    cu = cuculescu(f, lam)
    g_full = f.extend(cu.start, cu.stop)
    q = cu.q
    good = q @ g_full @ q
    bad = []
    for n in range(cu.m_lambda):
        p_n = cu._expand(cu.p_cells(n), n)
        f_n = cu.f_level(n)
        good = good + p_n @ f_n @ p_n
        diff = g_full - f_n
        b_n = p_n @ diff @ cu.q_level(n) + cu.q_level(n + 1) @ diff @ p_n
        bad.append(b_n)
    zeta, zsum = _zeta(cu)
    return CZResult(good, tuple(bad), zeta, cu, zsum)


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Check:
    check: str
    margin: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.margin <= self.tol)

    def to_json(self) -> dict:
        return {"check": self.check, "margin": self.margin, "tol": self.tol, "pass": self.passed}


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_name(self) -> dict:
        return {c.check: c for c in self.checks}

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> list:
        return [c.to_json() for c in self.checks]


def _op_norms(a: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.norm(a.reshape((-1,) + a.shape[-2:]), ord=2, axis=(-2, -1))


def _seq_max_op(seq: OperatorSequence) -> float:
    return float(max((_op_norms(a).max() if a.size else 0.0) for a in seq.data))


def _seq_max_fro(seq: OperatorSequence) -> float:
    return float(max((np.linalg.norm(a, axis=(-2, -1)).max() if a.size else 0.0) for a in seq.data))


def _seq_l1(seq: OperatorSequence) -> float:
    """sum_x ||f(x)||_1 with the weighted trace."""
    total = 0.0
    for a, (_, _, w) in zip(seq.data, seq.shape.groups):
        if a.size == 0:
            continue
        s = np.linalg.svd(a, compute_uv=False)
        total += float(np.sum(w[None, :, None] * s))
    return total


def _seq_min_eig(seq: OperatorSequence) -> float:
    return float(min((jacobi_eigh(_hermitize(a))[0].min() if a.size else 0.0) for a in seq.data))


def _trace_of(seq: OperatorSequence) -> float:
    return float(seq.trace_mass().real)


def _cuculescu_checks(f: OperatorSequence, cu: CuculescuResult) -> list[Check]:
    lam = cu.lam
    checks = []
    one = cu._expand([np.broadcast_to(np.eye(d), c.shape) for c, (d, _, _) in
                      zip(cu.q_cells[cu.m_lambda], cu.shape.groups)], cu.m_lambda)
    proj, mono, comm, below, member = 0.0, 0.0, 0.0, -np.inf, 0.0
    for n in range(cu.m_lambda + 1):
        qc = cu.q_cells[n]
        for a in qc:
            if a.size:
                proj = max(proj, float(np.abs(a @ a - a).max()), float(np.abs(a - _adj(a)).max()))
        qn = cu.q_level(n)
        fn = cu.f_level(n)
        if n:
            member = max(member, qn.max_abs_diff(cond_expectation(qn, n)))
        if n < cu.m_lambda:
            qn1 = cu.q_level(n + 1)
            mono = max(mono, (qn @ qn1).max_abs_diff(qn))
            a = qn1 @ fn @ qn1
            comm = max(comm, _seq_max_fro(qn @ a - a @ qn))
        below = max(below, -_seq_min_eig(lam * qn - qn @ fn @ qn))
    checks.append(Check("q_n projections", proj, 1e-10))
    checks.append(Check("q_n increasing (q_n q_{n+1} = q_n)", mono, 1e-10))
    checks.append(Check("q_n constant on F_n cells", member, 1e-12))
    checks.append(Check("q_n commutes with q_{n+1} f_n q_{n+1}", comm, 1e-10))
    checks.append(Check("q_n f_n q_n <= lambda q_n", below, 1e-9))
    f1 = _trace_of(f)
    defect = lam * _trace_of(one - cu.q) - f1
    checks.append(Check("lambda phi(1 - q) <= ||f||_1", defect, 1e-9))
    pnorm, disj = 0.0, 0.0
    p_seq = cu.p_seq
    total = cu.q
    for n, pn in enumerate(p_seq):
        pnorm = max(pnorm, _seq_max_op(pn @ cu.f_level(n) @ pn) - 2 * lam)
        total = total + pn
        for k in range(n):
            disj = max(disj, _seq_max_op(p_seq[k] @ pn))
    checks.append(Check("||p_n f_n p_n||_inf <= 2 lambda", pnorm, 1e-9))
    checks.append(Check("p_m p_n = 0 (m != n)", disj, 1e-10))
    checks.append(Check("sum p_n + q = 1", total.max_abs_diff(one), 1e-12))
    return checks


def _cancellation_bound(res: CZResult) -> float:
    """Upper bound on max ||zeta(x) b_n(y) zeta(x)||_F over y in 5 I_{x,n}.

    With D = f - f_n on the cell I of y, zeta b zeta = zeta p_I D q_I zeta + zeta q_parent D p_I zeta,
    whose Frobenius norm is at most 2 ||zeta(x) p_I|| max_{y in I} ||D(y)||_F.
    """
    cu = res.cuculescu
    zeta = res.zeta
    worst = 0.0
    f_full = None
    for n in range(cu.m_lambda):
        size = 2 ** n
        p = cu.p_cells(n)
        fn = cu.f_level(n)
        if f_full is None:
            f_full = res.good + res.b
        diff = f_full - fn
        diff = diff.extend(cu.start, cu.stop)
        for g, pc in enumerate(p):
            n_cells = pc.shape[0]
            dmax = np.linalg.norm(diff.data[g].reshape((n_cells, size) + pc.shape[1:]), axis=(-2, -1)).max(axis=1)
            pos = np.arange(zeta.start, zeta.stop)
            cell = (pos - cu.start) // size
            for off in range(-2, 3):
                j = cell + off
                ok = (j >= 0) & (j < n_cells)
                if not ok.any():
                    continue
                prod = zeta.data[g][ok] @ pc[j[ok]]
                norms = _op_norms(prod).reshape(prod.shape[:2])
                worst = max(worst, float((2 * norms * dmax[j[ok]][:, None]).max()))
    return worst


def cancellation_literal(res: CZResult) -> float:
    """max ||zeta(x) b_n(y) zeta(x)||_F over all x and y in 5 I_{x,n}, by direct enumeration."""
    worst = 0.0
    for n, bn in enumerate(res.bad):
        size = 2 ** n
        for x in range(res.zeta.start, res.zeta.stop):
            zx = res.zeta.at(x)
            j = x // size
            for y in range((j - 2) * size, (j + 3) * size):
                by = bn.at(y)
                worst = max(worst, (zx @ by @ zx).fro_norm())
    return worst


def cz_verify(f: OperatorSequence, lam: float, result) -> VerificationReport:
    """Run every invariant of the construction; failures are data, not exceptions."""
    if isinstance(result, CuculescuResult):
        return VerificationReport(tuple(_cuculescu_checks(f, result)))
    res: CZResult = result
    cu = res.cuculescu
    checks = _cuculescu_checks(f, cu)
    f_full = f.extend(cu.start, cu.stop)
    recon = res.good + res.b
    checks.append(Check("f = g + sum b_n", recon.max_abs_diff(f_full), 1e-11))
    f1 = _seq_l1(f_full)
    checks.append(Check("||g||_1 <= ||f||_1", _seq_l1(res.good) - f1, 1e-9))
    checks.append(Check("||g||_inf <= 2 lambda", _seq_max_op(res.good) - 2 * cu.lam, 1e-9))
    en = 0.0
    for n, bn in enumerate(res.bad):
        e = cond_expectation(bn, n)
        en = max(en, float(max((np.abs(a).max() if a.size else 0.0) for a in e.data)))
    checks.append(Check("E_n b_n = 0", en, 1e-10))
    checks.append(Check("zeta(x) b_n(y) zeta(x) = 0 for y in 5I_{x,n}", _cancellation_bound(res), 1e-10))
    zproj = max(float(np.abs(a @ a - a).max()) if a.size else 0.0 for a in res.zeta.data)
    checks.append(Check("zeta projection", zproj, 1e-10))
    ones = OperatorSequence(res.zeta.shape, res.zeta.start,
                            [np.broadcast_to(np.eye(a.shape[-1]), a.shape) for a in res.zeta.data])
    checks.append(Check("lambda phi(1 - zeta) <= 5 ||f||_1",
                        cu.lam * _trace_of(ones - res.zeta) - 5 * f1, 1e-9))
    return VerificationReport(tuple(checks))
