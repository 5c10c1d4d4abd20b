"""Verification suites.

A suite is a set of named checks plus a per-trial function returning one
measured value per check. Values are margins (pass iff the worst one is at
most ``tol``) or ratios whose maximum is reported as an empirical constant.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..algebra import random_element
from ..cz import cuculescu, cz_decompose, cz_verify
from ..dyadic import OperatorSequence, bmo_norm, keylem_sides
from ..ergodic import (NestedSequence, averaging_family, jor_sum, nested_split, sequence_square_stat,
                       split_defects, split_interval, square_stat, transference, _family_items)
from ..errors import OptimizerGapExceeded
from ..lp import lp_norm
from ..operators import (DilationWitness, class_certify, coin_dilation, compose, convex_combination,
                         dilation_verify, extension_rc_check, make_unitary_conjugation, random_yeadon,
                         make_yeadon, sampled_power_sup, trace_condition_defect, trivial_dilation, apply)
from ..rc import (ElementSequence, col_row_norm, khintchine_norm, rc_norm, weak_distribution_curve,
                  weak_rc_surrogate)
from . import generators as gen

SCALAR = {"blocks": [1], "weights": [1.0]}
M2 = {"blocks": [2], "weights": [1.0]}
TWO_BLOCK = {"blocks": [2, 3], "weights": [1.0, 0.5]}
PAIR = {"blocks": [2, 2], "weights": [1.0, 2.0]}


@dataclass(frozen=True)
class CheckSpec:
    name: str
    tol: float | None = None
    kind: str = "margin"  # "margin" or "constant"


@dataclass
class Suite:
    name: str
    defaults: dict
    checks: tuple
    trial: Callable
    finalize: Callable | None = None


@dataclass
class CheckRecord:
    name: str
    kind: str
    values: list
    tol: float | None
    extra: dict = field(default_factory=dict)

    @property
    def instances(self) -> int:
        return len(self.values)

    @property
    def worst(self) -> float | None:
        vals = [v for v in self.values if v is not None]
        if not vals:
            return None
        if any(isinstance(v, float) and math.isnan(v) for v in vals):
            return float("nan")
        return float(max(vals))

    @property
    def passed(self) -> bool:
        if "pass" in self.extra:
            return bool(self.extra["pass"])
        w = self.worst
        if w is None:
            return True
        if not math.isfinite(w):
            return False
        return self.tol is None or w <= self.tol

    def to_json(self) -> dict:
        w = self.worst
        out = {"name": self.name, "kind": self.kind, "instances": self.instances,
               "worst_margin": w if self.kind == "margin" else None,
               "empirical_constant": w if self.kind == "constant" else None,
               "tol": self.tol, "pass": self.passed}
        for k, v in self.extra.items():
            if k != "pass":
                out[k] = v
        out["values"] = [None if v is None else float(v) for v in self.values]
        return out


def _opt(cfg) -> dict:
    return dict(cfg.get("optimizer", {}))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# --------------------------------------------------------------------------
# cuculescu / cz


def _cz_instance(cfg, rng):
    shape = gen.pick_shape(rng, cfg["shapes"])
    K = int(rng.integers(cfg["window"][0], cfg["window"][1] + 1))
    f = gen.positive_sequence(rng, shape, K)
    lam = gen.spectral_lambda(rng, f, *cfg["lambda_range"])
    return f, lam


CUC_CHECKS = (
    CheckSpec("q_n projections", 1e-10),
    CheckSpec("q_n increasing (q_n q_{n+1} = q_n)", 1e-10),
    CheckSpec("q_n constant on F_n cells", 1e-12),
    CheckSpec("q_n commutes with q_{n+1} f_n q_{n+1}", 1e-10),
    CheckSpec("q_n f_n q_n <= lambda q_n", 1e-9),
    CheckSpec("lambda phi(1 - q) <= ||f||_1", 1e-9),
    CheckSpec("||p_n f_n p_n||_inf <= 2 lambda", 1e-9),
    CheckSpec("p_m p_n = 0 (m != n)", 1e-10),
    CheckSpec("sum p_n + q = 1", 1e-12),
)

CZ_CHECKS = CUC_CHECKS + (
    CheckSpec("f = g + sum b_n", 1e-11),
    CheckSpec("||g||_1 <= ||f||_1", 1e-9),
    CheckSpec("||g||_inf <= 2 lambda", 1e-9),
    CheckSpec("E_n b_n = 0", 1e-10),
    CheckSpec("zeta(x) b_n(y) zeta(x) = 0 for y in 5I_{x,n}", 1e-10),
    CheckSpec("zeta projection", 1e-10),
    CheckSpec("lambda phi(1 - zeta) <= 5 ||f||_1", 1e-9),
    CheckSpec("m_lambda", None, "constant"),
)


def _cuculescu_trial(cfg, rng, i):
    f, lam = _cz_instance(cfg, rng)
    res = cuculescu(f, lam)
    out = {c.check: c.margin for c in cz_verify(f, lam, res).checks}
    return out


def _cz_trial(cfg, rng, i):
    f, lam = _cz_instance(cfg, rng)
    res = cz_decompose(f, lam)
    out = {c.check: c.margin for c in cz_verify(f, lam, res).checks}
    out["m_lambda"] = float(res.cuculescu.m_lambda)
    return out


# --------------------------------------------------------------------------
# khintchine


KH_CHECKS = (
    CheckSpec("p=2 exact: E||sum eps x||_2 = (sum ||x_n||_2^2)^(1/2) (relative)", 1e-12),
    CheckSpec("p=3: max(||x||_c, ||x||_r) <= E||sum eps x||_3 (relative excess)", 1e-12),
    CheckSpec("p=4: max(||x||_c, ||x||_r) <= E||sum eps x||_4 (relative excess)", 1e-12),
    CheckSpec("p=3: E||sum eps x||_3 / max(||x||_c, ||x||_r)", None, "constant"),
    CheckSpec("p=4: E||sum eps x||_4 / max(||x||_c, ||x||_r)", None, "constant"),
)


def _khintchine_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    n = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    seq = gen.generic_sequence(rng, shape, n)
    exact = math.sqrt(sum(lp_norm(x, 2).value ** 2 for x in seq.items))
    out = {KH_CHECKS[0].name: _rel(khintchine_norm(seq, 2).value, exact)}
    for p, lo, const in ((3.0, KH_CHECKS[1], KH_CHECKS[3]), (4.0, KH_CHECKS[2], KH_CHECKS[4])):
        k = khintchine_norm(seq, p).value
        m = max(col_row_norm(seq, p, "column").value, col_row_norm(seq, p, "row").value)
        out[lo.name] = (m - k) / k
        out[const.name] = k / m
    return out


# --------------------------------------------------------------------------
# weak (1,1) and key lemma


W_CHECKS = (
    CheckSpec("weak-1 ratio: surrogate / ||f||_1", None, "constant"),
    CheckSpec("quasi-triangle: full <= 3 (first + middle + last)", 0.0),
    CheckSpec("key lemma: first Cauchy-Schwarz bound (relative excess)", 1e-9),
    CheckSpec("key lemma: second Cauchy-Schwarz bound (relative excess)", 1e-9),
)


def _three_parts(seq: NestedSequence):
    """For each [n_i, n_{i+1}): (first, middle, last) pieces; missing pieces are None."""
    out = []
    for a, b in seq.pairs:
        s, l = split_interval(a, b)
        first = next((pc for pc in s if pc[0] == a), None)
        last = next((pc for pc in s if pc[1] == b and pc[0] != a), None)
        if first is not None and first[1] == b:
            last = None
        out.append((first, l[0] if l else None, last))
    return out


def _piece_family(f, seq, pieces):
    """Family indexed by i with the given piece (zero where absent)."""
    present = [pc for pc in pieces if pc is not None]
    if not present:
        return None
    fam = averaging_family(f, seq, present)
    lo = min(g.start for g in fam)
    hi = max(g.stop for g in fam)
    it = iter(fam)
    out = []
    for pc in pieces:
        out.append(next(it).extend(lo, hi) if pc is not None else OperatorSequence.zeros(f.shape, lo, hi - lo))
    return out


def _common(fams):
    fams = [fm for fm in fams if fm is not None]
    lo = min(g.start for fm in fams for g in fm)
    hi = max(g.stop for fm in fams for g in fm)
    return [[g.extend(lo, hi) for g in fm] for fm in fams]


def _weak_instance(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    K = int(rng.integers(cfg["window"][0], cfg["window"][1] + 1))
    f = gen.positive_sequence(rng, shape, K)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    mode = "one-sided" if i % 2 == 0 else "two-sided"
    return shape, f, gen.nested(rng, L, cfg["index_max"], mode)


def _weak_trial(cfg, rng, i):
    shape, f, seq = _weak_instance(cfg, rng, i)
    f1 = lp_norm(f.to_element(), 1).value
    full = averaging_family(f, seq)
    value = weak_rc_surrogate(_family_items(full)).value
    out = {W_CHECKS[0].name: value / f1}

    parts = _three_parts(seq)
    fams = [_piece_family(f, seq, [pt[j] for pt in parts]) for j in range(3)]
    fams_c = _common([full] + [fm for fm in fams if fm is not None])
    pieces = sum(weak_rc_surrogate(_family_items(fm)).value for fm in fams_c[1:])
    out[W_CHECKS[1].name] = (weak_rc_surrogate(_family_items(fams_c[0])).value - 3 * pieces) / max(value, 1e-300)

    # key lemma on an independent random tuple
    h = OperatorSequence.from_values(shape, {x: random_element(shape, "generic", rng) for x in range(-8, 24)},
                                     start=-8, stop=24)
    n = int(rng.integers(0, 4))
    a = int(rng.integers(-4, 8))
    B = (a, a + int(rng.integers(0, 12)))
    shift = int(rng.integers(-4, 5))
    lhs, first, second = keylem_sides(h, B, shift, n)
    out[W_CHECKS[2].name] = (lhs - first) / max(lhs, 1.0)
    out[W_CHECKS[3].name] = (lhs - second) / max(lhs, 1.0)
    return out


def _weak_finalize(cfg, results, records):
    name = W_CHECKS[0].name
    vals = [r[name] for r in results]
    half = len(vals) // 2
    c1, c2 = max(vals[:half] or [0.0]), max(vals[half:] or [0.0])
    spread = abs(c1 - c2) / max(c1, c2, 1e-300)
    records.append(CheckRecord("weak-1 constant stable across halves", "margin", [spread], 0.30,
                               {"halves": [c1, c2]}))
    if vals:
        worst = int(np.argmax(vals))
        _, f, seq = _weak_instance(cfg, gen.trial_rng(cfg["seed"], "weak11", worst), worst)
        thresholds, dist = weak_distribution_curve(_family_items(averaging_family(f, seq)))
        f1 = lp_norm(f.to_element(), 1).value
        records[0].extra["plot"] = [[float(a), float(b / f1)] for a, b in zip(thresholds, dist)]


# --------------------------------------------------------------------------
# bmo


BMO_CHECKS = (
    CheckSpec("bmo ratio: max(row, column) / ||f||_inf", None, "constant"),
    CheckSpec("bmo(F, row) = bmo(F*, column)", 1e-12),
    CheckSpec("constant family has zero bmo", 1e-12),
    CheckSpec("bmo(single family) <= 2 max ||f(x)||_inf (excess)", 1e-12),
)


def _bmo_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    K = int(rng.integers(cfg["window"][0], cfg["window"][1] + 1))
    f = OperatorSequence.from_values(shape, {x: random_element(shape, "generic", rng) for x in range(2 ** K)}, window=K)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    seq = gen.nested(rng, L, cfg["index_max"], "one-sided" if i % 2 == 0 else "two-sided")
    rep = sequence_square_stat(f, seq, "bmo", parts=False)
    fam = averaging_family(f, seq)
    row = bmo_norm(fam, "row").value
    col_adj = bmo_norm([g.adjoint() for g in fam], "column").value
    c = random_element(shape, "generic", rng)
    const = OperatorSequence.from_values(shape, {x: c for x in range(2 ** K)}, window=K)
    sup = max(f.at(x).op_norm() for x in f.positions)
    return {BMO_CHECKS[0].name: rep.ratio,
            BMO_CHECKS[1].name: _rel(row, col_adj) if col_adj else row,
            BMO_CHECKS[2].name: bmo_norm([const], "column").value,
            BMO_CHECKS[3].name: (max(bmo_norm([f], "column").value, bmo_norm([f], "row").value) - 2 * sup) / sup}


# --------------------------------------------------------------------------
# strong (p, p)


def _strong_checks(cfg):
    out = []
    for p in cfg["p"]:
        out.append(CheckSpec(f"p={p}: rc square function / ||f||_p", None, "constant"))
        out.append(CheckSpec(f"p={p}: full <= first + middle + last (relative excess)", 1e-9))
    out.append(CheckSpec("splitter invariants on random sequences", 0.0))
    return tuple(out)


def _strong_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    K = int(rng.integers(cfg["window"][0], cfg["window"][1] + 1))
    f = OperatorSequence.from_values(shape, {x: random_element(shape, "generic", rng) for x in range(2 ** K)}, window=K)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    seq = gen.nested(rng, L, cfg["index_max"], "one-sided" if i % 2 == 0 else "two-sided")
    out = {}
    parts = _three_parts(seq)
    fams = [_piece_family(f, seq, [pt[j] for pt in parts]) for j in range(3)]
    full = averaging_family(f, seq)
    fams_c = _common([full] + [fm for fm in fams if fm is not None])
    for p in cfg["p"]:
        kw = _opt(cfg) if float(p) < 2 else {}
        val = float(rc_norm(_family_items(fams_c[0]), p, **kw).value)
        fn = lp_norm(f.to_element(), p).value
        out[f"p={p}: rc square function / ||f||_p"] = val / fn
        pieces = sum(float(rc_norm(_family_items(fm), p, **kw).value) for fm in fams_c[1:])
        out[f"p={p}: full <= first + middle + last (relative excess)"] = (val - pieces) / max(val, 1e-300)
    out["splitter invariants on random sequences"] = float(len(split_defects(seq, nested_split(seq))))
    return out


# --------------------------------------------------------------------------
# operator-level theorems


def _thm11_checks(cfg):
    out = []
    for p in cfg["p"]:
        for mode in ("one-sided", "two-sided"):
            out.append(CheckSpec(f"p={p} {mode}: square function / ||x||_p", None, "constant"))
    out.append(CheckSpec("sampled sup_|k|<=64 ||T^k x||_p / ||x||_p <= kappa (excess)", 1e-9))
    return tuple(out)


def _thm11_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    T = gen.power_bounded(rng, shape, cfg["kappa_max"])
    x = random_element(shape, "generic", rng)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    out = {}
    for p in cfg["p"]:
        kw = _opt(cfg) if float(p) < 2 else {}
        for mode in ("one-sided", "two-sided"):
            seq = gen.nested(rng, L, cfg["index_max"], mode)
            out[f"p={p} {mode}: square function / ||x||_p"] = square_stat(T, x, seq, p, **kw).ratio
    kappa = T.certificates["power-bounded"]
    p0 = cfg["p"][i % len(cfg["p"])]
    sup = sampled_power_sup(T, p0, range(-64, 65, 8), samples=3, seed=rng)
    out["sampled sup_|k|<=64 ||T^k x||_p / ||x||_p <= kappa (excess)"] = (sup - kappa) / kappa
    return out


def _lamperti_checks(cfg):
    out = []
    for p in cfg["p"]:
        out.append(CheckSpec(f"p={p}: convex Lamperti combination is a contraction (excess)", 1e-9))
        out.append(CheckSpec(f"p={p}: square function / ||x||_p", None, "constant"))
    out.append(CheckSpec("parts are Lamperti (sampled)", 1e-9))
    return tuple(out)


def _lamperti_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    out = {}
    worst_l = 0.0
    for p in cfg["p"]:
        T = gen.lamperti_combination(rng, shape, float(p))
        kw = _opt(cfg) if float(p) < 2 else {}
        ratio = 0.0
        for _ in range(5):
            x = random_element(shape, "generic", rng)
            ratio = max(ratio, lp_norm(apply(T, x), p).value / lp_norm(x, p).value)
        out[f"p={p}: convex Lamperti combination is a contraction (excess)"] = ratio - 1.0
        L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
        seq = gen.nested(rng, L, cfg["index_max"])
        out[f"p={p}: square function / ||x||_p"] = square_stat(T, random_element(shape, "generic", rng), seq, p, **kw).ratio
        _, parts = T.certificates["convex-combo"]
        for P in parts:
            worst_l = max(worst_l, class_certify(P, "lamperti", trials=20, seed=rng).max_violation)
    out["parts are Lamperti (sampled)"] = worst_l
    return out


# --------------------------------------------------------------------------
# isometric extension


EXT_CHECKS = (
    CheckSpec("p>=2 Yeadon: |rc ratio - 1|", 1e-6),
    CheckSpec("p<2 Yeadon: rc ratio - 1", 0.02),
    CheckSpec("p=1.5 positive Yeadon: |rc ratio - 1|", 0.02),
    CheckSpec("column/row exchange (relative, p>=2)", 1e-8),
    CheckSpec("trace condition tau(b^p J(x)) = tau(x)", 1e-10),
    CheckSpec("Yeadon identity |T x|^2 = b^2 J(x*x) e + b^2 J(xx*) f (w = 1)", 1e-10),
    CheckSpec("sum-norm duality gap", 0.05),
)


def _ext_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    opts = cfg.get("options", {})
    high = opts.get("p_high", [2.5, 3, 4])
    low = opts.get("p_low", [1.3, 1.5])
    n_items = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    seq = gen.generic_sequence(rng, shape, n_items)
    out = {}
    kw = _opt(cfg)
    gaps = []
    # cycle through the three groups so each gets its share of instances
    group = i % 3
    if group == 0:
        p = float(high[(i // 3) % len(high)])
        tr = random_yeadon(shape, p, rng)
        T = make_yeadon(tr)
        out[EXT_CHECKS[0].name] = abs(extension_rc_check(T, p, seq).ratio - 1.0)
        img = ElementSequence.from_items([apply(T, x) for x in seq.items])
        a = col_row_norm(img, p, "column").value ** p + col_row_norm(img, p, "row").value ** p
        b = col_row_norm(seq, p, "column").value ** p + col_row_norm(seq, p, "row").value ** p
        out[EXT_CHECKS[3].name] = _rel(a, b)
    elif group == 1:
        p = float(low[(i // 3) % len(low)])
        tr = random_yeadon(shape, p, rng)
        T = make_yeadon(tr)
        rep = extension_rc_check(T, p, seq, seed=rng.integers(2 ** 32), **kw)
        out[EXT_CHECKS[1].name] = rep.ratio - 1.0
        gaps += [rep.image_norm.gap, rep.input_norm.gap]
    else:
        p = 1.5
        tr = random_yeadon(shape, p, rng, positive=True)
        T = make_yeadon(tr)
        rep = extension_rc_check(T, p, seq, seed=rng.integers(2 ** 32), **kw)
        out[EXT_CHECKS[2].name] = abs(rep.ratio - 1.0)
        gaps += [rep.image_norm.gap, rep.input_norm.gap]
        e, f = tr.central_projections()
        b2 = tr.b @ tr.b
        worst = 0.0
        for _ in range(5):
            x = random_element(shape, "generic", rng)
            tx = apply(T, x)
            lhs = tx.adjoint() @ tx
            rhs = b2 @ tr.J(x.adjoint() @ x) @ e + b2 @ tr.J(x @ x.adjoint()) @ f
            worst = max(worst, (lhs - rhs).op_norm() / max(lhs.op_norm(), 1e-300))
        out[EXT_CHECKS[5].name] = worst
    out[EXT_CHECKS[4].name] = trace_condition_defect(tr, trials=10, seed=rng)
    if gaps:
        out[EXT_CHECKS[6].name] = max(gaps)
    return out


# --------------------------------------------------------------------------
# transference and JOR


TR_CHECKS = (
    CheckSpec("transference identity defect", 1e-10),
    CheckSpec("square statistic <= kappa * transferred statistic (relative excess)", 1e-9),
    CheckSpec("transferred orbit norm <= kappa * support factor * ||x||_p (relative excess)", 1e-9),
    CheckSpec("factor ((m+N+1)/(m+1))^(1/p)", None, "constant"),
)


def _transference_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    T = gen.unitary_conjugation(rng, shape) if rng.random() < 0.5 else gen.power_bounded(rng, shape, cfg["kappa_max"])
    kappa = T.certificates.get("power-bounded", 1.0)
    x = random_element(shape, "generic", rng)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    mode = "one-sided" if i % 2 == 0 else "two-sided"
    seq = gen.nested(rng, L, cfg["index_max"], mode)
    m = seq.indices[-1] + int(rng.integers(1, 33))
    p = float(cfg["p"][i % len(cfg["p"])])
    rep = transference(T, x, seq, m, p)
    xn = lp_norm(x, p).value
    return {TR_CHECKS[0].name: rep.defect / max(1.0, x.max_abs()),
            TR_CHECKS[1].name: (rep.lhs - kappa * rep.orbit_stat) / max(rep.lhs, 1e-300),
            TR_CHECKS[2].name: (rep.orbit_norm - kappa * rep.support_factor * xn) / xn,
            TR_CHECKS[3].name: rep.factor}


JOR_CHECKS = (
    CheckSpec("sum_i ||M_{n_i}x - M_{n_{i+1}}x||_2^2 <= (25 ||x||_2)^2 (ratio to ||x||_2^2)", 625.0, "constant"),
    CheckSpec("p=2 square statistic / ||x||_2 <= 25 sqrt 2", 25 * math.sqrt(2), "constant"),
)


def _jor_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    T = gen.unitary_conjugation(rng, shape)
    x = random_element(shape, "generic", rng)
    L = int(rng.integers(cfg["lengths"][0], cfg["lengths"][1] + 1))
    seq = gen.nested(rng, L, cfg["index_max"])
    total, xx = jor_sum(T, x, seq)
    return {JOR_CHECKS[0].name: total / xx, JOR_CHECKS[1].name: square_stat(T, x, seq, 2).ratio}


# --------------------------------------------------------------------------
# dilations


DIL_CHECKS = (
    CheckSpec("trivial dilation of an isometry: defect", 1e-9),
    CheckSpec("coin dilation of a convex combination: defect", 1e-9),
    CheckSpec("coin dilation: Q, J contractive and U isometric (excess)", 1e-9),
    CheckSpec("corrupted witness detected (0.1 - defect)", 0.0),
)


def _dilation_trial(cfg, rng, i):
    shape = gen.pick_shape(rng, cfg["shapes"])
    p = float(cfg["p"][i % len(cfg["p"])])
    T = gen.yeadon(rng, shape, p) if rng.random() < 0.5 else gen.unitary_conjugation(rng, shape)
    triv = dilation_verify(T, trivial_dilation(T, 6, p), samples=10, seed=rng)
    u1 = random_element(shape, "unitary", rng)
    u2 = random_element(shape, "unitary", rng)
    C = convex_combination([0.5, 0.5], [make_unitary_conjugation(u1), make_unitary_conjugation(u2)])
    N = int(rng.integers(1, 4))
    W = coin_dilation(u1, u2, N, p)
    rep = dilation_verify(C, W, samples=10, seed=rng)
    bad = DilationWitness(N, W.Q, compose(W.U, W.U), W.J, p)
    corrupted = dilation_verify(C, bad, samples=10, seed=rng) if N >= 1 else rep
    return {DIL_CHECKS[0].name: triv.defect,
            DIL_CHECKS[1].name: rep.defect,
            DIL_CHECKS[2].name: max(rep.q_norm - 1, rep.j_norm - 1, rep.u_isometry_defect),
            DIL_CHECKS[3].name: 0.1 - corrupted.defect}


# --------------------------------------------------------------------------
# registry


def _base(**kw):
    d = {"seed": 0, "shapes": [SCALAR, M2, TWO_BLOCK], "p": [2.0], "window": [2, 5], "lengths": [2, 8],
         "index_max": 64, "lambda_range": [0.1, 10.0], "kappa_max": 16.0,
         "optimizer": {"restarts": 5, "iterations": 2000, "n_dual": 200}}
    d.update(kw)
    return d


SUITES: dict[str, Suite] = {
    "cuculescu": Suite("cuculescu", _base(instances=200), CUC_CHECKS, _cuculescu_trial),
    "cz": Suite("cz", _base(instances=200), CZ_CHECKS, _cz_trial),
    "khintchine": Suite("khintchine", _base(instances=100, lengths=[1, 10], shapes=[SCALAR, M2, TWO_BLOCK, PAIR]),
                        KH_CHECKS, _khintchine_trial),
    "weak11": Suite("weak11", _base(instances=100, window=[3, 5], lengths=[3, 8]), W_CHECKS, _weak_trial,
                    _weak_finalize),
    "bmo": Suite("bmo", _base(instances=60, window=[3, 5], lengths=[2, 6]), BMO_CHECKS, _bmo_trial),
    "strongpp": Suite("strongpp", _base(instances=60, window=[2, 4], lengths=[2, 6], p=[2.0, 3.0]),
                      None, _strong_trial),
    "thm11": Suite("thm11", _base(instances=40, shapes=[M2, TWO_BLOCK, PAIR], lengths=[2, 8], index_max=256,
                                  p=[1.5, 2.0, 3.0], optimizer={"restarts": 3, "iterations": 800, "n_dual": 50}),
                   None, _thm11_trial),
    "thm13-lamperti": Suite("thm13-lamperti", _base(instances=30, shapes=[TWO_BLOCK, PAIR], p=[1.5, 2.0, 3.0],
                                                    optimizer={"restarts": 3, "iterations": 800, "n_dual": 50}),
                            None, _lamperti_trial),
    "prop16-extension": Suite("prop16-extension", _base(instances=90, shapes=[PAIR, TWO_BLOCK], lengths=[1, 3]),
                              EXT_CHECKS, _ext_trial),
    "transference": Suite("transference", _base(instances=50, shapes=[M2, TWO_BLOCK, PAIR], lengths=[2, 6],
                                                p=[2.0, 3.0]), TR_CHECKS, _transference_trial),
    "jor-l2": Suite("jor-l2", _base(instances=100, shapes=[M2, TWO_BLOCK, PAIR], lengths=[2, 8], index_max=1024),
                    JOR_CHECKS, _jor_trial),
    "dilation": Suite("dilation", _base(instances=20, shapes=[M2, PAIR], p=[1.5, 2.0, 3.0]), DIL_CHECKS,
                      _dilation_trial),
}

_DYNAMIC = {"strongpp": _strong_checks, "thm11": _thm11_checks, "thm13-lamperti": _lamperti_checks}


def checks_for(name: str, cfg: dict) -> tuple:
    if name in _DYNAMIC:
        return _DYNAMIC[name](cfg)
    return SUITES[name].checks


def run_trials(name: str, cfg: dict, indices) -> list[dict]:
    suite = SUITES[name]
    out = []
    for i in indices:
        rng = gen.trial_rng(cfg["seed"], name, i)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizerGapExceeded)
            out.append(suite.trial(cfg, rng, i))
    return out


def aggregate(name: str, cfg: dict, results: list[dict]) -> list[CheckRecord]:
    records = []
    for spec in checks_for(name, cfg):
        vals = [r[spec.name] for r in results if spec.name in r]
        records.append(CheckRecord(spec.name, spec.kind, [float(v) for v in vals], spec.tol))
    fin = SUITES[name].finalize
    if fin is not None:
        fin(cfg, results, records)
    return records
