"""Linear maps on a finite algebra: construction, certification and dilation checks.

A ``SuperOperator`` is stored as a dense matrix acting on ``Element.to_vector``
(blocks concatenated in order, each flattened row-major).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import AlgebraShape, Element, _rng, block_scalars, haar_unitary, random_element
from .errors import BlockDimMismatch, NotInvertible, NotUnitary, ShapeMismatch, TraceConditionViolated
from .lp import as_exponent, lp_norm
from .rc import ElementSequence, rc_norm


def _vector_weights(shape: AlgebraShape) -> np.ndarray:
    return np.concatenate([np.full(d * d, w) for d, w in zip(shape.block_dims, shape.trace_weights)])


@dataclass(frozen=True)
class SuperOperator:
    shape: AlgebraShape
    matrix: np.ndarray
    certificates: dict = field(default_factory=dict)
    out_shape: AlgebraShape | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        out = self.shape if self.out_shape is None else self.out_shape
        if m.shape != (out.dim, self.shape.dim):
            raise ShapeMismatch(f"matrix {m.shape} does not map {self.shape.dim} -> {out.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "out_shape", out)

    @classmethod
    def from_function(cls, shape: AlgebraShape, fn: Callable[[Element], Element],
                      out_shape: AlgebraShape | None = None, certificates: dict | None = None) -> "SuperOperator":
        """Tabulate a linear map by its action on the matrix-unit basis."""
        out = shape if out_shape is None else out_shape
        cols = np.empty((out.dim, shape.dim), dtype=np.complex128)
        for j in range(shape.dim):
            e = np.zeros(shape.dim, dtype=np.complex128)
            e[j] = 1.0
            cols[:, j] = fn(Element.from_vector(shape, e)).to_vector()
        return cls(shape, cols, dict(certificates or {}), out)

    @classmethod
    def identity(cls, shape: AlgebraShape) -> "SuperOperator":
        return cls(shape, np.eye(shape.dim), {"unitary-conjugation": Element.identity(shape),
                                              "positive-by-construction": True})

    @property
    def is_square(self) -> bool:
        return self.out_shape == self.shape

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def is_invertible(self, tol: float = 1e-8) -> bool:
        if not self.is_square:
            return False
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return bool(s[-1] > tol * max(s[0], 1.0))

    def __call__(self, x: Element) -> Element:
        return apply(self, x)


# --------------------------------------------------------------------------
# algebra of maps


def apply(T: SuperOperator, x: Element) -> Element:
    if x.shape != T.shape:
        raise ShapeMismatch("element is not in the domain of the map")
    return Element.from_vector(T.out_shape, T.matrix @ x.to_vector())


def compose(T: SuperOperator, S: SuperOperator) -> SuperOperator:
    """T after S."""
    if S.out_shape != T.shape:
        raise ShapeMismatch("cannot compose maps with mismatched shapes")
    return SuperOperator(S.shape, T.matrix @ S.matrix, {}, T.out_shape)


def inverse(T: SuperOperator) -> SuperOperator:
    if not T.is_invertible():
        raise NotInvertible("map is singular")
    certs = {}
    if "unitary-conjugation" in T.certificates:
        certs["unitary-conjugation"] = T.certificates["unitary-conjugation"].adjoint()
        certs["positive-by-construction"] = True
    if "power-bounded" in T.certificates:
        certs["power-bounded"] = T.certificates["power-bounded"]
    return SuperOperator(T.shape, np.linalg.inv(T.matrix), certs)


def power(T: SuperOperator, k: int) -> SuperOperator:
    if not T.is_square:
        raise ShapeMismatch("powers need a map of the algebra into itself")
    if k < 0:
        return power(inverse(T), -k)
    return SuperOperator(T.shape, np.linalg.matrix_power(T.matrix, k),
                         {"power-bounded": T.certificates["power-bounded"]}
                         if "power-bounded" in T.certificates else {})


def adjoint_wrt_pairing(T: SuperOperator) -> SuperOperator:
    """T^dagger with tau(T(x) y^*) = tau(x (T^dagger y)^*)."""
    w_in = _vector_weights(T.shape)
    w_out = _vector_weights(T.out_shape)
    mat = (np.conj(T.matrix.T) * w_out[None, :]) / w_in[:, None]
    return SuperOperator(T.out_shape, mat, {}, T.shape)


def convex_combination(weights: Sequence[float], parts: Sequence[SuperOperator]) -> SuperOperator:
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(weights) != len(parts) or (weights < 0).any() or not np.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be a probability vector matching the parts")
    shape = parts[0].shape
    if any(P.shape != shape or P.out_shape != shape for P in parts):
        raise ShapeMismatch("convex combination of maps on different algebras")
    mat = sum(w * P.matrix for w, P in zip(weights, parts))
    certs = {"convex-combo": (tuple(weights), tuple(parts))}
    if all(P.certificates.get("positive-by-construction") for P in parts):
        certs["positive-by-construction"] = True
    return SuperOperator(shape, mat, certs)


# --------------------------------------------------------------------------
# constructions


def make_unitary_conjugation(u: Element) -> SuperOperator:
    """x -> u x u^*."""
    if not u.is_unitary():
        raise NotUnitary("conjugating element is not unitary")
    uh = u.adjoint()
    T = SuperOperator.from_function(u.shape, lambda x: u @ x @ uh)
    return SuperOperator(u.shape, T.matrix, {"unitary-conjugation": u, "positive-by-construction": True})


@dataclass(frozen=True)
class YeadonTriple:
    """Data (w, b, J) of an L_p isometry T(x) = w b J(x).

    ``J`` sends block k to block ``perm[k]`` by x -> u_k x u_k^* ("hom") or
    x -> u_k x^T u_k^* ("anti").
    """

    shape: AlgebraShape
    perm: tuple[int, ...]
    modes: tuple[str, ...]
    unitaries: tuple[np.ndarray, ...]
    w: Element
    p: float

    def __post_init__(self):
        n = self.shape.n_blocks
        perm = tuple(int(k) for k in self.perm)
        if sorted(perm) != list(range(n)):
            raise BlockDimMismatch("perm must be a permutation of the blocks")
        if any(self.shape.block_dims[perm[k]] != self.shape.block_dims[k] for k in range(n)):
            raise BlockDimMismatch("perm must preserve block dimensions")
        if len(self.modes) != n or any(m not in ("hom", "anti") for m in self.modes):
            raise ValueError("modes must be 'hom' or 'anti' per block")
        us = tuple(np.asarray(u, dtype=np.complex128) for u in self.unitaries)
        for u, d in zip(us, self.shape.block_dims):
            if u.shape != (d, d) or np.abs(np.conj(u.T) @ u - np.eye(d)).max() > 1e-10:
                raise NotUnitary("J needs one unitary per block")
        if self.w.shape != self.shape or not self.w.is_unitary():
            raise NotUnitary("w must be a unitary of the algebra (J is unital here)")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "unitaries", us)
        object.__setattr__(self, "p", float(as_exponent(self.p)))

    def J(self, x: Element) -> Element:
        blocks = x.blocks
        out: list = [None] * self.shape.n_blocks
        for k, (b, u, mode) in enumerate(zip(blocks, self.unitaries, self.modes)):
            src = b.T if mode == "anti" else b
            out[self.perm[k]] = u @ src @ np.conj(u.T)
        return Element.from_blocks(self.shape, out)

    @property
    def beta(self) -> np.ndarray:
        """beta_k = (lambda_k / lambda_perm(k))^(1/p), placed on block perm(k) of b."""
        lam = np.array(self.shape.trace_weights)
        return (lam / lam[list(self.perm)]) ** (1.0 / self.p)

    @property
    def b(self) -> Element:
        vals = np.empty(self.shape.n_blocks)
        vals[list(self.perm)] = self.beta
        return block_scalars(self.shape, vals)

    def central_projections(self) -> tuple[Element, Element]:
        """(e, f): sums of the image blocks of homomorphism and anti-homomorphism modes."""
        e = np.zeros(self.shape.n_blocks)
        for k, mode in enumerate(self.modes):
            e[self.perm[k]] = 1.0 if mode == "hom" else 0.0
        return block_scalars(self.shape, e), block_scalars(self.shape, 1.0 - e)

    def to_json(self) -> dict:
        def enc(a):
            return [[[float(z.real), float(z.imag)] for z in row] for row in a]
        return {"shape": self.shape.to_json(), "perm": list(self.perm), "modes": list(self.modes),
                "unitaries": [enc(u) for u in self.unitaries], "w": self.w.to_json()["blocks"], "p": self.p}

    @classmethod
    def from_json(cls, obj: dict) -> "YeadonTriple":
        shape = AlgebraShape.from_json(obj["shape"])

        def dec(rows):
            return np.array([[complex(re, im) for re, im in row] for row in rows])
        w = Element.from_blocks(shape, [dec(b) for b in obj["w"]])
        return cls(shape, tuple(obj["perm"]), tuple(obj["modes"]), tuple(dec(u) for u in obj["unitaries"]),
                   w, obj["p"])


def trace_condition_defect(triple: YeadonTriple, b: Element | None = None, trials: int = 50, seed=0) -> float:
    """max |tau(b^p J(x)) - tau(x)| / tau(x) over random positive x."""
    b = triple.b if b is None else b
    rng = _rng(seed)
    bp = Element(b.shape, [np.real(a) ** triple.p * (np.abs(a) > 0) for a in b.data])
    worst = 0.0
    for _ in range(trials):
        x = random_element(triple.shape, "positive", rng)
        lhs = (bp @ triple.J(x)).trace().real
        rhs = x.trace().real
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return worst


def make_yeadon(triple: YeadonTriple, b: Element | None = None) -> SuperOperator:
    """T(x) = w b J(x); a caller-supplied ``b`` must satisfy the trace condition."""
    if b is not None:
        if trace_condition_defect(triple, b) > 1e-10:
            raise TraceConditionViolated("tau(b^p J(x)) != tau(x)")
    else:
        b = triple.b
    wb = triple.w @ b
    T = SuperOperator.from_function(triple.shape, lambda x: wb @ triple.J(x))
    certs = {"yeadon": triple}
    if triple.w == Element.identity(triple.shape):
        certs["positive-by-construction"] = True
    return SuperOperator(triple.shape, T.matrix, certs)


def random_yeadon(shape: AlgebraShape, p: float, seed=None, *, positive: bool = False,
                  anti_prob: float = 0.5) -> YeadonTriple:
    """Random triple: a dimension-preserving block permutation, random modes and unitaries."""
    rng = _rng(seed)
    dims = shape.block_dims
    perm = list(range(shape.n_blocks))
    for d in set(dims):
        idx = [k for k in range(len(dims)) if dims[k] == d]
        shuffled = list(rng.permutation(idx))
        for k, j in zip(idx, shuffled):
            perm[k] = int(j)
    modes = tuple("anti" if rng.random() < anti_prob else "hom" for _ in dims)
    us = tuple(haar_unitary(rng, 1, d)[0] for d in dims)
    w = Element.identity(shape) if positive else random_element(shape, "unitary", rng)
    return YeadonTriple(shape, tuple(perm), modes, us, w, p)


def make_power_bounded(a: Element, u: Element) -> SuperOperator:
    """T = S Phi S^{-1} with Phi(x) = u x u^* and S(x) = a x a; sup_k ||T^k|| <= kappa."""
    if not a.is_positive():
        raise NotInvertible("a must be positive")
    ev = np.concatenate([np.linalg.eigvalsh(g).ravel() for g in a.data])
    if ev.min() < 1e-8:
        raise NotInvertible("a must be invertible")
    if not u.is_unitary():
        raise NotUnitary("u must be unitary")
    inv = Element(a.shape, [np.linalg.inv(g) for g in a.data])
    uh = u.adjoint()
    T = SuperOperator.from_function(a.shape, lambda x: a @ (u @ (inv @ x @ inv) @ uh) @ a)
    kappa = float((ev.max() / ev.min()) ** 2)
    return SuperOperator(a.shape, T.matrix, {"power-bounded": kappa, "similarity": (a, u)})


# --------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertReport:
    cls: str
    trials: int
    max_violation: float
    tol: float
    constructed: bool

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_json(self) -> dict:
        return {"class": self.cls, "trials": self.trials, "max_violation": self.max_violation,
                "tol": self.tol, "pass": self.passed, "constructed": self.constructed}


def _orthogonal_projection_pair(shape: AlgebraShape, rng) -> tuple[Element, Element]:
    es, fs = [], []
    for d in shape.block_dims:
        u = haar_unitary(rng, 1, d)[0]
        lab = rng.integers(0, 3, size=d)  # 0 -> e, 1 -> f, 2 -> neither
        es.append((u * (lab == 0)) @ np.conj(u.T))
        fs.append((u * (lab == 1)) @ np.conj(u.T))
    return Element.from_blocks(shape, es), Element.from_blocks(shape, fs)


def class_certify(T: SuperOperator, cls: str, trials: int = 200, seed=0, tol: float = 1e-9) -> CertReport:
    """Falsification search: ``lamperti``, ``positive`` or ``isometry:<p>``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = _rng(seed)
    worst = 0.0
    constructed = False
    if cls == "lamperti":
        constructed = "yeadon" in T.certificates or "unitary-conjugation" in T.certificates
        d0 = T.shape.block_dims[0]
        pairs = []
        if d0 >= 2:
            e11 = np.zeros((d0, d0)); e11[0, 0] = 1
            e22 = np.zeros((d0, d0)); e22[1, 1] = 1
            rest = [np.zeros((d, d)) for d in T.shape.block_dims[1:]]
            pairs.append((Element.from_blocks(T.shape, [e11] + rest), Element.from_blocks(T.shape, [e22] + rest)))
        while len(pairs) < trials:
            pairs.append(_orthogonal_projection_pair(T.shape, rng))
        for e, f in pairs[:trials]:
            te, tf = apply(T, e), apply(T, f)
            worst = max(worst, (te.adjoint() @ tf).op_norm(), (te @ tf.adjoint()).op_norm())
    elif cls == "positive":
        constructed = bool(T.certificates.get("positive-by-construction"))
        for _ in range(trials):
            x = random_element(T.shape, "positive", rng)
            y = apply(T, x)
            herm = (y - y.adjoint()).op_norm()
            lo = min(float(np.linalg.eigvalsh(0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))).min())
                     for g in y.data)
            worst = max(worst, herm, -lo / max(x.op_norm(), 1e-300))
    elif cls.startswith("isometry"):
        p = as_exponent(cls.split(":", 1)[1]) if ":" in cls else 2.0
        if "yeadon" in T.certificates:
            constructed = T.certificates["yeadon"].p == p
        constructed = constructed or "unitary-conjugation" in T.certificates
        for _ in range(trials):
            x = random_element(T.shape, "generic", rng)
            worst = max(worst, abs(lp_norm(apply(T, x), p).value / lp_norm(x, p).value - 1.0))
    else:
        raise ValueError(f"unknown class {cls!r}")
    return CertReport(cls, trials, float(worst), tol, constructed)


@dataclass(frozen=True)
class ExtensionReport:
    ratio: float
    image_norm: object
    input_norm: object

    def to_json(self) -> dict:
        def enc(r):
            return r.to_json() if hasattr(r, "to_json") else r
        return {"ratio": self.ratio, "image": enc(self.image_norm), "input": enc(self.input_norm)}


def extension_rc_check(T: SuperOperator, p, seq: ElementSequence, **optimizer_kwargs) -> ExtensionReport:
    """rc norm of (T x_n)_n over rc norm of (x_n)_n, same solver settings on both sides."""
    image = ElementSequence.from_items([apply(T, x) for x in seq.items])
    num = rc_norm(image, p, **optimizer_kwargs)
    den = rc_norm(seq, p, **optimizer_kwargs)
    if den.value == 0:
        raise ValueError("input sequence is zero")
    return ExtensionReport(float(num.value / den.value), num, den)


def sampled_power_sup(T: SuperOperator, p, ks: Sequence[int], samples: int = 10, seed=0) -> float:
    """max over k in ks and random x of ||T^k x||_p / ||x||_p."""
    rng = _rng(seed)
    xs = [random_element(T.shape, "generic", rng) for _ in range(samples)]
    best = 0.0
    for k in ks:
        Tk = power(T, k)
        for x in xs:
            best = max(best, lp_norm(apply(Tk, x), p).value / lp_norm(x, p).value)
    return best


# --------------------------------------------------------------------------
# dilations


@dataclass(frozen=True)
class DilationWitness:
    horizon: int
    Q: SuperOperator
    U: SuperOperator
    J: SuperOperator
    p: object = 2.0


@dataclass(frozen=True)
class DilationReport:
    defect: float
    q_norm: float
    j_norm: float
    u_isometry_defect: float
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return (self.defect <= self.tol and self.q_norm <= 1 + self.tol and self.j_norm <= 1 + self.tol
                and self.u_isometry_defect <= self.tol)

    def to_json(self) -> dict:
        return {"defect": self.defect, "q_norm": self.q_norm, "j_norm": self.j_norm,
                "u_isometry_defect": self.u_isometry_defect, "pass": self.passed}


def trivial_dilation(T: SuperOperator, horizon: int, p=2.0) -> DilationWitness:
    one = SuperOperator.identity(T.shape)
    return DilationWitness(horizon, one, T, one, p)


def dilation_verify(T: SuperOperator, W: DilationWitness, samples: int = 50, seed=0) -> DilationReport:
    """max_n ||T^n x - Q U^n J x||_p / ||x||_p over sampled x, plus sampled norms of Q, J and U."""
    if W.J.shape != T.shape or W.Q.out_shape != T.shape or W.U.shape != W.J.out_shape \
            or W.U.out_shape != W.U.shape or W.Q.shape != W.U.shape:
        raise ShapeMismatch("dilation witness does not fit the operator")
    p = as_exponent(W.p)
    rng = _rng(seed)
    xs = [random_element(T.shape, "generic", rng) for _ in range(samples)]
    big = [random_element(W.U.shape, "generic", rng) for _ in range(samples)]
    norms = [lp_norm(x, p).value for x in xs]
    defect = 0.0
    tn = [x.to_vector() for x in xs]
    un = [W.J.matrix @ v for v in tn]
    for n in range(W.horizon + 1):
        if n:
            tn = [T.matrix @ v for v in tn]
            un = [W.U.matrix @ v for v in un]
        for a, b, nx in zip(tn, un, norms):
            diff = Element.from_vector(T.shape, a - W.Q.matrix @ b)
            defect = max(defect, lp_norm(diff, p).value / nx)
    j_norm = max(lp_norm(apply(W.J, x), p).value / nx for x, nx in zip(xs, norms))
    q_norm = max(lp_norm(apply(W.Q, y), p).value / lp_norm(y, p).value for y in big)
    u_def = max(abs(lp_norm(apply(W.U, y), p).value / lp_norm(y, p).value - 1.0) for y in big)
    return DilationReport(float(defect), float(q_norm), float(j_norm), float(u_def))


def coin_dilation(u1: Element, u2: Element, horizon: int, p=2.0) -> DilationWitness:
    """Witness for T = (Ad u1 + Ad u2)/2 on ell_inf({1,2}^N) (x) M with normalized counting trace.

    U acts by F -> u_{w_0} F(rotate(w)) u_{w_0}^*, J embeds constants and Q averages over words.
    """
    shape = u1.shape
    N = horizon
    words = [[(i >> j) & 1 for j in range(N)] for i in range(2 ** N)]
    index = {tuple(w): i for i, w in enumerate(words)}
    big = AlgebraShape(shape.block_dims * 2 ** N, tuple(w / 2 ** N for w in shape.trace_weights) * 2 ** N)
    nb = shape.n_blocks
    us = (u1.blocks, u2.blocks)

    def split(F: Element):
        blocks = F.blocks
        return [blocks[i * nb:(i + 1) * nb] for i in range(2 ** N)]

    def U(F: Element) -> Element:
        parts = split(F)
        out = []
        for w in words:
            src = parts[index[tuple(w[1:] + w[:1])]]
            u = us[w[0]]
            out.extend(uk @ b @ np.conj(uk.T) for uk, b in zip(u, src))
        return Element.from_blocks(big, out)

    def J(x: Element) -> Element:
        return Element.from_blocks(big, list(x.blocks) * 2 ** N)

    def Q(F: Element) -> Element:
        parts = split(F)
        return Element.from_blocks(shape, [sum(part[k] for part in parts) / 2 ** N for k in range(nb)])

    return DilationWitness(
        N,
        SuperOperator.from_function(big, Q, shape),
        SuperOperator.from_function(big, U),
        SuperOperator.from_function(shape, J, big),
        p,
    )
