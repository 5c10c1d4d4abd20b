"""Random ensembles used by the suites. Every generator draws only from the rng it is given."""
from __future__ import annotations

import zlib

import numpy as np

from ..algebra import AlgebraShape, Element, haar_unitary, random_element
from ..dyadic import OperatorSequence
from ..ergodic import NestedSequence
from ..operators import (SuperOperator, convex_combination, make_power_bounded, make_unitary_conjugation,
                         make_yeadon, random_yeadon)
from ..rc import ElementSequence


def trial_rng(seed: int, name: str, index: int) -> np.random.Generator:
    """Independent stream for trial ``index`` of suite ``name``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), int(index)]))


def shape_from(obj) -> AlgebraShape:
    return AlgebraShape(tuple(obj["blocks"]), tuple(obj["weights"]))


def pick_shape(rng, shapes) -> AlgebraShape:
    return shape_from(shapes[int(rng.integers(len(shapes)))])


def positive_value(rng, shape: AlgebraShape) -> Element:
    """Positive element of random rank and scale."""
    blocks = []
    scale = float(np.exp(rng.normal()))
    for d in shape.block_dims:
        r = int(rng.integers(1, d + 1))
        g = (rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))) / np.sqrt(2)
        blocks.append(scale * g @ np.conj(g.T))
    return Element.from_blocks(shape, blocks)


def positive_sequence(rng, shape: AlgebraShape, window: int, density: tuple[float, float] = (0.2, 1.0)) -> OperatorSequence:
    rho = rng.uniform(*density)
    vals = {x: positive_value(rng, shape) for x in range(2 ** window) if rng.random() < rho}
    if not vals:
        vals[int(rng.integers(2 ** window))] = positive_value(rng, shape)
    return OperatorSequence.from_values(shape, vals, window=window)


def spectral_lambda(rng, f: OperatorSequence, lo: float = 0.1, hi: float = 10.0) -> float:
    """Log-uniform lambda between lo * mean and hi * max of the nonzero eigenvalues of f."""
    ev = np.concatenate([np.linalg.eigvalsh(a).ravel() for a in f.data])
    ev = ev[ev > 1e-12]
    a, b = lo * ev.mean(), hi * ev.max()
    return float(np.exp(rng.uniform(np.log(a), np.log(b))))


def generic_sequence(rng, shape: AlgebraShape, n: int) -> ElementSequence:
    return ElementSequence.from_items([random_element(shape, "generic", rng) for _ in range(n)])


def nested(rng, length: int, top: int, mode: str = "one-sided") -> NestedSequence:
    """Strictly increasing indices in [1, top], log-uniformly spread."""
    length = min(length, top)
    picked: set[int] = set()
    while len(picked) < length:
        picked.add(int(np.clip(np.round(np.exp(rng.uniform(0.0, np.log(top + 0.5)))), 1, top)))
    return NestedSequence(mode, tuple(sorted(picked)))


def unitary_conjugation(rng, shape: AlgebraShape) -> SuperOperator:
    return make_unitary_conjugation(random_element(shape, "unitary", rng))


def power_bounded(rng, shape: AlgebraShape, kappa_max: float = 16.0) -> SuperOperator:
    """S Phi S^{-1} with cond(a)^2 <= kappa_max."""
    cond = float(np.exp(rng.uniform(0.0, 0.5 * np.log(kappa_max))))
    blocks = []
    for d in shape.block_dims:
        u = haar_unitary(rng, 1, d)[0]
        ev = np.exp(rng.uniform(0.0, np.log(cond), d))
        ev[0] = 1.0
        if d > 1:
            ev[-1] = cond
        blocks.append(u @ np.diag(ev) @ np.conj(u.T))
    a = Element.from_blocks(shape, blocks)
    return make_power_bounded(a, random_element(shape, "unitary", rng))


def yeadon(rng, shape: AlgebraShape, p: float, positive: bool = False) -> SuperOperator:
    return make_yeadon(random_yeadon(shape, p, rng, positive=positive))


def lamperti_combination(rng, shape: AlgebraShape, p: float, parts: int = 3) -> SuperOperator:
    ops = [yeadon(rng, shape, p) if rng.random() < 0.5 else unitary_conjugation(rng, shape) for _ in range(parts)]
    w = rng.dirichlet(np.ones(parts))
    return convex_combination(w, ops)


def operator_of_class(rng, cls: str, shape: AlgebraShape, p: float, kappa_max: float = 16.0) -> SuperOperator:
    if cls == "identity":
        return SuperOperator.identity(shape)
    if cls == "unitary":
        return unitary_conjugation(rng, shape)
    if cls == "power-bounded":
        return power_bounded(rng, shape, kappa_max)
    if cls == "lamperti-convex":
        return lamperti_combination(rng, shape, p)
    raise ValueError(f"unknown operator class {cls!r}")
