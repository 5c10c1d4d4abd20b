"""Central tolerance registry.

Every numerical threshold used by the library lives here so that suites can
override them from a config file and reports can record what was used.
"""
from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    selfadjoint: float = 1e-12
    unitary: float = 1e-10
    positive: float = 1e-12
    projection: float = 1e-12
    # relative to ||x||_F
    jacobi_offdiag: float = 1e-13
    jacobi_sweeps: int = 100
    cluster_gap: float = 1e-10
    # relative to ||x||_inf
    support: float = 1e-10
    invertible: float = 1e-8
    optimizer_gap: float = 0.05


_current = Tolerances()


def get() -> Tolerances:
    return _current


def set_tolerances(**overrides) -> Tolerances:
    global _current
    _current = dataclasses.replace(_current, **overrides)
    return _current


@contextlib.contextmanager
def override(**overrides):
    global _current
    saved = _current
    _current = dataclasses.replace(_current, **overrides)
    try:
        yield _current
    finally:
        _current = saved
