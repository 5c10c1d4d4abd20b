"""Cyclic Jacobi diagonalization of stacks of complex Hermitian matrices."""
from __future__ import annotations

import numba
import numpy as np

from . import config
from .errors import NoConvergence


@numba.njit(cache=True)
def _jacobi_one(a, v, rel_tol, max_sweeps):
    n = a.shape[0]
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j].real ** 2 + a[i, j].imag ** 2
    thresh = rel_tol * np.sqrt(fro2)
    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off2 += 2.0 * (a[i, j].real ** 2 + a[i, j].imag ** 2)
        if np.sqrt(off2) <= thresh:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                # phase rotation makes the (p, q) entry real, then a real rotation kills it
                ph = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                gpp = c + 0j
                gpq = s + 0j
                gqp = -s * np.conj(ph)
                gqq = c * np.conj(ph)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * gpp + akq * gqp
                    a[k, q] = akp * gpq + akq * gqq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = np.conj(gpp) * apk + np.conj(gqp) * aqk
                    a[q, k] = np.conj(gpq) * apk + np.conj(gqq) * aqk
                a[p, q] = 0j
                a[q, p] = 0j
                a[p, p] = a[p, p].real + 0j
                a[q, q] = a[q, q].real + 0j
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = vkp * gpp + vkq * gqp
                    v[k, q] = vkp * gpq + vkq * gqq
    return -1


@numba.njit(cache=True)
def _jacobi_batch(mats, rel_tol, max_sweeps):
    b, n, _ = mats.shape
    vals = np.empty((b, n))
    vecs = np.empty((b, n, n), dtype=np.complex128)
    sweeps = np.empty(b, dtype=np.int64)
    for i in range(b):
        a = mats[i].copy()
        v = np.eye(n, dtype=np.complex128)
        sweeps[i] = _jacobi_one(a, v, rel_tol, max_sweeps)
        d = np.empty(n)
        for k in range(n):
            d[k] = a[k, k].real
        order = np.argsort(-d, kind="mergesort")
        for k in range(n):
            vals[i, k] = d[order[k]]
            for r in range(n):
                vecs[i, r, k] = v[r, order[k]]
    return vals, vecs, sweeps


@numba.njit(cache=True)
def _reorthonormalize_clusters(vals, vecs, gap):
    """Modified Gram-Schmidt inside each run of numerically equal eigenvalues."""
    b, n = vals.shape
    for i in range(b):
        scale = max(1.0, abs(vals[i, 0]))
        start = 0
        for k in range(1, n + 1):
            if k == n or abs(vals[i, k] - vals[i, k - 1]) >= gap * scale:
                for c in range(start, k):
                    for e in range(start, c):
                        proj = 0j
                        for r in range(n):
                            proj += np.conj(vecs[i, r, e]) * vecs[i, r, c]
                        for r in range(n):
                            vecs[i, r, c] -= proj * vecs[i, r, e]
                    nrm = 0.0
                    for r in range(n):
                        nrm += abs(vecs[i, r, c]) ** 2
                    nrm = np.sqrt(nrm)
                    for r in range(n):
                        vecs[i, r, c] /= nrm
                start = k


def jacobi_eigh(mats: np.ndarray, *, rel_tol: float | None = None,
                max_sweeps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a stack ``(..., d, d)`` of Hermitian matrices.

    Returns eigenvalues in descending order and the unitary eigenbases, with
    ``vecs @ diag(vals) @ vecs^*`` reconstructing the input.
    """
    tol = config.get()
    rel_tol = tol.jacobi_offdiag if rel_tol is None else rel_tol
    max_sweeps = tol.jacobi_sweeps if max_sweeps is None else max_sweeps
    mats = np.asarray(mats, dtype=np.complex128)
    lead = mats.shape[:-2]
    d = mats.shape[-1]
    flat = np.ascontiguousarray(mats.reshape(-1, d, d))
    if flat.shape[0] == 0:
        return np.empty(lead + (d,)), np.empty(lead + (d, d), dtype=np.complex128)
    vals, vecs, sweeps = _jacobi_batch(flat, rel_tol, max_sweeps)
    if (sweeps < 0).any():
        raise NoConvergence(f"Jacobi exceeded {max_sweeps} sweeps")
    _reorthonormalize_clusters(vals, vecs, tol.cluster_gap)
    return vals.reshape(lead + (d,)), vecs.reshape(lead + (d, d))


def jacobi_eigvalsh(mats: np.ndarray) -> np.ndarray:
    return jacobi_eigh(mats)[0]
