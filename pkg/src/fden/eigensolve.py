"""Dense symmetric eigensolver.

The reference path tridiagonalizes with Householder reflections and then
runs implicit-shift QL with eigenvector accumulation; it is self-contained
(no LAPACK) and JIT-compiled when numba is importable.  Matrices larger
than HOUSEHOLDER_MAX are routed to numpy.linalg.eigh by default, purely
for speed; both backends satisfy the same contract and are cross-checked
in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import SolverError

ArrayF = NDArray[np.float64]

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

HOUSEHOLDER_MAX = 512
_QL_MAX_SWEEPS = 50


@njit(cache=True)
def _tridiagonalize(a):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Overwrites `a` with the accumulated orthogonal transform Q such that
    Q^T A Q = tridiag(d, e).  Returns (d, e).
    """
    n = a.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        if l > 0:
            scale = 0.0
            for k in range(i):
                scale += abs(a[i, k])
            if scale == 0.0:
                e[i] = a[i, l]
            else:
                for k in range(i):
                    a[i, k] /= scale
                    h += a[i, k] * a[i, k]
                f = a[i, l]
                g = -np.sqrt(h) if f >= 0.0 else np.sqrt(h)
                e[i] = scale * g
                h -= f * g
                a[i, l] = f - g
                f = 0.0
                for j in range(i):
                    a[j, i] = a[i, j] / h
                    g = 0.0
                    for k in range(j + 1):
                        g += a[j, k] * a[i, k]
                    for k in range(j + 1, i):
                        g += a[k, j] * a[i, k]
                    e[j] = g / h
                    f += e[j] * a[i, j]
                hh = f / (h + h)
                for j in range(i):
                    f = a[i, j]
                    e[j] = g = e[j] - hh * f
                    for k in range(j + 1):
                        a[j, k] -= f * e[k] + g * a[i, k]
        else:
            e[i] = a[i, l]
        d[i] = h
    d[0] = 0.0
    e[0] = 0.0
    for i in range(n):
        l = i
        if d[i] != 0.0:
            for j in range(l):
                g = 0.0
                for k in range(l):
                    g += a[i, k] * a[k, j]
                for k in range(l):
                    a[k, j] -= g * a[k, i]
        d[i] = a[i, i]
        a[i, i] = 1.0
        for j in range(l):
            a[j, i] = 0.0
            a[i, j] = 0.0
    return d, e


@njit(cache=True)
def _ql_implicit(d, e, z, max_sweeps):
    """Implicit-shift QL on tridiag(d, e) accumulating rotations into z.

    Returns (status, total_shifts); status is the 1-based index of the
    eigenvalue that failed to converge, or 0 on success.
    """
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    total_shifts = 0
    for l in range(n):
        iteration = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 1e-300 or abs(e[m]) <= np.finfo(np.float64).eps * dd:
                    break
                m += 1
            if m == l:
                break
            if iteration == max_sweeps:
                return l + 1, total_shifts
            iteration += 1
            total_shifts += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            sgn = 1.0 if g >= 0.0 else -1.0
            g = d[m] - d[l] + e[l] / (g + sgn * r)
            s = 1.0
            c = 1.0
            p = 0.0
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = z[k, i + 1]
                    z[k, i + 1] = s * z[k, i] + c * f
                    z[k, i] = c * z[k, i] - s * f
            else:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
                continue
            continue
    return 0, total_shifts


def householder_ql(matrix: ArrayF) -> tuple[ArrayF, ArrayF]:
    """Full spectral decomposition by Householder + implicit-shift QL.

    Returns (values ascending, vectors as columns).  Raises SolverError
    on QL non-convergence.
    """
    a = np.array(matrix, dtype=float, order="C", copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise SolverError(f"matrix must be square, got shape {a.shape}")
    d, e = _tridiagonalize(a)
    status, shifts = _ql_implicit(d, e, a, _QL_MAX_SWEEPS)
    if status:
        raise SolverError(
            f"QL failed to converge for eigenvalue {status} of a {n}x{n} "
            f"matrix after {shifts} implicit shifts")
    order = np.argsort(d, kind="stable")
    return d[order], a[:, order]


@dataclass(frozen=True)
class OperatorRef:
    """Provenance of the operator behind an eigensystem."""

    kind: str = "matrix"
    gamma: Optional[float] = None
    kappa: Optional[int] = None
    grid_hash: Optional[str] = None
    potential_tag: Optional[str] = None


@dataclass(frozen=True)
class EigenSystem:
    """Full spectral decomposition of a symmetric operator.

    values ascend; vectors columns are orthonormal in the coefficient
    inner product (which is the L^2 inner product by the grid convention).
    """

    values: ArrayF
    vectors: ArrayF = field(repr=False)
    operator_ref: OperatorRef = OperatorRef()

    def residual_norm(self, matrix: ArrayF) -> float:
        r = matrix @ self.vectors - self.vectors * self.values
        return float(np.linalg.norm(r, axis=0).max())

    def orthonormality_defect(self) -> float:
        g = self.vectors.T @ self.vectors
        return float(np.abs(g - np.eye(g.shape[0])).max())


def eigensolve(matrix: ArrayF, operator_ref: OperatorRef = OperatorRef(),
               method: str = "auto") -> EigenSystem:
    """Spectral decomposition with backend routing.

    method: 'householder_ql' forces the self-contained path, 'lapack'
    forces numpy.linalg.eigh, 'auto' picks by size (HOUSEHOLDER_MAX).
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if method == "auto":
        method = "householder_ql" if n <= HOUSEHOLDER_MAX else "lapack"
    if method == "householder_ql":
        values, vectors = householder_ql(matrix)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(matrix)
    else:
        raise SolverError(f"unknown eigensolver method {method!r}")
    return EigenSystem(values=values, vectors=vectors, operator_ref=operator_ref)
