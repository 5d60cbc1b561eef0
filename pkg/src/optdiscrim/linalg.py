"""Dense real and Hermitian linear algebra at desk scale.

Matrices are plain numpy arrays: ``float64`` for real maps, ``complex128``
for Hermitian operators. The Hermitian eigensolver is a cyclic Jacobi
method so results are deterministic across platforms and BLAS builds.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainError, NotHermitian

HERMITIAN_TOL = 1e-10
JACOBI_OFF_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
PINV_CUTOFF = 1e-12


def as_real(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = np.array(h, dtype=complex)
    if h.ndim == 0:
        h = h.reshape(1, 1)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > tol * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return 0.5 * (h + h.conj().T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; 1x1 operands act as scalars."""
    a = np.asarray(a)
    b = np.asarray(b)
    if np.iscomplexobj(a) != np.iscomplexobj(b):
        raise TypeError("kron operands must be of the same kind")
    return np.kron(a, b)


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(np.abs(off) ** 2)))


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.

    Returns ascending eigenvalues and a unitary whose columns are the
    matching eigenvectors. Ties keep the order of the diagonal they came from.
    """
    a = as_hermitian(h).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    total = float(np.sqrt(np.sum(np.abs(a) ** 2)))
    if n > 1 and total > 0.0:
        for _ in range(JACOBI_MAX_SWEEPS):
            if _off_norm(a) <= JACOBI_OFF_TOL * total:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    c = a[p, q]
                    mag = abs(c)
                    if mag <= 1e-300 or mag <= 1e-18 * total:
                        a[p, q] = a[q, p] = 0.0
                        continue
                    phase = c / mag
                    app = a[p, p].real
                    aqq = a[q, q].real
                    theta = (aqq - app) / (2.0 * mag)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    cs = 1.0 / np.sqrt(t * t + 1.0)
                    sn = t * cs
                    # V = diag(1, conj(phase)) @ [[cs, sn], [-sn, cs]]
                    pc = phase.conjugate()
                    r10, r11 = -sn * pc, cs * pc
                    for m in (a, v):
                        cp, cq = m[:, p].copy(), m[:, q]
                        m[:, p] = cs * cp + r10 * cq
                        m[:, q] = sn * cp + r11 * cq
                    rp, rq = a[p, :].copy(), a[q, :]
                    a[p, :] = cs * rp + r10.conjugate() * rq
                    a[q, :] = sn * rp + r11.conjugate() * rq
                    a[p, q] = a[q, p] = 0.0
                    a[p, p] = a[p, p].real
                    a[q, q] = a[q, q].real
    w = np.real(np.diag(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh(h) -> np.ndarray:
    return eigh(h)[0]


def min_eigenvalue(h) -> float:
    return float(eigh(h)[0][0])


def matrix_function(h, f: Callable[[float], float]) -> np.ndarray:
    """Apply a scalar function on the spectrum of ``h``.

    ``f`` signals an undefined point by raising ``DomainError`` or
    ``ValueError``, or by returning a non-finite value.
    """
    w, v = eigh(h)
    vals = []
    for lam in w:
        try:
            y = f(float(lam))
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"function undefined at eigenvalue {lam!r}") from exc
        if not np.isfinite(y):
            raise DomainError(f"function undefined at eigenvalue {lam!r}")
        vals.append(y)
    out = (v * np.asarray(vals)) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def inv_sqrt(h) -> np.ndarray:
    def f(x):
        if x <= 0.0:
            raise DomainError("inverse square root of a nonpositive eigenvalue")
        return x ** -0.5

    return matrix_function(h, f)


def pinv_sqrt(h, cutoff: float = PINV_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root and the projector onto the kept eigenspace."""
    w, v = eigh(h)
    keep = w > cutoff
    inv = np.where(keep, 1.0 / np.sqrt(np.where(keep, w, 1.0)), 0.0)
    root = (v * inv) @ v.conj().T
    proj = (v * keep) @ v.conj().T
    return 0.5 * (root + root.conj().T), 0.5 * (proj + proj.conj().T)


def partial_transpose(h, dim_a: int, dim_b: int) -> np.ndarray:
    """Transpose the second tensor factor of an operator on C^dim_a ⊗ C^dim_b."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionMismatch(f"shape {h.shape} does not factor as {dim_a}x{dim_b}")
    t = h.reshape(dim_a, dim_b, dim_a, dim_b)
    return t.transpose(0, 3, 2, 1).reshape(dim_a * dim_b, dim_a * dim_b)


def partial_trace(h, dim_a: int, dim_b: int, keep: str = "b") -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionMismatch(f"shape {h.shape} does not factor as {dim_a}x{dim_b}")
    t = h.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "b":
        return np.einsum("ijik->jk", t)
    return np.einsum("ijkj->ik", t)


def trace_norm(h) -> float:
    return float(np.sum(np.abs(eigvalsh(h))))


def herm_part(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def neumaier_sum(arrays) -> np.ndarray:
    """Compensated elementwise sum of equally shaped arrays."""
    it = iter(arrays)
    total = np.array(next(it), dtype=float, copy=True)
    comp = np.zeros_like(total)
    for x in it:
        x = np.asarray(x, dtype=float)
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp
