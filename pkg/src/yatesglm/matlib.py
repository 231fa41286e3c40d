"""Dense matrix kernels: Gram-Schmidt bases, projectors and g-inverses.

Matrices are plain 2-D ``numpy.ndarray`` objects of ``float64``.  Every
kernel validates finiteness on entry and never mutates its arguments.
Column spaces of width zero are represented by ``(n, 0)`` arrays so that
empty restricted models and empty complements flow through the algebra
without special cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError

DROP_TOLERANCE = 1e-10
SPD_FLOOR = 1e-12


def as_matrix(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Coerce to a finite 2-D float array; 1-D input becomes a column."""
    arr = np.array(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def as_vector(v: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    arr = np.array(v, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormal basis of a column space.

    ``kept`` lists the input column indices that contributed a basis
    vector, in order; ``basis[:, i]`` was produced from column ``kept[i]``.
    """

    basis: NDArray[np.float64]
    original_cols: int
    rank: int
    drop_tolerance: float
    kept: tuple[int, ...]


def gram_schmidt(
    m: ArrayLike,
    drop_tolerance: float = DROP_TOLERANCE,
    scale: float | None = None,
) -> OrthonormalBasis:
    """Classical Gram-Schmidt with one re-orthogonalization pass.

    A column is dropped when the norm of its residual, after projecting out
    the basis built so far, is at most ``drop_tolerance`` times a reference
    scale: the largest column norm of ``m``, or ``scale`` if that is larger.
    This covers the per-column rule (residual below ``drop_tolerance`` times
    the column's own norm) and also discards columns that are pure
    roundoff.  For products such as ``X N`` with N spanning the null space
    of X, ``m`` carries no information about the scale of its factors, so
    the caller passes ``|X|`` explicitly.

    Parameters
    ----------
    m : array_like, shape (n, k)
    drop_tolerance : float in (0, 1)
    scale : float, optional

    Returns
    -------
    OrthonormalBasis
        ``basis`` has shape ``(n, rank)``.
    """
    a = as_matrix(m)
    if a.shape[1] < 1:
        raise InvalidInputError("gram_schmidt needs at least one column")
    if not 0.0 < drop_tolerance < 1.0:
        raise InvalidInputError("drop_tolerance must lie in (0, 1)")
    n, k = a.shape
    norms = np.linalg.norm(a, axis=0)
    scale = max(float(norms.max()) if k else 0.0, scale or 0.0)
    q = np.zeros((n, min(n, k)))
    kept: list[int] = []
    r = 0
    for j in range(k):
        if r == n or norms[j] == 0.0:
            continue
        v = a[:, j].copy()
        for _ in range(2):  # twice is enough
            if r:
                v -= q[:, :r] @ (q[:, :r].T @ v)
        res = float(np.linalg.norm(v))
        if res <= drop_tolerance * scale:
            continue
        q[:, r] = v / res
        kept.append(j)
        r += 1
    return OrthonormalBasis(
        basis=q[:, :r].copy(),
        original_cols=k,
        rank=r,
        drop_tolerance=drop_tolerance,
        kept=tuple(kept),
    )


def rank(m: ArrayLike, drop_tolerance: float = DROP_TOLERANCE, scale: float | None = None) -> int:
    a = as_matrix(m)
    if a.shape[1] == 0:
        return 0
    return gram_schmidt(a, drop_tolerance, scale).rank


def orth(m: ArrayLike, drop_tolerance: float = DROP_TOLERANCE, scale: float | None = None) -> NDArray[np.float64]:
    """Orthonormal basis of span(m) as an ``(n, rank)`` array (rank may be 0)."""
    a = as_matrix(m)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    return gram_schmidt(a, drop_tolerance, scale).basis


def projector(m: ArrayLike, drop_tolerance: float = DROP_TOLERANCE, scale: float | None = None) -> NDArray[np.float64]:
    """Orthogonal projection matrix onto span(m), computed as ``B B'``.

    A matrix with zero columns projects onto {0}.  See :func:`gram_schmidt`
    for ``scale``.
    """
    b = orth(m, drop_tolerance, scale)
    p = b @ b.T
    # exact symmetry regardless of BLAS blocking
    return 0.5 * (p + p.T)


def complement_basis(m: ArrayLike, drop_tolerance: float = DROP_TOLERANCE) -> NDArray[np.float64]:
    """Orthonormal basis of span(m)^perp inside R^n.

    Gram-Schmidt is run on ``(m, I_n)`` and only the vectors contributed
    by the identity columns are kept.  Returns an ``(n, 0)`` array when
    span(m) is all of R^n.
    """
    a = as_matrix(m)
    n, k = a.shape
    ext = np.hstack([a, np.eye(n)])
    gs = gram_schmidt(ext, drop_tolerance)
    cols = [i for i, j in enumerate(gs.kept) if j >= k]
    return gs.basis[:, cols].copy()


def generalized_inverse(m: ArrayLike, drop_tolerance: float = DROP_TOLERANCE) -> NDArray[np.float64]:
    """Moore-Penrose inverse via two Gram-Schmidt factorizations.

    With ``m = Q R`` (Q orthonormal basis of the column space) and
    ``R' = Q2 T`` (T square, invertible), ``m = Q T' Q2'`` and the
    pseudo-inverse is ``Q2 T'^{-1} Q'``.  An all-zero matrix returns the
    zero matrix of transposed shape.
    """
    a = as_matrix(m)
    n, k = a.shape
    q = orth(a, drop_tolerance)
    r = q.shape[1]
    if r == 0:
        return np.zeros((k, n))
    rt = (q.T @ a).T
    q2 = orth(rt, drop_tolerance)
    if q2.shape[1] != r:
        raise InvalidInputError("inconsistent numerical rank in generalized_inverse")
    t = q2.T @ rt
    return q2 @ np.linalg.solve(t.T, q.T)


def kronecker(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Kronecker product: block (i, j) equals ``a[i, j] * b``."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def ones(m: int) -> NDArray[np.float64]:
    """The column vector 1_m as an ``(m, 1)`` array."""
    return np.ones((m, 1))


def special_matrices(m: int) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(1_m, U_m, S_m)`` with ``U_m = 11'/m`` and ``S_m = I - U_m``."""
    if m < 1:
        raise InvalidInputError("m must be a positive integer")
    one = ones(m)
    u = np.full((m, m), 1.0 / m)
    s = np.eye(m) - u
    return one, u, s


def check_symmetric(m: NDArray[np.float64], tol: float, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be square, got {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > tol * scale:
        raise InvalidInputError(f"{name} is not symmetric")


def check_projector(p: NDArray[np.float64], tol: float = 1e-8, name: str = "P") -> None:
    """Raise unless ``p`` is symmetric and idempotent within ``tol``."""
    check_symmetric(p, tol, name)
    if np.abs(p @ p - p).max(initial=0.0) > tol:
        raise InvalidInputError(f"{name} is not idempotent")


def spd_sqrt(d: ArrayLike, floor: float = SPD_FLOOR) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Symmetric square root of a positive-definite matrix and its inverse.

    Uses the symmetric eigendecomposition.  Eigenvalues at or below
    ``floor * max_eigenvalue`` are treated as a failure of positive
    definiteness.

    Returns
    -------
    (half, inv_half) : tuple of ndarray
        ``half @ half == d`` and ``inv_half == inv(half)``.
    """
    a = as_matrix(d, "D")
    check_symmetric(a, 1e-10, "D")
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    top = float(w.max())
    if top <= 0.0 or float(w.min()) <= floor * top:
        raise InvalidInputError("D is not symmetric positive-definite")
    root = np.sqrt(w)
    half = (v * root) @ v.T
    inv_half = (v / root) @ v.T
    return 0.5 * (half + half.T), 0.5 * (inv_half + inv_half.T)


def prop1_residual(r: ArrayLike, d: ArrayLike, drop_tolerance: float = DROP_TOLERANCE) -> float:
    """Max-abs entry of ``P_{D^{1/2} R} + P_{D^{-1/2} M} - I``.

    ``M`` spans the orthogonal complement of span(R).  For any R and any
    symmetric positive-definite D the two projectors are complementary,
    so the result should sit at roundoff level.
    """
    rm = as_matrix(r, "R")
    dm = as_matrix(d, "D")
    if dm.shape != (rm.shape[0], rm.shape[0]):
        raise InvalidInputError(f"D must be {rm.shape[0]}x{rm.shape[0]}, got {dm.shape}")
    half, inv_half = spd_sqrt(dm)
    comp = complement_basis(rm, drop_tolerance)
    lhs = projector(half @ rm, drop_tolerance) + projector(inv_half @ comp, drop_tolerance)
    return float(np.abs(lhs - np.eye(rm.shape[0])).max())


def max_abs(m: ArrayLike) -> float:
    a = np.asarray(m, dtype=np.float64)
    return float(np.abs(a).max(initial=0.0))


def relative_difference(x: float, y: float, floor: float = 1e-300) -> float:
    """``|x - y| / max(|x|, |y|)``, with 0 when both vanish."""
    den = max(abs(x), abs(y))
    if den <= floor:
        return 0.0
    return abs(x - y) / den
