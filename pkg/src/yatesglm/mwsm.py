"""Generalized method of weighted squares of means.

Given ``H`` (columns in span(X), ``X'H = G``) pick any ``A`` with linearly
independent columns in span(X) and ``C`` with ``AC = H``.  Then
``U = A'y`` has covariance ``sigma^2 D`` with ``D = A'A``; under H0 its
standardized version ``Z = D^{-1/2} U`` has mean in span(D^{-1/2} M) with
span(M) = span(C)^perp, and the residual SS of that restricted model,

    u' (D^-1 - D^-1 M (M' D^-1 M)^- M' D^-1) u,

is the numerator SS.  It does not depend on which ``(A, C)`` was chosen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import matlib
from .errors import DegenerateHypothesisError, EmptyCellError, InvalidConstructionError
from .glm import LinearModel
from .hypothesis import Hypothesis

if TYPE_CHECKING:
    from .anova import TwoFactorLayout

CHOLESKY_FLOOR = 1e-12


@dataclass(frozen=True)
class MwsmConstruction:
    A: NDArray[np.float64]
    C: NDArray[np.float64]
    D: NDArray[np.float64]
    M: NDArray[np.float64]
    U: NDArray[np.float64]
    Z: NDArray[np.float64]

    @property
    def df(self) -> int:
        """Error degrees of freedom of the null model for Z: ``c - rank(M)``."""
        return self.A.shape[1] - matlib.rank(self.M)


def _cholesky(d: NDArray[np.float64]) -> NDArray[np.float64]:
    try:
        low = np.linalg.cholesky(d)
    except np.linalg.LinAlgError as exc:
        raise InvalidConstructionError("D = A'A is not positive-definite") from exc
    piv = np.diag(low) ** 2
    if piv.min() <= CHOLESKY_FLOOR * float(np.diag(d).max()):
        raise InvalidConstructionError("D = A'A is numerically singular")
    return low


def _d_inverse(d: NDArray[np.float64]) -> NDArray[np.float64]:
    low = _cholesky(d)
    linv = np.linalg.solve(low, np.eye(d.shape[0]))
    return linv.T @ linv


def make_construction(
    A: ArrayLike,
    C: ArrayLike,
    y: ArrayLike,
    M: ArrayLike | None = None,
) -> MwsmConstruction:
    """Assemble ``D``, ``M``, ``U`` and ``Z`` for a given factorization ``AC = H``.

    ``M`` defaults to an orthonormal basis of span(C)^perp.
    """
    a = matlib.as_matrix(A, "A")
    c = matlib.as_matrix(C, "C")
    if c.shape[0] != a.shape[1]:
        raise InvalidConstructionError(f"C must have {a.shape[1]} rows, got {c.shape[0]}")
    if matlib.rank(a) != a.shape[1]:
        raise InvalidConstructionError("columns of A are not linearly independent")
    d = a.T @ a
    d = 0.5 * (d + d.T)
    _cholesky(d)
    m = matlib.complement_basis(c) if M is None else matlib.as_matrix(M, "M")
    if m.shape[0] != a.shape[1]:
        raise InvalidConstructionError(f"M must have {a.shape[1]} rows")
    yv = matlib.as_vector(y, "y")
    u = a.T @ yv
    _, inv_half = matlib.spd_sqrt(d)
    return MwsmConstruction(A=a, C=c, D=d, M=m, U=u, Z=inv_half @ u)


def check_construction(cons: MwsmConstruction, model: LinearModel, hyp: Hypothesis) -> None:
    """Raise unless ``A`` lies in span(X), ``AC = H`` and ``C'M = 0``."""
    if matlib.max_abs(model.p_x @ cons.A - cons.A) > 1e-9 * max(1.0, matlib.max_abs(cons.A)):
        raise InvalidConstructionError("columns of A are not in span(X)")
    h_scale = max(matlib.max_abs(hyp.H), 1e-300)
    if matlib.max_abs(cons.A @ cons.C - hyp.H) > 1e-8 * h_scale:
        raise InvalidConstructionError("AC does not reproduce H")
    if cons.M.shape[1] and matlib.max_abs(cons.C.T @ cons.M) > 1e-10 * max(1.0, matlib.max_abs(cons.C)):
        raise InvalidConstructionError("span(M) is not orthogonal to span(C)")
    if matlib.rank(cons.C) + matlib.rank(cons.M) != cons.A.shape[1]:
        raise InvalidConstructionError("span(M) is not the full complement of span(C)")


def default_construction(model: LinearModel, hyp: Hypothesis) -> MwsmConstruction:
    """Canonical choice: ``A`` an orthonormal basis of span(H), so ``D = I``."""
    a = matlib.orth(hyp.H)
    if a.shape[1] == 0:
        raise DegenerateHypothesisError("H = 0; nothing to test")
    return make_construction(a, a.T @ hyp.H, model.y)


def yates_construction(layout: TwoFactorLayout) -> MwsmConstruction:
    """Yates's choice for A main effects in the two-factor cell-means model.

    ``A = (1/b) K D_ab (I_a kron 1_b)``, ``C = S_a`` and ``M = 1_a``, so
    that ``U`` holds the unweighted A marginal means of the cell means and
    ``D = Diag(1/w_i)``.
    """
    if np.any(layout.counts <= 0):
        missing = [
            (layout.levels_a[i], layout.levels_b[j])
            for i, j in zip(*np.nonzero(layout.counts <= 0))
        ]
        raise EmptyCellError(missing)
    a, b = layout.a, layout.b
    one_a, _, s_a = matlib.special_matrices(a)
    a_mat = (layout.K @ layout.D_ab @ matlib.kronecker(np.eye(a), matlib.ones(b))) / b
    return make_construction(a_mat, s_a, layout.y, M=one_a)


def _eq3_kernel(cons: MwsmConstruction) -> NDArray[np.float64]:
    d_inv = _d_inverse(cons.D)
    if cons.M.shape[1] == 0:
        return d_inv
    dm = d_inv @ cons.M
    return d_inv - dm @ matlib.generalized_inverse(cons.M.T @ dm) @ dm.T


def _quad(w: NDArray[np.float64], u: NDArray[np.float64]) -> float | NDArray[np.float64]:
    if u.ndim == 1:
        return max(float(u @ w @ u), 0.0)
    return np.maximum(np.einsum("ir,ij,jr->r", u, w, u), 0.0)


def _responses(cons: MwsmConstruction, y: ArrayLike) -> NDArray[np.float64]:
    yv = np.asarray(y, dtype=np.float64)
    if yv.shape[0] != cons.A.shape[0] or yv.ndim not in (1, 2):
        raise InvalidConstructionError(f"y must have {cons.A.shape[0]} rows")
    if not np.all(np.isfinite(yv)):
        raise InvalidConstructionError("y contains NaN or Inf")
    return yv


def ss_eq3(cons: MwsmConstruction, y: ArrayLike) -> float | NDArray[np.float64]:
    """Weighted-squares-of-means SS in its ``u``-form.

    ``y`` may be a single response vector or an ``(n, r)`` array of ``r``
    responses, in which case an array of ``r`` values is returned.
    """
    yv = _responses(cons, y)
    return _quad(_eq3_kernel(cons), cons.A.T @ yv)


def ss_eq3_via_z(cons: MwsmConstruction, y: ArrayLike) -> float | NDArray[np.float64]:
    """Same SS computed as ``z' (I - P_{D^{-1/2} M}) z`` with ``z = D^{-1/2} A'y``."""
    yv = _responses(cons, y)
    _, inv_half = matlib.spd_sqrt(cons.D)
    z = inv_half @ (cons.A.T @ yv)
    c = cons.A.shape[1]
    w = np.eye(c) - matlib.projector(inv_half @ cons.M) if cons.M.shape[1] else np.eye(c)
    return _quad(w, z)
