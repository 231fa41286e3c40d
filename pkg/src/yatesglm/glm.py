"""Least-squares fit of the Gauss-Markov model ``Y ~ N(X beta, sigma^2 I)``.

Least-squares solutions are never formed.  Everything downstream is a
function of ``P_X y``, which does not depend on the choice of g-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import matlib
from .errors import InvalidInputError


@dataclass(frozen=True)
class LinearModel:
    X: NDArray[np.float64]
    y: NDArray[np.float64]
    p_x: NDArray[np.float64]
    rank_x: int

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def df_error(self) -> int:
        return self.n - self.rank_x


@dataclass(frozen=True)
class FitSummary:
    fitted: NDArray[np.float64]
    sse: float
    df_error: int
    mse: float | None

    @property
    def saturated(self) -> bool:
        return self.df_error == 0


def summarize(model: LinearModel, y: ArrayLike) -> FitSummary:
    """Fit products of ``y`` against an already-projected model."""
    yv = matlib.as_vector(y, "y")
    if yv.shape[0] != model.n:
        raise InvalidInputError(f"y has length {yv.shape[0]}, X has {model.n} rows")
    fitted = model.p_x @ yv
    resid = yv - fitted
    sse = float(resid @ resid)
    df = model.df_error
    return FitSummary(fitted=fitted, sse=sse, df_error=df, mse=sse / df if df > 0 else None)


def fit(X: ArrayLike, y: ArrayLike) -> tuple[LinearModel, FitSummary]:
    """Project ``y`` onto span(X).

    Parameters
    ----------
    X : array_like, shape (n, k)
        Design matrix.  Rank deficiency is allowed.
    y : array_like, shape (n,)

    Returns
    -------
    (LinearModel, FitSummary)
        ``FitSummary.mse`` is ``None`` for a saturated model.
    """
    xm = matlib.as_matrix(X, "X")
    yv = matlib.as_vector(y, "y")
    if xm.shape[0] != yv.shape[0]:
        raise InvalidInputError(f"X has {xm.shape[0]} rows but y has length {yv.shape[0]}")
    if xm.shape[0] < 1 or xm.shape[1] < 1:
        raise InvalidInputError("X must have at least one row and one column")
    basis = matlib.orth(xm)
    p_x = basis @ basis.T
    model = LinearModel(X=xm, y=yv, p_x=0.5 * (p_x + p_x.T), rank_x=basis.shape[1])
    return model, summarize(model, yv)


def noncentrality(model: LinearModel, P: ArrayLike, beta: ArrayLike, sigma2: float) -> float:
    """``beta' X' P X beta / sigma2`` for a symmetric idempotent ``P``."""
    pm = matlib.as_matrix(P, "P")
    if pm.shape != (model.n, model.n):
        raise InvalidInputError(f"P must be {model.n}x{model.n}, got {pm.shape}")
    matlib.check_projector(pm, 1e-8)
    b = matlib.as_vector(beta, "beta")
    if b.shape[0] != model.k:
        raise InvalidInputError(f"beta must have length {model.k}")
    if not sigma2 > 0:
        raise InvalidInputError("sigma2 must be positive")
    mu = model.X @ b
    val = float(mu @ pm @ mu) / sigma2
    return max(val, 0.0)
