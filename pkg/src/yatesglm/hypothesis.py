"""Estimable linear hypotheses ``H0: G' beta = 0`` and their exact test.

The numerator SS that tests exactly ``G' beta`` is unique: it is the
restricted-minus-full difference in error SS, ``y'(P_X - P_XN) y``,
where span(N) is the null space of ``G'``.  The same quantity is the
quadratic form ``y' P_H y`` for the unique ``H`` with columns in span(X)
and ``X'H = G``, which is what :func:`wald_ss` evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import matlib
from .dist import FParams, f_sf
from .errors import (
    DegenerateHypothesisError,
    InvalidInputError,
    NotEstimableError,
    SaturatedModelError,
)
from .glm import LinearModel

ESTIMABILITY_TOLERANCE = 1e-8
SPAN_TOLERANCE = 1e-8


@dataclass(frozen=True)
class Hypothesis:
    G: NDArray[np.float64]
    N: NDArray[np.float64]
    H: NDArray[np.float64]
    XN: NDArray[np.float64]
    estimable: bool

    @property
    def rank_g(self) -> int:
        return self.G.shape[0] - self.N.shape[1]


@dataclass(frozen=True)
class NumeratorSS:
    ss: float
    df: int
    projector: NDArray[np.float64]


@dataclass(frozen=True)
class TestResult:
    ss: float
    df: int
    f_stat: float
    p_value: float
    projector: NDArray[np.float64]
    df_error: int
    mse: float

    __test__ = False  # keep pytest from collecting this class


def estimability_residuals(model: LinearModel, G: ArrayLike) -> NDArray[np.float64]:
    """Per-column residual of G after projecting onto span(X'), relative to column norm."""
    g = matlib.as_matrix(G, "G")
    if g.shape[0] != model.k:
        raise InvalidInputError(f"G must have {model.k} rows, got {g.shape[0]}")
    resid = g - matlib.projector(model.X.T) @ g
    norms = np.linalg.norm(g, axis=0)
    out = np.linalg.norm(resid, axis=0)
    return np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)


def is_estimable(model: LinearModel, G: ArrayLike) -> tuple[bool, list[int]]:
    """Return ``(estimable, offending_columns)``."""
    rel = estimability_residuals(model, G)
    bad = [int(i) for i in np.flatnonzero(rel > ESTIMABILITY_TOLERANCE)]
    return not bad, bad


def solve_h(model: LinearModel, G: NDArray[np.float64]) -> NDArray[np.float64]:
    """``H = P_X X (X'X)^- G``: columns in span(X) with ``X'H = G``."""
    xtx_inv = matlib.generalized_inverse(model.X.T @ model.X)
    return model.p_x @ (model.X @ (xtx_inv @ G))


def build_hypothesis(model: LinearModel, G: ArrayLike) -> Hypothesis:
    """Derive ``N``, ``H`` and the restricted design ``XN`` for ``G' beta = 0``.

    Raises
    ------
    NotEstimableError
        If some column of ``G`` lies outside the row space of ``X``.
    """
    g = matlib.as_matrix(G, "G")
    rel = estimability_residuals(model, g)
    bad = np.flatnonzero(rel > ESTIMABILITY_TOLERANCE)
    if bad.size:
        raise NotEstimableError([int(i) for i in bad], [float(rel[i]) for i in bad])
    n_basis = matlib.complement_basis(g)
    return Hypothesis(
        G=g,
        N=n_basis,
        H=solve_h(model, g),
        XN=model.X @ n_basis,
        estimable=True,
    )


def x_scale(model: LinearModel) -> float:
    """Frobenius norm of X, the reference scale for rank decisions on ``X N`` and ``X'P``."""
    return float(np.linalg.norm(model.X))


def restricted_projector(model: LinearModel, hyp: Hypothesis) -> NDArray[np.float64]:
    """``P_XN``, the projector onto the restricted model."""
    return matlib.projector(hyp.XN, scale=x_scale(model))


def rmfm_projector(model: LinearModel, hyp: Hypothesis) -> NDArray[np.float64]:
    p = model.p_x - restricted_projector(model, hyp)
    return 0.5 * (p + p.T)


def numerator_ss(model: LinearModel, hyp: Hypothesis, y: ArrayLike) -> NumeratorSS:
    """RMFM numerator SS and its degrees of freedom; valid for saturated models too."""
    if not hyp.estimable:
        raise InvalidInputError("hypothesis is not estimable")
    yv = matlib.as_vector(y, "y")
    if yv.shape[0] != model.n:
        raise InvalidInputError(f"y must have length {model.n}")
    p = rmfm_projector(model, hyp)
    trace = float(np.trace(p))
    df = int(round(trace))
    if df == 0:
        raise DegenerateHypothesisError("hypothesis has zero degrees of freedom (restricted model equals full model)")
    py = p @ yv
    return NumeratorSS(ss=max(float(py @ py), 0.0), df=df, projector=p)


def rmfm_ss(model: LinearModel, hyp: Hypothesis, y: ArrayLike) -> TestResult:
    """F-test of ``G' beta = 0`` using the restricted-minus-full SS.

    The error SS is recomputed from ``y`` so that the same model can be
    reused for many response vectors.

    Raises
    ------
    SaturatedModelError
        When the full model has no error degrees of freedom.
    DegenerateHypothesisError
        When ``P_X - P_XN`` is the zero matrix.
    """
    num = numerator_ss(model, hyp, y)
    if model.df_error == 0:
        raise SaturatedModelError("full model is saturated (df_error = 0); no F-test")
    yv = matlib.as_vector(y, "y")
    resid = yv - model.p_x @ yv
    mse = float(resid @ resid) / model.df_error
    f_stat = (num.ss / num.df) / mse if mse > 0 else float("inf")
    p = f_sf(f_stat, FParams(num.df, model.df_error))
    return TestResult(
        ss=num.ss,
        df=num.df,
        f_stat=f_stat,
        p_value=float(p),
        projector=num.projector,
        df_error=model.df_error,
        mse=mse,
    )


def wald_ss(model: LinearModel, hyp: Hypothesis, y: ArrayLike) -> float:
    """``(H'y)' (H'H)^- (H'y)``, the generalized Wald form of the numerator SS."""
    if not hyp.estimable:
        raise InvalidInputError("hypothesis is not estimable")
    yv = matlib.as_vector(y, "y")
    if yv.shape[0] != model.n:
        raise InvalidInputError(f"y must have length {model.n}")
    if matlib.rank(hyp.H) == 0:
        raise DegenerateHypothesisError("H is zero; hypothesis has zero degrees of freedom")
    hy = hyp.H.T @ yv
    return max(float(hy @ matlib.generalized_inverse(hyp.H.T @ hyp.H) @ hy), 0.0)


def _contains(p_big: NDArray[np.float64], m: NDArray[np.float64]) -> bool:
    if m.shape[1] == 0:
        return True
    scale = max(1.0, matlib.max_abs(m))
    return matlib.max_abs(p_big @ m - m) <= SPAN_TOLERANCE * scale


def verify_prop2(model: LinearModel, hyp: Hypothesis, P: ArrayLike) -> tuple[bool, bool]:
    """Decide whether ``y'Py`` tests, and tests exactly, ``G' beta``.

    ``y'Py`` tests ``G' beta`` iff span(X'P)^perp is inside span(G)^perp,
    i.e. span(G) is inside span(X'P); it tests exactly iff the two spans
    coincide.  Both are decided by comparing projectors.
    """
    pm = matlib.as_matrix(P, "P")
    if pm.shape != (model.n, model.n):
        raise InvalidInputError(f"P must be {model.n}x{model.n}")
    matlib.check_projector(pm, 1e-8)
    if matlib.max_abs(model.p_x @ pm - pm) > 1e-8:
        raise InvalidInputError("span(P) is not contained in span(X)")
    p_xtp = matlib.projector(model.X.T @ pm, scale=x_scale(model))
    p_g = matlib.projector(hyp.G)
    tests = _contains(p_xtp, hyp.G)
    exactly = tests and matlib.max_abs(p_xtp - p_g) <= SPAN_TOLERANCE
    return tests, exactly
