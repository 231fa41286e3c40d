"""Seeded Monte Carlo checks of the numerator SS distribution.

Replicates are drawn in fixed-size blocks, block ``i`` from its own
generator keyed by ``(seed, i)``.  Workers only decide which thread runs
a block, so results depend on the seed and never on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import matlib
from .dist import FParams, chi2_mean_check, f_sf, make_rng
from .errors import InvalidInputError, SaturatedModelError
from .glm import LinearModel, noncentrality
from .hypothesis import Hypothesis, rmfm_projector

BLOCK = 10_000


@dataclass(frozen=True)
class SimulationSummary:
    replicates: int
    seed: int
    alpha: float
    sigma2: float
    df: int
    df_error: int
    delta2: float
    mean_ss: float  # mean of SS / sigma2
    se_ss: float
    mean_mse: float
    rejection_rate: float
    mean_check: bool | None  # needs >= 10,000 replicates
    band_check: bool | None  # only defined under H0

    @property
    def target(self) -> float:
        return self.df + self.delta2

    @property
    def passed(self) -> bool:
        return self.mean_check is not False and self.band_check is not False


@dataclass(frozen=True)
class _Block:
    ss: NDArray[np.float64]
    sse_sum: float
    rejections: int


def calibration_band(alpha: float) -> tuple[float, float]:
    """Acceptable H0 rejection rates: +/-20% of alpha, i.e. [0.04, 0.06] at 0.05."""
    if alpha == 0.05:
        return 0.04, 0.06
    return 0.8 * alpha, 1.2 * alpha


def null_beta(hyp: Hypothesis, rng: np.random.Generator) -> NDArray[np.float64]:
    """A random parameter vector with ``G' beta = 0``."""
    if hyp.N.shape[1] == 0:
        return np.zeros(hyp.G.shape[0])
    return hyp.N @ rng.standard_normal(hyp.N.shape[1])


def plant_beta(model: LinearModel, hyp: Hypothesis, delta2: float, sigma2: float = 1.0) -> NDArray[np.float64]:
    """A parameter vector whose noncentrality for the RMFM SS equals ``delta2``.

    The mean vector is placed along the largest column of ``H``, which lies
    in the range of ``P_X - P_XN``, so the noncentrality is just its squared
    length over ``sigma2``.
    """
    if delta2 < 0:
        raise InvalidInputError("delta2 must be non-negative")
    if delta2 == 0:
        return np.zeros(model.k)
    norms = np.linalg.norm(hyp.H, axis=0)
    h = hyp.H[:, int(np.argmax(norms))]
    mu = h * math.sqrt(delta2 * sigma2) / float(norms.max())
    return matlib.generalized_inverse(model.X) @ mu


def _run_block(
    index: int,
    size: int,
    seed: int,
    mu: NDArray[np.float64],
    sigma: float,
    p: NDArray[np.float64],
    p_x: NDArray[np.float64],
    df: int,
    df_error: int,
    alpha: float,
) -> _Block:
    rng = make_rng(seed, index)
    ys = mu + sigma * rng.standard_normal((size, mu.shape[0]))
    py = ys @ p
    ss = np.einsum("ri,ri->r", py, ys)
    resid = ys - ys @ p_x
    sse = np.einsum("ri,ri->r", resid, resid)
    f_stat = (ss / df) / (sse / df_error)
    pv = f_sf(f_stat, FParams(df, df_error))
    return _Block(ss=ss, sse_sum=float(sse.sum()), rejections=int(np.count_nonzero(pv <= alpha)))


def simulate(
    model: LinearModel,
    hyp: Hypothesis,
    beta: ArrayLike,
    *,
    sigma2: float = 1.0,
    replicates: int = 100_000,
    seed: int = 0,
    alpha: float = 0.05,
    workers: int = 1,
) -> SimulationSummary:
    """Draw ``y ~ N(X beta, sigma2 I)`` and summarize the RMFM F-test.

    Reports the mean of ``SS / sigma2`` against ``nu + delta^2``, the mean
    MSE, and the empirical rejection rate at ``alpha``.
    """
    if replicates < 1:
        raise InvalidInputError("replicates must be at least 1")
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    if model.df_error == 0:
        raise SaturatedModelError("cannot simulate an F-test in a saturated model")
    b = matlib.as_vector(beta, "beta")
    p = rmfm_projector(model, hyp)
    df = int(round(float(np.trace(p))))
    delta2 = noncentrality(model, p, b, sigma2)
    mu = model.X @ b
    sizes = [min(BLOCK, replicates - start) for start in range(0, replicates, BLOCK)]
    args = (seed, mu, math.sqrt(sigma2), p, model.p_x, df, model.df_error, alpha)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda ix: _run_block(ix[0], ix[1], *args), enumerate(sizes)))
    else:
        blocks = [_run_block(i, s, *args) for i, s in enumerate(sizes)]
    ss = np.concatenate([blk.ss for blk in blocks]) / sigma2
    rate = sum(blk.rejections for blk in blocks) / replicates
    mean_mse = sum(blk.sse_sum for blk in blocks) / (replicates * model.df_error)
    se = float(ss.std(ddof=1)) / math.sqrt(replicates) if replicates > 1 else float("nan")
    mean_ok = chi2_mean_check(ss, df, delta2) if replicates >= 10_000 else None
    band = None
    if delta2 < 1e-10:
        lo, hi = calibration_band(alpha)
        band = lo <= rate <= hi
    return SimulationSummary(
        replicates=replicates,
        seed=seed,
        alpha=alpha,
        sigma2=sigma2,
        df=df,
        df_error=model.df_error,
        delta2=delta2,
        mean_ss=float(ss.mean()),
        se_ss=se,
        mean_mse=mean_mse,
        rejection_rate=rate,
        mean_check=mean_ok,
        band_check=band,
    )
