"""Central F tail probabilities and seeded normal samplers.

The F upper tail is evaluated through the regularized incomplete beta
function, whose continued fraction is computed with the modified Lentz
algorithm.  The evaluation is vectorized over ``x`` so Monte Carlo
drivers can convert 10^5 F statistics to p-values in one call.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError

_FPMIN = 1e-300
_EPS = 1e-15
_MAXIT = 10_000


@dataclass(frozen=True)
class FParams:
    df_num: float
    df_den: float

    def __post_init__(self) -> None:
        for name in ("df_num", "df_den"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be finite and positive, got {v}")


def _betacf(a: float, b: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        step = d * c
        h *= step
        if np.all(np.abs(step - 1.0) < _EPS):
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b})")


def betainc(a: float, b: float, x: ArrayLike, xc: ArrayLike | None = None) -> NDArray[np.float64]:
    """Regularized incomplete beta ``I_x(a, b)``.

    ``xc`` may carry ``1 - x`` computed without cancellation; it is
    derived from ``x`` when omitted.
    """
    if not (a > 0 and b > 0):
        raise InvalidInputError("a and b must be positive")
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    xcv = 1.0 - xv if xc is None else np.atleast_1d(np.asarray(xc, dtype=np.float64))
    if np.any((xv < 0) | (xv > 1)):
        raise InvalidInputError("x must lie in [0, 1]")
    out = np.empty_like(xv)
    out[xv <= 0.0] = 0.0
    out[xcv <= 0.0] = 1.0
    inner = (xv > 0.0) & (xcv > 0.0)
    if np.any(inner):
        xi, xci = xv[inner], xcv[inner]
        lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        front = np.exp(lbeta + a * np.log(xi) + b * np.log(xci))
        direct = xi < (a + 1.0) / (a + b + 2.0)
        res = np.empty_like(xi)
        if np.any(direct):
            res[direct] = front[direct] * _betacf(a, b, xi[direct]) / a
        if np.any(~direct):
            res[~direct] = 1.0 - front[~direct] * _betacf(b, a, xci[~direct]) / b
        out[inner] = np.clip(res, 0.0, 1.0)
    return out


def f_sf(x: ArrayLike, params: FParams) -> float | NDArray[np.float64]:
    """Upper-tail probability ``P(F > x)`` of the central F distribution.

    Returns a float for scalar ``x`` and an array otherwise.
    """
    xv = np.asarray(x, dtype=np.float64)
    scalar = xv.ndim == 0
    xv = np.atleast_1d(xv)
    if np.any(np.isnan(xv)) or np.any(xv < 0):
        raise InvalidInputError("F statistic must be non-negative")
    d1, d2 = params.df_num, params.df_den
    out = np.ones_like(xv)
    pos = xv > 0
    if np.any(pos):
        xp = xv[pos]
        with np.errstate(over="ignore", invalid="ignore"):
            den = d2 + d1 * xp
            z = d2 / den
            zc = d1 * xp / den
        inf = ~np.isfinite(xp)
        z[inf], zc[inf] = 0.0, 1.0
        out[pos] = betainc(d2 / 2.0, d1 / 2.0, z, zc)
    return float(out[0]) if scalar else out


def chi2_mean_check(samples: ArrayLike, df: float, delta2: float = 0.0) -> bool:
    """True iff the sample mean lies within 4 standard errors of ``df + delta2``."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size < 10_000:
        raise InvalidInputError("chi2_mean_check needs at least 10,000 samples")
    se = float(s.std(ddof=1)) / math.sqrt(s.size)
    return abs(float(s.mean()) - (df + delta2)) <= 4.0 * se


def make_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """PCG64 generator keyed by ``(seed, worker)``; workers never share state."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), int(worker)])))


def normal_sampler(seed: int, worker: int = 0, block: int = 4096) -> Iterator[float]:
    """Endless, replayable stream of standard normal draws."""
    rng = make_rng(seed, worker)
    while True:
        yield from rng.standard_normal(block).tolist()
