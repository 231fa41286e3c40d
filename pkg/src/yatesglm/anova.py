"""Two-factor ANOVA in the cell-means parameterization.

Observations are arranged by cell in row-major ``(i, j)`` order and the
design is the 0/1 incidence matrix ``K`` (one 1 per row).  Because ``K``
has full column rank every linear function of the cell means is
estimable, and each row of the table is the restricted-minus-full SS for
the corresponding ``G``.  For A main effects that SS coincides with
Yates's weighted squares of means, available directly as :func:`compute_q`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import glm, hypothesis, matlib
from .errors import DegenerateFactorError, EmptyCellError, InvalidInputError


@dataclass(frozen=True)
class TwoFactorLayout:
    a: int
    b: int
    counts: NDArray[np.int64]
    y: NDArray[np.float64]
    K: NDArray[np.float64]
    D_ab: NDArray[np.float64]
    levels_a: tuple[str, ...]
    levels_b: tuple[str, ...]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def balanced(self) -> bool:
        return bool(np.all(self.counts == self.counts.flat[0]))

    def with_response(self, y: ArrayLike) -> TwoFactorLayout:
        """Same design, new response vector (already in cell order)."""
        yv = matlib.as_vector(y, "y")
        if yv.shape[0] != self.n:
            raise InvalidInputError(f"y must have length {self.n}")
        return TwoFactorLayout(self.a, self.b, self.counts, yv, self.K, self.D_ab, self.levels_a, self.levels_b)


@dataclass(frozen=True)
class CellStats:
    cell_means: NDArray[np.float64]
    marginal_means_A: NDArray[np.float64]
    weights_A: NDArray[np.float64]


@dataclass(frozen=True)
class AnovaRow:
    source: str
    ss: float
    df: int
    f: float | None = None
    p: float | None = None


@dataclass(frozen=True)
class AnovaTable:
    rows: list[AnovaRow]
    n: int
    rank: int
    df_error: int
    mse: float | None
    levels_a: tuple[str, ...] = field(default_factory=tuple)
    levels_b: tuple[str, ...] = field(default_factory=tuple)

    @property
    def saturated(self) -> bool:
        return self.df_error == 0

    def row(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)


def layout_from_counts(
    counts: ArrayLike,
    y: ArrayLike,
    levels_a: Sequence[str] | None = None,
    levels_b: Sequence[str] | None = None,
) -> TwoFactorLayout:
    """Build a layout from an ``a x b`` count table and cell-ordered responses."""
    cnt = np.asarray(counts)
    if cnt.ndim != 2 or np.any(cnt != np.round(cnt)):
        raise InvalidInputError("counts must be a 2-D table of integers")
    cnt = cnt.astype(np.int64)
    a, b = cnt.shape
    la = tuple(levels_a) if levels_a is not None else tuple(str(i + 1) for i in range(a))
    lb = tuple(levels_b) if levels_b is not None else tuple(str(j + 1) for j in range(b))
    if a < 2:
        raise DegenerateFactorError(f"factor A has {a} level(s); need at least 2")
    if b < 2:
        raise DegenerateFactorError(f"factor B has {b} level(s); need at least 2")
    if np.any(cnt < 0):
        raise InvalidInputError("cell counts must be non-negative")
    empty = [(la[i], lb[j]) for i, j in zip(*np.nonzero(cnt == 0))]
    if empty:
        raise EmptyCellError(empty)
    yv = matlib.as_vector(y, "y")
    n = int(cnt.sum())
    if yv.shape[0] != n:
        raise InvalidInputError(f"expected {n} responses, got {yv.shape[0]}")
    cell_of_obs = np.repeat(np.arange(a * b), cnt.ravel())
    K = np.zeros((n, a * b))
    K[np.arange(n), cell_of_obs] = 1.0
    return TwoFactorLayout(
        a=a,
        b=b,
        counts=cnt,
        y=yv,
        K=K,
        D_ab=np.diag(1.0 / cnt.ravel()),
        levels_a=la,
        levels_b=lb,
    )


def build_layout(records: Iterable[tuple[object, object, float]]) -> TwoFactorLayout:
    """Arrange ``(level_a, level_b, response)`` records into a layout.

    Labels are compared as strings after stripping surrounding whitespace
    and numbered in order of first appearance.  Responses keep their input
    order within a cell.
    """
    levels_a: dict[str, int] = {}
    levels_b: dict[str, int] = {}
    cells: list[tuple[int, int]] = []
    ys: list[float] = []
    for la, lb, resp in records:
        ka, kb = str(la).strip(), str(lb).strip()
        cells.append((levels_a.setdefault(ka, len(levels_a)), levels_b.setdefault(kb, len(levels_b))))
        ys.append(float(resp))
    if not cells:
        raise InvalidInputError("no records")
    a, b = len(levels_a), len(levels_b)
    counts = np.zeros((a, b), dtype=np.int64)
    for i, j in cells:
        counts[i, j] += 1
    order = sorted(range(len(cells)), key=lambda s: cells[s][0] * b + cells[s][1])
    return layout_from_counts(counts, np.array(ys)[order], list(levels_a), list(levels_b))


def cell_stats(layout: TwoFactorLayout) -> CellStats:
    """Cell means, unweighted A marginal means of cell means, and Yates weights."""
    sums = layout.K.T @ layout.y
    means = (sums / layout.counts.ravel()).reshape(layout.a, layout.b)
    inv_w = (1.0 / layout.counts).sum(axis=1) / layout.b**2
    return CellStats(cell_means=means, marginal_means_A=means.mean(axis=1), weights_A=1.0 / inv_w)


def q_deviation_form(u: ArrayLike, w: ArrayLike) -> float:
    """``sum_i w_i (u_i - ubar)^2`` with the weighted mean ``ubar``."""
    uv, wv = np.asarray(u, float), np.asarray(w, float)
    ubar = float(wv @ uv) / float(wv.sum())
    return float(wv @ (uv - ubar) ** 2)


def q_matrix_form(u: ArrayLike, w: ArrayLike) -> float:
    """``u' (D^-1 - D^-1 1 (1' D^-1 1)^-1 1' D^-1) u`` with ``D = Diag(1/w)``."""
    uv, wv = np.asarray(u, float), np.asarray(w, float)
    d_inv = np.diag(wv)
    one = np.ones(len(uv))
    dm = d_inv @ one
    kernel = d_inv - np.outer(dm, dm) / float(one @ dm)
    return float(uv @ kernel @ uv)


def compute_q(stats: CellStats) -> float:
    """Yates's weighted squares of means SS for A main effects.

    Evaluated in deviation form and in matrix form; the two must agree to
    1e-10 relative before the deviation-form value is returned.
    """
    u, w = stats.marginal_means_A, stats.weights_A
    if len(u) < 2:
        raise DegenerateFactorError("need at least two A levels")
    if np.any(w <= 0):
        raise InvalidInputError("weights must be positive")
    dev = q_deviation_form(u, w)
    mat = q_matrix_form(u, w)
    floor = 1e-13 * float(w @ u**2)
    if abs(dev - mat) > 1e-10 * max(abs(dev), abs(mat)) + floor:
        raise ArithmeticError(f"deviation form {dev!r} and matrix form {mat!r} disagree")
    return max(dev, 0.0)


def main_effect_G(layout: TwoFactorLayout, factor: Literal["A", "B"]) -> NDArray[np.float64]:
    """``(1/b)(S_a kron 1_b)`` for A, ``(1/a)(1_a kron S_b)`` for B."""
    a, b = layout.a, layout.b
    if factor == "A":
        if a < 2:
            raise DegenerateFactorError("factor A has fewer than two levels")
        return matlib.kronecker(matlib.special_matrices(a)[2], matlib.ones(b)) / b
    if factor == "B":
        if b < 2:
            raise DegenerateFactorError("factor B has fewer than two levels")
        return matlib.kronecker(matlib.ones(a), matlib.special_matrices(b)[2]) / a
    raise InvalidInputError(f"factor must be 'A' or 'B', got {factor!r}")


def interaction_G(layout: TwoFactorLayout) -> NDArray[np.float64]:
    if layout.a < 2 or layout.b < 2:
        raise DegenerateFactorError("interaction needs two levels in each factor")
    return matlib.kronecker(matlib.special_matrices(layout.a)[2], matlib.special_matrices(layout.b)[2])


def anova_table(layout: TwoFactorLayout, names: tuple[str, str] = ("A", "B")) -> AnovaTable:
    """Rows for A, B, A:B and Error.

    F and p are ``None`` when the cell-means model is saturated (one
    observation per cell).
    """
    model, fit = glm.fit(layout.K, layout.y)
    na, nb = names
    rows = []
    for source, g in (
        (na, main_effect_G(layout, "A")),
        (nb, main_effect_G(layout, "B")),
        (f"{na}:{nb}", interaction_G(layout)),
    ):
        hyp = hypothesis.build_hypothesis(model, g)
        if fit.saturated:
            num = hypothesis.numerator_ss(model, hyp, layout.y)
            rows.append(AnovaRow(source, num.ss, num.df))
        else:
            res = hypothesis.rmfm_ss(model, hyp, layout.y)
            rows.append(AnovaRow(source, res.ss, res.df, res.f_stat, res.p_value))
    rows.append(AnovaRow("Error", fit.sse, fit.df_error))
    mse = fit.mse if fit.mse is not None and math.isfinite(fit.mse) else None
    return AnovaTable(
        rows=rows,
        n=model.n,
        rank=model.rank_x,
        df_error=fit.df_error,
        mse=mse,
        levels_a=layout.levels_a,
        levels_b=layout.levels_b,
    )
