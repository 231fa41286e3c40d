"""Randomized identity suites run by ``yatesglm verify``.

Each suite draws seeded instances, evaluates one identity per instance and
records a non-negative residual that should sit at roundoff level.  An
instance is identified by ``(seed, suite, index)``, which is enough to
regenerate it.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import anova, glm, hypothesis, matlib, mwsm

SUITES = ("prop1", "prop2", "equivalence", "invariance", "h_uniqueness")


@dataclass
class SuiteResult:
    name: str
    instances: int = 0
    max_residual: float = 0.0
    failures: list[tuple[int, float]] = field(default_factory=list)

    def record(self, index: int, residual: float, tolerance: float) -> None:
        self.instances += 1
        self.max_residual = max(self.max_residual, residual)
        if not residual < tolerance:
            self.failures.append((index, residual))


def instance_rng(seed: int, suite: str, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), SUITES.index(suite), index])


def random_layout(
    rng: np.random.Generator,
    levels: tuple[int, int] = (2, 5),
    cell_counts: tuple[int, int] = (1, 4),
) -> anova.TwoFactorLayout:
    """Layout with random level counts, random cell sizes and N(0, 1) responses."""
    a, b = (int(v) for v in rng.integers(levels[0], levels[1] + 1, size=2))
    counts = rng.integers(cell_counts[0], cell_counts[1] + 1, size=(a, b))
    return anova.layout_from_counts(counts, rng.standard_normal(int(counts.sum())))


def random_design(rng: np.random.Generator) -> NDArray[np.float64]:
    """Random ``n x k`` design, rank deficient about half the time."""
    n = int(rng.integers(8, 16))
    k = int(rng.integers(3, 7))
    x = rng.standard_normal((n, k))
    if rng.random() < 0.5:
        w = rng.standard_normal(k - 1)
        x[:, -1] = x[:, :-1] @ w
    return x


def random_estimable(rng: np.random.Generator, model: glm.LinearModel, c: int) -> NDArray[np.float64]:
    """``G = X'T`` for random ``T``: always estimable."""
    return model.X.T @ rng.standard_normal((model.n, c))


def _rel(values: list[float]) -> float:
    worst = 0.0
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            worst = max(worst, matlib.relative_difference(values[i], values[j]))
    return worst


def prop1_instance(rng: np.random.Generator) -> float:
    r = int(rng.integers(1, 9))
    c = int(rng.integers(1, r + 1))
    rmat = rng.standard_normal((r, c))
    if c > 1 and rng.random() < 0.3:
        rmat[:, -1] = rmat[:, 0]
    w = rng.standard_normal((r, r))
    d = w @ w.T + 0.1 * np.eye(r)
    return matlib.prop1_residual(rmat, d)


def _prop2_setup(rng: np.random.Generator):
    while True:
        x = random_design(rng)
        model, _ = glm.fit(x, rng.standard_normal(x.shape[0]))
        if model.rank_x >= 3:
            break
    c = int(rng.integers(1, model.rank_x))
    hyp = hypothesis.build_hypothesis(model, random_estimable(rng, model, c))
    other = hypothesis.build_hypothesis(model, random_estimable(rng, model, c))
    return model, hyp, other


def prop2_instance(rng: np.random.Generator) -> float:
    """Residual of the exact projector; ``inf`` if any verdict is wrong."""
    model, hyp, other = _prop2_setup(rng)
    exact = hypothesis.rmfm_projector(model, hyp)
    if hypothesis.verify_prop2(model, hyp, exact) != (True, True):
        return float("inf")
    wrong = [hypothesis.restricted_projector(model, hyp), hypothesis.rmfm_projector(model, other)]
    if hyp.N.shape[1] and model.rank_x > hyp.rank_g:
        wrong.append(model.p_x)
    for p in wrong:
        if hypothesis.verify_prop2(model, hyp, p) == (True, True):
            return float("inf")
    p_xtp = matlib.projector(model.X.T @ exact)
    return matlib.max_abs(p_xtp - matlib.projector(hyp.G))


def equivalence_instance(rng: np.random.Generator) -> float:
    """Max pairwise relative gap among the Yates Q (both forms), the generalized u-form SS, y'P_H y and RMFM refits."""
    layout = random_layout(rng)
    stats = anova.cell_stats(layout)
    q = anova.compute_q(stats)
    q_mat = anova.q_matrix_form(stats.marginal_means_A, stats.weights_A)
    eq3 = float(mwsm.ss_eq3(mwsm.yates_construction(layout), layout.y))
    model, full = glm.fit(layout.K, layout.y)
    hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, "A"))
    p_h = matlib.projector(hyp.H)
    quad = float(layout.y @ p_h @ layout.y)
    _, restricted = glm.fit(hyp.XN, layout.y)
    refit = restricted.sse - full.sse
    return _rel([q, q_mat, eq3, quad, refit])


def invariance_instance(rng: np.random.Generator) -> float:
    """Generalized u-form SS under three factorizations of the same H."""
    while True:
        x = random_design(rng)
        model, _ = glm.fit(x, rng.standard_normal(x.shape[0]))
        if model.rank_x >= 2:
            break
    c = int(rng.integers(1, model.rank_x + 1))
    hyp = hypothesis.build_hypothesis(model, random_estimable(rng, model, c))
    y = model.y
    orth = mwsm.default_construction(model, hyp)
    direct = mwsm.make_construction(hyp.H, np.eye(c), y)
    scale = rng.uniform(0.2, 5.0, size=orth.A.shape[1])
    scaled = mwsm.make_construction(orth.A * scale, orth.C / scale[:, None], y)
    values = []
    for cons in (orth, direct, scaled):
        mwsm.check_construction(cons, model, hyp)
        values.append(float(mwsm.ss_eq3(cons, y)))
    return _rel(values)


def h_uniqueness_instance(rng: np.random.Generator) -> float:
    """``H`` from the g-inverse route against ``pinv(X)' G`` from LAPACK SVD."""
    x = random_design(rng)
    model, _ = glm.fit(x, rng.standard_normal(x.shape[0]))
    g = random_estimable(rng, model, int(rng.integers(1, model.rank_x + 1)))
    h1 = hypothesis.solve_h(model, g)
    h2 = np.linalg.pinv(x).T @ g
    return matlib.max_abs(h1 - h2) / max(matlib.max_abs(h2), 1e-300)


_INSTANCE: dict[str, tuple[Callable[[np.random.Generator], float], int]] = {
    "prop1": (prop1_instance, 100),
    "prop2": (prop2_instance, 50),
    "equivalence": (equivalence_instance, 100),
    "invariance": (invariance_instance, 30),
    "h_uniqueness": (h_uniqueness_instance, 30),
}


def run_suite(name: str, seed: int, tolerance: float, count: int | None = None) -> SuiteResult:
    fn, default_count = _INSTANCE[name]
    result = SuiteResult(name)
    for i in range(default_count if count is None else count):
        result.record(i, fn(instance_rng(seed, name, i)), tolerance)
    return result


def run_all(seed: int = 0, tolerance: float = 1e-8) -> list[SuiteResult]:
    return [run_suite(name, seed, tolerance) for name in SUITES]
