import numpy as np
import pytest

from yatesglm import anova, glm, hypothesis, matlib
from yatesglm.errors import InvalidInputError


def test_intercept_only_fit():
    model, fit = glm.fit(np.ones((4, 1)), [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(fit.fitted, [2.5] * 4, atol=1e-14)
    assert fit.sse == pytest.approx(5.0, abs=1e-13)
    assert fit.df_error == 3
    assert fit.mse == pytest.approx(5.0 / 3)
    assert model.rank_x == 1


def test_saturated_fit():
    _, fit = glm.fit(np.eye(3), [4.0, -1.0, 2.5])
    assert fit.sse == pytest.approx(0.0, abs=1e-24)
    assert fit.df_error == 0
    assert fit.mse is None and fit.saturated


def test_two_factor_incidence_fit():
    # cells (1,1) x2, (1,2), (2,1), (2,2); only cell (1,1) has within-cell spread
    layout = anova.layout_from_counts([[2, 1], [1, 1]], [1.0, 3.0, 2.0, 4.0, 6.0])
    _, fit = glm.fit(layout.K, layout.y)
    assert fit.sse == pytest.approx((1 - 2) ** 2 + (3 - 2) ** 2, abs=1e-13)
    assert fit.df_error == 1


def test_rank_deficient_design(rng):
    x = rng.standard_normal((10, 3))
    x = np.hstack([x, x[:, :1] + x[:, 1:2]])
    model, fit = glm.fit(x, rng.standard_normal(10))
    assert model.rank_x == 3
    assert fit.df_error == 7


@pytest.mark.parametrize(
    "X, y",
    [
        (np.ones((3, 1)), [1.0, 2.0]),
        (np.ones((2, 1)), [1.0, np.nan]),
        (np.array([[1.0], [np.inf]]), [1.0, 2.0]),
    ],
)
def test_fit_rejects_bad_input(X, y):
    with pytest.raises(InvalidInputError):
        glm.fit(X, y)


def test_pythagorean_split(rng):
    for _ in range(25):
        n, k = int(rng.integers(3, 15)), int(rng.integers(1, 6))
        x, y = rng.standard_normal((n, k)), rng.standard_normal(n) * 10
        _, fit = glm.fit(x, y)
        total = float(y @ y)
        assert abs(total - (fit.fitted @ fit.fitted + fit.sse)) <= 1e-9 * total
        assert abs(fit.sse - float((y - fit.fitted) @ (y - fit.fitted))) <= 1e-10 * max(fit.sse, 1e-300) + 1e-14


def test_fit_depends_only_on_span(rng):
    for _ in range(20):
        n, k = int(rng.integers(5, 15)), int(rng.integers(1, 5))
        x, y = rng.standard_normal((n, k)), rng.standard_normal(n)
        t = rng.standard_normal((k, k)) + 2 * np.eye(k)
        _, f1 = glm.fit(x, y)
        _, f2 = glm.fit(x @ t, y)
        assert np.abs(f1.fitted - f2.fitted).max() <= 1e-9 * np.abs(f1.fitted).max()
        assert abs(f1.sse - f2.sse) <= 1e-9 * f1.sse


@pytest.mark.slow
def test_mse_unbiased_monte_carlo():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((12, 4))
    beta, sigma2 = rng.standard_normal(4), 2.0
    model, _ = glm.fit(x, np.zeros(12))
    draws = x @ beta + np.sqrt(sigma2) * rng.standard_normal((20_000, 12))
    mses = [glm.summarize(model, y).mse for y in draws]
    assert abs(np.mean(mses) - sigma2) < 0.02 * sigma2


class TestNoncentrality:
    def setup_method(self):
        self.layout = anova.layout_from_counts([[1, 2, 3], [2, 2, 1]], np.zeros(11))
        self.model, _ = glm.fit(self.layout.K, self.layout.y)
        hyp = hypothesis.build_hypothesis(self.model, anova.main_effect_G(self.layout, "A"))
        self.p = hypothesis.rmfm_projector(self.model, hyp)

    def test_zero_beta(self):
        assert glm.noncentrality(self.model, self.p, np.zeros(6), 1.0) == 0.0

    def test_zero_projector(self):
        assert glm.noncentrality(self.model, np.zeros((11, 11)), np.arange(6.0), 1.0) == 0.0

    def test_equal_marginal_means_give_zero(self, rng):
        eta = rng.standard_normal((2, 3))
        eta = eta - eta.mean(axis=1, keepdims=True) + 3.0
        assert glm.noncentrality(self.model, self.p, eta.ravel(), 1.0) < 1e-10

    def test_unequal_marginal_means_give_positive(self):
        eta = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
        assert glm.noncentrality(self.model, self.p, eta.ravel(), 1.0) > 1e-6

    def test_scales_with_sigma2(self):
        eta = np.array([[1.0, 0.0, 1.0], [2.0, 2.0, 0.0]]).ravel()
        d1 = glm.noncentrality(self.model, self.p, eta, 1.0)
        assert glm.noncentrality(self.model, self.p, eta, 4.0) == pytest.approx(d1 / 4)

    def test_rejects_non_projector(self):
        with pytest.raises(InvalidInputError):
            glm.noncentrality(self.model, 2 * self.p, np.ones(6), 1.0)

    def test_rejects_bad_sigma2(self):
        with pytest.raises(InvalidInputError):
            glm.noncentrality(self.model, self.p, np.ones(6), 0.0)

    def test_matches_projector_quadratic(self, rng):
        beta = rng.standard_normal(6)
        mu = self.layout.K @ beta
        expected = float(mu @ matlib.projector(self.p) @ mu)
        assert glm.noncentrality(self.model, self.p, beta, 1.0) == pytest.approx(expected, rel=1e-10)
