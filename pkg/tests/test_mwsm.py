import dataclasses

import numpy as np
import pytest
from conftest import rel
from hypothesis import given, settings
from hypothesis import strategies as st

from yatesglm import anova, glm, hypothesis, matlib, mwsm
from yatesglm.errors import DegenerateHypothesisError, EmptyCellError, InvalidConstructionError
from yatesglm.verification import random_design, random_estimable, random_layout


def _layout_problem(counts, y, factor="A"):
    layout = anova.layout_from_counts(counts, y)
    model, _ = glm.fit(layout.K, layout.y)
    hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, factor))
    return layout, model, hyp


class TestDefaultConstruction:
    def test_orthonormal_h_is_kept(self):
        # X = I makes H = G exactly
        g = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        model, _ = glm.fit(np.eye(3), [1.0, 2.0, 3.0])
        hyp = hypothesis.build_hypothesis(model, g)
        cons = mwsm.default_construction(model, hyp)
        np.testing.assert_allclose(np.abs(cons.A.T @ g), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(cons.A @ cons.C, g, atol=1e-15)
        np.testing.assert_allclose(np.abs(cons.C), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(cons.D, np.eye(2), atol=1e-15)
        assert cons.M.shape == (2, 0)

    def test_single_column(self):
        h = np.array([[3.0], [4.0], [0.0]])
        model, _ = glm.fit(np.eye(3), [1.0, 2.0, 3.0])
        hyp = hypothesis.build_hypothesis(model, h)
        cons = mwsm.default_construction(model, hyp)
        np.testing.assert_allclose(np.abs(cons.A), h / 5.0, atol=1e-15)
        np.testing.assert_allclose(np.abs(cons.C), [[5.0]], atol=1e-14)
        np.testing.assert_allclose(cons.D, [[1.0]], atol=1e-15)

    def test_two_factor_main_effect(self):
        layout, model, hyp = _layout_problem([[1, 3, 2], [2, 1, 1], [1, 1, 4]], np.arange(16.0))
        cons = mwsm.default_construction(model, hyp)
        assert np.abs(cons.A @ cons.C - hyp.H).max() < 1e-8 * np.abs(hyp.H).max()
        mwsm.check_construction(cons, model, hyp)

    def test_zero_h_rejected(self):
        model, _ = glm.fit(np.ones((3, 1)), [1.0, 2.0, 3.0])
        hyp = hypothesis.build_hypothesis(model, [[0.0]])
        with pytest.raises(DegenerateHypothesisError):
            mwsm.default_construction(model, hyp)

    def test_equals_projector_form(self, rng):
        for _ in range(10):
            x = random_design(rng)
            model, _ = glm.fit(x, rng.standard_normal(x.shape[0]))
            hyp = hypothesis.build_hypothesis(model, random_estimable(rng, model, int(rng.integers(1, model.rank_x + 1))))
            cons = mwsm.default_construction(model, hyp)
            quad = float(model.y @ matlib.projector(hyp.H) @ model.y)
            assert rel(mwsm.ss_eq3(cons, model.y), quad) < 1e-8


class TestYatesConstruction:
    def test_balanced_2x2(self):
        layout = anova.layout_from_counts([[1, 1], [1, 1]], [1.0, 3.0, 5.0, 7.0])
        cons = mwsm.yates_construction(layout)
        np.testing.assert_allclose(cons.U, [2.0, 6.0], atol=1e-15)
        np.testing.assert_allclose(cons.D, np.diag([0.5, 0.5]), atol=1e-15)
        np.testing.assert_allclose(1.0 / np.diag(cons.D), [2.0, 2.0], atol=1e-14)
        np.testing.assert_array_equal(cons.M, [[1.0], [1.0]])
        np.testing.assert_allclose(cons.C, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)

    def test_unbalanced_weights(self):
        layout = anova.layout_from_counts([[1, 2], [1, 1]], np.zeros(5))
        cons = mwsm.yates_construction(layout)
        # (1/4)(1/1 + 1/2) and (1/4)(1/1 + 1/1)
        np.testing.assert_allclose(cons.D, np.diag([0.375, 0.5]), atol=1e-15)

    @pytest.mark.parametrize("a, b, n", [(2, 3, 1), (3, 2, 2), (4, 4, 3)])
    def test_balanced_weights(self, a, b, n):
        layout = anova.layout_from_counts(np.full((a, b), n), np.zeros(a * b * n))
        cons = mwsm.yates_construction(layout)
        np.testing.assert_allclose(1.0 / np.diag(cons.D), np.full(a, b * n), rtol=1e-14)

    def test_u_holds_marginal_means(self, rng):
        for _ in range(20):
            layout = random_layout(rng)
            cons = mwsm.yates_construction(layout)
            stats = anova.cell_stats(layout)
            assert np.abs(cons.U - stats.marginal_means_A).max() < 1e-10

    def test_construction_invariants(self, rng):
        layout = random_layout(rng)
        model, _ = glm.fit(layout.K, layout.y)
        hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, "A"))
        mwsm.check_construction(mwsm.yates_construction(layout), model, hyp)

    def test_empty_cell_rejected(self):
        layout = anova.layout_from_counts([[1, 1], [1, 1]], [1.0, 2.0, 3.0, 4.0])
        broken = dataclasses.replace(layout, counts=np.array([[1, 1], [1, 0]]))
        with pytest.raises(EmptyCellError) as exc:
            mwsm.yates_construction(broken)
        assert exc.value.cells == [("2", "2")]


class TestSsEq3:
    def test_balanced_2x2(self):
        layout = anova.layout_from_counts([[1, 1], [1, 1]], [1.0, 3.0, 5.0, 7.0])
        cons = mwsm.yates_construction(layout)
        assert mwsm.ss_eq3(cons, layout.y) == pytest.approx(16.0, rel=1e-12)
        assert mwsm.ss_eq3_via_z(cons, layout.y) == pytest.approx(16.0, rel=1e-12)

    def test_equal_marginal_means_give_zero(self):
        # cell means (1, 3) and (2, 2): both A marginal means equal 2
        layout = anova.layout_from_counts([[1, 2], [1, 1]], [1.0, 3.0, 3.0, 2.0, 2.0])
        cons = mwsm.yates_construction(layout)
        scale = float(cons.U @ np.linalg.solve(cons.D, cons.U))
        assert mwsm.ss_eq3(cons, layout.y) < 1e-14 * scale
        assert mwsm.ss_eq3_via_z(cons, layout.y) < 1e-14 * scale

    def test_unbalanced_matches_closed_form(self):
        layout = anova.layout_from_counts([[1, 2], [1, 1]], [2.0, 1.0, 3.0, 4.0, 8.0])
        cons = mwsm.yates_construction(layout)
        # u = (2, 6), w = (8/3, 2): (u1 - u2)^2 w1 w2 / (w1 + w2) = 128/7
        assert mwsm.ss_eq3(cons, layout.y) == pytest.approx(128 / 7, rel=1e-12)
        assert mwsm.ss_eq3_via_z(cons, layout.y) == pytest.approx(anova.compute_q(anova.cell_stats(layout)), rel=1e-9)

    def test_empty_m_reduces_to_norm(self, rng):
        a = rng.standard_normal((6, 3))
        y = rng.standard_normal(6)
        cons = mwsm.make_construction(a, np.eye(3), y)
        assert cons.M.shape == (3, 0)
        z = cons.Z
        assert rel(mwsm.ss_eq3_via_z(cons, y), float(z @ z)) < 1e-12
        assert rel(mwsm.ss_eq3(cons, y), float(cons.U @ np.linalg.solve(cons.D, cons.U))) < 1e-10

    def test_z_route_on_random_instances(self, rng):
        for _ in range(20):
            layout = random_layout(rng)
            cons = mwsm.yates_construction(layout)
            assert rel(mwsm.ss_eq3(cons, layout.y), mwsm.ss_eq3_via_z(cons, layout.y)) < 1e-9

    def test_batch_matches_loop(self, rng):
        layout = random_layout(rng)
        cons = mwsm.yates_construction(layout)
        ys = rng.standard_normal((layout.n, 5))
        batch = mwsm.ss_eq3(cons, ys)
        loop = [mwsm.ss_eq3(cons, ys[:, r]) for r in range(5)]
        np.testing.assert_allclose(batch, loop, rtol=1e-12)
        np.testing.assert_allclose(mwsm.ss_eq3_via_z(cons, ys), loop, rtol=1e-9)

    def test_equivalence_chain(self, rng):
        for _ in range(20):
            layout = random_layout(rng)
            model, _ = glm.fit(layout.K, layout.y)
            hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, "A"))
            cons = mwsm.yates_construction(layout)
            values = [
                mwsm.ss_eq3(cons, layout.y),
                mwsm.ss_eq3_via_z(cons, layout.y),
                float(layout.y @ matlib.projector(hyp.H) @ layout.y),
                hypothesis.numerator_ss(model, hyp, layout.y).ss,
            ]
            for v in values[1:]:
                assert rel(values[0], v) < 1e-8

    def test_cell_means_alternative(self, rng):
        # A = (1/b) K D_ab with C = S_a kron 1_b gives the same SS
        for _ in range(10):
            layout = random_layout(rng)
            a_alt = layout.K @ layout.D_ab / layout.b
            c_alt = matlib.kronecker(matlib.special_matrices(layout.a)[2], matlib.ones(layout.b))
            alt = mwsm.make_construction(a_alt, c_alt, layout.y)
            model, _ = glm.fit(layout.K, layout.y)
            hyp = hypothesis.build_hypothesis(model, anova.main_effect_G(layout, "A"))
            mwsm.check_construction(alt, model, hyp)
            yates = mwsm.ss_eq3(mwsm.yates_construction(layout), layout.y)
            assert rel(mwsm.ss_eq3(alt, layout.y), yates) < 1e-8


class TestInvariance:
    def test_three_factorizations(self, rng):
        for _ in range(30):
            x = random_design(rng)
            model, _ = glm.fit(x, rng.standard_normal(x.shape[0]))
            c = int(rng.integers(1, model.rank_x + 1))
            hyp = hypothesis.build_hypothesis(model, random_estimable(rng, model, c))
            orth = mwsm.default_construction(model, hyp)
            direct = mwsm.make_construction(hyp.H, np.eye(c), model.y)
            s = rng.uniform(0.2, 5.0, size=orth.A.shape[1])
            scaled = mwsm.make_construction(orth.A * s, orth.C / s[:, None], model.y)
            ref = mwsm.ss_eq3(orth, model.y)
            for cons in (direct, scaled):
                mwsm.check_construction(cons, model, hyp)
                assert rel(mwsm.ss_eq3(cons, model.y), ref) < 1e-8

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_random_invertible_mix(self, seed):
        # A T with C replaced by T^{-1} C is another valid factorization
        rng = np.random.default_rng(seed)
        layout = random_layout(rng)
        base = mwsm.yates_construction(layout)
        t = rng.standard_normal((layout.a, layout.a)) + 3 * np.eye(layout.a)
        mixed = mwsm.make_construction(base.A @ t, np.linalg.solve(t, base.C), layout.y)
        assert rel(mwsm.ss_eq3(mixed, layout.y), mwsm.ss_eq3(base, layout.y)) < 1e-8


class TestErrors:
    def test_dependent_columns(self):
        a = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(InvalidConstructionError):
            mwsm.make_construction(a, np.eye(2), np.zeros(3))

    def test_d_not_pd(self):
        layout = anova.layout_from_counts([[1, 1], [1, 1]], [1.0, 3.0, 5.0, 7.0])
        cons = mwsm.yates_construction(layout)
        broken = dataclasses.replace(cons, D=np.diag([0.5, -0.5]))
        with pytest.raises(InvalidConstructionError):
            mwsm.ss_eq3(broken, layout.y)

    def test_c_shape(self):
        with pytest.raises(InvalidConstructionError):
            mwsm.make_construction(np.eye(3), np.eye(2), np.zeros(3))

    def test_wrong_y_length(self):
        cons = mwsm.make_construction(np.eye(3), np.eye(3), np.zeros(3))
        with pytest.raises(InvalidConstructionError):
            mwsm.ss_eq3(cons, np.zeros(4))

    def test_check_flags_wrong_h(self):
        layout, model, hyp = _layout_problem([[1, 2], [1, 1]], [2.0, 1.0, 3.0, 4.0, 8.0])
        cons = mwsm.yates_construction(layout)
        bad = dataclasses.replace(cons, C=2 * cons.C)
        with pytest.raises(InvalidConstructionError):
            mwsm.check_construction(bad, model, hyp)


@pytest.mark.slow
def test_null_model_unbiased():
    rng = np.random.default_rng(7)
    layout = anova.layout_from_counts([[1, 3, 2, 2], [2, 1, 1, 3], [4, 2, 1, 1], [1, 1, 2, 2]], np.zeros(29))
    cons = mwsm.yates_construction(layout)
    # equal A marginal means: eta_ij = b_j + d_ij with row-centered d
    d = rng.standard_normal((4, 4))
    d -= d.mean(axis=1, keepdims=True)
    eta = (rng.standard_normal(4)[None, :] + d).ravel()
    sigma2 = 2.5
    ys = (layout.K @ eta)[:, None] + np.sqrt(sigma2) * rng.standard_normal((layout.n, 20_000))
    ms = mwsm.ss_eq3(cons, ys) / cons.df
    assert abs(ms.mean() - sigma2) < 0.02 * sigma2
