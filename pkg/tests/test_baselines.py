import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfpos.baselines import (
    LinearModel,
    WknnConfig,
    lr_fit,
    lr_predict,
    lr_predict_many,
    wknn_predict,
    wknn_predict_many,
)
from cfpos.errors import ConfigError
from cfpos.gpr import FeatureMatrix


def brute_force_wknn(F, Q, x, k, eps=1e-9):
    dists = [(float(np.sqrt(np.sum((F[i] - x) ** 2))), i) for i in range(len(F))]
    chosen = sorted(dists)[:k]  # ties resolved by row index through tuple ordering
    w = np.array([1 / (d + eps) for d, _ in chosen])
    pts = np.array([Q[i] for _, i in chosen])
    return tuple(w @ pts / w.sum())


class TestWknn:
    def test_exact_match_k1(self, np_rng):
        F = np_rng.normal(size=(6, 3))
        Q = np_rng.uniform(0, 200, (6, 2))
        assert wknn_predict(F, Q, F[2], WknnConfig(k=1)) == tuple(Q[2])

    def test_square_centroid(self):
        Q = np.array([[0, 0], [10, 0], [0, 10], [10, 10], [50, 50]], dtype=float)
        F = Q.copy()
        est = wknn_predict(F, Q, [5.0, 5.0], WknnConfig(k=4))
        assert est == pytest.approx((5.0, 5.0))

    def test_brute_force(self):
        gen = np.random.default_rng(5)
        for _ in range(50):
            F = gen.normal(size=(5, 3))
            Q = gen.uniform(0, 200, (5, 2))
            x = gen.normal(size=3)
            for k in range(1, 6):
                assert wknn_predict(F, Q, x, WknnConfig(k=k)) == pytest.approx(
                    brute_force_wknn(F, Q, x, k), rel=1e-15, abs=1e-12)

    def test_ties_prefer_lower_index(self):
        F = np.array([[1.0], [-1.0], [1.0]])
        Q = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        assert wknn_predict(F, Q, [0.0], WknnConfig(k=1)) == (0.0, 0.0)
        assert wknn_predict(F, Q, [0.0], WknnConfig(k=2)) == pytest.approx((0.5, 0.5))

    def test_all_equidistant_centroid(self, np_rng):
        F = np.eye(4)
        Q = np_rng.uniform(0, 200, (4, 2))
        est = wknn_predict(F, Q, np.zeros(4), WknnConfig(k=4))
        assert est == pytest.approx(tuple(Q.mean(axis=0)))

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_convex_hull(self, seed, k):
        gen = np.random.default_rng(seed)
        F = gen.normal(size=(8, 2))
        Q = gen.uniform(0, 200, (8, 2))
        x = gen.normal(size=2)
        est = np.array(wknn_predict(F, Q, x, WknnConfig(k=k)))
        order = np.argsort(np.linalg.norm(F - x, axis=1), kind="stable")[:k]
        sel = Q[order]
        # inside the hull: a convex combination exists; check via bounding box and weights
        assert np.all(est >= sel.min(axis=0) - 1e-9) and np.all(est <= sel.max(axis=0) + 1e-9)

    def test_feature_matrix_input(self, np_rng):
        F = np_rng.normal(size=(6, 2))
        Q = np_rng.uniform(0, 200, (6, 2))
        a = wknn_predict_many(FeatureMatrix(F, ("rss_db",) * 2), Q, F[:3])
        np.testing.assert_array_equal(a, wknn_predict_many(F, Q, F[:3]))

    def test_config(self):
        with pytest.raises(ConfigError):
            WknnConfig(k=0)
        with pytest.raises(ConfigError):
            WknnConfig(epsilon=0)
        with pytest.raises(ConfigError):
            wknn_predict(np.zeros((2, 1)), np.zeros((2, 2)), [0.0], WknnConfig(k=3))


class TestLinearRegression:
    def test_affine_recovery(self, np_rng):
        X = np_rng.normal(size=(50, 3))
        W = np_rng.normal(size=(3, 2))
        b = np.array([100.0, 50.0])
        model = lr_fit(X, X @ W + b)
        # the fixed ridge term shrinks slopes by about 1e-6 relative
        tol = 2e-6 * np.abs(W).max()
        np.testing.assert_allclose(model.weights[0], b, atol=tol)
        np.testing.assert_allclose(model.weights[1:], W, atol=tol)

    def test_constant_positions(self, np_rng):
        X = np_rng.normal(size=(20, 4))
        model = lr_fit(X, np.tile([30.0, 70.0], (20, 1)))
        np.testing.assert_allclose(model.weights[1:], 0, atol=1e-9)
        np.testing.assert_allclose(model.weights[0], [30, 70], atol=1e-9)

    def test_normal_equations_oracle(self, np_rng):
        X = np_rng.normal(size=(10, 3))
        Q = np_rng.uniform(0, 200, (10, 2))
        lam = 1e-6 * np.trace(X.T @ X) / 3
        Xa = np.hstack([np.ones((10, 1)), X])
        P = np.diag([0.0, lam, lam, lam])
        W = np.linalg.inv(Xa.T @ Xa + P) @ Xa.T @ Q
        np.testing.assert_allclose(lr_fit(X, Q).weights, W, atol=1e-8)

    def test_predict_examples(self):
        m = LinearModel(np.array([[3.0, 4.0], [0.0, 0.0]]))
        assert lr_predict(m, [123.0]) == (3.0, 4.0)
        m = LinearModel(np.array([[0.0, 0.0], [1.0, 2.0]]))
        assert lr_predict(m, [2.0]) == (2.0, 4.0)

    def test_new_point_affine_image(self, np_rng):
        X = np_rng.normal(size=(30, 2))
        W = np.array([[2.0, -1.0], [0.5, 3.0]])
        model = lr_fit(X, X @ W + 7.0)
        x = np.array([0.3, -1.2])
        tol = 2e-6 * (np.abs(W).max() * np.abs(x).sum() + 7.0)
        np.testing.assert_allclose(lr_predict(model, x), x @ W + 7.0, atol=tol)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lr_predict_many(LinearModel(np.zeros((3, 2))), np.zeros((1, 5)))

    def test_rank_deficient(self):
        X = np.tile([[1.0, 2.0]], (6, 1))
        model = lr_fit(X, np.arange(12, dtype=float).reshape(6, 2))
        assert np.all(np.isfinite(model.weights))

    def test_deterministic(self, np_rng):
        X = np_rng.normal(size=(10, 3))
        Q = np_rng.normal(size=(10, 2))
        assert lr_fit(X, Q).weights.tobytes() == lr_fit(X, Q).weights.tobytes()


def test_residual_shrinks_with_ridge(np_rng):
    X = np_rng.normal(size=(25, 3))
    Q = np_rng.normal(size=(25, 2)) * 10
    Xa = np.hstack([np.ones((25, 1)), X])
    residuals = []
    for lam in (1.0, 1e-2, 1e-4, 0.0):
        P = lam * np.eye(4)
        P[0, 0] = 0
        W = np.linalg.solve(Xa.T @ Xa + P, Xa.T @ Q)
        residuals.append(np.sum((Xa @ W - Q) ** 2))
    assert all(a >= b - 1e-9 for a, b in itertools.pairwise(residuals))
    fitted = lr_fit(X, Q).weights
    assert np.sum((Xa @ fitted - Q) ** 2) <= residuals[0]
