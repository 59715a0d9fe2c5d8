"""Reference positioning methods: weighted k-nearest neighbors and linear regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfpos.errors import ConfigError
from cfpos.gpr import feature_values


@dataclass(frozen=True)
class WknnConfig:
    k: int = 4
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (D + 1, 2); row 0 is the intercept


def wknn_predict_many(db_features, db_positions, X, cfg: WknnConfig = WknnConfig()) -> np.ndarray:
    """Inverse-distance weighted mean of the ``k`` nearest RP positions, per row of ``X``.

    Ties in distance go to the lower row index.
    """
    F = feature_values(db_features)
    Q = np.asarray(db_positions, dtype=float)
    X = np.atleast_2d(feature_values(X))
    if cfg.k > len(F):
        raise ConfigError(f"k={cfg.k} exceeds database size {len(F)}")
    dist = np.sqrt(((X[:, None, :] - F[None, :, :]) ** 2).sum(-1))
    order = np.argsort(dist, axis=1, kind="stable")[:, : cfg.k]
    d = np.take_along_axis(dist, order, axis=1)
    w = 1.0 / (d + cfg.epsilon)
    return np.einsum("tk,tkc->tc", w, Q[order]) / w.sum(axis=1, keepdims=True)


def wknn_predict(db_features, db_positions, x, cfg: WknnConfig = WknnConfig()) -> tuple[float, float]:
    est = wknn_predict_many(db_features, db_positions, np.asarray(feature_values(x))[None], cfg)[0]
    return float(est[0]), float(est[1])


def lr_fit(db_features, db_positions) -> LinearModel:
    """Affine least squares from features to positions with a small ridge term.

    The ridge weight is ``1e-6 * trace(X^T X) / D``; the intercept is not
    penalized.
    """
    X = feature_values(db_features)
    Q = np.asarray(db_positions, dtype=float)
    K, D = X.shape
    Xa = np.hstack([np.ones((K, 1)), X])
    lam = 1e-6 * np.trace(X.T @ X) / D or 1e-12
    reg = lam * np.eye(D + 1)
    reg[0, 0] = 0.0
    W = np.linalg.solve(Xa.T @ Xa + reg, Xa.T @ Q)
    return LinearModel(W)


def lr_predict_many(model: LinearModel, X) -> np.ndarray:
    X = np.atleast_2d(feature_values(X))
    if X.shape[1] + 1 != model.weights.shape[0]:
        raise ValueError(f"expected {model.weights.shape[0] - 1} features, got {X.shape[1]}")
    return model.weights[0] + X @ model.weights[1:]


def lr_predict(model: LinearModel, x) -> tuple[float, float]:
    x = np.asarray(feature_values(x), dtype=float)
    if x.ndim != 1:
        raise ValueError("lr_predict expects a single feature vector")
    est = lr_predict_many(model, x[None])[0]
    return float(est[0]), float(est[1])
