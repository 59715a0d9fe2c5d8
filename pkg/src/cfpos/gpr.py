"""Gaussian process regression of RP coordinates on fingerprint features.

Each output coordinate gets its own zero-mean GP (labels are centered on the
training mean) with a squared-exponential kernel over standardized
features. Hyperparameters ``(b^2, rho, sigma_eps^2)`` are fit by maximizing
the log marginal likelihood in log-parameter space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from cfpos.errors import ConfigError, NotPSDError, TrainingError
from cfpos.numerics import RngStream, cholesky_psd

LOG_2PI = math.log(2.0 * math.pi)
# exp(-345) ~ 1e-150: smaller kernel values are flushed to zero so that their
# products inside LAPACK do not go subnormal (which is orders of magnitude slower)
_FLUSH_ARG = -345.0


@dataclass(frozen=True)
class FeatureMatrix:
    """Fingerprint features with a per-column kind tag (``rss_db`` or ``aoa_deg``)."""

    values: np.ndarray
    kinds: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if v.shape[-1] != len(self.kinds):
            raise ValueError(f"{v.shape[-1]} columns but {len(self.kinds)} kind tags")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix has non-finite entries")

    @property
    def shape(self):
        return self.values.shape


def feature_values(x) -> np.ndarray:
    return x.values if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X, standardize: bool = True) -> "FeatureScaler":
        X = feature_values(X)
        if not standardize:
            return cls(np.zeros(X.shape[1]), np.ones(X.shape[1]))
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        const = np.flatnonzero(std <= 1e-12 * np.maximum(1.0, np.abs(mean)))
        if len(const):
            raise ConfigError(f"constant feature column(s) {const.tolist()} cannot be standardized")
        return cls(mean, std)

    def transform(self, X) -> np.ndarray:
        return (feature_values(X) - self.mean) / self.std


@dataclass(frozen=True)
class GprHyper:
    signal_var: float
    length_scale: float
    noise_var: float

    def __post_init__(self):
        if not (self.signal_var > 0 and self.length_scale > 0 and self.noise_var > 0):
            raise ValueError(f"hyperparameters must be strictly positive: {self}")

    def log_params(self) -> np.ndarray:
        return np.log([self.signal_var, self.length_scale, self.noise_var])

    @classmethod
    def from_log(cls, theta) -> "GprHyper":
        b2, rho, s2 = np.exp(np.asarray(theta, dtype=float))
        return cls(float(b2), float(rho), float(s2))


@dataclass(frozen=True)
class Prediction:
    mean: tuple[float, float]
    variance_x: float
    variance_y: float


@dataclass
class CoordinateFit:
    hyper: GprHyper
    label_offset: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    log_likelihood: float = float("nan")


@dataclass
class GprModel:
    scaler: FeatureScaler
    train_features: np.ndarray  # scaled, (K, D)
    kinds: tuple[str, ...]
    coords: list[CoordinateFit] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]

    def to_dict(self) -> dict:
        return {
            "scaler": {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()},
            "train_features": self.train_features.tolist(),
            "kinds": list(self.kinds),
            "coords": [
                {
                    "signal_var": c.hyper.signal_var,
                    "length_scale": c.hyper.length_scale,
                    "noise_var": c.hyper.noise_var,
                    "label_offset": c.label_offset,
                    "jitter": c.jitter,
                    "log_likelihood": c.log_likelihood,
                    "chol": c.chol.tolist(),
                    "alpha": c.alpha.tolist(),
                }
                for c in self.coords
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GprModel":
        scaler = FeatureScaler(np.array(doc["scaler"]["mean"]), np.array(doc["scaler"]["std"]))
        coords = [
            CoordinateFit(
                GprHyper(c["signal_var"], c["length_scale"], c["noise_var"]),
                c["label_offset"],
                np.array(c["chol"]),
                np.array(c["alpha"]),
                c["jitter"],
                c["log_likelihood"],
            )
            for c in doc["coords"]
        ]
        return cls(scaler, np.array(doc["train_features"]), tuple(doc["kinds"]), coords)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "GprModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GprTrainConfig:
    restarts: int = 5
    max_iter: int = 200
    tol: float = 1e-8
    standardize: bool = True


def sq_dists(X, Z) -> np.ndarray:
    X = np.atleast_2d(X)
    Z = np.atleast_2d(Z)
    diff = X[:, None, :] - Z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _se_from_sqdist(d2, hyper: GprHyper):
    arg = -np.asarray(d2) / (2.0 * hyper.length_scale)
    return hyper.signal_var * np.where(arg < _FLUSH_ARG, 0.0, np.exp(np.maximum(arg, _FLUSH_ARG)))


def se_kernel(r, r2, hyper: GprHyper) -> float:
    """``b^2 exp(-||r - r2||^2 / (2 rho))``."""
    r = np.asarray(r, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r.shape != r2.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {r2.shape}")
    return float(_se_from_sqdist(np.sum((r - r2) ** 2), hyper))


def gram(X, hyper: GprHyper, Z=None) -> np.ndarray:
    """Kernel matrix between the rows of ``X`` (and ``Z``, when given)."""
    X = feature_values(X)
    return _se_from_sqdist(sq_dists(X, X if Z is None else feature_values(Z)), hyper)


def log_marginal_likelihood(X, y, hyper: GprHyper, sqdist=None) -> tuple[float, np.ndarray]:
    """Log evidence of centered labels ``y`` and its gradient.

    The gradient is taken with respect to ``(log b^2, log rho, log sigma_eps^2)``.
    """
    y = np.asarray(y, dtype=float)
    d2 = sq_dists(feature_values(X), feature_values(X)) if sqdist is None else sqdist
    K = len(y)
    kf = _se_from_sqdist(d2, hyper)
    A = kf + hyper.noise_var * np.eye(K)
    try:
        chol = cholesky_psd(A).factor
    except NotPSDError as exc:
        raise TrainingError(f"covariance not factorizable at {hyper}") from exc
    alpha = cho_solve((chol, True), y)
    value = -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * K * LOG_2PI

    w = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(K))
    grad = 0.5 * np.array([
        np.sum(w * kf),
        np.sum(w * kf * d2) / (2.0 * hyper.length_scale),
        hyper.noise_var * np.trace(w),
    ])
    return float(value), grad


def _ascend(fun, x0, lower, upper, max_iter, tol):
    """Quasi-Newton (BFGS) gradient ascent with backtracking, box-projected."""
    x = np.clip(x0, lower, upper)
    v, g = fun(x)
    if not np.isfinite(v):
        return x, v
    H = np.eye(len(x))
    for _ in range(max_iter):
        d = H @ g
        if g @ d <= 0:
            H = np.eye(len(x))
            d = g
        step = 1.0
        for _ in range(40):
            x_new = np.clip(x + step * d, lower, upper)
            try:
                v_new, g_new = fun(x_new)
            except TrainingError:
                v_new = -np.inf
            if np.isfinite(v_new) and v_new >= v + 1e-4 * (g @ (x_new - x)):
                break
            step *= 0.5
        else:
            break
        s = x_new - x
        yk = g - g_new
        done = abs(v_new - v) <= tol * max(1.0, abs(v))
        sy = s @ yk
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(len(x))
            H = (I - rho * np.outer(s, yk)) @ H @ (I - rho * np.outer(yk, s)) + rho * np.outer(s, s)
        x, v, g = x_new, v_new, g_new
        if done:
            break
    return x, v


def _initial_log_params(d2: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, float]:
    var = float(np.var(y))
    scale = var if var > 0 else 1.0
    off = d2[np.triu_indices(len(d2), k=1)]
    med = float(np.median(off)) if len(off) else 1.0
    med = med if med > 0 else 1.0
    return np.log([scale, med, 0.1 * scale]), scale, med


def optimize_hyper(X, y, cfg: GprTrainConfig, rng: RngStream) -> tuple[GprHyper, float]:
    """Maximize the log marginal likelihood with ``cfg.restarts`` starting points."""
    d2 = sq_dists(feature_values(X), feature_values(X))
    y = np.asarray(y, dtype=float)
    x0, scale, med = _initial_log_params(d2, y)
    lower = np.log([1e-6 * scale, 1e-3 * med, 1e-8 * scale])
    upper = np.log([1e4 * scale, 1e3 * med, 1e2 * scale])

    def fun(theta):
        return log_marginal_likelihood(None, y, GprHyper.from_log(theta), sqdist=d2)

    best_x, best_v = None, -np.inf
    for r in range(cfg.restarts):
        start = x0 if r == 0 else x0 + rng.generator.standard_normal(3)
        try:
            x, v = _ascend(fun, start, lower, upper, cfg.max_iter, cfg.tol)
        except TrainingError:
            continue
        if np.isfinite(v) and v > best_v:
            best_x, best_v = x, v
    if best_x is None:
        raise TrainingError(f"all {cfg.restarts} restarts failed (label variance {scale:.3g}, "
                            f"median squared feature distance {med:.3g})")
    return GprHyper.from_log(best_x), best_v


def _fit_coordinate(Xs: np.ndarray, labels: np.ndarray, hyper: GprHyper, lml=float("nan")) -> CoordinateFit:
    offset = float(labels.mean())
    y = labels - offset
    A = gram(Xs, hyper) + hyper.noise_var * np.eye(len(y))
    try:
        chol, jitter = cholesky_psd(A)
    except NotPSDError as exc:
        raise TrainingError(f"covariance not factorizable at {hyper}") from exc
    alpha = cho_solve((chol, True), y)
    return CoordinateFit(hyper, offset, chol, alpha, jitter, lml)


def _check_training(X_raw, labels):
    X = feature_values(X_raw)
    labels = np.asarray(labels, dtype=float)
    if X.ndim != 2 or labels.shape != (len(X), 2):
        raise ValueError(f"expected (K, D) features and (K, 2) labels, got {X.shape}, {labels.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(labels))):
        raise ValueError("training data has non-finite entries")
    kinds = X_raw.kinds if isinstance(X_raw, FeatureMatrix) else ("feature",) * X.shape[1]
    return X, labels, kinds


def fit_with_hyper(X_raw, labels, hypers, standardize: bool = True) -> GprModel:
    """Condition a GP on the data with fixed hyperparameters (one per coordinate)."""
    X, labels, kinds = _check_training(X_raw, labels)
    if isinstance(hypers, GprHyper):
        hypers = (hypers, hypers)
    scaler = FeatureScaler.fit(X, standardize)
    Xs = scaler.transform(X)
    coords = [_fit_coordinate(Xs, labels[:, i], hypers[i]) for i in range(2)]
    return GprModel(scaler, Xs, kinds, coords)


def train(X_raw, labels, cfg: GprTrainConfig | None = None, rng: RngStream | None = None) -> GprModel:
    """Fit scaler and per-coordinate hyperparameters, then condition on the data."""
    cfg = cfg or GprTrainConfig()
    rng = rng or RngStream(0)
    X, labels, kinds = _check_training(X_raw, labels)
    if len(X) < 4:
        raise ConfigError(f"GPR training needs at least 4 rows, got {len(X)}")
    scaler = FeatureScaler.fit(X, cfg.standardize)
    Xs = scaler.transform(X)
    coords = []
    for i in range(2):
        y = labels[:, i]
        hyper, lml = optimize_hyper(Xs, y - y.mean(), cfg, rng.child(i))
        coords.append(_fit_coordinate(Xs, y, hyper, lml))
    return GprModel(scaler, Xs, kinds, coords)


def predict_many(model: GprModel, X_raw) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances for each row, both of shape (T, 2)."""
    X = np.atleast_2d(feature_values(X_raw))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature vector has non-finite entries")
    Xs = model.scaler.transform(X)
    d2 = sq_dists(Xs, model.train_features)
    mean = np.empty((len(X), 2))
    var = np.empty((len(X), 2))
    for i, c in enumerate(model.coords):
        ks = _se_from_sqdist(d2, c.hyper)
        mean[:, i] = ks @ c.alpha + c.label_offset
        v = solve_triangular(c.chol, ks.T, lower=True)
        var[:, i] = np.maximum(c.hyper.signal_var - np.sum(v * v, axis=0), 0.0)
    return mean, var


def predict(model: GprModel, x_raw) -> Prediction:
    """Posterior mean position and per-coordinate variance for one feature vector."""
    x = np.asarray(feature_values(x_raw), dtype=float)
    if x.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    mean, var = predict_many(model, x[None])
    return Prediction((float(mean[0, 0]), float(mean[0, 1])), float(var[0, 0]), float(var[0, 1]))
