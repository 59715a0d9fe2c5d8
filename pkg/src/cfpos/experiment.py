"""Seeded multi-setup Monte Carlo runs and their error statistics."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cfpos import baselines, gpr
from cfpos.channel import sample_shadow_field
from cfpos.config import METHODS, ExperimentConfig, sweep_field
from cfpos.errors import CfposError
from cfpos.fingerprint import assemble_hybrid, build_offline_db, build_online_vectors
from cfpos.numerics import RngStream
from cfpos.scenario import Position2D, build_scenario, positions_array, sample_test_points

log = logging.getLogger(__name__)

# method -> (estimator family, feature mode)
METHOD_SPECS = {
    "hybrid_gpr": ("gpr", "hybrid"),
    "rss_gpr": ("gpr", "rss_only"),
    "aoa_gpr": ("gpr", "aoa_only"),
    "wknn_rss": ("wknn", "rss_only"),
    "wknn_hybrid": ("wknn", "hybrid"),
    "lr_rss": ("lr", "rss_only"),
    "lr_hybrid": ("lr", "hybrid"),
}

# child indices of the per-setup stream
_S_APS, _S_TPS, _S_SHADOW, _S_OFFLINE, _S_ONLINE, _S_TRAIN = range(6)
CDF_POINTS = 200


def positioning_error(truth, estimate) -> float:
    """Euclidean distance in meters between two positions."""
    a = truth.as_array() if isinstance(truth, Position2D) else np.asarray(truth, dtype=float)
    b = estimate.as_array() if isinstance(estimate, Position2D) else np.asarray(estimate, dtype=float)
    return float(np.hypot(*(a - b)))


@dataclass
class SetupResult:
    setup_index: int
    errors: dict  # method -> (T,) array of meters
    failures: dict  # method -> message
    runtime_s: float = 0.0


def _estimate(method: str, cfg: ExperimentConfig, db, online, rng: RngStream) -> np.ndarray:
    family, mode = METHOD_SPECS[method]
    train_x = assemble_hybrid(db, mode)
    test_x = assemble_hybrid(online, mode)
    if family == "gpr":
        tcfg = gpr.GprTrainConfig(restarts=cfg.gpr_restarts, standardize=cfg.standardize_features)
        model = gpr.train(train_x, db.rp_positions, tcfg, rng)
        return gpr.predict_many(model, test_x)[0]
    if family == "wknn":
        return baselines.wknn_predict_many(train_x, db.rp_positions, test_x,
                                           baselines.WknnConfig(k=cfg.wknn_k))
    return baselines.lr_predict_many(baselines.lr_fit(train_x, db.rp_positions), test_x)


def run_setup(cfg: ExperimentConfig, setup_index: int) -> SetupResult:
    """Simulate one setup and return per-method positioning errors.

    All randomness comes from streams derived from ``(cfg.seed, setup_index)``,
    so the result does not depend on which process runs it or in what order.
    """
    t0 = time.perf_counter()
    root = RngStream(cfg.seed, setup_index)
    scenario = build_scenario(cfg.area_side_m, cfg.n_aps, cfg.n_rps, ap_height=cfg.ap_height_m,
                              ue_height=cfg.ue_height_m, antenna_count=cfg.n_antennas,
                              element_spacing=cfg.spacing_wavelengths, rng=root.child(_S_APS))
    tps = positions_array(sample_test_points(cfg.area_side_m, cfg.n_testpoints, root.child(_S_TPS)))
    points = np.vstack([scenario.rp_xy(), tps])
    shadow = sample_shadow_field(points, cfg.n_aps, cfg.sigma_sf_db, cfg.d_corr_m,
                                 root.child(_S_SHADOW))
    pathloss, radio, music = cfg.pathloss(), cfg.radio(), cfg.music()
    db = build_offline_db(scenario, pathloss, radio, shadow, cfg.aoa_noise_std_deg,
                          root.child(_S_OFFLINE))
    online = build_online_vectors(scenario, tps, pathloss, radio, shadow, music,
                                  root.child(_S_ONLINE))
    errors, failures = {}, {}
    train_rng = root.child(_S_TRAIN)
    for method in cfg.methods:
        try:
            est = _estimate(method, cfg, db, online, train_rng.child(METHODS.index(method)))
            if not np.all(np.isfinite(est)):
                raise CfposError("non-finite position estimate")
        except (CfposError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("setup %d: %s failed: %s", setup_index, method, exc)
            failures[method] = f"{type(exc).__name__}: {exc}"
            continue
        errors[method] = np.hypot(*(est - online.truth).T)
    return SetupResult(setup_index, errors, failures, time.perf_counter() - t0)


@dataclass
class MethodSummary:
    mean_m: float
    median_m: float
    p90_m: float
    n_samples: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    setups: list  # SetupResult, ordered by setup index
    runtime_s: float = 0.0
    summaries: dict = field(default_factory=dict)
    cdfs: dict = field(default_factory=dict)  # method -> (grid, cdf)
    failures: list = field(default_factory=list)  # (setup, method, message)

    def __post_init__(self):
        self._aggregate()

    def _aggregate(self):
        self.summaries, self.cdfs, self.failures = {}, {}, []
        for s in self.setups:
            for method, msg in s.failures.items():
                self.failures.append((s.setup_index, method, msg))
        for method in self.config.methods:
            samples = self.samples(method)
            if samples.size == 0:
                self.failures.append((None, method, "all setups failed"))
                continue
            self.summaries[method] = MethodSummary(float(samples.mean()), float(np.median(samples)),
                                                   float(np.percentile(samples, 90)), samples.size)
            self.cdfs[method] = empirical_cdf(samples)

    def samples(self, method: str) -> np.ndarray:
        parts = [s.errors[method] for s in self.setups if method in s.errors]
        return np.concatenate(parts) if parts else np.empty(0)

    def matrix(self, method: str) -> np.ndarray:
        """Errors as (n_setups, T) with NaN where the method failed."""
        T = self.config.n_testpoints
        return np.vstack([s.errors.get(method, np.full(T, np.nan)) for s in self.setups])

    def subset(self, setup_indices) -> "ExperimentResult":
        wanted = set(setup_indices)
        return ExperimentResult(self.config, [s for s in self.setups if s.setup_index in wanted],
                                self.runtime_s)

    @property
    def partial_failure(self) -> bool:
        return bool(self.failures)


def empirical_cdf(samples, n_points: int = CDF_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """CDF of ``samples`` on an even grid from 0 to the largest sample."""
    x = np.sort(np.asarray(samples, dtype=float))
    grid = np.linspace(0.0, x[-1], n_points)
    return grid, np.searchsorted(x, grid, side="right") / len(x)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    workers = cfg.workers if workers is None else workers
    t0 = time.perf_counter()
    indices = range(cfg.n_setups)
    if workers > 1 and cfg.n_setups > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.n_setups)) as pool:
            setups = list(pool.map(run_setup, [cfg] * cfg.n_setups, indices))
    else:
        setups = []
        for i in indices:
            setups.append(run_setup(cfg, i))
            log.info("setup %d/%d done in %.1f s", i + 1, cfg.n_setups, setups[-1].runtime_s)
    return ExperimentResult(cfg, setups, time.perf_counter() - t0)


def run_sweep(cfg: ExperimentConfig, param: str, values, workers: int | None = None) -> list:
    """One :class:`ExperimentResult` per value of ``param``, all with the same seed."""
    key = sweep_field(param)
    return [(v, run_experiment(cfg.replace(**{key: v}), workers)) for v in values]
