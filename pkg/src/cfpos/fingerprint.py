"""Offline fingerprint databases and online test vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cfpos.channel import (
    PathLossParams,
    RadioParams,
    ShadowField,
    db_to_linear,
    disk_scattering_factor,
    estimate_rss_db,
    estimate_sample_cov,
    path_loss_beta_db,
    synthesize_samples,
)
from cfpos.errors import ConfigError
from cfpos.gpr import FeatureMatrix
from cfpos.music import MusicConfig, estimate_aoa_many
from cfpos.numerics import RngStream
from cfpos.scenario import (
    Position2D,
    Scenario,
    distance_3d_array,
    nominal_aoa_array,
    positions_array,
    wrap_deg,
)

MODES = ("rss_only", "aoa_only", "hybrid")
_CHUNK = 128


@dataclass(frozen=True)
class FingerprintDb:
    rp_positions: np.ndarray  # (K, 2)
    rss_db: np.ndarray  # (K, L)
    aoa_deg: np.ndarray  # (K, L)

    def __post_init__(self):
        K = len(self.rp_positions)
        if self.rp_positions.shape != (K, 2) or self.rss_db.shape != self.aoa_deg.shape \
                or self.rss_db.shape[0] != K:
            raise ValueError("inconsistent fingerprint database dimensions")

    def save_csv(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        _write_matrix(d / "positions.csv", self.rp_positions, ["x_m", "y_m"])
        L = self.rss_db.shape[1]
        _write_matrix(d / "rss.csv", self.rss_db, [f"ap{l}" for l in range(L)])
        _write_matrix(d / "aoa.csv", self.aoa_deg, [f"ap{l}" for l in range(L)])

    @classmethod
    def load_csv(cls, directory) -> "FingerprintDb":
        d = Path(directory)
        return cls(_read_matrix(d / "positions.csv"), _read_matrix(d / "rss.csv"),
                   _read_matrix(d / "aoa.csv"))


def _write_matrix(path: Path, m: np.ndarray, header) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in m:
            w.writerow([f"{v:.17g}" for v in row])


def _read_matrix(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r] for r in rows], dtype=float)


@dataclass(frozen=True)
class TestVector:
    rss_db: np.ndarray  # (L,)
    aoa_deg: np.ndarray  # (L,)
    truth: Position2D


@dataclass(frozen=True)
class OnlineBatch:
    rss_db: np.ndarray  # (T, L)
    aoa_deg: np.ndarray  # (T, L)
    truth: np.ndarray  # (T, 2)
    low_confidence: np.ndarray  # (T, L) bool

    def __len__(self):
        return len(self.truth)

    def __getitem__(self, i) -> TestVector:
        return TestVector(self.rss_db[i], self.aoa_deg[i], Position2D(*map(float, self.truth[i])))


def _shadow_lookup(shadow: ShadowField, xy: np.ndarray) -> np.ndarray:
    """Shadowing values (P, L) at the given points, which must be in the field."""
    index = {tuple(p): i for i, p in enumerate(shadow.points.tolist())}
    try:
        idx = [index[tuple(p)] for p in xy.tolist()]
    except KeyError as exc:
        raise ConfigError(f"shadow field does not cover point {exc.args[0]}") from None
    return shadow.values[:, idx].T


def _large_scale(scenario: Scenario, xy: np.ndarray, pathloss: PathLossParams,
                 shadow: ShadowField):
    dist = distance_3d_array(scenario.ap_xy(), scenario.ap_heights(), xy, scenario.ue_height)
    beta_db = path_loss_beta_db(dist, pathloss, _shadow_lookup(shadow, xy))
    return db_to_linear(beta_db), nominal_aoa_array(scenario.ap_xy(), xy)


def _ap_batches(scenario, beta, aoa, radio, rng, ap):
    site = scenario.aps[ap]
    stream = rng.child(ap)
    for s in range(0, len(beta), _CHUNK):
        factor = disk_scattering_factor(beta[s:s + _CHUNK, ap], aoa[s:s + _CHUNK, ap],
                                        site.antenna_count, site.element_spacing,
                                        radio.angular_spread_deg)
        yield s, synthesize_samples(None, radio, stream, factor=factor)


def build_offline_db(scenario: Scenario, pathloss: PathLossParams, radio: RadioParams,
                     shadow: ShadowField, aoa_noise_std_deg: float, rng: RngStream) -> FingerprintDb:
    """Simulate RSS and noisy geometric AOA fingerprints at every RP."""
    xy = scenario.rp_xy()
    beta, aoa = _large_scale(scenario, xy, pathloss, shadow)
    K, L = beta.shape
    rss = np.empty((K, L))
    sample_rng = rng.child(1)
    for ap in range(L):
        for s, y in _ap_batches(scenario, beta, aoa, radio, sample_rng, ap):
            rss[s:s + len(y), ap] = estimate_rss_db(y, radio.tx_power_mw)
    noise = rng.child(0).generator.normal(0.0, 1.0, size=(K, L)) * aoa_noise_std_deg
    return FingerprintDb(xy, rss, wrap_deg(aoa + noise))


def build_online_vectors(scenario: Scenario, tps, pathloss: PathLossParams, radio: RadioParams,
                         shadow: ShadowField, music_cfg: MusicConfig, rng: RngStream) -> OnlineBatch:
    """Estimated RSS and MUSIC AOA at each test point.

    MUSIC's mirror ambiguity is resolved with the true half-plane of the test
    point relative to each AP.
    """
    xy = positions_array(tps) if not isinstance(tps, np.ndarray) else tps
    beta, aoa = _large_scale(scenario, xy, pathloss, shadow)
    T, L = beta.shape
    rss = np.empty((T, L))
    est = np.empty((T, L))
    low = np.zeros((T, L), dtype=bool)
    hints = np.where(xy[:, None, 1] >= scenario.ap_xy()[None, :, 1], 1, -1)
    for ap in range(L):
        site = scenario.aps[ap]
        for s, y in _ap_batches(scenario, beta, aoa, radio, rng, ap):
            n = len(y)
            rss[s:s + n, ap] = estimate_rss_db(y, radio.tx_power_mw)
            angle, _, _, lowc = estimate_aoa_many(
                estimate_sample_cov(y), music_cfg, hints[s:s + n, ap],
                site.antenna_count, site.element_spacing)
            est[s:s + n, ap] = angle
            low[s:s + n, ap] = lowc
    return OnlineBatch(rss, est, xy.copy(), low)


def build_online_vector(scenario: Scenario, tp: Position2D, pathloss: PathLossParams,
                        radio: RadioParams, shadow: ShadowField, music_cfg: MusicConfig,
                        rng: RngStream) -> TestVector:
    return build_online_vectors(scenario, [tp], pathloss, radio, shadow, music_cfg, rng)[0]


def assemble_hybrid(source, mode: str = "hybrid") -> FeatureMatrix:
    """Feature matrix (or vector) for the chosen fingerprint mode.

    Hybrid features place all RSS columns before all AOA columns.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown feature mode {mode!r}; expected one of {MODES}")
    rss = np.asarray(source.rss_db, dtype=float)
    aoa = np.asarray(source.aoa_deg, dtype=float)
    L = rss.shape[-1]
    if mode == "rss_only":
        return FeatureMatrix(rss, ("rss_db",) * L)
    if mode == "aoa_only":
        return FeatureMatrix(aoa, ("aoa_deg",) * L)
    return FeatureMatrix(np.concatenate([rss, aoa], axis=-1), ("rss_db",) * L + ("aoa_deg",) * L)
