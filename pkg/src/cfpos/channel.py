"""Large-scale fading, spatial channel covariance, and received-sample synthesis.

All powers are linear milliwatts internally; dB appears only at the edges
(path-loss gains, RSS estimates, shadowing values). Most functions broadcast
over leading axes so a whole AP's worth of links can be handled at once.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from cfpos.errors import ConfigError, DomainError, RankDeficiencyWarning, ValidityWarning
from cfpos.numerics import RngStream, bessel_j, cholesky_psd, psd_factor

SPEED_OF_LIGHT = 299_792_458.0
MAX_SPREAD_DEG = 15.0


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class PathLossParams:
    p0_db: float = -28.8
    d0: float = 1.0
    gamma: float = 3.53
    sigma_sf_db: float = 8.0
    d_corr: float = 13.0

    def __post_init__(self):
        if self.gamma <= 0 or self.d0 <= 0 or self.d_corr <= 0:
            raise ConfigError("gamma, d0 and d_corr must be positive")
        if self.sigma_sf_db < 0:
            raise ConfigError("sigma_sf_db must be non-negative")


@dataclass(frozen=True)
class RadioParams:
    tx_power_mw: float = 100.0
    noise_power_mw: float = 10.0 ** (-9.6)
    pilot_len: int = 1
    n_samples: int = 200
    angular_spread_deg: float = 10.0
    carrier_hz: float = 2e9

    def __post_init__(self):
        if self.tx_power_mw <= 0 or self.noise_power_mw < 0:
            raise ConfigError("transmit power must be positive and noise power non-negative")
        if self.pilot_len != 1:
            raise ConfigError("only a single pilot symbol per sample (pilot_len=1) is modeled")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.angular_spread_deg < 0:
            raise ConfigError("angular spread must be non-negative")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ShadowField:
    """Per-AP shadowing (dB) at a fixed list of location points.

    ``values[l, m]`` is the shadowing from AP ``l`` to point ``m``.
    """

    points: np.ndarray  # (P, 2)
    values: np.ndarray  # (L, P)


@dataclass(frozen=True)
class LinkStats:
    beta_linear: float
    nominal_aoa_deg: float
    channel_cov: np.ndarray

    def to_json(self) -> str:
        cov = np.asarray(self.channel_cov)
        return json.dumps({
            "beta_linear": float(self.beta_linear),
            "nominal_aoa_deg": float(self.nominal_aoa_deg),
            "channel_cov_real": cov.real.tolist(),
            "channel_cov_imag": cov.imag.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "LinkStats":
        doc = json.loads(text)
        cov = np.array(doc["channel_cov_real"]) + 1j * np.array(doc["channel_cov_imag"])
        return cls(doc["beta_linear"], doc["nominal_aoa_deg"], cov)


def path_loss_beta_db(d, params: PathLossParams, shadow_db=0.0):
    """Large-scale gain in dB from the log-distance model plus shadowing."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be positive")
    out = params.p0_db - 10.0 * params.gamma * np.log10(d / params.d0) + shadow_db
    return out if np.ndim(out) else float(out)


def shadow_covariance(points, sigma_sf_db: float, d_corr: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    return sigma_sf_db**2 * 2.0 ** (-dist / d_corr)


def sample_shadow_field(points, L: int, sigma_sf_db: float, d_corr: float,
                        rng: RngStream) -> ShadowField:
    """Draw one spatially correlated shadowing field per AP.

    Points are drawn jointly, so RPs and test points of one setup share the
    same spatial process. Fields of different APs are independent.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ConfigError("shadow field needs at least one point")
    if L < 1:
        raise ConfigError("shadow field needs at least one AP")
    z = rng.generator.standard_normal((len(pts), L))
    if sigma_sf_db == 0:
        return ShadowField(pts, np.zeros((L, len(pts))))
    corr = 2.0 ** (-np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)) / d_corr)
    chol = cholesky_psd(corr).factor
    return ShadowField(pts, sigma_sf_db * (chol @ z).T)


def steering_vector(theta_deg, N: int, spacing: float) -> np.ndarray:
    """ULA steering vector(s), shape ``np.shape(theta_deg) + (N,)``.

    Entry ``n`` is ``exp(-j 2 pi spacing n cos(theta))``; the array axis lies
    along x, so ``theta`` and ``-theta`` give the same vector.
    """
    theta = np.deg2rad(np.asarray(theta_deg, dtype=float))
    n = np.arange(N)
    return np.exp(-2j * np.pi * spacing * np.multiply.outer(np.cos(theta), n))


def scaling_matrix(zeta, N: int) -> np.ndarray:
    """Bessel scaling factors ``J0((m-n) zeta) + J2((m-n) zeta)``, shape (..., N, N)."""
    zeta = np.asarray(zeta, dtype=float)
    lags = np.arange(N)
    arg = np.multiply.outer(zeta, lags)
    per_lag = bessel_j(0, arg) + bessel_j(2, arg)  # (..., N); even in the lag
    lag = np.abs(np.subtract.outer(lags, lags))
    return per_lag[..., lag]


def disk_scattering_cov(beta_linear, nominal_aoa_deg, N: int, spacing: float,
                        delta_deg: float) -> np.ndarray:
    """Channel covariance ``beta * G(zeta) ⊙ a a^H`` of the disk-scattering model.

    ``beta_linear`` and ``nominal_aoa_deg`` broadcast together; the result has
    shape ``broadcast_shape + (N, N)``. A warning is issued for angular
    spreads above 15 degrees, where the small-angle form degrades.
    """
    if N < 2:
        raise ConfigError(f"disk-scattering covariance needs N >= 2, got {N}")
    if delta_deg > MAX_SPREAD_DEG:
        warnings.warn(
            f"angular spread {delta_deg} deg exceeds the {MAX_SPREAD_DEG} deg small-angle range",
            ValidityWarning,
            stacklevel=2,
        )
    beta, phi = np.broadcast_arrays(np.asarray(beta_linear, dtype=float),
                                    np.asarray(nominal_aoa_deg, dtype=float))
    zeta = 2.0 * np.pi * spacing * np.deg2rad(delta_deg) * np.sin(np.deg2rad(phi))
    a = steering_vector(phi, N, spacing)
    outer = a[..., :, None] * np.conj(a[..., None, :])
    return beta[..., None, None] * scaling_matrix(zeta, N) * outer


def disk_scattering_factor(beta_linear, nominal_aoa_deg, N: int, spacing: float,
                           delta_deg: float, rtol: float = 1e-12) -> np.ndarray:
    """Factor F with ``F F^H`` equal to :func:`disk_scattering_cov`.

    Uses ``C = beta D_a G D_a^H`` with ``D_a = diag(a)``, so only the real
    symmetric ``G`` is decomposed. Eigen-directions with eigenvalue below
    ``rtol`` times the largest are dropped (the factor keeps as many columns
    as the widest link in the stack needs).
    """
    if N < 2:
        raise ConfigError(f"disk-scattering covariance needs N >= 2, got {N}")
    beta, phi = np.broadcast_arrays(np.asarray(beta_linear, dtype=float),
                                    np.asarray(nominal_aoa_deg, dtype=float))
    zeta = 2.0 * np.pi * spacing * np.deg2rad(delta_deg) * np.sin(np.deg2rad(phi))
    w, v = np.linalg.eigh(scaling_matrix(zeta, N))
    w = np.clip(w, 0.0, None)
    keep = int(np.max(np.sum(w > rtol * w[..., -1:], axis=-1), initial=1))
    fg = v[..., -keep:] * np.sqrt(w[..., None, -keep:])
    a = steering_vector(phi, N, spacing)
    return np.sqrt(beta)[..., None, None] * a[..., :, None] * fg


def make_link(beta_linear: float, nominal_aoa_deg: float, N: int, spacing: float,
              delta_deg: float) -> LinkStats:
    cov = disk_scattering_cov(beta_linear, nominal_aoa_deg, N, spacing, delta_deg)
    return LinkStats(float(beta_linear), float(nominal_aoa_deg), cov)


def _complex_normal(gen: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian with ``E|z|^2 = scale**2``."""
    z = gen.standard_normal(tuple(shape) + (2,)).view(np.complex128)[..., 0]
    z *= scale / math.sqrt(2.0)
    return z


def synthesize_samples(link: LinkStats | np.ndarray | None, radio: RadioParams, rng: RngStream,
                       factor: np.ndarray | None = None) -> np.ndarray:
    """Received sample batch ``sqrt(rho) h_s + w_s`` for ``s = 1..S``.

    Each column carries an independent channel draw from the link covariance
    and independent noise. ``link`` may be a :class:`LinkStats` or a bare
    covariance stack of shape (..., N, N); the result has shape (..., N, S).
    A precomputed covariance factor may be passed as ``factor`` instead.
    """
    if factor is None:
        cov = link.channel_cov if isinstance(link, LinkStats) else np.asarray(link)
        factor = psd_factor(cov)
    r = factor.shape[-1]
    S = radio.n_samples
    gen = rng.generator
    g = _complex_normal(gen, factor.shape[:-2] + (r, S), math.sqrt(radio.tx_power_mw))
    y = factor @ g
    if radio.noise_power_mw > 0:
        y += _complex_normal(gen, y.shape, math.sqrt(radio.noise_power_mw))
    return y


def semicircle_offsets(gen: np.random.Generator, size) -> np.ndarray:
    """Azimuth projection of points uniform on the unit disk."""
    r = np.sqrt(gen.uniform(size=size))
    return r * np.cos(gen.uniform(0.0, 2.0 * np.pi, size=size))


def synthesize_samples_pathsum(beta_linear: float, nominal_aoa_deg: float, N: int,
                               spacing: float, radio: RadioParams, rng: RngStream,
                               n_paths: int = 100) -> np.ndarray:
    """Alternate generator summing ``n_paths`` discrete scattered paths per sample.

    Path angles deviate from the nominal azimuth by ``delta * u`` with ``u``
    the x-projection of a point uniform on the unit disk; each sample column
    redraws angles and gains. Retained for cross-checking the covariance form.
    """
    gen = rng.generator
    S = radio.n_samples
    delta = np.deg2rad(radio.angular_spread_deg)
    theta = np.deg2rad(nominal_aoa_deg) + delta * semicircle_offsets(gen, (S, n_paths))
    n = np.arange(N)
    a = np.exp(-2j * np.pi * spacing * np.cos(theta)[..., None] * n)  # (S, M, N)
    alpha = _complex_normal(gen, (S, n_paths))
    h = math.sqrt(beta_linear / n_paths) * np.einsum("sm,smn->ns", alpha, a)
    y = math.sqrt(radio.tx_power_mw) * h
    if radio.noise_power_mw > 0:
        y += _complex_normal(gen, (N, S), math.sqrt(radio.noise_power_mw))
    return y


def estimate_rss_db(batch, rho: float):
    """Average per-sample received energy, normalized by ``rho``, in dB."""
    y = np.asarray(batch)
    energy = (np.abs(y) ** 2).sum(axis=-2).mean(axis=-1)
    if np.any(energy <= 0):
        raise ConfigError("received batch carries no energy; RSS would be -inf")
    out = 10.0 * np.log10(energy / rho)
    return out if np.ndim(out) else float(out)


def estimate_sample_cov(batch) -> np.ndarray:
    """Sample covariance ``(1/S) sum_s y_s y_s^H`` over the last axis."""
    y = np.asarray(batch)
    N, S = y.shape[-2:]
    if S < N:
        warnings.warn(f"sample covariance from S={S} < N={N} samples is rank deficient",
                      RankDeficiencyWarning, stacklevel=2)
    return (y @ np.conj(np.swapaxes(y, -1, -2))) / S
