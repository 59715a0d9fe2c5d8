"""Single-source MUSIC angle-of-arrival estimation for a ULA."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from cfpos.channel import steering_vector
from cfpos.errors import ConfigError
from cfpos.numerics import hermitian_eig
from cfpos.scenario import wrap_deg

DENOM_FLOOR = 1e-18
LOW_CONFIDENCE_RATIO = 1.5
_CHUNK = 512


@dataclass(frozen=True)
class MusicConfig:
    grid_step_deg: float = 0.1
    n_sources: int = 1
    refine: bool = True

    def __post_init__(self):
        if not 0 < self.grid_step_deg <= 1:
            raise ConfigError(f"grid step must be in (0, 1] degrees, got {self.grid_step_deg}")
        if self.n_sources != 1:
            raise ConfigError("only single-source estimation is supported")

    def grid(self) -> np.ndarray:
        n = int(round(180.0 / self.grid_step_deg))
        return np.linspace(0.0, 180.0, n + 1)


@dataclass(frozen=True)
class AoaEstimate:
    angle_deg: float
    peak_value: float
    grid_step_deg: float
    refined: bool
    low_confidence: bool = False


def noise_subspace(R) -> np.ndarray:
    """Orthonormal eigenvectors of the ``N-1`` smallest eigenvalues of ``R``."""
    R = np.asarray(R)
    if R.shape[-1] < 2:
        raise ConfigError("noise subspace needs N >= 2")
    _, vecs = hermitian_eig(R)
    return vecs[..., :, :-1]


def pseudospectrum(Un, theta_deg, N: int, spacing: float):
    """MUSIC pseudospectrum ``1 / (a^H Un Un^H a)`` at one or more angles.

    Denominators below 1e-18 are floored, capping the value at 1e18.
    """
    Un = np.asarray(Un)
    a = steering_vector(theta_deg, N, spacing)  # (..., N)
    proj = a.conj() @ Un  # (..., N-1)
    denom = np.sum(np.abs(proj) ** 2, axis=-1)
    out = 1.0 / np.maximum(denom, DENOM_FLOOR)
    return out if np.ndim(out) else float(out)


def _search(R: np.ndarray, cfg: MusicConfig, N: int, spacing: float):
    grid = cfg.grid()
    A = steering_vector(grid, N, spacing).T  # (N, G)
    _, vecs = hermitian_eig(R)
    # Un Un^H = I - u1 u1^H for the orthonormal eigenbasis, so the noise-subspace
    # denominator reduces to ||a||^2 - |u1^H a|^2 with ||a||^2 = N.
    u1 = vecs[..., :, -1]
    spec = 1.0 / np.maximum(N - np.abs(u1.conj() @ A) ** 2, DENOM_FLOOR)

    idx = np.argmax(spec, axis=-1)
    rows = np.arange(len(idx))
    peak = spec[rows, idx]
    angle = grid[idx].copy()
    refined = np.zeros(len(idx), dtype=bool)
    if cfg.refine:
        inner = (idx > 0) & (idx < len(grid) - 1)
        i = idx[inner]
        r = rows[inner]
        lo, mid, hi = (np.log(spec[r, i - 1]), np.log(spec[r, i]), np.log(spec[r, i + 1]))
        curv = lo - 2.0 * mid + hi
        with np.errstate(divide="ignore", invalid="ignore"):
            offset = np.where(curv < 0, 0.5 * (lo - hi) / curv, 0.0)
        offset = np.clip(offset, -0.5, 0.5)
        angle[inner] = grid[i] + offset * cfg.grid_step_deg
        refined[inner] = True
    low_conf = peak / np.median(spec, axis=-1) < LOW_CONFIDENCE_RATIO
    return angle, peak, refined, low_conf


def estimate_aoa_many(R, cfg: MusicConfig, side_hint, N: int, spacing: float):
    """Batched estimation over a stack of covariances of shape (B, N, N).

    ``side_hint`` (+1 or -1 per matrix) selects the half-plane the ULA cannot
    distinguish. Returns ``(angle_deg, peak_value, refined, low_confidence)``
    arrays of length B.
    """
    R = np.asarray(R)
    flat = R.reshape(-1, N, N)
    hints = np.broadcast_to(np.asarray(side_hint), R.shape[:-2]).reshape(-1)
    if np.any((hints != 1) & (hints != -1)):
        raise ConfigError("side_hint must be +1 or -1")
    parts = [_search(flat[s:s + _CHUNK], cfg, N, spacing) for s in range(0, len(flat), _CHUNK)]
    angle, peak, refined, low = (np.concatenate(p) for p in zip(*parts))
    angle = wrap_deg(np.where(hints > 0, angle, -angle))
    shape = R.shape[:-2]
    return angle.reshape(shape), peak.reshape(shape), refined.reshape(shape), low.reshape(shape)


def estimate_aoa(R, cfg: MusicConfig, side_hint: int, N: int, spacing: float) -> AoaEstimate:
    """Estimate the azimuth of a single source from covariance ``R``.

    The pseudospectrum is searched on [0, 180] degrees, the peak optionally
    refined by a parabola through the log-spectrum, and the result mapped to
    the side of the array given by ``side_hint``.
    """
    angle, peak, refined, low = estimate_aoa_many(np.asarray(R)[None], cfg, [side_hint], N, spacing)
    return AoaEstimate(float(angle[0]), float(peak[0]), cfg.grid_step_deg, bool(refined[0]),
                       bool(low[0]))


def dump_pseudospectrum_csv(path, R, cfg: MusicConfig, N: int, spacing: float) -> None:
    """Write ``theta_deg,value`` rows of the pseudospectrum of ``R`` for inspection."""
    grid = cfg.grid()
    values = pseudospectrum(noise_subspace(R), grid, N, spacing)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "value"])
        for t, v in zip(grid, values):
            w.writerow([f"{t:.9g}", f"{v:.9g}"])
