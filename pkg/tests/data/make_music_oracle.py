"""Regenerate music_oracle.json: brute-force MUSIC error statistics.

Two populations are recorded: links at a fixed 100 m with stratified angles,
and links drawn like the simulated deployments (random AP and UE positions,
3D distance, 8 dB log-normal shadowing).

Independent of the package: channel covariance from scipy Bessel functions,
factors and noise subspaces from scipy's eigensolver, pseudospectrum from the
full noise-subspace projection on a 0.01 degree grid with no refinement.

Run: python3 tests/data/make_music_oracle.py
"""

import json
import math
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.special

N, SPACING, DELTA_DEG, S, TRIALS = 25, 0.5, 10.0, 200, 500
REPEATS = 10
SCENARIO_LINKS = 5000
RHO_MW, NOISE_MW = 100.0, 10 ** -9.6
DIST_M = 100.0
SEED = 20240917


def steering(theta_deg):
    return np.exp(-2j * np.pi * SPACING * np.arange(N) * np.cos(np.radians(theta_deg)))


def covariance(phi_deg, beta):
    zeta = 2 * np.pi * SPACING * np.radians(DELTA_DEG) * np.sin(np.radians(phi_deg))
    lag = np.subtract.outer(np.arange(N), np.arange(N)) * zeta
    g = scipy.special.jv(0, lag) + scipy.special.jv(2, lag)
    a = steering(phi_deg)
    return beta * g * np.outer(a, a.conj())


def music_error(gen, phi, beta, A, grid):
    w, v = scipy.linalg.eigh(covariance(phi, beta))
    f = v * np.sqrt(np.clip(w, 0, None))
    h = f @ (gen.standard_normal((N, S)) + 1j * gen.standard_normal((N, S))) / math.sqrt(2)
    noise = (gen.standard_normal((N, S)) + 1j * gen.standard_normal((N, S))) * math.sqrt(NOISE_MW / 2)
    y = math.sqrt(RHO_MW) * h + noise
    R = y @ y.conj().T / S
    _, u = scipy.linalg.eigh(R)
    un = u[:, :-1]
    spec = 1.0 / np.sum(np.abs(un.conj().T @ A) ** 2, axis=0)
    return abs(grid[np.argmax(spec)] - phi)


def scenario_links(gen, count):
    """AP/UE pairs drawn like the simulated deployments: 200 m square, 8 dB shadowing."""
    ap = gen.uniform(0, 200, (count, 2))
    ue = gen.uniform(0, 200, (count, 2))
    d = np.hypot(np.hypot(*(ue - ap).T), 10.0 - 1.5)
    beta_db = -28.8 - 35.3 * np.log10(d) + 8.0 * gen.standard_normal(count)
    # the ULA cannot tell phi from -phi, so the search range [0, 180] sees |phi|
    phi = np.abs(np.degrees(np.arctan2(*(ue - ap).T[::-1])))
    return phi, 10 ** (beta_db / 10)


def main():
    gen = np.random.default_rng(SEED)
    beta = 10 ** ((-28.8 - 35.3 * math.log10(DIST_M)) / 10)
    grid = np.arange(0, 18001) * 0.01
    A = np.exp(-2j * np.pi * SPACING * np.outer(np.arange(N), np.cos(np.radians(grid))))
    errors = []
    # stratified angles, repeated to pin the median down tightly
    phis = np.tile((np.arange(TRIALS) + 0.5) * 180.0 / TRIALS, REPEATS)
    for phi in phis:
        errors.append(music_error(gen, phi, beta, A, grid))
    errors = np.array(errors)
    scen_phi, scen_beta = scenario_links(gen, SCENARIO_LINKS)
    scen = np.array([music_error(gen, p, b, A, grid) for p, b in zip(scen_phi, scen_beta)])
    doc = {
        "description": "brute-force MUSIC |AOA error| in degrees at phi = (i + 0.5) * 180 / trials",
        "n_antennas": N, "spacing": SPACING, "angular_spread_deg": DELTA_DEG, "n_samples": S,
        "distance_m": DIST_M, "trials": TRIALS, "repeats": REPEATS, "seed": SEED, "grid_step_deg": 0.01,
        "median_abs_error_deg": float(np.median(errors)),
        "mean_abs_error_deg": float(errors.mean()),
        "scenario_links": SCENARIO_LINKS,
        "scenario_median_abs_error_deg": float(np.median(scen)),
    }
    Path(__file__).with_name("music_oracle.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(doc)


if __name__ == "__main__":
    main()
