import json
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from cfpos.channel import (
    PathLossParams,
    RadioParams,
    db_to_linear,
    disk_scattering_factor,
    estimate_sample_cov,
    path_loss_beta_db,
    steering_vector,
    synthesize_samples,
)
from cfpos.errors import ConfigError
from cfpos.music import (
    DENOM_FLOOR,
    MusicConfig,
    dump_pseudospectrum_csv,
    estimate_aoa,
    estimate_aoa_many,
    noise_subspace,
    pseudospectrum,
)
from cfpos.numerics import RngStream

CFG = MusicConfig()
ORACLE = json.loads((Path(__file__).parent / "data" / "music_oracle.json").read_text())


def exact_cov(phi, N=25, noise=0.0, power=1.0):
    a = steering_vector(phi, N, 0.5)
    return power * np.outer(a, a.conj()) + noise * np.eye(N)


class TestNoiseSubspace:
    def test_orthogonal_to_signal(self):
        a = steering_vector(90.0, 4, 0.5)
        un = noise_subspace(np.outer(a, a.conj()) + np.eye(4))
        assert un.shape == (4, 3)
        assert np.max(np.abs(a.conj() @ un)) < 1e-9

    def test_isotropic(self):
        un = noise_subspace(np.eye(5))
        np.testing.assert_allclose(un.conj().T @ un, np.eye(4), atol=1e-12)

    def test_diagonal(self):
        un = noise_subspace(np.diag([3.0, 1.0, 1.0]))
        assert np.allclose(np.abs(un[0]), 0)

    def test_too_small(self):
        with pytest.raises(ConfigError):
            noise_subspace(np.eye(1))


class TestPseudospectrum:
    def test_capped_peak(self):
        un = noise_subspace(exact_cov(60.0, N=6))
        assert pseudospectrum(un, 60.0, 6, 0.5) == pytest.approx(1 / DENOM_FLOOR)

    def test_complement_modest(self):
        N, phi = 6, 40.0
        a = steering_vector(phi, N, 0.5) / np.sqrt(N)
        un = scipy.linalg.null_space(a.conj()[None, :])
        b = steering_vector(phi + 90.0, N, 0.5)
        expect = 1.0 / (N - abs(a.conj() @ b) ** 2)
        assert pseudospectrum(un, phi + 90.0, N, 0.5) == pytest.approx(expect, rel=1e-10)
        assert 0 < expect < 10

    def test_unitary_mixing(self, np_rng):
        un = noise_subspace(exact_cov(70.0, N=5, noise=0.1))
        q, _ = np.linalg.qr(np_rng.standard_normal((4, 4)) + 1j * np_rng.standard_normal((4, 4)))
        theta = np.linspace(0, 180, 37)
        np.testing.assert_allclose(pseudospectrum(un @ q, theta, 5, 0.5),
                                   pseudospectrum(un, theta, 5, 0.5), rtol=1e-9)

    def test_positive(self):
        un = noise_subspace(exact_cov(20.0, N=8, noise=1.0))
        assert np.all(pseudospectrum(un, np.linspace(-180, 180, 721), 8, 0.5) > 0)


class TestEstimate:
    def test_exact_case(self):
        est = estimate_aoa(exact_cov(47.3), CFG, +1, 25, 0.5)
        assert abs(est.angle_deg - 47.3) <= CFG.grid_step_deg
        assert est.refined and est.peak_value > 0 and not est.low_confidence

    def test_mirror(self):
        est = estimate_aoa(exact_cov(47.3), CFG, -1, 25, 0.5)
        assert abs(est.angle_deg + 47.3) <= CFG.grid_step_deg

    @pytest.mark.parametrize("phi", range(10, 171, 10))
    def test_grid_of_angles(self, phi):
        for N in (4, 25):
            est = estimate_aoa(exact_cov(float(phi), N=N, noise=1e-3), CFG, +1, N, 0.5)
            assert abs(est.angle_deg - phi) <= CFG.grid_step_deg

    def test_scale_and_shift_invariance(self, np_rng):
        R = estimate_sample_cov(synthesize_samples(
            None, RadioParams(n_samples=50), RngStream(4),
            factor=disk_scattering_factor(1e-9, 63.0, 10, 0.5, 10.0)))
        base = estimate_aoa(R, CFG, 1, 10, 0.5).angle_deg
        assert estimate_aoa(7.5 * R, CFG, 1, 10, 0.5).angle_deg == pytest.approx(base, abs=1e-9)
        shifted = R + 3 * np.trace(R).real / 10 * np.eye(10)
        assert estimate_aoa(shifted, CFG, 1, 10, 0.5).angle_deg == pytest.approx(base, abs=1e-6)

    def test_low_confidence_on_flat_spectrum(self):
        assert estimate_aoa(np.eye(6), CFG, 1, 6, 0.5).low_confidence

    def test_hint_validation(self):
        with pytest.raises(ConfigError):
            estimate_aoa(np.eye(4), CFG, 0, 4, 0.5)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            MusicConfig(grid_step_deg=2.0)
        with pytest.raises(ConfigError):
            MusicConfig(n_sources=2)
        assert len(MusicConfig().grid()) == 1801

    def test_batched_matches_single(self):
        Rs = np.stack([exact_cov(p, N=8, noise=0.01) for p in (15.0, 95.0, 150.0)])
        ang, *_ = estimate_aoa_many(Rs, CFG, [1, -1, 1], 8, 0.5)
        single = [estimate_aoa(R, CFG, h, 8, 0.5).angle_deg for R, h in zip(Rs, [1, -1, 1])]
        np.testing.assert_allclose(ang, single)

    def test_error_non_increasing_in_samples(self):
        phi = (np.arange(300) + 0.5) * 180 / 300
        beta = float(db_to_linear(path_loss_beta_db(150.0, PathLossParams())))
        f = disk_scattering_factor(np.full(300, beta), phi, 8, 0.5, 0.0)
        medians = []
        for i, S in enumerate((10, 50, 200, 1000)):
            y = synthesize_samples(None, RadioParams(n_samples=S, angular_spread_deg=0.0),
                                   RngStream(30, i), factor=f)
            ang, *_ = estimate_aoa_many(estimate_sample_cov(y), CFG, np.ones(300, int), 8, 0.5)
            medians.append(np.median(np.abs(ang - phi)))
        inversions = sum(b > a for a, b in zip(medians, medians[1:]))
        assert inversions <= 1, medians

    def test_default_radio_against_oracle(self):
        n = ORACLE["trials"]
        phi = (np.arange(n) + 0.5) * 180 / n
        beta = float(db_to_linear(path_loss_beta_db(ORACLE["distance_m"], PathLossParams())))
        f = disk_scattering_factor(np.full(n, beta), phi, 25, 0.5, 10.0)
        y = synthesize_samples(None, RadioParams(), RngStream(0), factor=f)
        ang, *_ = estimate_aoa_many(estimate_sample_cov(y), CFG, np.ones(n, int), 25, 0.5)
        median = np.median(np.abs(ang - phi))
        assert median < 2.0
        assert median <= 1.1 * ORACLE["median_abs_error_deg"]


def test_dump_csv(tmp_path):
    path = tmp_path / "spec.csv"
    dump_pseudospectrum_csv(path, exact_cov(30.0, N=4, noise=0.1), MusicConfig(grid_step_deg=1.0), 4, 0.5)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta_deg,value"
    assert len(lines) == 182
