import math

import numpy as np
import pytest

from conftest import kron_site_operator, SIGMA_MINUS
from subrad import manybody
from subrad.geometry import build_chain, sample_cloud
from subrad.photodetection import (DetectionGeometry, field_phases,
                                   g2_equal_time,
                                   intensity_and_g2_numerator, windowed_g2)


def _product_diagonal_state(n, p):
    """Independent atoms, each excited with probability p (diagonal)."""
    single = np.diag([1 - p, p]).astype(complex)
    rho = np.array([[1.0]], dtype=complex)
    for _ in range(n):
        rho = np.kron(rho, single)
    return rho


def _kron_correlators(rho, config, geometry):
    """Field correlators via explicit operator matrices (oracle)."""
    n = config.n_atoms
    coeffs = field_phases(config, geometry)
    e_plus = sum(coeffs[j] * kron_site_operator(n, j, SIGMA_MINUS)
                 for j in range(n))
    e_minus = e_plus.conj().T
    intensity = np.trace(rho @ e_minus @ e_plus).real
    numerator = np.trace(rho @ e_minus @ e_minus @ e_plus @ e_plus).real
    return intensity, numerator


def test_detection_geometry_validation():
    with pytest.raises(ValueError):
        DetectionGeometry(np.array([1.0, 1.0, 0.0]))


def test_correlators_match_kron_oracle(rng):
    from conftest import random_density_matrix

    cfg = sample_cloud(3, 1.0, rng_seed=2, min_distance=0.2)
    geom = DetectionGeometry(np.array([0.0, 1.0, 0.0]))
    for _ in range(5):
        rho = random_density_matrix(3, rng)
        got = intensity_and_g2_numerator(rho, cfg, geom)
        expected = _kron_correlators(rho, cfg, geom)
        assert got[0] == pytest.approx(expected[0], abs=1e-12)
        assert got[1] == pytest.approx(expected[1], abs=1e-12)


def test_single_excitation_state_g2_zero():
    n = 5
    cfg = build_chain(n, np.pi / 2)
    rho = manybody.single_excitation_mixture(n, 0.7)
    assert g2_equal_time(rho, cfg) == pytest.approx(0.0, abs=1e-12)


def test_mixture_value():
    n = 7
    cfg = build_chain(n, np.pi / 2)
    g2 = g2_equal_time(manybody.mixture_state(n), cfg)
    assert g2 == pytest.approx(2 - 2 / 7, abs=1e-12)
    assert g2 == pytest.approx(12 / 7, abs=1e-12)


def test_inverted_state_value():
    for n in (2, 4, 6):
        cfg = build_chain(n, 1.0)
        g2 = g2_equal_time(manybody.inverted_state(n), cfg)
        assert g2 == pytest.approx(2 * (n - 1) / n, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_uniform_product_state_independent_of_p(n, p):
    cfg = build_chain(n, 0.8)
    rho = _product_diagonal_state(n, p)
    g2 = g2_equal_time(rho, cfg)
    assert g2 == pytest.approx(2 * (n - 1) / n, abs=1e-10)


def test_vanishing_intensity_reports_missing():
    cfg = build_chain(3, 1.0)
    g2 = g2_equal_time(manybody.ground_state(3), cfg)
    assert math.isnan(g2)


def test_g2_direction_dependence_is_finite():
    cfg = build_chain(4, np.pi / 2)
    rho = manybody.mixture_state(4)
    for direction in ([1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]):
        g2 = g2_equal_time(rho, cfg, DetectionGeometry(np.array(direction)))
        assert np.isfinite(g2) and g2 >= 0


def test_windowed_constant_series():
    times = np.linspace(0, 100, 501)
    numerator = np.full(times.shape, 1.8)
    intensity = np.full(times.shape, 1.2)
    for window in (5.0, 20.0):
        t_out, vals = windowed_g2(times, numerator, intensity, window)
        assert np.allclose(vals, 1.8 / 1.2**2, rtol=1e-12)
        assert t_out[0] >= times[0] + window / 2 - 1e-12
        assert t_out[-1] <= times[-1] - window / 2 + 1e-12


def test_windowed_small_window_recovers_instantaneous():
    times = np.linspace(0, 50, 2001)
    intensity = np.exp(-times / 10)
    numerator = np.exp(-times / 5) * 1.5
    t_out, vals = windowed_g2(times, numerator, intensity, 0.05)
    exact = 1.5 * np.exp(-t_out / 5) / np.exp(-t_out / 10) ** 2
    assert np.allclose(vals, exact, rtol=1e-4)


def test_windowed_rejects_bad_window():
    times = np.linspace(0, 10, 50)
    a = np.ones_like(times)
    with pytest.raises(ValueError):
        windowed_g2(times, a, a, 11.0)
    with pytest.raises(ValueError):
        windowed_g2(times, a, a, 0.0)


def test_g2_nonnegative_on_random_states(rng):
    from conftest import random_density_matrix

    cfg = sample_cloud(4, 1.5, rng_seed=6, min_distance=0.2)
    for _ in range(10):
        rho = random_density_matrix(4, rng)
        g2 = g2_equal_time(rho, cfg)
        assert math.isnan(g2) or g2 >= -1e-12
