import numpy as np
import pytest

from subrad.coupling import (CouplingMatrices, build_couplings,
                             greens_self_term, greens_tensor)
from subrad.geometry import build_chain, sample_cloud


def series_gamma_transverse(x):
    """Small-separation expansion of the transverse damping coupling.

    Derived by expanding Im{e^(ix)(x^2 + ix - 1)}/x^3 term by term:
    1 - x^2/5 + 3x^4/280 + O(x^6).
    """
    return 1.0 - x**2 / 5 + 3 * x**4 / 280


def series_delta_transverse(x):
    """Small-separation expansion of the transverse exchange shift:
    (3/4)(1 - x^2/2 + 3x^4/8)/x^3 + O(x^3)."""
    return 0.75 * (1.0 - x**2 / 2 + 3 * x**4 / 8) / x**3


def test_self_term_convention():
    g = greens_self_term()
    assert np.allclose(2 * g.imag, np.eye(3))
    assert np.allclose(g.real, 0.0)


def test_greens_tensor_far_field_decay():
    g = greens_tensor(np.array([1e7, 0.0, 0.0]))
    assert np.abs(g).max() < 1e-6


def test_greens_tensor_zero_separation():
    with pytest.raises(ValueError):
        greens_tensor(np.zeros(3))


def test_transverse_small_kr_against_series():
    x = 0.1
    g = greens_tensor(np.array([x, 0.0, 0.0]))
    gamma = 2 * g.imag[2, 2]
    delta = -g.real[2, 2]
    assert gamma == pytest.approx(series_gamma_transverse(x), abs=1e-8)
    assert delta == pytest.approx(series_delta_transverse(x), rel=1e-6)


def test_longitudinal_imag_reaches_unit_rate():
    # polarization along the separation: 2 Im{G_xx} -> 1 as kr -> 0
    for x in (0.05, 0.02):
        g = greens_tensor(np.array([x, 0.0, 0.0]))
        assert 2 * g.imag[0, 0] == pytest.approx(1.0, abs=x**2)


def test_vectorial_two_atoms_kd01():
    cfg = build_chain(2, 0.1)
    cpl = build_couplings(cfg, "vectorial")
    assert cpl.gamma[0, 1] == pytest.approx(series_gamma_transverse(0.1),
                                            abs=1e-8)
    assert cpl.gamma[0, 1] > 0.99
    assert cpl.delta[0, 1] == pytest.approx(series_delta_transverse(0.1),
                                            rel=1e-6)


def test_delta_diverges_like_inverse_cube():
    # |delta| ~ (3/4) x^-3 for transverse polarization at small x
    vals = []
    for x in (0.1, 0.05, 0.025):
        cfg = build_chain(2, x)
        cpl = build_couplings(cfg, "vectorial")
        vals.append(abs(cpl.delta[0, 1]) * x**3)
    assert np.allclose(vals, 0.75, rtol=0.01)


def test_single_atom():
    cfg = build_chain(1, 1.0)
    for kind in ("vectorial", "scalar"):
        cpl = build_couplings(cfg, kind)
        assert np.allclose(cpl.gamma, [[1.0]])
        assert np.allclose(cpl.delta, [[0.0]])


def test_scalar_closed_forms():
    cfg = build_chain(2, np.pi)
    cpl = build_couplings(cfg, "scalar")
    assert cpl.gamma[0, 1] == pytest.approx(0.0, abs=1e-15)
    assert cpl.delta[0, 1] == pytest.approx(1 / (2 * np.pi))


def test_two_atom_eigenrates():
    cfg = build_chain(2, 0.4)
    for kind in ("vectorial", "scalar"):
        cpl = build_couplings(cfg, kind)
        rates = np.sort(np.linalg.eigvalsh(cpl.gamma))
        g12 = cpl.gamma[0, 1]
        assert rates == pytest.approx([1 - g12, 1 + g12])


def test_symmetry_and_structure():
    cfg = sample_cloud(6, 1.0, rng_seed=8, min_distance=0.2)
    for kind in ("vectorial", "scalar"):
        cpl = build_couplings(cfg, kind)
        assert np.allclose(cpl.gamma, cpl.gamma.T)
        assert np.allclose(cpl.delta, cpl.delta.T)
        assert np.allclose(np.diagonal(cpl.gamma), 1.0)
        assert np.allclose(np.diagonal(cpl.delta), 0.0)
        assert np.abs(cpl.gamma).max() <= 1.0 + 1e-12


def test_scalar_gamma_psd_many_clouds():
    for seed in range(15):
        cfg = sample_cloud(8, 3.0, rng_seed=seed, min_distance=0.05)
        cpl = build_couplings(cfg, "scalar")
        eig = np.linalg.eigvalsh(cpl.gamma)
        assert eig.min() > -1e-10
        assert eig.max() < 8 + 1e-10


def test_vectorial_gamma_psd_many_clouds():
    for seed in range(15):
        cfg = sample_cloud(7, 2.0, rng_seed=100 + seed, min_distance=0.05)
        cpl = build_couplings(cfg, "vectorial")
        assert np.linalg.eigvalsh(cpl.gamma).min() > -1e-10


def test_coupling_validation_rejects_bad_matrices():
    with pytest.raises(ValueError):
        CouplingMatrices(delta=np.zeros((2, 2)),
                         gamma=np.array([[1.0, 1.5], [1.5, 1.0]]),
                         kernel_kind="scalar")
    with pytest.raises(ValueError):
        CouplingMatrices(delta=np.zeros((2, 2)),
                         gamma=np.array([[1.0, 0.0], [0.0, 0.9]]),
                         kernel_kind="scalar")
    with pytest.raises(ValueError):
        CouplingMatrices(delta=np.zeros((2, 2)), gamma=np.eye(2),
                         kernel_kind="tensor")


def test_independent_reference():
    cpl = CouplingMatrices.independent(4)
    assert np.allclose(cpl.gamma, np.eye(4))
    assert np.allclose(cpl.delta, 0.0)


def test_csv_dump(tmp_path):
    cfg = build_chain(3, 0.7)
    cpl = build_couplings(cfg)
    cpl.save_csv(str(tmp_path) + "/")
    gamma = np.loadtxt(tmp_path / "gamma.csv", delimiter=",")
    assert np.allclose(gamma, cpl.gamma)
