from math import comb

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import (dense_liouvillian, drive_hamiltonian,
                      random_density_matrix)
from subrad import manybody
from subrad.coupling import CouplingMatrices, build_couplings
from subrad.dynamics import (DriveParameters, IntegratorSettings,
                             integrate, liouvillian_rhs, log_output_times,
                             steady_state)
from subrad.errors import IntegrationError
from subrad.geometry import build_chain, sample_cloud
from subrad.spectrum import sector_spectrum, subradiant_lifetime


def _random_couplings(n, rng):
    a = rng.normal(size=(n, n))
    gram = a @ a.T
    scale = np.sqrt(np.outer(np.diagonal(gram), np.diagonal(gram)))
    gamma = gram / scale  # symmetric PSD with unit diagonal
    delta = rng.normal(size=(n, n))
    delta = 0.5 * (delta + delta.T)
    np.fill_diagonal(delta, 0.0)
    return CouplingMatrices(delta=delta, gamma=gamma, kernel_kind="scalar")


def test_single_atom_decay_entry():
    cfg = build_chain(1, 1.0)
    cpl = build_couplings(cfg)
    rho = manybody.inverted_state(1)
    out = liouvillian_rhs(rho, cpl)
    assert out[1, 1].real == pytest.approx(-1.0)
    assert out[0, 0].real == pytest.approx(1.0)


def test_rhs_traceless(rng):
    for n in (1, 2, 3):
        cpl = _random_couplings(n, rng)
        rho = random_density_matrix(n, rng)
        out = liouvillian_rhs(rho, cpl)
        assert abs(np.trace(out)) < 1e-12


def test_rhs_matches_dense_superoperator(rng):
    n = 3
    dim = 1 << n
    for _ in range(4):
        cpl = _random_couplings(n, rng)
        rho = random_density_matrix(n, rng)
        super_op = dense_liouvillian(n, cpl.gamma, cpl.delta)
        expected = (super_op @ rho.ravel()).reshape(dim, dim)
        got = liouvillian_rhs(rho, cpl)
        assert np.abs(got - expected).max() < 1e-11


def test_rhs_with_drive_matches_dense_superoperator(rng):
    n = 2
    dim = 1 << n
    cfg = build_chain(n, 0.8)
    cpl = build_couplings(cfg)
    drive = DriveParameters(rabi=0.6, detuning=-0.3,
                            direction=np.array([0.0, 0.0, 1.0]))
    extra = drive_hamiltonian(n, cfg.positions, drive.rabi, drive.detuning,
                              drive.direction)
    super_op = dense_liouvillian(n, cpl.gamma, cpl.delta, extra)
    rho = random_density_matrix(n, rng)
    expected = (super_op @ rho.ravel()).reshape(dim, dim)
    got = liouvillian_rhs(rho, cpl, drive, cfg)
    assert np.abs(got - expected).max() < 1e-11


def test_single_atom_analytic_decay():
    cfg = build_chain(1, 1.0)
    cpl = build_couplings(cfg)
    times = np.array([0.0, 0.3, 1.0, 2.5, 6.0])
    series = integrate(manybody.inverted_state(1), cpl, None, cfg,
                       IntegratorSettings(output_times=times),
                       [lambda t, rho: {"ree": rho[1, 1].real}])
    assert np.allclose(series.columns["ree"], np.exp(-times), rtol=1e-7)


def test_two_atom_benchmark_concurrence():
    from subrad.entanglement import concurrence_4x4

    cfg = build_chain(2, 0.1)
    cpl = build_couplings(cfg, "vectorial")
    series = integrate(
        manybody.mixture_state(2), cpl, None, cfg,
        IntegratorSettings(output_times=np.array([0.0, 10.0])))
    assert concurrence_4x4(series.final_state) == pytest.approx(0.25,
                                                                abs=0.02)


def _snapshot_observer(store):
    def observe(t, rho):
        store.append(np.array(rho, copy=True))
        return {"unused": 0.0}
    return observe


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trajectory_matches_matrix_exponential(n, rng):
    dim = 1 << n
    cpl = _random_couplings(n, rng)
    rho0 = random_density_matrix(n, rng)
    super_op = dense_liouvillian(n, cpl.gamma, cpl.delta)
    times = np.array([0.0, 0.1, 1.0, 10.0])
    snaps = []
    integrate(
        rho0, cpl, None, None,
        IntegratorSettings(output_times=times, rel_tol=1e-10, abs_tol=1e-12),
        [_snapshot_observer(snaps)])
    for t, got in zip(times, snaps):
        expected = (expm(super_op * t) @ rho0.ravel()).reshape(dim, dim)
        assert np.abs(got - expected).max() < 1e-8


def test_independent_atom_factorization():
    n = 5
    cpl = CouplingMatrices.independent(n)
    times = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    series = integrate(
        manybody.mixture_state(n), cpl, None, None,
        IntegratorSettings(output_times=times),
        [lambda t, rho: dict(zip(
            (f"P_{k}" for k in range(n + 1)),
            manybody.excitation_populations(rho)))])
    for i, t in enumerate(times):
        p = 0.5 * np.exp(-t)
        for k in range(n + 1):
            expected = comb(n, k) * p**k * (1 - p) ** (n - k)
            assert series.columns[f"P_{k}"][i] == pytest.approx(
                expected, abs=1e-6)


def test_trajectory_invariants_and_purity_range():
    n = 4
    cfg = build_chain(n, np.pi / 2)
    cpl = build_couplings(cfg)
    times = log_output_times(40.0, 60)
    purities = []

    def watch(t, rho):
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.eigvalsh(rho).min() > -1e-6
        purity = np.einsum("ij,ji->", rho, rho).real
        purities.append(purity)
        return {"purity": purity}

    integrate(manybody.mixture_state(n), cpl, None, cfg,
              IntegratorSettings(output_times=times), [watch])
    purities = np.array(purities)
    assert np.all(purities > 2.0**-n - 1e-8)
    assert np.all(purities < 1 + 1e-8)


def test_late_time_population_slope_matches_spectrum():
    # log P_1 decays at the slowest single-excitation rate
    n = 5
    cfg = build_chain(n, np.pi / 2)
    cpl = build_couplings(cfg)
    tau1 = subradiant_lifetime(sector_spectrum(cpl, 1))
    times = np.concatenate(([0.0], np.linspace(3 * tau1, 5 * tau1, 30)))
    series = integrate(
        manybody.mixture_state(n), cpl, None, cfg,
        IntegratorSettings(output_times=times, rel_tol=1e-8, abs_tol=1e-13),
        [lambda t, rho: {"P_1": manybody.excitation_populations(rho)[1]}])
    late_t = series.times[1:]
    late_p = series.columns["P_1"][1:]
    slope = np.polyfit(late_t, np.log(late_p), 1)[0]
    assert -slope == pytest.approx(1.0 / tau1, rel=0.05)


def test_output_grid_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(output_times=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        IntegratorSettings(output_times=np.array([0.0, 2.0, 2.0]))
    with pytest.raises(ValueError):
        IntegratorSettings(output_times=np.array([0.0, 1.0]), rel_tol=0.0)


def test_integrate_validates_initial_state():
    cfg = build_chain(2, 0.5)
    cpl = build_couplings(cfg)
    bad = np.eye(4, dtype=complex)  # trace 4
    with pytest.raises(ValueError):
        integrate(bad, cpl, None, cfg,
                  IntegratorSettings(output_times=np.array([0.0, 1.0])))


def test_steady_state_single_atom_bloch():
    cfg = build_chain(1, 1.0)
    cpl = build_couplings(cfg)
    for rabi, detuning in ((0.1, 0.0), (0.5, 0.3), (1.5, -0.7)):
        drive = DriveParameters(rabi=rabi, detuning=detuning)
        rho = steady_state(cpl, drive, cfg)
        s = 2 * rabi**2 / (1 + 4 * detuning**2)
        assert rho[1, 1].real == pytest.approx(s / (2 * (1 + s)), abs=1e-9)
    rho = steady_state(cpl, DriveParameters(rabi=0.1), cfg)
    assert rho[1, 1].real == pytest.approx(0.0098039, abs=1e-6)


def test_steady_state_requires_drive():
    cfg = build_chain(2, 0.5)
    cpl = build_couplings(cfg)
    with pytest.raises(ValueError):
        steady_state(cpl, None, cfg)
    with pytest.raises(ValueError):
        steady_state(cpl, DriveParameters(rabi=0.0), cfg)


def test_steady_state_matches_long_time_integration():
    n = 2
    cfg = build_chain(n, 0.8)
    cpl = build_couplings(cfg)
    drive = DriveParameters(rabi=0.4, detuning=0.1)
    rho_ss = steady_state(cpl, drive, cfg)
    series = integrate(
        manybody.ground_state(n), cpl, drive, cfg,
        IntegratorSettings(output_times=np.array([0.0, 200.0]),
                           rel_tol=1e-10, abs_tol=1e-13))
    assert np.abs(series.final_state - rho_ss).max() < 1e-6


def test_steady_state_integration_route_agrees_with_nullspace():
    n = 3
    cfg = build_chain(n, 0.9)
    cpl = build_couplings(cfg)
    drive = DriveParameters(rabi=0.3)
    direct = steady_state(cpl, drive, cfg)
    integrated = steady_state(cpl, drive, cfg, dense_cutoff=0)
    assert np.abs(direct - integrated).max() < 1e-8


def test_weak_drive_limit_is_ground_state():
    cfg = build_chain(2, 0.7)
    cpl = build_couplings(cfg)
    rho = steady_state(cpl, DriveParameters(rabi=1e-4), cfg)
    assert rho[0, 0].real == pytest.approx(1.0, abs=1e-6)


def test_single_excitation_tail_matches_full_run():
    n = 5
    cfg = sample_cloud(n, 2 * n / 1.4**2, rng_seed=12, min_distance=0.15)
    cpl = build_couplings(cfg, "scalar")
    times = log_output_times(2000.0, 90)
    kw = dict(rel_tol=1e-9, abs_tol=1e-13)
    cols = lambda: [lambda t, rho: {
        "P_1": manybody.excitation_populations(rho)[1],
        "edge": np.abs(rho[1, 2]),
    }]
    full = integrate(manybody.mixture_state(n), cpl, None, cfg,
                     IntegratorSettings(output_times=times, **kw), cols())
    fast = integrate(manybody.mixture_state(n), cpl, None, cfg,
                     IntegratorSettings(output_times=times,
                                        single_excitation_tail=True, **kw),
                     cols())
    assert "tail_switch_time" in fast.stats
    for name in ("P_1", "edge"):
        assert np.abs(full.columns[name] - fast.columns[name]).max() < 1e-9
    assert np.abs(full.final_state - fast.final_state).max() < 1e-9


def test_integration_failure_reports(rng):
    # Positivity watchdog trips on a state evolving away from physicality.
    cfg = build_chain(2, 0.5)
    cpl = build_couplings(cfg)
    settings = IntegratorSettings(output_times=np.array([0.0, 5.0]))
    nonpositive = np.diag([0.6, 0.5, -0.05, -0.05]).astype(complex)
    with pytest.raises((ValueError, IntegrationError)):
        integrate(nonpositive, cpl, None, cfg, settings)
