from math import comb

import numpy as np
import pytest

from conftest import (PROJ_E, PROJ_G, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Y,
                      kron_site_operator, random_density_matrix)
from subrad import manybody

_KIND_TO_MAT = {
    "sigma_minus": SIGMA_MINUS,
    "sigma_plus": SIGMA_PLUS,
    "sigma_y": SIGMA_Y,
    "projector_e": PROJ_E,
    "projector_g": PROJ_G,
}


def test_apply_local_single_atom_basics():
    exc = manybody.inverted_state(1)
    out = manybody.apply_local(exc, 0, "sigma_minus", "left")
    expected = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    assert np.allclose(out, expected)

    gnd = manybody.ground_state(1)
    sandwich = manybody.apply_local(
        manybody.apply_local(gnd, 0, "sigma_minus", "left"),
        0, "sigma_plus", "left")
    assert np.allclose(sandwich, 0.0)


@pytest.mark.parametrize("n_atoms", [1, 2, 3, 4])
@pytest.mark.parametrize("kind", sorted(_KIND_TO_MAT))
@pytest.mark.parametrize("side", ["left", "right"])
def test_apply_local_matches_kron_oracle(n_atoms, kind, side, rng):
    rho = random_density_matrix(n_atoms, rng)
    for atom in range(n_atoms):
        op = kron_site_operator(n_atoms, atom, _KIND_TO_MAT[kind])
        expected = op @ rho if side == "left" else rho @ op
        got = manybody.apply_local(rho, atom, kind, side)
        assert np.abs(got - expected).max() < 1e-12


def test_apply_local_rejects_bad_input(rng):
    rho = random_density_matrix(2, rng)
    with pytest.raises(IndexError):
        manybody.apply_local(rho, 2, "sigma_minus")
    with pytest.raises(ValueError):
        manybody.apply_local(rho, 0, "sigma_x")
    with pytest.raises(ValueError):
        manybody.apply_local(rho, 0, "sigma_minus", side="middle")


def test_populations_of_mixture_binomial():
    n = 7
    pops = manybody.excitation_populations(manybody.mixture_state(n))
    expected = np.array([comb(n, k) for k in range(n + 1)]) / 2.0**n
    assert np.allclose(pops, expected, atol=1e-12)
    assert pops[1] == pytest.approx(7 / 128)


def test_populations_edge_states():
    n = 4
    pops = manybody.excitation_populations(manybody.inverted_state(n))
    assert pops[n] == pytest.approx(1.0)
    assert np.allclose(pops[:n], 0.0)
    pops = manybody.excitation_populations(manybody.ground_state(n))
    assert pops[0] == pytest.approx(1.0)


def test_populations_sum_to_one(rng):
    for n in (2, 3, 5):
        rho = random_density_matrix(n, rng)
        pops = manybody.excitation_populations(rho)
        assert pops.sum() == pytest.approx(1.0, abs=1e-8)
        assert np.all(pops > -1e-10)


def _partial_trace_loop_oracle(rho, n, j, m):
    """Triple-loop basis summation, independent of any reshape tricks."""
    out = np.zeros((4, 4), dtype=complex)
    dim = 1 << n
    rest = [a for a in range(n) if a not in (j, m)]
    for row in range(dim):
        for col in range(dim):
            if any((row >> a) & 1 != (col >> a) & 1 for a in rest):
                continue
            r_idx = 2 * ((row >> j) & 1) + ((row >> m) & 1)
            c_idx = 2 * ((col >> j) & 1) + ((col >> m) & 1)
            out[r_idx, c_idx] += rho[row, col]
    return out


def test_partial_trace_matches_loop_oracle(rng):
    n = 3
    rho = random_density_matrix(n, rng)
    for j in range(n):
        for m in range(n):
            if j == m:
                continue
            got = manybody.partial_trace_pair(rho, j, m)
            expected = _partial_trace_loop_oracle(rho, n, j, m)
            assert np.abs(got - expected).max() < 1e-12


def test_partial_trace_product_state():
    rho = manybody.ground_state(4)
    red = manybody.partial_trace_pair(rho, 1, 3)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    assert np.allclose(red, expected)


def test_partial_trace_symmetric_single_excitation():
    n = 5
    vec = manybody.symmetric_single_excitation_vector(n)
    rho = np.outer(vec, vec.conj())
    red = manybody.partial_trace_pair(rho, 0, 3)
    expected = np.zeros((4, 4))
    expected[0, 0] = (n - 2) / n
    expected[1, 1] = expected[2, 2] = 1 / n
    expected[1, 2] = expected[2, 1] = 1 / n
    assert np.abs(red - expected).max() < 1e-12


def test_partial_trace_relabeling_consistency(rng):
    # tracing pair (j, m) of a permuted state equals permuting then tracing
    n = 4
    rho = random_density_matrix(n, rng)
    perm = [2, 0, 3, 1]  # atom a of the new state is atom perm[a] of rho

    def permuted_index(b):
        out = 0
        for a in range(n):
            if (b >> perm[a]) & 1:
                out |= 1 << a
        return out

    mapping = np.array([permuted_index(b) for b in range(1 << n)])
    inverse = np.argsort(mapping)
    rho_perm = rho[np.ix_(inverse, inverse)]
    for j, m in ((0, 1), (1, 3), (2, 0)):
        direct = manybody.partial_trace_pair(rho_perm, j, m)
        via_original = manybody.partial_trace_pair(rho, perm[j], perm[m])
        assert np.abs(direct - via_original).max() < 1e-12


def test_partial_trace_rejects_same_atom(rng):
    rho = random_density_matrix(3, rng)
    with pytest.raises(ValueError):
        manybody.partial_trace_pair(rho, 1, 1)


def test_mixture_state_diagonal():
    rho = manybody.mixture_state(2)
    assert np.allclose(rho, np.diag([0.25, 0.25, 0.25, 0.25]))


def test_coherent_product_single_atom():
    rho = manybody.coherent_product_state(1)
    assert np.allclose(rho, np.full((2, 2), 0.5))


def test_symmetric_vector_normalized():
    vec = manybody.symmetric_single_excitation_vector(2)
    rho = np.outer(vec, vec.conj())
    # both single-excitation entries 1/2
    assert rho[1, 1] == pytest.approx(0.5)
    assert rho[2, 2] == pytest.approx(0.5)
    assert rho[1, 2] == pytest.approx(0.5)


def test_all_initial_states_are_valid_density_matrices(rng):
    n = 4
    states = [
        manybody.make_initial_state("mixture", n),
        manybody.make_initial_state("inverted", n),
        manybody.make_initial_state("coherent_product", n),
        manybody.make_initial_state("dicke_epsilon", n, epsilon=0.5),
        manybody.make_initial_state(
            "dicke_epsilon", n, epsilon=1.0,
            phases=rng.uniform(0, 2 * np.pi, size=n)),
    ]
    for rho in states:
        manybody.validate_density_matrix(rho)


def test_dicke_epsilon_validation():
    with pytest.raises(ValueError):
        manybody.make_initial_state("dicke_epsilon", 3, epsilon=1.5)
    with pytest.raises(ValueError):
        manybody.make_initial_state("dicke_epsilon", 3)
    with pytest.raises(ValueError):
        manybody.make_initial_state("weak_drive_steady", 3)
    with pytest.raises(ValueError):
        manybody.make_initial_state("squeezed", 3)


def test_validate_density_matrix_rejects_bad(rng):
    rho = random_density_matrix(2, rng)
    bad = rho.copy()
    bad[0, 1] += 1e-6
    with pytest.raises(ValueError):
        manybody.validate_density_matrix(bad)
    with pytest.raises(ValueError):
        manybody.validate_density_matrix(2 * rho)
    indefinite = np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex)
    with pytest.raises(ValueError):
        manybody.validate_density_matrix(indefinite)
