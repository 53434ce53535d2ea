"""Shared oracle helpers built independently of the package internals.

Everything here constructs operators by explicit Kronecker products, so
kernel/bit-arithmetic code paths are checked against a literal reading of
the formulas.
"""

import numpy as np
import pytest

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]])
PROJ_E = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PROJ_G = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def kron_site_operator(n_atoms, atom, mat2):
    """Full-space operator with mat2 on `atom`; bit j of the index = atom j."""
    op = np.array([[1.0 + 0.0j]])
    for a in range(n_atoms - 1, -1, -1):
        op = np.kron(op, mat2 if a == atom else IDENTITY_2)
    return op


def dense_liouvillian(n_atoms, gamma, delta, hamiltonian_extra=None):
    """Dense superoperator on row-major vec(rho), built from first principles.

    hamiltonian_extra, if given, is added to the exchange Hamiltonian
    sum_{j != m} delta_jm s_j^+ s_m^-.
    """
    dim = 1 << n_atoms
    lowers = [kron_site_operator(n_atoms, j, SIGMA_MINUS)
              for j in range(n_atoms)]
    raisers = [kron_site_operator(n_atoms, j, SIGMA_PLUS)
               for j in range(n_atoms)]
    ham = np.zeros((dim, dim), dtype=complex)
    for j in range(n_atoms):
        for m in range(n_atoms):
            if j != m:
                ham += delta[j, m] * raisers[j] @ lowers[m]
    if hamiltonian_extra is not None:
        ham = ham + hamiltonian_extra
    eye = np.eye(dim)
    super_op = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    for j in range(n_atoms):
        for m in range(n_atoms):
            g = gamma[j, m]
            ljm = raisers[m] @ lowers[j]
            super_op += g * np.kron(lowers[j], raisers[m].T)
            super_op += -0.5 * g * (np.kron(ljm, eye) + np.kron(eye, ljm.T))
    return super_op


def drive_hamiltonian(n_atoms, positions, rabi, detuning, direction):
    dim = 1 << n_atoms
    lowers = [kron_site_operator(n_atoms, j, SIGMA_MINUS)
              for j in range(n_atoms)]
    raisers = [kron_site_operator(n_atoms, j, SIGMA_PLUS)
               for j in range(n_atoms)]
    ham = np.zeros((dim, dim), dtype=complex)
    for j in range(n_atoms):
        ham += -detuning * raisers[j] @ lowers[j]
        amp = rabi * np.exp(1j * (positions[j] @ direction))
        ham += 0.5 * (amp * raisers[j] + np.conj(amp) * lowers[j])
    return ham


def random_density_matrix(n_atoms, rng):
    dim = 1 << n_atoms
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
