"""Dipole-dipole coupling matrices (rates in units of the linewidth).

The vectorial kernel comes from the free-space point-dipole propagator

    G(r) = (3/4) e^(ix)/x^3 [ (x^2 + ix - 1) I_3
                              - (x^2 + 3ix - 3) rr^T/r^2 ],   x = k|r|,

whose imaginary part stays finite as x -> 0 (G_jj = i/2 on the diagonal)
while the real part diverges like x^-3.  The cross-damping and exchange
rates are gamma_jm = e_j* . 2 Im{G} . e_m and delta_jm = -e_j* . Re{G} . e_m.
The scalar variant drops polarization and near-field structure:
gamma_jm = sin(x)/x, delta_jm = -cos(x)/(2x).
"""

from dataclasses import dataclass

import numpy as np

KERNEL_KINDS = ("vectorial", "scalar")

_PSD_TOL = -1e-10
_REAL_TOL = 1e-10


@dataclass(frozen=True)
class CouplingMatrices:
    """Exchange shifts (delta) and damping couplings (gamma) for N atoms."""

    delta: np.ndarray       # (N, N) real symmetric, zero diagonal
    gamma: np.ndarray       # (N, N) real symmetric, unit diagonal, PSD
    kernel_kind: str

    def __post_init__(self):
        delta = np.ascontiguousarray(np.asarray(self.delta, dtype=float))
        gamma = np.ascontiguousarray(np.asarray(self.gamma, dtype=float))
        if self.kernel_kind not in KERNEL_KINDS:
            raise ValueError(f"kernel_kind must be one of {KERNEL_KINDS}")
        n = gamma.shape[0]
        if gamma.shape != (n, n) or delta.shape != (n, n):
            raise ValueError("delta and gamma must be square with equal size")
        if not np.allclose(gamma, gamma.T, atol=1e-12):
            raise ValueError("gamma must be symmetric")
        if not np.allclose(delta, delta.T, atol=1e-12):
            raise ValueError("delta must be symmetric")
        if not np.allclose(np.diagonal(gamma), 1.0, atol=1e-12):
            raise ValueError("gamma diagonal must equal 1 (single-atom rate)")
        if not np.allclose(np.diagonal(delta), 0.0, atol=1e-12):
            raise ValueError("delta diagonal must vanish")
        if np.any(np.abs(gamma) > 1.0 + 1e-12):
            raise ValueError("|gamma_jm| must not exceed 1")
        # Both kernels are positive semidefinite analytically; a clear
        # violation means a construction bug, not something to repair.
        eigmin = np.linalg.eigvalsh(gamma).min()
        if eigmin < _PSD_TOL:
            raise ValueError(
                f"gamma is not positive semidefinite (min eig {eigmin:.3e})")
        delta.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_atoms(self):
        return self.gamma.shape[0]

    @classmethod
    def independent(cls, n_atoms):
        """No cross coupling: isolated emitters (useful as a reference)."""
        n = int(n_atoms)
        return cls(np.zeros((n, n)), np.eye(n), "scalar")

    def save_csv(self, path_prefix):
        np.savetxt(f"{path_prefix}gamma.csv", self.gamma, delimiter=",")
        np.savetxt(f"{path_prefix}delta.csv", self.delta, delimiter=",")


def greens_tensor(separation):
    """Free-space dipole propagator G(r) for a nonzero separation (k = 1)."""
    r = np.asarray(separation, dtype=float)
    dist = float(np.linalg.norm(r))
    if dist <= 0.0:
        raise ValueError("greens_tensor requires a nonzero separation; "
                         "the self term is i/2 * identity")
    x = dist
    rr = np.outer(r, r) / (dist * dist)
    pref = 0.75 * np.exp(1j * x) / x**3
    return pref * ((x * x + 1j * x - 1.0) * np.eye(3)
                   - (x * x + 3j * x - 3.0) * rr)


def greens_self_term():
    """Single-atom limit: 2 Im{G_jj} reproduces the unit decay rate."""
    return 0.5j * np.eye(3)


def _vectorial_pair(r_jm, eps_j, eps_m):
    g = greens_tensor(r_jm)
    gamma = np.conj(eps_j) @ (2.0 * g.imag) @ eps_m
    delta = -(np.conj(eps_j) @ g.real @ eps_m)
    return gamma, delta


def _scalar_pair(distance):
    x = float(distance)
    return np.sin(x) / x, -np.cos(x) / (2.0 * x)


def build_couplings(config, kernel_kind="vectorial"):
    """Assemble the N x N coupling matrices for an atomic configuration."""
    if kernel_kind not in KERNEL_KINDS:
        raise ValueError(f"kernel_kind must be one of {KERNEL_KINDS}")
    n = config.n_atoms
    gamma = np.eye(n)
    delta = np.zeros((n, n))
    pos = config.positions
    pol = config.polarizations
    for j in range(n):
        for m in range(j + 1, n):
            r_jm = pos[j] - pos[m]
            if kernel_kind == "vectorial":
                g, d = _vectorial_pair(r_jm, pol[j], pol[m])
                for name, val in (("gamma", g), ("delta", d)):
                    if abs(np.imag(val)) > _REAL_TOL:
                        raise ValueError(
                            f"{name}[{j},{m}] is not real for this "
                            f"polarization pair (imag {np.imag(val):.3e})")
                g = float(np.real(g))
                d = float(np.real(d))
            else:
                g, d = _scalar_pair(np.linalg.norm(r_jm))
            gamma[j, m] = gamma[m, j] = g
            delta[j, m] = delta[m, j] = d
    return CouplingMatrices(delta=delta, gamma=gamma, kernel_kind=kernel_kind)
