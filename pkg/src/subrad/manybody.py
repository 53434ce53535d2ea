"""Operator algebra on the 2^N product basis.

Basis convention, used everywhere in the package: basis index b in
[0, 2^N) encodes atom j in bit j, with bit value 1 = excited and 0 =
ground.  |g...g> is index 0 and |e...e> is index 2^N - 1.  Local
operators act through reshaped views of the density matrix; no operator
is ever materialized at full dimension.
"""

import numpy as np

from .kernels.common import popcounts

OPERATOR_KINDS = ("sigma_plus", "sigma_minus", "sigma_y",
                  "projector_e", "projector_g")

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = -1e-8


def n_atoms_of(rho):
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.shape != (dim, dim) or (1 << n) != dim:
        raise ValueError("density matrix must be square with dimension 2^N")
    return n


def validate_density_matrix(rho, *, check_positivity=True):
    """Check Hermiticity, unit trace and (optionally) positivity."""
    n_atoms_of(rho)
    herm = np.abs(rho - rho.conj().T).max()
    if herm > HERMITICITY_TOL:
        raise ValueError(f"state is not Hermitian (max dev {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"state trace deviates from 1 by {tr - 1.0:.3e}")
    if check_positivity:
        eigmin = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
        if eigmin < POSITIVITY_TOL:
            raise ValueError(f"state has negative eigenvalue {eigmin:.3e}")


def _row_view(rho, atom):
    dim = rho.shape[0]
    return rho.reshape(dim >> (atom + 1), 2, 1 << atom, dim)


def _col_view(rho, atom):
    dim = rho.shape[0]
    return rho.reshape(dim, dim >> (atom + 1), 2, 1 << atom)


def apply_local(rho, atom, kind, side="left"):
    """(O rho) or (rho O) for a single-atom operator O, via bit slicing.

    Cost is O(4^N) regardless of kind; the operator itself is never built.
    """
    n = n_atoms_of(rho)
    if not 0 <= atom < n:
        raise IndexError(f"atom index {atom} out of range for N={n}")
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"kind must be one of {OPERATOR_KINDS}")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    out = np.zeros_like(rho, dtype=np.complex128)
    if side == "left":
        src = _row_view(rho, atom)
        dst = _row_view(out, atom)
        g, e = src[:, 0], src[:, 1]
        if kind == "sigma_minus":
            dst[:, 0] = e
        elif kind == "sigma_plus":
            dst[:, 1] = g
        elif kind == "sigma_y":
            dst[:, 0] = -1j * e
            dst[:, 1] = 1j * g
        elif kind == "projector_e":
            dst[:, 1] = e
        else:
            dst[:, 0] = g
    else:
        src = _col_view(rho, atom)
        dst = _col_view(out, atom)
        g, e = src[:, :, 0], src[:, :, 1]
        if kind == "sigma_minus":
            dst[:, :, 1] = g
        elif kind == "sigma_plus":
            dst[:, :, 0] = e
        elif kind == "sigma_y":
            dst[:, :, 0] = 1j * e
            dst[:, :, 1] = -1j * g
        elif kind == "projector_e":
            dst[:, :, 1] = e
        else:
            dst[:, :, 0] = g
    return out


def excitation_populations(rho):
    """P_n = total weight of basis states with exactly n excited atoms."""
    n = n_atoms_of(rho)
    counts = popcounts(n)
    diag = np.diagonal(rho).real
    return np.bincount(counts, weights=diag, minlength=n + 1)


def partial_trace_pair(rho, j, m):
    """Reduced 4x4 state of atoms (j, m); index order 2*b_j + b_m.

    Basis labels, first letter atom j: |gg>, |ge>, |eg>, |ee>.
    """
    n = n_atoms_of(rho)
    if j == m:
        raise ValueError("partial_trace_pair needs two distinct atoms")
    for a in (j, m):
        if not 0 <= a < n:
            raise IndexError(f"atom index {a} out of range for N={n}")
    t = rho.reshape((2,) * (2 * n))
    ax_j, ax_m = n - 1 - j, n - 1 - m
    rest = [a for a in range(n) if a not in (ax_j, ax_m)]
    perm = ([ax_j, ax_m] + rest
            + [n + ax_j, n + ax_m] + [n + a for a in rest])
    rdim = 1 << (n - 2)
    t = t.transpose(perm).reshape(4, rdim, 4, rdim)
    return np.einsum("arbr->ab", t)


def mixture_state(n_atoms):
    """Product state with each atom in an even ground/excited mixture."""
    dim = 1 << n_atoms
    return np.eye(dim, dtype=np.complex128) / dim


def inverted_state(n_atoms):
    dim = 1 << n_atoms
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[dim - 1, dim - 1] = 1.0
    return rho


def ground_state(n_atoms):
    dim = 1 << n_atoms
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def coherent_product_state(n_atoms):
    """Pure product of (|g> + |e>)/sqrt(2) on every atom."""
    dim = 1 << n_atoms
    vec = np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)
    return np.outer(vec, vec.conj())


def symmetric_single_excitation_vector(n_atoms, phases=None):
    """(1/sqrt(N)) sum_j e^(i phi_j) |g..e_j..g> as a state vector."""
    dim = 1 << n_atoms
    if phases is None:
        phases = np.zeros(n_atoms)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (n_atoms,):
        raise ValueError("phases must have one entry per atom")
    vec = np.zeros(dim, dtype=np.complex128)
    for j in range(n_atoms):
        vec[1 << j] = np.exp(1j * phases[j]) / np.sqrt(n_atoms)
    return vec


def single_excitation_mixture(n_atoms, epsilon, phases=None):
    """(1-eps)|g..g><g..g| + eps |D><D| with D the phased symmetric state."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    rho = (1.0 - epsilon) * ground_state(n_atoms)
    vec = symmetric_single_excitation_vector(n_atoms, phases)
    rho += epsilon * np.outer(vec, vec.conj())
    return rho


INITIAL_STATE_KINDS = ("mixture", "inverted", "coherent_product",
                       "weak_drive_steady", "dicke_epsilon")


def make_initial_state(kind, n_atoms, *, epsilon=None, phases=None,
                       couplings=None, drive=None, config=None):
    """Build one of the supported initial states.

    "weak_drive_steady" needs couplings, drive parameters and the atomic
    configuration; it is solved by the dynamics module.
    """
    if kind == "mixture":
        return mixture_state(n_atoms)
    if kind == "inverted":
        return inverted_state(n_atoms)
    if kind == "coherent_product":
        return coherent_product_state(n_atoms)
    if kind == "dicke_epsilon":
        if epsilon is None:
            raise ValueError("dicke_epsilon requires epsilon")
        return single_excitation_mixture(n_atoms, epsilon, phases)
    if kind == "weak_drive_steady":
        if couplings is None or drive is None or config is None:
            raise ValueError("weak_drive_steady requires couplings, drive "
                             "parameters and the atomic configuration")
        from .dynamics import steady_state
        return steady_state(couplings, drive, config)
    raise ValueError(f"kind must be one of {INITIAL_STATE_KINDS}")
