"""Pairwise entanglement: two-qubit concurrence and aggregate metrics.

Concurrence of a two-qubit state rho:

    C = max{0, l1 - l2 - l3 - l4},

with l_n the decreasingly sorted square roots of the eigenvalues of
rho * (sy x sy) rho^* (sy x sy).  Working with that (non-Hermitian)
product avoids the matrix square roots of the textbook definition and is
algebraically equivalent.
"""

from dataclasses import dataclass

import networkx as nx
import numpy as np

from . import kernels
from .manybody import n_atoms_of

_SY = np.array([[0.0, -1j], [1j, 0.0]])
_SYSY = np.kron(_SY, _SY)

# Entries below this are treated as unentangled when clustering; well under
# any physically meaningful concurrence yet above eigenvalue noise.
DEFAULT_CLUSTER_THRESHOLD = 1e-10

_IMAG_TOL = 1e-10


def concurrence_4x4(rho):
    """Two-qubit concurrence of a 4x4 density matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise ValueError("concurrence_4x4 expects a 4x4 matrix")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > 1e-8:
        raise ValueError(f"state is not Hermitian (max dev {herm:.3e})")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise ValueError("state must have unit trace")
    product = rho @ _SYSY @ rho.conj() @ _SYSY
    evals = np.linalg.eigvals(product)
    if np.abs(evals.imag).max() > _IMAG_TOL:
        raise ValueError("spectrum of rho*rho_tilde is not numerically real")
    evals = evals.real
    # Exact zeros of the algebra (defective for pure-ish states) come back
    # as +-1e-17 noise that a square root would amplify to ~1e-9; anything
    # far below the leading eigenvalue is such a zero.  States with only
    # small eigenvalues have a small matrix norm, so the relative cut does
    # not touch genuinely tiny concurrences.
    evals[evals < 1e-12 * max(evals.max(), 0.0)] = 0.0
    lam = np.sqrt(np.clip(evals, 0.0, None))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


@dataclass(frozen=True)
class ConcurrenceMatrix:
    """Pairwise concurrences at one instant of a trajectory."""

    values: np.ndarray  # (N, N) symmetric, zero diagonal, entries in [0, 1]
    time: float = 0.0

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        n = values.shape[0]
        if values.shape != (n, n):
            raise ValueError("values must be square")
        if not np.allclose(values, values.T, atol=1e-12):
            raise ValueError("values must be symmetric")
        if np.any(np.diagonal(values) != 0.0):
            raise ValueError("diagonal must vanish")
        if values.min() < 0.0 or values.max() > 1.0 + 1e-12:
            raise ValueError("concurrences must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_atoms(self):
        return self.values.shape[0]


def _concurrence_batch(stack):
    """Concurrence of a (P, 4, 4) stack; same algebra as concurrence_4x4."""
    tilde = _SYSY @ stack.conj() @ _SYSY
    evals = np.linalg.eigvals(stack @ tilde)
    if evals.size and np.abs(evals.imag).max() > _IMAG_TOL:
        raise ValueError("spectrum of rho*rho_tilde is not numerically real")
    evals = evals.real
    top = np.clip(evals.max(axis=1, keepdims=True), 0.0, None)
    evals[evals < 1e-12 * top] = 0.0
    lam = np.sort(np.sqrt(np.clip(evals, 0.0, None)), axis=1)
    return np.clip(lam[:, 3] - lam[:, 2] - lam[:, 1] - lam[:, 0], 0.0, None)


def concurrence_matrix(rho, time=0.0):
    """Concurrence of every atom pair of an N-atom state.

    Pair reductions are computed in one kernel pass and their concurrences
    in one batched eigenvalue call; the result is identical to applying
    partial_trace_pair + concurrence_4x4 pair by pair.
    """
    n = n_atoms_of(rho)
    values = np.zeros((n, n))
    if n > 1:
        stack = kernels.get_backend().pair_reductions(rho)
        conc = _concurrence_batch(stack)
        rows, cols = np.triu_indices(n, k=1)
        values[rows, cols] = conc
        values[cols, rows] = conc
    return ConcurrenceMatrix(values=values, time=time)


def largest_entangled_cluster(values, threshold=DEFAULT_CLUSTER_THRESHOLD):
    """Size of the largest atom subset in which all pairs are entangled.

    Maximum clique of the graph with an edge wherever the pair concurrence
    exceeds the threshold; a solitary atom counts as a cluster of one.
    """
    n = values.shape[0]
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for j in range(n):
        for m in range(j + 1, n):
            if values[j, m] > threshold:
                graph.add_edge(j, m)
    return max(len(clique) for clique in nx.find_cliques(graph))


def aggregate_metrics(cm, threshold=DEFAULT_CLUSTER_THRESHOLD):
    """(c_avg, c_min, n_ent) of a concurrence matrix.

    c_avg averages over ordered pairs (the N(N-1) normalization), c_min is
    the worst pair, and n_ent the largest all-pairs-entangled cluster.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    values = cm.values if isinstance(cm, ConcurrenceMatrix) else \
        np.asarray(cm, dtype=float)
    n = values.shape[0]
    if n == 1:
        return 0.0, 0.0, 1
    off = values[~np.eye(n, dtype=bool)]
    c_avg = float(off.sum() / (n * (n - 1)))
    c_min = float(off.min())
    n_ent = largest_entangled_cluster(values, threshold)
    return c_avg, c_min, n_ent
