"""Fixed-excitation sectors of the non-Hermitian generator.

With the pump off, the matrix amat = delta - i*gamma/2 (diagonal -i/2)
conserves excitation number, so it can be diagonalized sector by sector:
the n-excitation block has dimension C(N, n), hopping elements
delta_jm - i*gamma_jm/2 wherever one excitation moves from atom m to atom
j, and -i/2 per excited atom on the diagonal.  Eigenvalue imaginary parts
are minus half the decay rates; the smallest rate sets the subradiant
lifetime of the sector.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import NoPeakError


@dataclass(frozen=True)
class SectorSpectrum:
    """Complex eigenvalues of one n-excitation sector."""

    n_excitations: int
    eigenvalues: np.ndarray
    dimension: int

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=np.complex128).copy()
        if eig.size != self.dimension:
            raise ValueError("eigenvalue count must equal the dimension")
        if np.any(eig.imag > 1e-10):
            raise ValueError("sector eigenvalues must describe decay "
                             "(imaginary parts <= 0)")
        eig.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)

    def decay_rates(self):
        return -2.0 * self.eigenvalues.imag


def sector_basis(n_atoms, n_excitations):
    """Bitmasks with n_excitations set bits, in increasing integer order."""
    masks = []
    for atoms in combinations(range(n_atoms), n_excitations):
        mask = 0
        for a in atoms:
            mask |= 1 << a
        masks.append(mask)
    masks.sort()
    return masks


def sector_effective_hamiltonian(couplings, n_excitations, detuning=0.0):
    """Dense matrix of the generator restricted to one excitation sector."""
    n = couplings.n_atoms
    if not 1 <= n_excitations <= n:
        raise ValueError(f"sector must satisfy 1 <= n <= {n}")
    amat = couplings.delta.astype(np.complex128) - 0.5j * couplings.gamma
    np.fill_diagonal(amat, -detuning - 0.5j * np.diagonal(couplings.gamma))

    basis = sector_basis(n, n_excitations)
    index = {mask: i for i, mask in enumerate(basis)}
    dim = len(basis)
    h = np.zeros((dim, dim), dtype=np.complex128)
    for col, mask in enumerate(basis):
        occupied = [j for j in range(n) if (mask >> j) & 1]
        h[col, col] = sum(amat[j, j] for j in occupied)
        for m in occupied:
            without = mask & ~(1 << m)
            for j in range(n):
                if j != m and not (mask >> j) & 1:
                    row = index[without | (1 << j)]
                    h[row, col] += amat[j, m]
    return h


def sector_spectrum(couplings, n_excitations):
    h = sector_effective_hamiltonian(couplings, n_excitations)
    eig = np.linalg.eigvals(h)
    # Rounding can push an exactly-zero imaginary part marginally positive.
    eig = eig.real + 1j * np.minimum(eig.imag, 0.0)
    return SectorSpectrum(n_excitations=n_excitations, eigenvalues=eig,
                          dimension=comb(couplings.n_atoms, n_excitations))


def subradiant_lifetime(spec):
    """Lifetime 1/rate of the slowest-decaying mode of a sector."""
    rates = spec.decay_rates()
    if rates.size == 0:
        raise ValueError("empty spectrum")
    return float(1.0 / rates.min())


def _refine_peak(times, values, i):
    """Quadratic vertex through three samples around a discrete maximum."""
    t0, t1, t2 = times[i - 1], times[i], times[i + 1]
    v0, v1, v2 = values[i - 1], values[i], values[i + 1]
    denom = (t1 - t0) * (v1 - v2) - (t1 - t2) * (v1 - v0)
    if denom == 0.0:
        return times[i]
    vertex = t1 - 0.5 * ((t1 - t0) ** 2 * (v1 - v2)
                         - (t1 - t2) ** 2 * (v1 - v0)) / denom
    if not t0 <= vertex <= t2:
        return times[i]
    return float(vertex)


def entanglement_peak_time(series, column="C_min"):
    """Time of the global maximum of a series column (first on ties).

    Interior maxima are refined by local quadratic interpolation.  A
    series that never becomes positive has no peak.
    """
    if hasattr(series, "columns"):
        times = np.asarray(series.times, dtype=float)
        values = np.asarray(series.columns[column], dtype=float)
    else:
        times, values = (np.asarray(a, dtype=float) for a in series)
    if values.max() <= 0.0:
        raise NoPeakError(f"column {column!r} never rises above zero")
    i = int(np.argmax(values))
    if i == 0 or i == values.size - 1:
        return float(times[i])
    return _refine_peak(times, values, i)
