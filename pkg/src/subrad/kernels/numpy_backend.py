"""Pure-numpy fallback kernels.

Same contract as the numba backend: Hermitian input density matrix,
bit-indexed operator action (no 2^N x 2^N operators materialized), with
the time stepping delegated to scipy's Dormand-Prince 5(4) implementation.
"""

from functools import lru_cache

import numpy as np
from scipy.integrate import RK45

from .common import bit_table

NAME = "numpy"


@lru_cache(maxsize=None)
def _row_sets(n_atoms):
    """Index arrays keyed by bit occupancy, reused across calls.

    set_clear[j, m] lists indices with bit j set and bit m clear;
    clear[j] lists indices with bit j clear; set_[j] those with bit j set.
    """
    dim, bits = bit_table(n_atoms)
    idx = np.arange(dim)
    clear = [idx[bits[:, j] == 0] for j in range(n_atoms)]
    set_ = [idx[bits[:, j] == 1] for j in range(n_atoms)]
    set_clear = {}
    for j in range(n_atoms):
        for m in range(n_atoms):
            if m != j:
                mask = (bits[:, j] == 1) & (bits[:, m] == 0)
                set_clear[j, m] = idx[mask]
    return clear, set_, set_clear


def lindblad_rhs(rho, amat, gamma, drive, out=None):
    """Master-equation right-hand side for a Hermitian density matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    n = amat.shape[0]
    dim = rho.shape[0]
    clear, set_, set_clear = _row_sets(n)
    _, bits = bit_table(n)

    # Y = H_nh rho via row shuffles.
    diag = bits.astype(np.complex128) @ np.diagonal(amat)
    y = diag[:, None] * rho
    for j in range(n):
        bj = 1 << j
        for m in range(n):
            if m == j:
                continue
            rows = set_clear[j, m]
            y[rows] += amat[j, m] * rho[rows - bj + (1 << m)]
        if drive[j] != 0:
            y[set_[j]] += (0.5 * drive[j]) * rho[set_[j] - bj]
            y[clear[j]] += (0.5 * np.conj(drive[j])) * rho[clear[j] + bj]

    result = -1j * (y - y.conj().T)

    # Recycling term sum_{j,m} gamma_jm sigma_j^- rho sigma_m^+.
    for j in range(n):
        rows = clear[j] + (1 << j)
        for m in range(n):
            cols = clear[m]
            result[np.ix_(clear[j], cols)] += gamma[j, m] * rho[
                np.ix_(rows, cols + (1 << m))]

    # Resymmetrize: exact on Hermitian input, kills accumulated rounding
    # asymmetry over long trajectories.
    result = 0.5 * (result + result.conj().T)

    if out is None:
        return result
    out[:] = result
    return out


def _field_lower_left(rho, coeffs):
    """E^+ rho = sum_j c_j s_j^- rho via bit slicing."""
    dim = rho.shape[0]
    n = coeffs.shape[0]
    out = np.zeros_like(rho, dtype=np.complex128)
    for j in range(n):
        src = rho.reshape(dim >> (j + 1), 2, 1 << j, dim)
        dst = out.reshape(dim >> (j + 1), 2, 1 << j, dim)
        dst[:, 0] += coeffs[j] * src[:, 1]
    return out


def _field_raise_right(rho, coeffs):
    """rho E^- = sum_j conj(c_j) rho s_j^+ via bit slicing."""
    dim = rho.shape[0]
    n = coeffs.shape[0]
    out = np.zeros_like(rho, dtype=np.complex128)
    for j in range(n):
        src = rho.reshape(dim, dim >> (j + 1), 2, 1 << j)
        dst = out.reshape(dim, dim >> (j + 1), 2, 1 << j)
        dst[:, :, 0] += np.conj(coeffs[j]) * src[:, :, 1]
    return out


def field_correlators(rho, coeffs):
    """(intensity, two-photon numerator) of E+ = sum_j c_j sigma_j^-."""
    rho = np.asarray(rho, dtype=np.complex128)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    one_down = _field_lower_left(rho, coeffs)
    intensity = np.trace(_field_raise_right(one_down, coeffs)).real
    two_down = _field_lower_left(one_down, coeffs)
    sandwich = _field_raise_right(
        _field_raise_right(two_down, coeffs), coeffs)
    return float(intensity), float(np.trace(sandwich).real)


def pair_reductions(rho):
    """(N(N-1)/2, 4, 4) stack of two-atom reduced density matrices."""
    from ..manybody import n_atoms_of, partial_trace_pair

    n = n_atoms_of(rho)
    stack = [partial_trace_pair(rho, j, m)
             for j in range(n) for m in range(j + 1, n)]
    return np.array(stack)


class Stepper:
    """scipy RK45 wrapper with streaming output via dense interpolation."""

    name = NAME

    def __init__(self, amat, gamma, drive, rel_tol, abs_tol, max_step=np.inf):
        self._amat = np.asarray(amat, dtype=np.complex128)
        self._gamma = np.asarray(gamma, dtype=np.float64)
        self._drive = np.asarray(drive, dtype=np.complex128)
        self._rtol = float(rel_tol)
        self._atol = float(abs_tol)
        self._max_step = float(max_step)
        self.t = None
        self._solver = None
        self._interp = None

    def start(self, rho0, t0, t_end):
        rho0 = np.asarray(rho0, dtype=np.complex128)
        dim = rho0.shape[0]

        def fun(t, yflat):
            return lindblad_rhs(yflat.reshape(dim, dim), self._amat,
                                self._gamma, self._drive).ravel()

        self._dim = dim
        self._solver = RK45(fun, float(t0), rho0.ravel(), float(t_end),
                            max_step=self._max_step, rtol=self._rtol,
                            atol=self._atol)
        self._interp = None
        self.t = float(t0)

    def advance_to(self, t_target):
        from ..errors import IntegrationError

        if self._solver is None:
            raise RuntimeError("call start() before advance_to()")
        if t_target < self.t - 1e-12:
            raise ValueError("targets must be nondecreasing")
        solver = self._solver
        while solver.t < t_target and solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(
                    f"scipy RK45 failed at t={solver.t:.6g}: {msg}")
            self._interp = None
        self.t = float(t_target)
        if solver.t <= t_target:
            y = solver.y
        else:
            if self._interp is None:
                self._interp = solver.dense_output()
            y = self._interp(t_target)
        rho = y.reshape(self._dim, self._dim).copy()
        rho.setflags(write=False)
        return rho

    def stats(self):
        return {
            "backend": self.name,
            "rhs_evaluations": int(self._solver.nfev) if self._solver else 0,
        }
