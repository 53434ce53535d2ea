"""Jit-compiled master-equation kernels.

The right-hand side is applied through bit arithmetic on the basis index
(bit j of index b = atom j, 1 = excited); collective operators are never
materialized as 2^N x 2^N matrices.  The density matrix must be Hermitian:
the coherent/anti-Hermitian part is formed as -i(Y - Y^dag) with
Y = H_nh rho, which is exact for Hermitian input and keeps the output
Hermitian to rounding.

`amat` packs the non-Hermitian single-excitation generator:
amat[j, m] = shift_jm - i*gamma_jm/2 off the diagonal and
amat[j, j] = -detuning - i/2 on it.  `drive[j]` is the complex Rabi
amplitude at atom j (zero when the pump is off).
"""

import numpy as np
from numba import njit, prange

from .common import (
    DP_A,
    DP_B,
    DP_E,
    MAX_FACTOR,
    MIN_FACTOR,
    SAFETY,
    select_initial_step,
)

NAME = "numba"

# Above this Hilbert-space dimension the threaded kernels win; below it the
# fork/join overhead dominates and the serial variants are used.
PARALLEL_DIM_THRESHOLD = 256


def _rhs_body(rho, amat, gamma, drive, out):
    dim = rho.shape[0]
    n = amat.shape[0]
    # Y = H_nh rho, row by row.
    for r in prange(dim):
        diag = 0.0 + 0.0j
        for j in range(n):
            if (r >> j) & 1:
                diag += amat[j, j]
        for c in range(dim):
            out[r, c] = diag * rho[r, c]
        for j in range(n):
            bj = 1 << j
            if r & bj:
                base = r - bj
                wj = 0.5 * drive[j]
                if wj != 0:
                    for c in range(dim):
                        out[r, c] += wj * rho[base, c]
                for m in range(n):
                    if m == j or (r >> m) & 1:
                        continue
                    src = base + (1 << m)
                    a = amat[j, m]
                    for c in range(dim):
                        out[r, c] += a * rho[src, c]
            else:
                wj = 0.5 * np.conj(drive[j])
                if wj != 0:
                    src = r + bj
                    for c in range(dim):
                        out[r, c] += wj * rho[src, c]
    # out <- -i(Y - Y^dag), Hermitian by construction.
    for r in prange(dim):
        out[r, r] = 2.0 * out[r, r].imag + 0.0j
        for c in range(r + 1, dim):
            v = -1j * (out[r, c] - np.conj(out[c, r]))
            out[r, c] = v
            out[c, r] = np.conj(v)
    # Recycling term sum_{j,m} gamma_jm sigma_j^- rho sigma_m^+.
    for r in prange(dim):
        for j in range(n):
            bj = 1 << j
            if r & bj:
                continue
            src = r + bj
            for m in range(n):
                g = gamma[j, m]
                bm = 1 << m
                step = bm << 1
                for chi in range(0, dim, step):
                    for c in range(chi, chi + bm):
                        out[r, c] += g * rho[src, c + bm]
    # Resymmetrize: the exact map is Hermitian on Hermitian input, and the
    # summation order above leaves ~1e-16 asymmetry that would otherwise
    # accumulate over long trajectories.
    for r in prange(dim):
        out[r, r] = out[r, r].real + 0.0j
        for c in range(r + 1, dim):
            v = 0.5 * (out[r, c] + np.conj(out[c, r]))
            out[r, c] = v
            out[c, r] = np.conj(v)


_rhs_serial = njit(cache=True, fastmath=True)(_rhs_body)
_rhs_parallel = njit(cache=True, fastmath=True, parallel=True)(_rhs_body)


@njit(cache=True, fastmath=True)
def _field_correlators_impl(rho, coeffs):
    """(intensity, two-photon numerator) of E+ = sum_j c_j sigma_j^-.

    <E- E+>      = sum_{j,m} c_j* c_m tr(rho s_j^+ s_m^-)
    <E- E- E+ E+> = sum c_p* c_q* c_j c_m tr(rho s_p^+ s_q^+ s_j^- s_m^-),
    evaluated by bit-indexed gathers (operators never materialized).
    """
    dim = rho.shape[0]
    n = coeffs.shape[0]
    intensity = 0.0 + 0.0j
    for j in range(n):
        bj = 1 << j
        for m in range(n):
            bm = 1 << m
            acc = 0.0 + 0.0j
            if j == m:
                for b in range(dim):
                    if b & bj:
                        acc += rho[b, b]
            else:
                # s_j^+ s_m^- maps |b> -> |b - 2^m + 2^j| for occupied m,
                # empty j; trace picks rho[b, image(b)].
                for b in range(dim):
                    if (b & bm) and not (b & bj):
                        acc += rho[b, b - bm + bj]
            intensity += np.conj(coeffs[j]) * coeffs[m] * acc
    numerator = 0.0 + 0.0j
    for p in range(n):
        bp = 1 << p
        for q in range(n):
            if q == p:
                continue
            bq = 1 << q
            for j in range(n):
                bj = 1 << j
                for m in range(n):
                    if m == j:
                        continue
                    bm = 1 << m
                    pref = (np.conj(coeffs[p]) * np.conj(coeffs[q])
                            * coeffs[j] * coeffs[m])
                    acc = 0.0 + 0.0j
                    for b in range(dim):
                        if not (b & bj) or not (b & bm):
                            continue
                        b2 = b - bj - bm
                        if b2 & bq:
                            continue
                        b3 = b2 + bq
                        if b3 & bp:
                            continue
                        acc += rho[b, b3 + bp]
                    numerator += pref * acc
    return intensity.real, numerator.real


def field_correlators(rho, coeffs):
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    return _field_correlators_impl(rho, coeffs)


@njit(cache=True)
def _pair_reductions_impl(rho, n):
    """All two-atom reduced matrices, stacked pair-major: (j, m), j < m."""
    n_pairs = n * (n - 1) // 2
    out = np.zeros((n_pairs, 4, 4), dtype=np.complex128)
    dim = rho.shape[0]
    pair = 0
    for j in range(n):
        bj = 1 << j
        for m in range(j + 1, n):
            bm = 1 << m
            rest = dim - 1 - bj - bm  # mask of the traced-out atoms
            for r4 in range(4):
                row_bits = (bj if r4 & 2 else 0) | (bm if r4 & 1 else 0)
                for c4 in range(4):
                    col_bits = (bj if c4 & 2 else 0) | (bm if c4 & 1 else 0)
                    acc = 0.0 + 0.0j
                    b = 0
                    while True:  # iterate submasks of `rest`
                        acc += rho[row_bits | b, col_bits | b]
                        if b == rest:
                            break
                        b = (b - rest) & rest
                    out[pair, r4, c4] = acc
            pair += 1
    return out


def pair_reductions(rho):
    """(N(N-1)/2, 4, 4) stack of two-atom reduced density matrices."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    n = rho.shape[0].bit_length() - 1
    return _pair_reductions_impl(rho, n)


@njit(cache=True)
def _eval_rhs(y, amat, gamma, drive, out, threaded):
    if threaded:
        _rhs_parallel(y, amat, gamma, drive, out)
    else:
        _rhs_serial(y, amat, gamma, drive, out)


@njit(cache=True)
def _advance(rho, t0, t1, h_start, amat, gamma, drive, rtol, atol, max_step,
             kwork, ystage, ynew, threaded, max_steps):
    """March rho from t0 to exactly t1; kwork[0] must hold f(t0, rho).

    Returns (h_next, status, n_steps, n_rejected) with status 0 = ok,
    1 = step-size underflow, 2 = step budget exhausted.  rho is updated
    in place and kwork[0] holds f(t1, rho) on success (first-same-as-last).
    """
    size = rho.size
    yf = rho.reshape(size)
    kf = kwork.reshape(7, size)
    sf = ystage.reshape(size)
    nf = ynew.reshape(size)

    t = t0
    h_prop = h_start
    n_steps = 0
    n_rejected = 0
    rejected_prev = False

    while t < t1:
        h_unclipped = min(h_prop, max_step)
        if not rejected_prev and h_unclipped < 1e-13 * max(abs(t), 1.0):
            return h_unclipped, 1, n_steps, n_rejected
        if n_steps >= max_steps:
            return h_unclipped, 2, n_steps, n_rejected

        h = h_unclipped
        clipped = False
        if t + h >= t1:
            h = t1 - t
            clipped = True

        # Stages 2..6.
        for s in range(1, 6):
            for i in range(size):
                sf[i] = yf[i]
            for j in range(s):
                a = DP_A[s, j]
                if a != 0.0:
                    ha = h * a
                    for i in range(size):
                        sf[i] += ha * kf[j, i]
            _eval_rhs(ystage, amat, gamma, drive, kwork[s], threaded)

        # Fifth-order solution and trailing stage.
        for i in range(size):
            nf[i] = yf[i] + h * (DP_B[0] * kf[0, i] + DP_B[2] * kf[2, i]
                                 + DP_B[3] * kf[3, i] + DP_B[4] * kf[4, i]
                                 + DP_B[5] * kf[5, i])
        _eval_rhs(ynew, amat, gamma, drive, kwork[6], threaded)

        # Weighted RMS error norm.
        acc = 0.0
        for i in range(size):
            e = h * (DP_E[0] * kf[0, i] + DP_E[2] * kf[2, i]
                     + DP_E[3] * kf[3, i] + DP_E[4] * kf[4, i]
                     + DP_E[5] * kf[5, i] + DP_E[6] * kf[6, i])
            ay = abs(yf[i])
            an = abs(nf[i])
            sc = atol + rtol * (ay if ay > an else an)
            q = abs(e) / sc
            acc += q * q
        norm = np.sqrt(acc / size)

        n_steps += 1
        if norm <= 1.0:
            if norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * norm ** -0.2)
            if rejected_prev:
                factor = min(1.0, factor)
            t = t + h if not clipped else t1
            for i in range(size):
                yf[i] = nf[i]
            for i in range(size):
                kf[0, i] = kf[6, i]
            if clipped:
                h_prop = max(h_unclipped, h * factor)
            else:
                h_prop = h * factor
            rejected_prev = False
        else:
            n_rejected += 1
            h_prop = h * max(MIN_FACTOR, SAFETY * norm ** -0.2)
            rejected_prev = True

    return h_prop, 0, n_steps, n_rejected


def _use_threads(dim):
    return dim >= PARALLEL_DIM_THRESHOLD


def lindblad_rhs(rho, amat, gamma, drive, out=None):
    """Master-equation right-hand side for a Hermitian density matrix."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if out is None:
        out = np.empty_like(rho)
    _eval_rhs(rho, np.ascontiguousarray(amat, dtype=np.complex128),
              np.ascontiguousarray(gamma, dtype=np.float64),
              np.ascontiguousarray(drive, dtype=np.complex128),
              out, _use_threads(rho.shape[0]))
    return out


class Stepper:
    """Adaptive Dormand-Prince 5(4) propagator, fully jit-compiled.

    Landing on requested times is done by clipping the step, so states
    handed back by `advance_to` carry no interpolation error.
    """

    name = NAME
    max_steps_per_segment = 50_000_000

    def __init__(self, amat, gamma, drive, rel_tol, abs_tol, max_step=np.inf):
        self._amat = np.ascontiguousarray(amat, dtype=np.complex128)
        self._gamma = np.ascontiguousarray(gamma, dtype=np.float64)
        self._drive = np.ascontiguousarray(drive, dtype=np.complex128)
        self._rtol = float(rel_tol)
        self._atol = float(abs_tol)
        self._max_step = float(max_step)
        self.t = None
        self.n_steps = 0
        self.n_rejected = 0
        self.n_rhs_evals = 0

    def start(self, rho0, t0, t_end):
        rho0 = np.array(rho0, dtype=np.complex128, order="C")
        dim = rho0.shape[0]
        self._rho = rho0
        self._kwork = np.empty((7, dim, dim), dtype=np.complex128)
        self._ystage = np.empty_like(rho0)
        self._ynew = np.empty_like(rho0)
        self._threaded = _use_threads(dim)
        self.t = float(t0)

        _eval_rhs(self._rho, self._amat, self._gamma, self._drive,
                  self._kwork[0], self._threaded)

        def rhs_flat(yflat):
            out = np.empty_like(self._rho)
            _eval_rhs(np.ascontiguousarray(yflat.reshape(dim, dim)),
                      self._amat, self._gamma, self._drive, out,
                      self._threaded)
            return out.ravel()

        self._h = select_initial_step(
            rhs_flat, t0, rho0.ravel(), self._kwork[0].ravel().copy(),
            t_end, self._rtol, self._atol, self._max_step)
        self.n_rhs_evals += 2

    def advance_to(self, t_target):
        from ..errors import IntegrationError

        if self.t is None:
            raise RuntimeError("call start() before advance_to()")
        if t_target < self.t - 1e-12:
            raise ValueError("targets must be nondecreasing")
        if t_target > self.t:
            h, status, ns, nr = _advance(
                self._rho, self.t, float(t_target), self._h, self._amat,
                self._gamma, self._drive, self._rtol, self._atol,
                self._max_step, self._kwork, self._ystage, self._ynew,
                self._threaded, self.max_steps_per_segment)
            self.n_steps += ns
            self.n_rejected += nr
            self.n_rhs_evals += 6 * ns
            if status == 1:
                raise IntegrationError(
                    f"step size underflow at t={self.t:.6g} "
                    f"(after {self.n_steps} steps, h={h:.3e})")
            if status == 2:
                raise IntegrationError(
                    f"step budget exhausted advancing to t={t_target:.6g}")
            self._h = h
            self.t = float(t_target)
        view = self._rho.view()
        view.setflags(write=False)
        return view

    def stats(self):
        return {
            "backend": self.name,
            "steps": int(self.n_steps),
            "rejected_steps": int(self.n_rejected),
            "rhs_evaluations": int(self.n_rhs_evals),
        }
