"""Master-equation dynamics.

The equation of motion is

    drho/dt = -i[H, rho]
              + (1/2) sum_{j,m} gamma_jm (2 s_j^- rho s_m^+
                                          - {s_m^+ s_j^-, rho}),

with H = -detuning * sum_j n_j
       + (1/2) sum_j (rabi e^(i k.r_j) s_j^+ + h.c.)
       + sum_{j != m} delta_jm s_j^+ s_m^-.

Internally the generator is split into a non-Hermitian single-excitation
matrix amat = delta - i*gamma/2 (diagonal -detuning - i/2) plus the
recycling term, which is what the kernel backends consume.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from threadpoolctl import threadpool_limits

from . import kernels
from .errors import ConvergenceError, IntegrationError
from .manybody import n_atoms_of, validate_density_matrix, ground_state

TRAJ_TRACE_TOL = 1e-8
TRAJ_HERMITICITY_TOL = 1e-10
TRAJ_POSITIVITY_TOL = -1e-6


@dataclass(frozen=True)
class DriveParameters:
    """Classical plane-wave pump in rotating-frame units."""

    rabi: float
    detuning: float = 0.0
    direction: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        if direction.shape != (3,) or \
                abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise ValueError("drive direction must be a unit 3-vector")
        direction = direction.copy()
        direction.setflags(write=False)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "rabi", float(self.rabi))
        object.__setattr__(self, "detuning", float(self.detuning))


@dataclass(frozen=True)
class IntegratorSettings:
    """Adaptive-stepper tolerances and the requested output grid.

    With `single_excitation_tail` enabled, an undriven trajectory switches
    to exact evolution of the ground + single-excitation block as soon as
    the state has no weight elsewhere (every discarded matrix element below
    `tail_cutoff`); subradiant tails then cost nothing to follow.
    """

    output_times: np.ndarray
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    check_positivity: bool = True
    single_excitation_tail: bool = False
    tail_cutoff: float = 1e-12

    def __post_init__(self):
        times = np.asarray(self.output_times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("output_times must be a nonempty 1-D array")
        if times[0] != 0.0:
            raise ValueError("output_times must start at 0")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("output_times must be strictly increasing")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.single_excitation_tail and \
                self.tail_cutoff < 10 * self.abs_tol:
            raise ValueError(
                "tail_cutoff must sit well above the integrator noise "
                "floor; use tail_cutoff >= 10 * abs_tol")
        times = times.copy()
        times.setflags(write=False)
        object.__setattr__(self, "output_times", times)


def log_output_times(t_final, n_points=200, t_min=1e-2):
    """Grid starting at 0 followed by log-spaced samples up to t_final."""
    if t_final <= t_min:
        raise ValueError("t_final must exceed t_min")
    return np.concatenate(([0.0], np.geomspace(t_min, t_final, n_points)))


def linear_output_times(t_final, n_points=200):
    return np.linspace(0.0, t_final, n_points)


@dataclass
class ObservableSeries:
    """Scalar observables sampled on the output grid of one trajectory."""

    times: np.ndarray
    columns: dict
    final_state: np.ndarray
    stats: dict = field(default_factory=dict)

    def column(self, name):
        return self.columns[name]


def build_coefficients(couplings, drive=None, config=None):
    """Pack (amat, drive_vector) for the kernel backends."""
    n = couplings.n_atoms
    detuning = 0.0 if drive is None else drive.detuning
    amat = couplings.delta.astype(np.complex128) - 0.5j * couplings.gamma
    np.fill_diagonal(amat, -detuning - 0.5j * np.diagonal(couplings.gamma))
    drive_vec = np.zeros(n, dtype=np.complex128)
    if drive is not None and drive.rabi != 0.0:
        if config is None:
            raise ValueError("a drive needs the atomic configuration "
                             "(plane-wave phases depend on positions)")
        if config.n_atoms != n:
            raise ValueError("configuration and couplings disagree on N")
        phases = config.positions @ drive.direction
        drive_vec = drive.rabi * np.exp(1j * phases)
    return amat, drive_vec


def liouvillian_rhs(rho, couplings, drive=None, config=None):
    """Right-hand side of the master equation for a Hermitian state."""
    n = n_atoms_of(rho)
    if n != couplings.n_atoms:
        raise ValueError("state dimension does not match the couplings")
    amat, drive_vec = build_coefficients(couplings, drive, config)
    backend = kernels.get_backend()
    return backend.lindblad_rhs(
        np.ascontiguousarray(rho, dtype=np.complex128),
        amat, couplings.gamma, drive_vec)


class _SingleExcitationTail:
    """Exact propagator on the ground + single-excitation subspace.

    Without a drive the single-excitation block obeys
    rho_11(t) = U rho_11(t0) U^dag and rho_10(t) = U rho_10(t0) with
    U = exp(-i H_1 (t - t0)), H_1 the one-excitation sector matrix; the
    ground population follows from trace conservation.
    """

    def __init__(self, couplings, rho, t0):
        from .spectrum import sector_effective_hamiltonian

        n = couplings.n_atoms
        self.n = n
        self.dim = 1 << n
        self.t0 = float(t0)
        self.idx1 = np.array([1 << j for j in range(n)])
        self.rho11 = rho[np.ix_(self.idx1, self.idx1)].copy()
        self.rho10 = rho[self.idx1, 0].copy()
        h1 = sector_effective_hamiltonian(couplings, 1)
        self.evals, vecs = np.linalg.eig(h1)
        self.vecs = vecs
        self.vecs_inv = np.linalg.inv(vecs)

    @classmethod
    def switchable(cls, rho, n, cutoff):
        """True when every element outside the kept block is below cutoff."""
        mask = np.zeros_like(rho, dtype=bool)
        keep = np.concatenate(([0], [1 << j for j in range(n)]))
        mask[np.ix_(keep, keep)] = True
        return np.abs(rho[~mask]).max() < cutoff

    def state_at(self, t):
        phase = np.exp(-1j * self.evals * (t - self.t0))
        u = (self.vecs * phase) @ self.vecs_inv
        rho11 = u @ self.rho11 @ u.conj().T
        rho10 = u @ self.rho10
        rho = np.zeros((self.dim, self.dim), dtype=np.complex128)
        rho[np.ix_(self.idx1, self.idx1)] = rho11
        rho[self.idx1, 0] = rho10
        rho[0, self.idx1] = rho10.conj()
        rho[0, 0] = 1.0 - np.trace(rho11).real
        return rho


def _check_trajectory_invariants(rho, t, check_positivity):
    herm = np.abs(rho - rho.conj().T).max()
    if herm > TRAJ_HERMITICITY_TOL:
        raise IntegrationError(
            f"Hermiticity violated at t={t:.6g} (max dev {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRAJ_TRACE_TOL:
        raise IntegrationError(
            f"trace drifted to {tr:.12g} at t={t:.6g}")
    if check_positivity:
        # min eig >= tol  <=>  rho + |tol| I admits a Cholesky factor;
        # the factorization is much cheaper than the full spectrum, which
        # is only computed for the diagnostic when the test fails.
        shifted = 0.5 * (rho + rho.conj().T)
        shifted[np.diag_indices_from(shifted)] += -TRAJ_POSITIVITY_TOL
        try:
            np.linalg.cholesky(shifted)
        except np.linalg.LinAlgError:
            eigmin = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
            if eigmin < TRAJ_POSITIVITY_TOL:
                raise IntegrationError(
                    f"positivity violated at t={t:.6g} "
                    f"(min eig {eigmin:.3e})") from None


def integrate(initial, couplings, drive, config, settings, observers=()):
    """Propagate a density matrix, sampling observers on the output grid.

    Each observer is a callable (t, rho) -> mapping of column name to
    float; all observers together define the series columns.  State
    invariants (trace, Hermiticity, positivity) are checked at every
    output time and violations abort the run.
    """
    n = n_atoms_of(initial)
    if n != couplings.n_atoms:
        raise ValueError("initial state dimension does not match couplings")
    validate_density_matrix(initial)
    amat, drive_vec = build_coefficients(couplings, drive, config)

    backend = kernels.get_backend()
    stepper = backend.Stepper(amat, couplings.gamma, drive_vec,
                              settings.rel_tol, settings.abs_tol,
                              settings.max_step)
    times = settings.output_times
    stepper.start(initial, times[0], times[-1])

    names = None
    data = None
    rho = None
    tail = None
    tail_allowed = settings.single_excitation_tail and \
        np.all(drive_vec == 0)
    # Threaded BLAS calls (eigvalsh etc.) between stepper segments leave
    # spin-waiting worker threads that starve the jitted stepping loop; pin
    # BLAS to one thread for the duration of the trajectory.
    with threadpool_limits(limits=1, user_api="blas"):
        for t in times:
            if tail is None:
                rho = stepper.advance_to(t)
                if tail_allowed and _SingleExcitationTail.switchable(
                        rho, n, settings.tail_cutoff):
                    tail = _SingleExcitationTail(couplings, rho, t)
                    rho = tail.state_at(t)
            else:
                rho = tail.state_at(t)
            _check_trajectory_invariants(rho, t, settings.check_positivity)
            row = {}
            for obs in observers:
                row.update(obs(t, rho))
            if names is None:
                names = list(row)
                data = {k: [] for k in names}
            for k in names:
                data[k].append(row[k])
    columns = {k: np.asarray(v, dtype=float) for k, v in data.items()} \
        if names else {}
    stats = stepper.stats()
    if tail is not None:
        stats["tail_switch_time"] = tail.t0
    return ObservableSeries(times=np.array(times), columns=columns,
                            final_state=np.array(rho, copy=True),
                            stats=stats)


_SIGMA_MINUS_2 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
_SIGMA_PLUS_2 = _SIGMA_MINUS_2.T.copy()
_NUMBER_2 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


def _site_operator(n, atom, mat2):
    left = sp.identity(1 << (n - 1 - atom), format="csr", dtype=complex)
    right = sp.identity(1 << atom, format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(mat2)), right, format="csr")


def _sparse_liouvillian(couplings, drive, config):
    """Vectorized generator acting on row-major vec(rho), sparse CSR."""
    n = couplings.n_atoms
    dim = 1 << n
    amat, drive_vec = build_coefficients(couplings, drive, config)

    lowers = [_site_operator(n, j, _SIGMA_MINUS_2) for j in range(n)]
    raises = [op.T for op in lowers]
    hnh = sp.csr_matrix((dim, dim), dtype=complex)
    for j in range(n):
        hnh = hnh + amat[j, j] * _site_operator(n, j, _NUMBER_2)
        if drive_vec[j] != 0:
            hnh = hnh + 0.5 * drive_vec[j] * raises[j] \
                + 0.5 * np.conj(drive_vec[j]) * lowers[j]
        for m in range(n):
            if m != j:
                hnh = hnh + amat[j, m] * (raises[j] @ lowers[m])

    eye = sp.identity(dim, format="csr", dtype=complex)
    liou = -1j * sp.kron(hnh, eye) + 1j * sp.kron(eye, hnh.conj())
    for j in range(n):
        for m in range(n):
            liou = liou + couplings.gamma[j, m] * sp.kron(
                lowers[j], lowers[m])
    return liou.tocsr()


def steady_state(couplings, drive, config, *, residual_tol=1e-10,
                 dense_cutoff=6, max_time=4000.0, chunk=100.0):
    """Driven steady state: null vector of the generator, unit trace.

    Up to `dense_cutoff` atoms the vectorized generator is solved
    directly (one row replaced by the trace constraint); above that the
    driven equation is integrated from the ground state until the
    right-hand side falls below `residual_tol`.
    """
    if drive is None or drive.rabi <= 0:
        raise ValueError("steady_state needs a drive with rabi > 0 "
                         "(the undriven fixed point is the ground state)")
    n = couplings.n_atoms
    dim = 1 << n

    if n <= dense_cutoff:
        liou = _sparse_liouvillian(couplings, drive, config).tolil()
        trace_cols = np.arange(dim) * (dim + 1)
        liou[0, :] = 0.0
        liou[0, trace_cols] = 1.0
        rhs_vec = np.zeros(dim * dim, dtype=complex)
        rhs_vec[0] = 1.0
        solution = spla.spsolve(liou.tocsc(), rhs_vec)
        rho = solution.reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        residual = np.abs(
            liouvillian_rhs(rho, couplings, drive, config)).max()
        if residual > residual_tol:
            raise ConvergenceError(
                f"null-space steady state residual {residual:.3e} exceeds "
                f"{residual_tol:.1e}")
        validate_density_matrix(rho)
        return rho

    amat, drive_vec = build_coefficients(couplings, drive, config)
    backend = kernels.get_backend()
    stepper = backend.Stepper(amat, couplings.gamma, drive_vec,
                              rel_tol=1e-10, abs_tol=1e-12)
    stepper.start(ground_state(n), 0.0, max_time)
    t = 0.0
    while t < max_time:
        t = min(t + chunk, max_time)
        rho = stepper.advance_to(t)
        residual = np.abs(
            liouvillian_rhs(rho, couplings, drive, config)).max()
        if residual < residual_tol:
            rho = np.array(rho, copy=True)
            rho = 0.5 * (rho + rho.conj().T)
            rho /= np.trace(rho).real
            validate_density_matrix(rho)
            return rho
    raise ConvergenceError(
        f"driven relaxation did not reach residual {residual_tol:.1e} "
        f"within t={max_time:g} (last residual {residual:.3e})")
