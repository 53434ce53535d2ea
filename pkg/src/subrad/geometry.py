"""Atomic geometries in natural units: lengths in 1/k, so k = 1.

Regular chains are deterministic; disordered clouds are sampled uniformly
inside a ball whose radius is set by the resonant optical thickness
b0 = 2N/(kR)^2.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SamplingError

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class AtomicConfiguration:
    """Positions (units of 1/k) and unit polarization vectors of N atoms."""

    positions: np.ndarray       # (N, 3) float
    polarizations: np.ndarray   # (N, 3) complex unit vectors
    label: str = ""

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=float))
        pol = np.ascontiguousarray(
            np.asarray(self.polarizations, dtype=np.complex128))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must be an (N, 3) array with N >= 1")
        if pol.shape != pos.shape:
            raise ValueError("polarizations must match positions in shape")
        norms = np.linalg.norm(pol, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValueError("every polarization vector must have unit norm")
        n = pos.shape[0]
        if n > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
            off = dist[~np.eye(n, dtype=bool)]
            if np.any(off <= 0.0):
                raise ValueError("coincident atoms are not allowed")
        pos.setflags(write=False)
        pol.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "polarizations", pol)

    @property
    def n_atoms(self):
        return self.positions.shape[0]

    def pair_distances(self):
        """(N, N) matrix of pairwise distances (zero diagonal)."""
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def save_table(self, path):
        """Plain-text table, one row per atom: x y z ex ey ez."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# x y z ex ey ez\n")
            for r, e in zip(self.positions, self.polarizations):
                cols = [repr(float(v)) for v in r]
                cols += [_fmt_complex(v) for v in e]
                fh.write(" ".join(cols) + "\n")

    @classmethod
    def load_table(cls, path, label=""):
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                rows.append(line.split())
        pos = np.array([[float(v) for v in row[:3]] for row in rows])
        pol = np.array([[complex(v) for v in row[3:6]] for row in rows])
        return cls(pos, pol, label=label)


def _fmt_complex(z):
    z = complex(z)
    if z.imag == 0.0:
        return repr(z.real)
    return f"({z.real!r}{z.imag:+}j)"


def _unit(vec, name):
    v = np.asarray(vec, dtype=float if np.isrealobj(vec) else complex)
    norm = np.linalg.norm(v)
    if v.shape != (3,) or abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must be a unit 3-vector")
    return v


def build_chain(n_atoms, spacing_kd, axis=X_AXIS, polarization=Z_AXIS,
                label=""):
    """Regular chain: atom j sits at j * spacing_kd * axis.

    The reference arrangement keeps the dipoles perpendicular to the chain;
    a non-perpendicular combination is accepted but flagged, since the
    transverse coupling formulas are usually what one wants to probe.
    """
    n_atoms = int(n_atoms)
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    spacing_kd = float(spacing_kd)
    if spacing_kd <= 0:
        raise ValueError("spacing_kd must be positive")
    axis = _unit(axis, "axis")
    pol = _unit(polarization, "polarization")
    if n_atoms > 1 and abs(np.vdot(pol, axis)) > 1e-9:
        warnings.warn("chain polarization is not perpendicular to the axis",
                      stacklevel=2)
    positions = np.arange(n_atoms)[:, None] * spacing_kd * axis[None, :]
    polarizations = np.tile(pol.astype(np.complex128), (n_atoms, 1))
    return AtomicConfiguration(positions, polarizations,
                               label=label or f"chain-N{n_atoms}")


def cloud_radius(n_atoms, b0):
    """Ball radius kR with resonant optical thickness b0 = 2N/(kR)^2."""
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    return np.sqrt(2.0 * n_atoms / b0)


def sample_cloud(n_atoms, b0, rng_seed, min_distance=0.05,
                 polarization=Z_AXIS, label="", max_tries=1000):
    """Uniform-density spherical cloud with a pairwise exclusion radius.

    Sampling procedure (fixed so runs are reproducible from the seed):
    points are drawn one at a time as radius kR * u^(1/3) times an isotropic
    direction (normalized Gaussian triple), using numpy's default PCG64
    generator seeded with `rng_seed`.  A draw closer than `min_distance` to
    any accepted point is rejected and redrawn; after `max_tries`
    consecutive rejections the cloud is deemed too dense to sample.
    """
    n_atoms = int(n_atoms)
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    radius = cloud_radius(n_atoms, b0)
    if min_distance < 0:
        raise ValueError("min_distance must be nonnegative")
    if min_distance >= radius and n_atoms > 1:
        raise ValueError("min_distance must be smaller than the cloud radius")
    pol = _unit(polarization, "polarization")

    rng = np.random.default_rng(rng_seed)
    accepted = np.empty((n_atoms, 3))
    count = 0
    failures = 0
    while count < n_atoms:
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        r = radius * rng.uniform() ** (1.0 / 3.0)
        candidate = r * direction
        if count and min_distance > 0:
            dist = np.linalg.norm(accepted[:count] - candidate, axis=1)
            if dist.min() < min_distance:
                failures += 1
                if failures >= max_tries:
                    raise SamplingError(
                        f"could not place atom {count + 1}/{n_atoms} with "
                        f"min_distance={min_distance} inside kR={radius:.3g} "
                        f"after {max_tries} rejections")
                continue
        accepted[count] = candidate
        count += 1
        failures = 0

    polarizations = np.tile(pol.astype(np.complex128), (n_atoms, 1))
    return AtomicConfiguration(
        accepted, polarizations,
        label=label or f"cloud-N{n_atoms}-b0{b0:.4g}-seed{rng_seed}")
