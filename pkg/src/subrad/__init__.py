"""Collective spontaneous emission of N two-level atoms in free space.

Exact density-matrix dynamics under the dipole-dipole master equation,
with pairwise-entanglement tracking, far-field photon statistics, and
fixed-excitation spectral analysis.  All quantities use natural units:
lengths in 1/k, rates in units of the single-atom linewidth, times in its
inverse.
"""

from .coupling import CouplingMatrices, build_couplings, greens_tensor
from .dynamics import (DriveParameters, IntegratorSettings, ObservableSeries,
                       integrate, liouvillian_rhs, log_output_times,
                       steady_state)
from .entanglement import (ConcurrenceMatrix, aggregate_metrics,
                           concurrence_4x4, concurrence_matrix)
from .geometry import AtomicConfiguration, build_chain, cloud_radius, \
    sample_cloud
from .kernels import active_backend_name
from .manybody import (apply_local, excitation_populations,
                       make_initial_state, partial_trace_pair)
from .photodetection import DetectionGeometry, g2_equal_time, windowed_g2
from .spectrum import (SectorSpectrum, entanglement_peak_time,
                       sector_effective_hamiltonian, sector_spectrum,
                       subradiant_lifetime)

__version__ = "0.1.0"

__all__ = [
    "AtomicConfiguration",
    "ConcurrenceMatrix",
    "CouplingMatrices",
    "DetectionGeometry",
    "DriveParameters",
    "IntegratorSettings",
    "ObservableSeries",
    "SectorSpectrum",
    "active_backend_name",
    "aggregate_metrics",
    "apply_local",
    "build_chain",
    "build_couplings",
    "cloud_radius",
    "concurrence_4x4",
    "concurrence_matrix",
    "entanglement_peak_time",
    "excitation_populations",
    "g2_equal_time",
    "greens_tensor",
    "integrate",
    "liouvillian_rhs",
    "log_output_times",
    "make_initial_state",
    "partial_trace_pair",
    "sample_cloud",
    "sector_effective_hamiltonian",
    "sector_spectrum",
    "steady_state",
    "subradiant_lifetime",
    "windowed_g2",
    "__version__",
]
