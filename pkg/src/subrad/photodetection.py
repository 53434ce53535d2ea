"""Far-field intensity and equal-time second-order coherence.

The positive-frequency field radiated toward a unit vector n is
E^+ = sum_j e^(-i n.r_j) s_j^-  (prefactors cancel in the normalized
correlators and are set to 1).  Equal-time statistics follow from

    g2(t, t) = <E- E- E+ E+> / <E- E+>^2,

which vanishes for any state carrying at most one excitation.  Finite
detector resolution is modeled by averaging numerator and intensity
separately over a sliding window before taking the ratio.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .manybody import n_atoms_of

INTENSITY_FLOOR = 1e-14


@dataclass(frozen=True)
class DetectionGeometry:
    """Far-field observation direction."""

    direction: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        if direction.shape != (3,) or \
                abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise ValueError("detection direction must be a unit 3-vector")
        direction = direction.copy()
        direction.setflags(write=False)
        object.__setattr__(self, "direction", direction)


def field_phases(config, geometry):
    """Per-atom factors e^(-i n.r_j) of the detected field."""
    return np.exp(-1j * (config.positions @ geometry.direction))


def intensity_and_g2_numerator(rho, config, geometry):
    """(<E- E+>, <E- E- E+ E+>) evaluated by operator application."""
    n_atoms_of(rho)
    coeffs = field_phases(config, geometry)
    backend = kernels.get_backend()
    intensity, numerator = backend.field_correlators(rho, coeffs)
    return float(intensity), float(numerator)


def g2_equal_time(rho, config, geometry=None):
    """Equal-time second-order coherence; NaN marks vanishing intensity.

    An undefined value (intensity at the floor) is reported as missing
    data, never as zero.
    """
    if geometry is None:
        geometry = DetectionGeometry()
    intensity, numerator = intensity_and_g2_numerator(rho, config, geometry)
    if intensity <= INTENSITY_FLOOR:
        return float("nan")
    return numerator / intensity**2


def windowed_g2(times, g2_numerator, intensity, window):
    """Detector-resolution average of the equal-time coherence.

    Numerator and intensity are averaged separately over a centered window
    of width `window` (trapezoidal rule on the sampled grid) and the ratio
    avg_num / avg_intensity^2 is returned at every sample whose window fits
    inside the series span.
    """
    times = np.asarray(times, dtype=float)
    g2_numerator = np.asarray(g2_numerator, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need at least two samples")
    if not (g2_numerator.shape == intensity.shape == times.shape):
        raise ValueError("series must share one time grid")
    window = float(window)
    if window <= 0:
        raise ValueError("window must be positive")
    if window > times[-1] - times[0]:
        raise ValueError("window exceeds the series span")

    cum_num = np.concatenate(
        ([0.0], cumulative_trapezoid(g2_numerator, times)))
    cum_int = np.concatenate(([0.0], cumulative_trapezoid(intensity, times)))
    lo = times - window / 2
    hi = times + window / 2
    valid = (lo >= times[0]) & (hi <= times[-1])
    t_out = times[valid]
    avg_num = (np.interp(hi[valid], times, cum_num)
               - np.interp(lo[valid], times, cum_num)) / window
    avg_int = (np.interp(hi[valid], times, cum_int)
               - np.interp(lo[valid], times, cum_int)) / window
    with np.errstate(divide="ignore", invalid="ignore"):
        values = avg_num / avg_int**2
    values[avg_int**2 <= INTENSITY_FLOOR**2] = np.nan
    return t_out, values
