"""Observer callables for trajectory sampling.

An observer maps (t, rho) to a dict of scalar columns; the integration
driver merges all observers into one row per output time.
"""

import numpy as np

from .entanglement import (DEFAULT_CLUSTER_THRESHOLD, aggregate_metrics,
                           concurrence_matrix)
from .manybody import excitation_populations
from .photodetection import (INTENSITY_FLOOR, intensity_and_g2_numerator)


def population_observer(n_atoms):
    names = [f"P_{k}" for k in range(n_atoms + 1)]

    def observe(t, rho):
        pops = excitation_populations(rho)
        return dict(zip(names, pops))

    return observe


def purity_observer():
    def observe(t, rho):
        return {"purity": float(np.einsum("ij,ji->", rho, rho).real)}

    return observe


def concurrence_observer(threshold=DEFAULT_CLUSTER_THRESHOLD, on_matrix=None):
    """C_avg / C_min / N_ent per output time.

    `on_matrix(t, ConcurrenceMatrix)` is invoked with the full pair matrix,
    letting the caller persist snapshots without recomputing it.
    """

    def observe(t, rho):
        cm = concurrence_matrix(rho, time=t)
        if on_matrix is not None:
            on_matrix(t, cm)
        c_avg, c_min, n_ent = aggregate_metrics(cm, threshold)
        return {"C_avg": c_avg, "C_min": c_min, "N_ent": float(n_ent)}

    return observe


def g2_observer(config, geometry):
    """Intensity, raw two-photon numerator, and their normalized ratio.

    The ratio is NaN (missing) whenever the intensity sits at the floor;
    numerator and intensity stay available for detector-window averaging.
    """

    def observe(t, rho):
        intensity, numerator = intensity_and_g2_numerator(
            rho, config, geometry)
        if intensity > INTENSITY_FLOOR:
            g2 = numerator / intensity**2
        else:
            g2 = float("nan")
        return {"intensity": intensity, "g2_numerator": numerator, "g2": g2}

    return observe
