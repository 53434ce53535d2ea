"""Experiment orchestration: configs, single runs, disorder ensembles.

A run directory contains:

    config_resolved.yaml   fully-resolved configuration (provenance)
    positions.csv          one row per atom: x y z ex ey ez
    series.csv             one row per output time, one column per scalar
    snapshots/             per-time pair-concurrence matrices (CSV)
    spectrum.csv           sector eigenvalues (real, imag, sector)
    manifest.json          seeds, versions, backend, wall time, stats
    schema.json            column documentation for every CSV

Ensembles add per-realization subdirectories plus summary.csv holding the
per-time mean and min/max envelope of each scalar observable over the
successful realizations.
"""

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .coupling import build_couplings
from .dynamics import (DriveParameters, IntegratorSettings, integrate,
                       linear_output_times, log_output_times)
from .entanglement import DEFAULT_CLUSTER_THRESHOLD
from .errors import ConfigError
from .geometry import build_chain, cloud_radius, sample_cloud
from .manybody import INITIAL_STATE_KINDS, make_initial_state
from .observables import (concurrence_observer, g2_observer,
                          population_observer, purity_observer)
from .photodetection import DetectionGeometry, windowed_g2
from .spectrum import sector_spectrum

KNOWN_OBSERVABLES = ("populations", "concurrence", "g2", "purity")


@dataclass(frozen=True)
class GeometrySpec:
    kind: str                     # "chain" | "cloud"
    n_atoms: int
    spacing: float | None = None  # chain step, units of 1/k
    axis: tuple = (1.0, 0.0, 0.0)
    polarization: tuple = (0.0, 0.0, 1.0)
    b0: float | None = None       # cloud optical thickness (or radius)
    radius: float | None = None   # cloud radius kR, alternative to b0
    min_distance: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class OutputGridSpec:
    kind: str = "log"             # "log" | "linear" | "explicit"
    t_final: float = 10.0
    points: int = 200
    t_min: float = 1e-2
    times: tuple = ()             # explicit grid


@dataclass(frozen=True)
class EnsembleSpec:
    realizations: int = 1
    base_seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    geometry: GeometrySpec
    kernel: str = "vectorial"
    initial_state: str = "mixture"
    epsilon: float | None = None
    drive: DriveParameters | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    check_positivity: bool = True
    single_excitation_tail: bool = False
    output_grid: OutputGridSpec = field(default_factory=OutputGridSpec)
    observables: tuple = KNOWN_OBSERVABLES
    detection_direction: tuple = (1.0, 0.0, 0.0)
    detector_windows: tuple = ()
    snapshot_times: tuple = ()
    spectrum_sectors: tuple = (1, 2)
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    output_dir: str = "runs/out"


def _require(mapping, key, context):
    if key not in mapping:
        raise ConfigError(f"missing key {key!r} in {context}")
    return mapping[key]


def _geometry_from_dict(raw):
    kind = _require(raw, "kind", "geometry")
    if kind not in ("chain", "cloud"):
        raise ConfigError(f"geometry.kind must be 'chain' or 'cloud', "
                          f"got {kind!r}")
    n_atoms = int(_require(raw, "n_atoms", "geometry"))
    spec = dict(kind=kind, n_atoms=n_atoms)
    if kind == "chain":
        spec["spacing"] = float(_require(raw, "spacing", "chain geometry"))
        spec["axis"] = tuple(raw.get("axis", (1.0, 0.0, 0.0)))
        spec["polarization"] = tuple(raw.get("polarization", (0.0, 0.0, 1.0)))
    else:
        b0 = raw.get("b0")
        radius = raw.get("radius")
        if (b0 is None) == (radius is None):
            raise ConfigError("cloud geometry needs exactly one of b0 or "
                              "radius")
        if radius is not None:
            radius = float(radius)
            b0 = 2.0 * n_atoms / radius**2
        spec["b0"] = float(b0)
        spec["radius"] = float(cloud_radius(n_atoms, b0))
        spec["min_distance"] = float(raw.get("min_distance", 0.05))
        spec["seed"] = int(raw.get("seed", 0))
        spec["polarization"] = tuple(raw.get("polarization", (0.0, 0.0, 1.0)))
    return GeometrySpec(**spec)


def config_from_dict(raw, label="run"):
    """Validate and resolve a raw (YAML) mapping into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    unknown = set(raw) - {
        "label", "geometry", "kernel", "initial_state", "drive",
        "integrator", "observables", "detection", "snapshots", "spectrum",
        "ensemble", "output_dir", "entanglement"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    geometry = _geometry_from_dict(_require(raw, "geometry", "config"))

    kernel = raw.get("kernel", "vectorial")
    if kernel not in ("vectorial", "scalar"):
        raise ConfigError(f"kernel must be 'vectorial' or 'scalar', "
                          f"got {kernel!r}")

    init_raw = raw.get("initial_state", {"kind": "mixture"})
    if isinstance(init_raw, str):
        init_raw = {"kind": init_raw}
    init_kind = _require(init_raw, "kind", "initial_state")
    if init_kind not in INITIAL_STATE_KINDS:
        raise ConfigError(f"initial_state.kind must be one of "
                          f"{INITIAL_STATE_KINDS}, got {init_kind!r}")
    epsilon = init_raw.get("epsilon")
    if init_kind == "dicke_epsilon":
        if epsilon is None:
            raise ConfigError("dicke_epsilon initial state needs epsilon")
        epsilon = float(epsilon)

    drive = None
    if raw.get("drive") is not None:
        draw = raw["drive"]
        drive = DriveParameters(
            rabi=float(_require(draw, "rabi", "drive")),
            detuning=float(draw.get("detuning", 0.0)),
            direction=np.asarray(draw.get("direction", (1.0, 0.0, 0.0)),
                                 dtype=float))
    if init_kind == "weak_drive_steady" and drive is None:
        raise ConfigError("weak_drive_steady initial state requires drive "
                          "parameters")

    integ = raw.get("integrator", {})
    grid_raw = integ.get("output_times", {})
    if isinstance(grid_raw, (list, tuple)):
        grid = OutputGridSpec(kind="explicit",
                              times=tuple(float(t) for t in grid_raw),
                              t_final=float(grid_raw[-1]))
    else:
        grid = OutputGridSpec(
            kind=grid_raw.get("kind", "log"),
            t_final=float(grid_raw.get("t_final", 10.0)),
            points=int(grid_raw.get("points", 200)),
            t_min=float(grid_raw.get("t_min", 1e-2)))
        if grid.kind not in ("log", "linear"):
            raise ConfigError("output_times.kind must be log or linear")

    observables = tuple(raw.get("observables", KNOWN_OBSERVABLES))
    for name in observables:
        if name not in KNOWN_OBSERVABLES:
            raise ConfigError(f"unknown observable {name!r}; known: "
                              f"{KNOWN_OBSERVABLES}")

    detection = raw.get("detection", {})
    snapshots = raw.get("snapshots", {})
    spectrum_raw = raw.get("spectrum", {})
    ens_raw = raw.get("ensemble", {})
    ent_raw = raw.get("entanglement", {})

    return ExperimentConfig(
        label=str(raw.get("label", label)),
        geometry=geometry,
        kernel=kernel,
        initial_state=init_kind,
        epsilon=epsilon,
        drive=drive,
        rel_tol=float(integ.get("rel_tol", 1e-8)),
        abs_tol=float(integ.get("abs_tol", 1e-10)),
        max_step=float(integ.get("max_step", np.inf)),
        check_positivity=bool(integ.get("check_positivity", True)),
        single_excitation_tail=bool(integ.get("single_excitation_tail",
                                              False)),
        output_grid=grid,
        observables=observables,
        detection_direction=tuple(detection.get("direction", (1.0, 0.0, 0.0))),
        detector_windows=tuple(float(w) for w in
                               detection.get("windows", ())),
        snapshot_times=tuple(float(t) for t in snapshots.get("times", ())),
        spectrum_sectors=tuple(int(s) for s in
                               spectrum_raw.get("sectors", (1, 2))),
        cluster_threshold=float(ent_raw.get("threshold",
                                            DEFAULT_CLUSTER_THRESHOLD)),
        ensemble=EnsembleSpec(
            realizations=int(ens_raw.get("realizations", 1)),
            base_seed=int(ens_raw.get("base_seed",
                                      raw.get("geometry", {}).get("seed", 0))),
            workers=int(ens_raw.get("workers", 1))),
        output_dir=str(raw.get("output_dir", "runs/" + str(
            raw.get("label", label)))))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw, label=Path(path).stem)


def apply_overrides(raw, overrides):
    """Apply dotted key=value strings onto a raw config mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form "
                              f"key.path=value")
        keypath, value = item.split("=", 1)
        keys = keypath.strip().split(".")
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through scalar {key!r}")
        node[keys[-1]] = yaml.safe_load(value)
    return raw


def _resolve_output_times(grid):
    if grid.kind == "explicit":
        return np.asarray(grid.times, dtype=float)
    if grid.kind == "linear":
        return linear_output_times(grid.t_final, grid.points)
    return log_output_times(grid.t_final, grid.points, grid.t_min)


def build_geometry(spec, seed=None):
    if spec.kind == "chain":
        return build_chain(spec.n_atoms, spec.spacing,
                           axis=np.asarray(spec.axis, dtype=float),
                           polarization=np.asarray(spec.polarization,
                                                   dtype=float))
    return sample_cloud(spec.n_atoms, spec.b0,
                        rng_seed=spec.seed if seed is None else seed,
                        min_distance=spec.min_distance,
                        polarization=np.asarray(spec.polarization,
                                                dtype=float))


@dataclass
class RunResult:
    directory: Path
    series: "object"
    config: ExperimentConfig
    seed: int | None = None


class _SnapshotWriter:
    """Persist concurrence matrices at selected times, plus an index."""

    def __init__(self, directory, wanted_times):
        self.directory = Path(directory)
        self.wanted = list(wanted_times)
        self.records = []

    def __call__(self, t, cm):
        if not self.wanted:
            return
        matches = [w for w in self.wanted if abs(w - t) <= 1e-9 * max(1.0, w)]
        if not matches:
            return
        self.wanted = [w for w in self.wanted if w not in matches]
        self.directory.mkdir(parents=True, exist_ok=True)
        name = f"concurrence_{len(self.records):03d}.csv"
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# pair concurrence matrix at t={float(t)!r}\n")
            writer = csv.writer(fh)
            for row in cm.values:
                writer.writerow([repr(float(v)) for v in row])
        self.records.append({"index": len(self.records), "time": t,
                             "file": name})

    def write_index(self):
        if not self.records:
            return
        path = self.directory / "index.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "time", "file"])
            for rec in self.records:
                writer.writerow([rec["index"], repr(float(rec["time"])),
                                 rec["file"]])


def _snap_times_to_grid(wanted, grid):
    """Map requested snapshot times onto the nearest grid samples."""
    snapped = []
    for w in wanted:
        i = int(np.argmin(np.abs(grid - w)))
        snapped.append(float(grid[i]))
    return sorted(set(snapped))


def _build_observers(config, geometry_cfg, snapshot_writer):
    observers = []
    for name in config.observables:
        if name == "populations":
            observers.append(population_observer(geometry_cfg.n_atoms))
        elif name == "concurrence":
            observers.append(concurrence_observer(
                threshold=config.cluster_threshold,
                on_matrix=snapshot_writer))
        elif name == "g2":
            observers.append(g2_observer(
                geometry_cfg, DetectionGeometry(
                    np.asarray(config.detection_direction, dtype=float))))
        elif name == "purity":
            observers.append(purity_observer())
    return observers


def _write_series_csv(path, series, window_columns):
    names = list(series.columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + names + list(window_columns))
        n_rows = len(series.times)
        for i in range(n_rows):
            row = [repr(float(series.times[i]))]
            for name in names:
                row.append(_fmt_value(series.columns[name][i]))
            for col in window_columns.values():
                row.append(_fmt_value(col[i]))
            writer.writerow(row)


def _fmt_value(v):
    v = float(v)
    if np.isnan(v):
        return ""  # missing data point (e.g. g2 at vanishing intensity)
    return repr(v)


def _windowed_columns(config, series):
    """g2 averaged over each detector window, aligned on the output grid."""
    out = {}
    if "g2" not in config.observables:
        return out
    for window in config.detector_windows:
        t_w, vals = windowed_g2(series.times,
                                series.columns["g2_numerator"],
                                series.columns["intensity"], window)
        aligned = np.full(series.times.shape, np.nan)
        idx = np.searchsorted(series.times, t_w)
        aligned[idx] = vals
        out[f"g2_win{window:g}"] = aligned
    return out


def _write_spectrum_csv(path, couplings, sectors):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sector", "real", "imag"])
        for n_exc in sectors:
            spec = sector_spectrum(couplings, n_exc)
            eig = np.sort_complex(spec.eigenvalues)
            for lam in eig:
                writer.writerow([n_exc, repr(float(lam.real)),
                                 repr(float(lam.imag))])


def _schema(config):
    cols = {"time": "output time, units 1/Gamma"}
    n = config.geometry.n_atoms
    if "populations" in config.observables:
        for k in range(n + 1):
            cols[f"P_{k}"] = f"population of the {k}-excitation manifold"
    if "concurrence" in config.observables:
        cols["C_avg"] = "pair concurrence averaged over ordered pairs"
        cols["C_min"] = "minimum pair concurrence"
        cols["N_ent"] = "largest cluster with all pairs entangled"
    if "g2" in config.observables:
        cols["intensity"] = "far-field intensity <E- E+>"
        cols["g2_numerator"] = "two-photon correlator <E- E- E+ E+>"
        cols["g2"] = ("equal-time second-order coherence; empty cell = "
                      "undefined (vanishing intensity)")
        for window in config.detector_windows:
            cols[f"g2_win{window:g}"] = (
                f"g2 averaged over a detector window of {window:g}/Gamma; "
                "empty where the window does not fit")
    if "purity" in config.observables:
        cols["purity"] = "Tr[rho^2]"
    return {
        "series.csv": cols,
        "positions.csv": "one row per atom: x y z ex ey ez (complex allowed)",
        "snapshots/concurrence_*.csv": (
            "N x N pair concurrence matrix; header comment carries the "
            "time; index.csv lists (index, time, file)"),
        "spectrum.csv": ("columns sector, real, imag: eigenvalues of the "
                         "n-excitation block of delta - i*gamma/2"),
        "summary.csv": ("ensemble aggregate: per-time mean/min/max of each "
                        "series column over successful realizations"),
    }


def run_single(config, *, seed=None, directory=None):
    """Deterministic pipeline: geometry -> couplings -> state -> trajectory.

    Writes all artifacts into the run directory and returns the series.
    """
    t_start = time.perf_counter()
    directory = Path(config.output_dir if directory is None else directory)
    directory.mkdir(parents=True, exist_ok=True)

    geometry = build_geometry(config.geometry, seed=seed)
    couplings = build_couplings(geometry, config.kernel)
    initial = make_initial_state(
        config.initial_state, config.geometry.n_atoms,
        epsilon=config.epsilon, couplings=couplings, drive=config.drive,
        config=geometry)

    times = _resolve_output_times(config.output_grid)
    settings = IntegratorSettings(
        output_times=times, rel_tol=config.rel_tol, abs_tol=config.abs_tol,
        max_step=config.max_step, check_positivity=config.check_positivity,
        single_excitation_tail=config.single_excitation_tail)

    snapshot_writer = _SnapshotWriter(
        directory / "snapshots", _snap_times_to_grid(config.snapshot_times,
                                                     times))
    observers = _build_observers(config, geometry, snapshot_writer)

    # The pump, when configured, only prepares the initial state; it is
    # switched off at t = 0, so the trajectory itself is always undriven.
    series = integrate(initial, couplings, None, geometry,
                       settings, observers)
    snapshot_writer.write_index()

    window_columns = _windowed_columns(config, series)
    _write_series_csv(directory / "series.csv", series, window_columns)
    geometry.save_table(directory / "positions.csv")
    couplings.save_csv(str(directory) + "/")
    _write_spectrum_csv(directory / "spectrum.csv", couplings,
                        config.spectrum_sectors)

    resolved = _config_to_dict(config)
    if seed is not None:
        resolved["geometry"]["seed"] = int(seed)
    with open(directory / "config_resolved.yaml", "w",
              encoding="utf-8") as fh:
        yaml.safe_dump(resolved, fh, sort_keys=True)
    with open(directory / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(_schema(config), fh, indent=2, sort_keys=True)

    manifest = {
        "label": config.label,
        "version": __version__,
        "backend": kernels.active_backend_name(),
        "seed": seed if seed is not None else (
            config.geometry.seed if config.geometry.kind == "cloud"
            else None),
        "wall_time_s": time.perf_counter() - t_start,
        "integrator": series.stats,
        "n_output_times": int(len(times)),
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    return RunResult(directory=directory, series=series, config=config,
                     seed=seed)


def _config_to_dict(config):
    out = {
        "label": config.label,
        "geometry": {k: v for k, v in asdict(config.geometry).items()
                     if v is not None},
        "kernel": config.kernel,
        "initial_state": {"kind": config.initial_state},
        "integrator": {
            "rel_tol": config.rel_tol,
            "abs_tol": config.abs_tol,
            "max_step": (None if np.isinf(config.max_step)
                         else config.max_step),
            "check_positivity": config.check_positivity,
            "single_excitation_tail": config.single_excitation_tail,
            "output_times": {
                "kind": config.output_grid.kind,
                "t_final": config.output_grid.t_final,
                "points": config.output_grid.points,
                "t_min": config.output_grid.t_min,
            } if config.output_grid.kind != "explicit"
            else list(config.output_grid.times),
        },
        "observables": list(config.observables),
        "detection": {"direction": list(config.detection_direction),
                      "windows": list(config.detector_windows)},
        "snapshots": {"times": list(config.snapshot_times)},
        "spectrum": {"sectors": list(config.spectrum_sectors)},
        "entanglement": {"threshold": config.cluster_threshold},
        "ensemble": asdict(config.ensemble),
        "output_dir": str(config.output_dir),
    }
    if config.epsilon is not None:
        out["initial_state"]["epsilon"] = config.epsilon
    if config.drive is not None:
        out["drive"] = {"rabi": config.drive.rabi,
                        "detuning": config.drive.detuning,
                        "direction": list(config.drive.direction)}
    return out


@dataclass
class EnsembleSummary:
    """Per-time mean and min/max envelope over disorder realizations."""

    times: np.ndarray
    stats: dict          # column -> {"mean": arr, "min": arr, "max": arr}
    seeds: list
    n_requested: int
    n_succeeded: int
    failures: dict

    def column(self, name, stat="mean"):
        return self.stats[name][stat]


def _one_realization(args):
    config, seed, directory, single_thread = args
    if single_thread:
        # parallel realizations each keep one core; threaded kernels in
        # every worker would oversubscribe and slow everyone down
        import numba

        numba.set_num_threads(1)
    result = run_single(config, seed=seed, directory=directory)
    return seed, {name: np.asarray(col) for name, col
                  in result.series.columns.items()}, \
        np.asarray(result.series.times)


def run_ensemble(config, *, directory=None):
    """Independent disorder realizations with deterministic aggregation."""
    if config.geometry.kind != "cloud":
        raise ConfigError("ensembles need cloud geometry (disorder average)")
    n_real = config.ensemble.realizations
    if n_real < 1:
        raise ConfigError("ensemble.realizations must be >= 1")
    directory = Path(config.output_dir if directory is None else directory)
    directory.mkdir(parents=True, exist_ok=True)
    seeds = [config.ensemble.base_seed + i for i in range(n_real)]

    parallel = config.ensemble.workers > 1 and n_real > 1
    jobs = [(config, seed, directory / f"real-{i:03d}", parallel)
            for i, seed in enumerate(seeds)]
    results = {}
    failures = {}
    if config.ensemble.workers > 1 and n_real > 1:
        with ProcessPoolExecutor(max_workers=config.ensemble.workers) as ex:
            futures = {ex.submit(_one_realization, job): job[1]
                       for job in jobs}
            for fut, seed in futures.items():
                try:
                    s, cols, times = fut.result()
                    results[s] = (cols, times)
                except Exception as err:  # summary proceeds over successes
                    failures[seed] = f"{type(err).__name__}: {err}"
    else:
        for job in jobs:
            try:
                s, cols, times = _one_realization(job)
                results[s] = (cols, times)
            except Exception as err:
                failures[job[1]] = f"{type(err).__name__}: {err}"

    if not results:
        raise ConfigError(f"all {n_real} realizations failed: {failures}")

    ordered = [results[s] for s in seeds if s in results]
    times = ordered[0][1]
    names = list(ordered[0][0])
    stats = {}
    for name in names:
        stack = np.vstack([cols[name] for cols, _ in ordered])
        stats[name] = {"mean": stack.mean(axis=0),
                       "min": stack.min(axis=0),
                       "max": stack.max(axis=0)}

    summary = EnsembleSummary(times=times, stats=stats, seeds=seeds,
                              n_requested=n_real,
                              n_succeeded=len(ordered), failures=failures)
    _write_summary_csv(directory / "summary.csv", summary)
    manifest = {
        "label": config.label,
        "version": __version__,
        "backend": kernels.active_backend_name(),
        "seeds": seeds,
        "n_requested": n_real,
        "n_succeeded": summary.n_succeeded,
        "failures": failures,
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    with open(directory / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(_schema(config), fh, indent=2, sort_keys=True)
    return summary


def _write_summary_csv(path, summary):
    names = list(summary.stats)
    header = ["time"]
    for name in names:
        header += [f"{name}_mean", f"{name}_min", f"{name}_max"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(summary.times)):
            row = [repr(float(summary.times[i]))]
            for name in names:
                s = summary.stats[name]
                row += [_fmt_value(s["mean"][i]), _fmt_value(s["min"][i]),
                        _fmt_value(s["max"][i])]
            writer.writerow(row)
