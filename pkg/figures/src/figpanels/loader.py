"""Readers for the simulator's run-directory layout.

Everything here is read-only and validates against the documented CSV
schema: series.csv (one row per output time, empty cell = missing),
summary.csv (per-column mean/min/max triples), spectrum.csv (sector
eigenvalues) and snapshots/ (pair-concurrence matrices plus index.csv).
"""

import csv
import json
import math
from pathlib import Path

import numpy as np


class FigureDataError(ValueError):
    """Input directory does not conform to the expected schema."""


def _read_csv_columns(path):
    if not Path(path).exists():
        raise FigureDataError(f"missing input file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FigureDataError(f"empty CSV: {path}")
    header = rows[0]
    data = {name: [] for name in header}
    for row in rows[1:]:
        if len(row) != len(header):
            raise FigureDataError(
                f"ragged row in {path}: expected {len(header)} cells, "
                f"got {len(row)}")
        for name, cell in zip(header, row):
            data[name].append(float(cell) if cell else math.nan)
    return {name: np.array(vals) for name, vals in data.items()}


class RunDirectory:
    """One simulation run (series, spectrum, snapshots, manifest)."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_dir():
            raise FigureDataError(f"not a run directory: {path}")

    def manifest(self):
        path = self.path / "manifest.json"
        if not path.exists():
            return {}
        return json.loads(path.read_text())

    def series(self, required=("time",)):
        data = _read_csv_columns(self.path / "series.csv")
        for name in required:
            if name not in data:
                raise FigureDataError(
                    f"{self.path / 'series.csv'} lacks column {name!r}; "
                    f"have {sorted(data)}")
        return data

    def n_atoms(self):
        data = self.series()
        pops = [c for c in data if c.startswith("P_")]
        if not pops:
            raise FigureDataError(
                f"{self.path}: population columns needed to infer N")
        return max(int(c[2:]) for c in pops)

    def sector_lifetimes(self):
        """sector -> lifetime of its slowest mode, from spectrum.csv."""
        data = _read_csv_columns(self.path / "spectrum.csv")
        for name in ("sector", "real", "imag"):
            if name not in data:
                raise FigureDataError(
                    f"{self.path / 'spectrum.csv'} lacks column {name!r}")
        out = {}
        for sector in np.unique(data["sector"]):
            imag = data["imag"][data["sector"] == sector]
            rates = -2.0 * imag
            out[int(sector)] = 1.0 / rates.min()
        return out

    def snapshots(self):
        """List of (time, matrix), ordered as recorded."""
        index = self.path / "snapshots" / "index.csv"
        if not index.exists():
            raise FigureDataError(f"{self.path} has no snapshots/index.csv")
        out = []
        with open(index, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                matrix = np.loadtxt(self.path / "snapshots" / rec["file"],
                                    delimiter=",", comments="#", ndmin=2)
                out.append((float(rec["time"]), matrix))
        return out


class EnsembleDirectory:
    """A disorder-ensemble output (summary.csv + manifest)."""

    def __init__(self, path):
        self.path = Path(path)
        if not (self.path / "summary.csv").exists():
            raise FigureDataError(f"not an ensemble directory: {path}")

    def manifest(self):
        path = self.path / "manifest.json"
        if not path.exists():
            return {}
        return json.loads(path.read_text())

    def summary(self, columns):
        """time plus {column: (mean, min, max)} for the requested columns."""
        data = _read_csv_columns(self.path / "summary.csv")
        if "time" not in data:
            raise FigureDataError(f"{self.path}/summary.csv lacks 'time'")
        out = {}
        for name in columns:
            triple = []
            for stat in ("mean", "min", "max"):
                key = f"{name}_{stat}"
                if key not in data:
                    raise FigureDataError(
                        f"{self.path}/summary.csv lacks column {key!r}")
                triple.append(data[key])
            out[name] = tuple(triple)
        return data["time"], out
