"""Panel renderers.

Each renderer takes a spec mapping (validated here), draws onto fresh
matplotlib figures, writes the output image, and returns a metadata dict
describing what was drawn (used by tests and for captions).  Inputs are
never modified; missing samples (empty CSV cells) appear as gaps.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .loader import EnsembleDirectory, FigureDataError, RunDirectory

PANEL_KINDS = {}


def _panel(name):
    def register(fn):
        PANEL_KINDS[name] = fn
        return fn
    return register


def _require(spec, key):
    if key not in spec:
        raise FigureDataError(f"figure spec lacks key {key!r}: {spec}")
    return spec[key]


def _inputs(spec, min_count=1):
    inputs = _require(spec, "inputs")
    if isinstance(inputs, (str, Path)):
        inputs = [inputs]
    if len(inputs) < min_count:
        raise FigureDataError(
            f"panel {spec.get('kind')} needs >= {min_count} inputs")
    return list(inputs)


def _labels(spec, inputs):
    labels = spec.get("labels")
    if labels is None:
        return [Path(p).name for p in inputs]
    if len(labels) != len(inputs):
        raise FigureDataError("labels must match inputs one to one")
    return list(labels)


def _finish(fig, spec):
    out = Path(_require(spec, "output"))
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.get("dpi", 150), bbox_inches="tight")
    plt.close(fig)
    return out


@_panel("heatmap_sequence")
def heatmap_sequence(spec):
    """Row of pair-concurrence heatmaps, colorbar rescaled per snapshot."""
    run = RunDirectory(_inputs(spec)[0])
    snaps = run.snapshots()
    if not snaps:
        raise FigureDataError(f"{run.path} has no snapshots")
    fig, axes = plt.subplots(1, len(snaps),
                             figsize=(2.6 * len(snaps), 2.8))
    axes = np.atleast_1d(axes)
    maxima = []
    for ax, (t, matrix) in zip(axes, snaps):
        peak = matrix.max()
        maxima.append(float(peak))
        image = ax.imshow(matrix, cmap="inferno", vmin=0.0,
                          vmax=peak if peak > 0 else 1.0)
        ax.set_title(f"t = {t:g}\nmax C = {peak:.2g}", fontsize=9)
        ax.set_xlabel("atom")
        ax.set_ylabel("atom")
        fig.colorbar(image, ax=ax, fraction=0.046)
    path = _finish(fig, spec)
    return {"path": path, "snapshot_times": [t for t, _ in snaps],
            "maxima": maxima}


@_panel("navg_curves")
def navg_curves(spec):
    """N * C_avg against time for several runs, log time axis."""
    inputs = _inputs(spec)
    labels = _labels(spec, inputs)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for path, label in zip(inputs, labels):
        run = RunDirectory(path)
        data = run.series(required=("time", "C_avg"))
        n = run.n_atoms()
        ax.plot(data["time"], n * data["C_avg"], label=label)
    ax.set_xscale(spec.get("xscale", "log"))
    ax.set_xlabel(r"time  [$1/\Gamma$]")
    ax.set_ylabel(r"$N\,C_\mathrm{avg}$")
    ax.legend(fontsize=8)
    path = _finish(fig, spec)
    return {"path": path, "curves": len(inputs)}


@_panel("decay_panel")
def decay_panel(spec):
    """Populations, average/minimum concurrence, and the g2 < 1 window."""
    run = RunDirectory(_inputs(spec)[0])
    data = run.series(required=("time", "C_avg", "C_min", "g2"))
    t = data["time"]
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    for n_exc in spec.get("populations", (1, 2, 3)):
        col = f"P_{n_exc}"
        if col not in data:
            raise FigureDataError(f"series lacks {col!r}")
        ax.plot(t, data[col], label=f"$P_{{{n_exc}}}$", lw=1.0)
    ax.plot(t, data["C_avg"], label=r"$C_\mathrm{avg}$", lw=1.8)
    ax.plot(t, data["C_min"], label=r"$C_\mathrm{min}$", lw=1.8)

    below = np.zeros(t.shape, dtype=bool)
    defined = ~np.isnan(data["g2"])
    below[defined] = data["g2"][defined] < 1.0
    spans = _contiguous_spans(t, below)
    for lo, hi in spans:
        ax.axvspan(lo, hi, color="tab:green", alpha=0.15, lw=0)

    ax.set_xscale("log")
    floor = spec.get("floor", 1e-6)
    yscale = spec.get("yscale", "log")
    drawn = [line.get_ydata() for line in ax.get_lines()]
    if yscale == "log" and not any(np.nan_to_num(y).max() > 0
                                   for y in drawn):
        yscale = "linear"  # an all-dark panel cannot be log-scaled
    ax.set_yscale(yscale)
    ax.set_ylim(floor if yscale == "log" else 0.0, 1.5)
    ax.set_xlabel(r"time  [$1/\Gamma$]")
    ax.legend(fontsize=8, ncol=2)
    path = _finish(fig, spec)
    return {"path": path, "g2_below_one_mask": below, "shaded_spans": spans}


def _contiguous_spans(times, mask):
    spans = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = times[i]
        elif not flag and start is not None:
            spans.append((float(start), float(times[i - 1])))
            start = None
    if start is not None:
        spans.append((float(start), float(times[-1])))
    return spans


@_panel("lifetime_scaling")
def lifetime_scaling(spec):
    """Sector lifetimes and the global-entanglement peak time against N."""
    inputs = _inputs(spec)
    rows = []
    for path in inputs:
        run = RunDirectory(path)
        taus = run.sector_lifetimes()
        data = run.series(required=("time", "C_min"))
        cmin = np.nan_to_num(data["C_min"])
        t_ent = float(data["time"][np.argmax(cmin)]) if cmin.max() > 0 \
            else np.nan
        rows.append((run.n_atoms(), taus.get(1, np.nan),
                     taus.get(2, np.nan), t_ent))
    rows.sort()
    n_vals = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.plot(n_vals, [r[1] for r in rows], "o-",
            label=r"$\tau_\mathrm{sub}^{(1)}$")
    ax.plot(n_vals, [r[2] for r in rows], "s-",
            label=r"$\tau_\mathrm{sub}^{(2)}$")
    ax.plot(n_vals, [r[3] for r in rows], "^--",
            label=r"$\tau_\mathrm{ent}$")
    ax.set_yscale("log")
    ax.set_xlabel("atom number N")
    ax.set_ylabel(r"time  [$1/\Gamma$]")
    ax.legend(fontsize=8)
    path = _finish(fig, spec)
    return {"path": path, "table": rows}


@_panel("ensemble_envelopes")
def ensemble_envelopes(spec):
    """Mean curves with min/max disorder envelopes, one column per panel."""
    inputs = _inputs(spec)
    labels = _labels(spec, inputs)
    columns = spec.get("columns", ("N_ent", "g2", "C_min"))
    fig, axes = plt.subplots(len(columns), 1, sharex=True,
                             figsize=(5.2, 2.2 * len(columns)))
    axes = np.atleast_1d(axes)
    for ax, column in zip(axes, columns):
        for path, label in zip(inputs, labels):
            ens = EnsembleDirectory(path)
            t, stats = ens.summary([column])
            mean, lo, hi = stats[column]
            line, = ax.plot(t, mean, label=label)
            ax.fill_between(t, lo, hi, alpha=0.25, lw=0,
                            color=line.get_color())
        ax.set_ylabel(column)
        ax.set_xscale("log")
        if column in spec.get("log_columns", ("C_min",)):
            ax.set_yscale("log")
            ax.set_ylim(spec.get("floor", 1e-10), None)
    axes[0].legend(fontsize=7)
    axes[-1].set_xlabel(r"time  [$1/\Gamma$]")
    path = _finish(fig, spec)
    return {"path": path, "columns": list(columns)}


@_panel("model_compare")
def model_compare(spec):
    """Mean minimum concurrence for paired coupling-model ensembles."""
    inputs = _inputs(spec, min_count=2)
    labels = _labels(spec, inputs)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    styles = ("-", "--", ":", "-.")
    for (path, label), style in zip(zip(inputs, labels), styles):
        ens = EnsembleDirectory(path)
        t, stats = ens.summary(["C_min"])
        mean, _, _ = stats["C_min"]
        ax.plot(t, mean, style, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_ylim(spec.get("floor", 1e-10), None)
    ax.set_xlabel(r"time  [$1/\Gamma$]")
    ax.set_ylabel(r"$C_\mathrm{min}$ (ensemble mean)")
    ax.legend(fontsize=8)
    path = _finish(fig, spec)
    return {"path": path, "curves": len(inputs)}


def render(spec):
    """Render one figure spec; returns the renderer's metadata."""
    kind = _require(spec, "kind")
    if kind not in PANEL_KINDS:
        raise FigureDataError(
            f"unknown panel kind {kind!r}; known: {sorted(PANEL_KINDS)}")
    return PANEL_KINDS[kind](spec)


def render_file(spec_path):
    """Render every figure listed in a YAML spec file."""
    import yaml

    with open(spec_path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    figures = doc.get("figures") if isinstance(doc, dict) else doc
    if not isinstance(figures, list):
        raise FigureDataError(
            "figure spec file must hold a list under 'figures'")
    results = []
    for spec in figures:
        results.append(render(spec))
    return results
