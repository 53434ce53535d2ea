"""Command-line entry point.

Verbs:
    subrad run CONFIG              single trajectory with all artifacts
    subrad ensemble CONFIG         disorder ensemble + summary
    subrad spectrum CONFIG         sector eigenvalues only (no dynamics)
    subrad validate-config CONFIG  parse and resolve, print the result

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(parser):
    parser.add_argument("config", help="YAML experiment configuration")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY.PATH=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("-o", "--output-dir", default=None,
                        help="override the output directory")
    parser.add_argument("--backend", choices=("numba", "numpy"),
                        default=None,
                        help="numeric backend (default: env SUBRAD_BACKEND "
                             "or numba when available)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="subrad",
        description="Collective spontaneous emission: exact dissipative "
                    "dynamics, entanglement metrics, photon statistics.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "run one trajectory"),
                        ("ensemble", "run a disorder ensemble"),
                        ("spectrum", "compute sector spectra only"),
                        ("validate-config", "check a configuration file")):
        p = sub.add_parser(verb, help=help_)
        _add_common(p)
    return parser


def _load(args):
    import yaml

    from .errors import ConfigError
    from .runner import apply_overrides, config_from_dict

    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"empty config file: {path}")
    raw = apply_overrides(raw, args.overrides)
    if args.output_dir is not None:
        raw["output_dir"] = args.output_dir
    return config_from_dict(raw, label=path.stem)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.backend is not None:
        os.environ["SUBRAD_BACKEND"] = args.backend

    from .errors import (ConfigError, ConvergenceError, IntegrationError,
                         SamplingError)

    try:
        config = _load(args)
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _dispatch(args.verb, config)
    except (IntegrationError, ConvergenceError, SamplingError) as err:
        print(f"numerical failure: {type(err).__name__}: {err}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(verb, config):
    from .runner import _config_to_dict, run_ensemble, run_single

    if verb == "validate-config":
        print(json.dumps(_config_to_dict(config), indent=2, sort_keys=True,
                         default=str))
        return EXIT_OK

    if verb == "spectrum":
        from .coupling import build_couplings
        from .runner import _write_spectrum_csv, build_geometry

        geometry = build_geometry(config.geometry)
        couplings = build_couplings(geometry, config.kernel)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_spectrum_csv(out / "spectrum.csv", couplings,
                            config.spectrum_sectors)
        print(f"spectrum written to {out / 'spectrum.csv'}")
        return EXIT_OK

    if verb == "run":
        result = run_single(config)
        last = {name: col[-1] for name, col in result.series.columns.items()}
        print(f"run complete: {result.directory}")
        for name in ("P_1", "C_avg", "C_min", "N_ent", "g2"):
            if name in last:
                print(f"  final {name} = {last[name]:.6g}")
        return EXIT_OK

    if verb == "ensemble":
        summary = run_ensemble(config)
        print(f"ensemble complete: {config.output_dir} "
              f"({summary.n_succeeded}/{summary.n_requested} realizations)")
        if summary.failures:
            for seed, msg in summary.failures.items():
                print(f"  seed {seed} failed: {msg}", file=sys.stderr)
        return EXIT_OK

    raise AssertionError(verb)


if __name__ == "__main__":
    sys.exit(main())
