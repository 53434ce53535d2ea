"""CLI: render figures from a YAML spec file.

    figpanels render figures.yaml
"""

import argparse
import sys


def main(argv=None):
    parser = argparse.ArgumentParser(prog="figpanels", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    render_p = sub.add_parser("render", help="render every figure in a spec")
    render_p.add_argument("spec", help="YAML figure-spec file")
    args = parser.parse_args(argv)

    from .loader import FigureDataError
    from .panels import render_file

    try:
        results = render_file(args.spec)
    except FigureDataError as err:
        print(f"figure input error: {err}", file=sys.stderr)
        return 2
    for meta in results:
        print(f"wrote {meta['path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
