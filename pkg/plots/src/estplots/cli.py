"""Command line entry: estplot --csv run_log.csv --spec spec.json --out fig.png

The spec names the series; --csv/--out (and --sidecar) point it at a run.
Bundled spec names (see --list) resolve without a path. Exit codes: 0 on
success, 2 on any input problem.
"""

import argparse
import sys
from pathlib import Path

from .errors import PlotError
from .render import render
from .spec import bundled_spec_path, list_bundled_specs, load_spec, with_paths


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="estplot", description=__doc__.splitlines()[0])
    ap.add_argument("--csv", help="simulation CSV log")
    ap.add_argument("--spec", help="figure spec JSON (path or bundled name)")
    ap.add_argument("--out", help="output PNG path")
    ap.add_argument("--sidecar", help="run sidecar JSON (default: derived "
                                      "from the CSV file name)")
    ap.add_argument("--list", action="store_true",
                    help="list bundled spec names and exit")
    args = ap.parse_args(argv)

    if args.list:
        for name in list_bundled_specs():
            print(name)
        return 0
    if not args.spec:
        print("error: --spec is required", file=sys.stderr)
        return 2

    try:
        path = Path(args.spec)
        if not path.exists() and path.name == args.spec:
            path = bundled_spec_path(args.spec)
        spec = with_paths(load_spec(path), csv=args.csv, out=args.out,
                          sidecar=args.sidecar)
        out = render(spec)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
