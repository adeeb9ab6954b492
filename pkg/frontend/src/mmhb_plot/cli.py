"""Command line wrapper: mmhb-plot <kind> --in FILES --out IMAGE.

Exit codes: 0 success, 2 schema error, 1 I/O or other failure.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mmhb-plot", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--overlay", default=None)
    parser.add_argument("--log-y", action="store_true", default=None)
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=120)
    args = parser.parse_args(argv)
    job = PlotJob(
        kind=args.kind,
        inputs=args.inputs,
        output=args.out,
        overlay=args.overlay,
        log_y=args.log_y,
        title=args.title,
        dpi=args.dpi,
    )
    try:
        render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
