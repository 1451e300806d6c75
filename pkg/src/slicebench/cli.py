"""Command-line entry points.

    slicebench evaluate --manifest M --organ O --backend B \
        --passes 8 --seed S --workers W --out DIR [--force]
    slicebench summarize --in DIR ... [--out csv]
    slicebench curves --in DIR ... --out DIR
    slicebench make-phantoms --out DIR --seed S

evaluate exits 0 only if no case errored.
"""

import argparse
import sys

from . import phantoms, reporting
from .backend_api import BackendApiError
from .click_protocol import ProtocolConfig
from .volume_io import VolumeIoError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slicebench",
        description="Interactive slice-annotation benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="run the simulation over a manifest")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--organ", required=True)
    ev.add_argument("--backend", required=True,
                    help="builtin:oracle|noisy|leaky or a command template "
                         "with a {volume} placeholder")
    ev.add_argument("--passes", type=int, default=8)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--out", required=True)
    ev.add_argument("--force", action="store_true",
                    help="recompute cases whose result file already exists")
    ev.add_argument("--timeout", type=float, default=None,
                    help="per-request backend timeout in seconds")

    sm = sub.add_parser("summarize", help="mean best dice per organ")
    sm.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="result directories or files")
    sm.add_argument("--out", default=None, help="CSV output path")

    cv = sub.add_parser("curves", help="dice-vs-annotated-slices curves")
    cv.add_argument("--in", dest="inputs", nargs="+", required=True)
    cv.add_argument("--out", required=True, help="output directory")

    mp = sub.add_parser("make-phantoms", help="generate synthetic volumes")
    mp.add_argument("--out", required=True)
    mp.add_argument("--seed", type=int, default=0)
    mp.add_argument("--cases", type=int, default=phantoms.DEFAULT_CASES)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (reporting.ManifestError, reporting.NoRecords,
            BackendApiError, VolumeIoError, OSError) as exc:
        print(f"slicebench: {exc}", file=sys.stderr)
        return 1


def _dispatch(args):
    if args.command == "evaluate":
        cfg = ProtocolConfig(max_annotated_slices=args.passes,
                             rng_seed=args.seed)
        record = reporting.cmd_evaluate(
            args.manifest, args.organ, args.backend, cfg, args.out,
            workers=args.workers, force=args.force, timeout=args.timeout)
        counts = {}
        for row in record.cases:
            counts[row["status"]] = counts.get(row["status"], 0) + 1
        summary = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        print(f"{record.manifest_name} organ={record.organ} "
              f"backend={record.backend}: {summary}")
        return 0 if record.error_count == 0 else 1

    if args.command == "summarize":
        text, _ = reporting.cmd_summarize(args.inputs, out_csv=args.out)
        print(text, end="")
        return 0

    if args.command == "curves":
        reporting.cmd_curves(args.inputs, args.out)
        print(f"wrote curves to {args.out}")
        return 0

    if args.command == "make-phantoms":
        manifest = phantoms.make_phantoms(args.out, seed=args.seed,
                                          cases=args.cases)
        print(f"wrote {len(manifest['cases'])} phantom cases to {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
