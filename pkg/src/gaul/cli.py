"""Command-line entry point: ``gaul run|theory|compare``."""

import argparse
import sys

from .errors import CatalogError, GaulError, SchemaError
from .harness import compare_decay, load_config, run, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="gaul", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config (or replay a manifest)")
    r.add_argument("config")
    r.add_argument("--full", action="store_true", help="use full-scale particle counts")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory")
    r.add_argument("--method", choices=["ol", "ul", "gaul", "all"])
    r.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")

    t = sub.add_parser("theory", help="write the per-mode theory table for a config")
    t.add_argument("config")
    t.add_argument("--out", help="output directory")

    c = sub.add_parser("compare", help="compare two decay CSV files")
    c.add_argument("csv_a")
    c.add_argument("csv_b")
    c.add_argument("--threshold", type=float, default=1e-3)
    return p


def _fmt_step(v):
    return "not reached" if v < 0 else str(v)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "compare":
            res = compare_decay(args.csv_a, args.csv_b, args.threshold)
            for label, s in (("a", res.a), ("b", res.b)):
                print(f"{label}: {s.path} terminal_step={s.terminal_step} "
                      f"terminal_kl={s.terminal_kl:.6g} first_below={_fmt_step(s.first_below)}")
            print(f"faster: {res.faster or 'neither'}")
            return EXIT_OK
        config = load_config(args.config)
        if args.command == "theory":
            config = with_overrides(config, output=args.out)
            manifest = run(config, out_dir=args.out, theory_only=True)
        else:
            config = with_overrides(config, seed=args.seed, output=args.out, method=args.method,
                                    full=True if args.full else None)
            manifest = run(config, out_dir=args.out, threads=args.threads)
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (CatalogError, OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GaulError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for key, files in manifest["outputs"].items():
        print(f"{key}: {', '.join(files)}")
    if manifest["diverged"]:
        for key, step in manifest["diverged"].items():
            print(f"{key}: diverged at step {step}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
