"""Command line entry point: ``gmsfem run|decay|field``."""
import argparse
import os
import sys

import numpy as np

from . import coeff as cf
from .errors import GmsfemError
from .experiment import (
    config_echo, decay_lines, eigen_decay, human_table, load_config, run_experiment, table_lines,
)

THREADS_ENV = "GMSFEM_THREADS"


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else 1


def _write_all(files):
    """Write ``{path: lines}``; on any failure remove whatever was written."""
    written = []
    try:
        for path, lines in files.items():
            d = os.path.dirname(path)
            if d:
                os.makedirs(d, exist_ok=True)
            written.append(path)
            with open(path, "w", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
    except OSError:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise


def cmd_run(args):
    config = load_config(args.config, args.seed)
    tables, _ = run_experiment(config, _threads(args))
    echo = config_echo(config)
    files = {}
    for ref, rows in tables.items():
        files[os.path.join(args.out, f"{ref}.csv")] = echo + table_lines(rows, ref, config.is_multi)
        print(human_table(rows, ref, config.is_multi))
    _write_all(files)
    return 0


def cmd_decay(args):
    config = load_config(args.config, args.seed)
    decay, _ = eigen_decay(config, _threads(args))
    path = os.path.join(args.out, "decay.csv")
    _write_all({path: config_echo(config) + decay_lines(decay)})
    print(f"wrote {path}")
    return 0


def cmd_field(args):
    if args.action == "gen":
        params = {}
        for item in args.param or []:
            key, _, value = item.partition("=")
            params[key] = _parse_value(value)
        seed = 0 if args.seed is None else args.seed
        values = cf.generate_field(args.kind, args.n_fine, params, seed)
        _write_all({args.output: []})
        cf.save_field(args.output, values, args.n_fine)
        print(f"wrote {args.output}")
    else:
        values = cf.load_field(args.path)
        n = int(round(np.sqrt(values.size)))
        print(f"cells: {n} x {n}")
        print(f"min: {values.min():.6g}  max: {values.max():.6g}  contrast: {values.max() / values.min():.6g}")
        high = values > values.min()
        print(f"cells above minimum: {int(high.sum())} ({100.0 * high.mean():.2f}%)")
    return 0


def _parse_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.startswith("[") and text.endswith("]"):
        return [_parse_value(t.strip()) for t in text[1:-1].split(",") if t.strip()]
    return text


def build_parser():
    p = argparse.ArgumentParser(prog="gmsfem", description="Multiscale experiments with oversampled local spectral spaces.")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads for local problems (env {THREADS_ENV})")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="dimension sweep; one CSV per reference")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("decay", help="local eigenvalue decay CSV")
    d.add_argument("config")
    d.set_defaults(func=cmd_decay)

    f = sub.add_parser("field", help="generate or inspect a coefficient field")
    fsub = f.add_subparsers(dest="action", required=True)
    g = fsub.add_parser("gen")
    g.add_argument("kind", choices=cf.FIELD_KINDS)
    g.add_argument("n_fine", type=int)
    g.add_argument("output")
    g.add_argument("--param", action="append", metavar="KEY=VALUE")
    s = fsub.add_parser("show")
    s.add_argument("path")
    f.set_defaults(func=cmd_field)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GmsfemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
