"""Command line: ``run``, ``bench`` and ``weights``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import ConfigError, load_experiment, load_suite
from .data import load_dataset
from .pipeline import StageError, experiment_weights, run_benchmark, run_experiment


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def cmd_run(args) -> int:
    cfg = load_experiment(args.config)
    report = run_experiment(cfg)
    text = json.dumps(report.to_dict(), indent=2, default=_json_default)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    m = report.metrics
    print(f"{cfg.dataset.display_name} {cfg.algorithm} {cfg.weighting_name}: "
          + " ".join(f"{k}={'NA' if v is None else format(v, '.4f')}" for k, v in m.items()),
          file=sys.stderr)
    return 0


def cmd_weights(args) -> int:
    cfg = load_experiment(args.config)
    w = experiment_weights(cfg)
    names = load_dataset(cfg.dataset.path, cfg.dataset.label_column).feature_names
    for name, value in zip(names, w):
        print(f"{name}\t{value:.10g}")
    return 0


def cmd_bench(args) -> int:
    suite = load_suite(args.suite)

    def progress(cfg, report):
        if not args.quiet:
            ari = report.metrics.get("ari")
            tag = report.status if ari is None else f"ari={ari:.4f}"
            print(" ".join(cfg.key), tag, file=sys.stderr)

    rows, _, executed = run_benchmark(suite, args.out, jobs=args.jobs, progress=progress)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} rows ({executed} executed, {len(failed)} failed) -> {args.out}")
    return 1 if failed and args.strict else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapfw", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single experiment and print its report as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run (or resume) a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True, help="CSV path; full reports go to the .json sibling")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--strict", action="store_true", help="exit 1 if any row failed")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("weights", help="print the weight vector of an experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
