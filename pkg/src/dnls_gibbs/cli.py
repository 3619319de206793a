"""Command line: ``dnls-gibbs run <config>``, ``run --list``, ``suite fast|full``.

Exit codes: 0 when every assertion passes, 1 on an assertion failure, 2 on a
configuration error. Artifacts go to --out, else $DNLS_GIBBS_OUT, else ./results.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _threads(n):
    if n:
        import numba
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _cmd_run(args) -> int:
    if args.list:
        for e in harness.listing():
            crit = f"[{e['criterion']}]" if e["criterion"] else "[-]"
            print(f"{e['id']:24s} {crit:5s} {e['anchor']}")
            print(f"{'':30s} {e['summary']}")
        return EXIT_OK
    if not args.config:
        print("run needs a config path or --list", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = harness.load_config(args.config, seed=args.seed, out=args.out)
    except harness.ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    _threads(args.threads)
    try:
        outcome, meta = harness.execute(cfg)
    except harness.ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    verdict = "pass" if outcome.passed else "FAIL"
    print(f"{cfg.experiment}: {verdict} ({meta['elapsed']:.1f} s)")
    if outcome.note:
        print(f"  note: {outcome.note}")
    for kind, path in meta["paths"].items():
        print(f"  {kind}: {path}")
    return EXIT_OK if outcome.passed else EXIT_FAIL


def _cmd_suite(args) -> int:
    _threads(args.threads)
    try:
        rep = harness.run_suite(args.name, out=args.out, seed=args.seed or 0)
    except harness.ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for r in rep["rows"]:
        crit = r["criterion"] if r["criterion"] else "-"
        print(f"{str(crit):>3s} {r['experiment']:24s} {r['verdict']:5s} {r['seconds']:8.1f} s  {r['anchor']}")
    print("suite", args.name, "pass" if rep["passed"] else "FAIL")
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dnls-gibbs", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config", nargs="?")
    r.add_argument("--list", action="store_true", help="list registered experiments")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, default=0)
    r.add_argument("--out")
    s = sub.add_parser("suite", help="run the fast or full suite")
    s.add_argument("name", choices=("fast", "full"))
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int, default=0)
    s.add_argument("--out")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "run":
        return _cmd_run(args)
    return _cmd_suite(args)


if __name__ == "__main__":
    sys.exit(main())
