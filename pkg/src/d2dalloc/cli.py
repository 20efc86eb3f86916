"""Command line entry point.

    d2dalloc generate  dump one network draw in the instance text format
    d2dalloc run       one draw, selected schemes, CSV rows
    d2dalloc sweep     Monte-Carlo sweep over one axis, CSV rows
    d2dalloc audit     invariant suites (lemma1, stability, ne, pareto)

Every SimParams field is also a flag of the same name and overrides the
``--config`` file. Exit codes: 0 ok, 1 audit failure, 2 config error,
3 guard violation.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from typing import Optional, Sequence

from . import audit, harness
from .model import ConfigError, GuardError, SimParams
from .scenario import dump_instance, generate_instance

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, schemes: bool = True):
    p.add_argument("--config", help="flat key = value file with SimParams fields")
    group = p.add_argument_group("parameters (override --config)")
    for name in SimParams.field_names():
        group.add_argument(f"--{name}", dest=name, default=None, metavar="V")
    if schemes:
        group.add_argument("--schemes", default=None,
                           help="comma list: proposed,random,interference_min,orthogonal,brute_force or 'all'")
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="d2dalloc", description="Cascaded channel/power allocation for D2D underlay")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_common(sub.add_parser("generate", help="dump one instance"), schemes=False)
    _add_common(sub.add_parser("run", help="run schemes on one draw"))

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep")
    _add_common(sw)
    sw.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma list of axis values")
    sw.add_argument("--runs", type=int, default=1, help="draws per axis value")
    sw.add_argument("--workers", type=int, default=None,
                    help=f"process pool size (default ${harness.WORKERS_ENV} or 1)")

    au = sub.add_parser("audit", help="invariant suites")
    _add_common(au, schemes=False)
    au.add_argument("--suites", default="lemma1,stability,ne,pareto")
    au.add_argument("--instances", type=int, default=100)
    return parser


def _config(args) -> harness.RunConfig:
    values = harness.read_config_file(args.config) if args.config else {}
    for name in SimParams.field_names():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    schemes = getattr(args, "schemes", None)
    if schemes is not None:
        values["schemes"] = ",".join(harness.SCHEMES) if schemes == "all" else schemes
    return harness.config_from_mapping(values)


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
        if args.command == "generate":
            inst = generate_instance(config.params, config.params.rng_seed)
            with _output(args.out) as fh:
                dump_instance(inst, fh)
        elif args.command == "run":
            records = harness.run_single(config)
            with _output(args.out) as fh:
                harness.write_csv(records, fh)
        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            records = harness.run_sweep(config, args.axis, values, args.runs, args.workers)
            with _output(args.out) as fh:
                harness.write_csv(records, fh)
        elif args.command == "audit":
            suites = [s.strip() for s in args.suites.split(",") if s.strip()]
            unknown = set(suites) - {"lemma1", "stability", "ne", "pareto"}
            if unknown:
                raise ConfigError(f"unknown suites: {', '.join(sorted(unknown))}")
            report = audit.run_audit(config.params, args.instances, suites, config.params.rng_seed)
            ok = True
            with _output(args.out) as fh:
                for name, r in report.items():
                    status = "PASS" if r["failed"] == 0 else "FAIL"
                    ok &= r["failed"] == 0
                    fh.write(f"{status} {name}: {r['failed']} failures / {r['checked']} checks\n")
            return EXIT_OK if ok else EXIT_AUDIT
    except GuardError as exc:
        print(f"d2dalloc: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ConfigError as exc:
        print(f"d2dalloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
