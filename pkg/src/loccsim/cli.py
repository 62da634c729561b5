"""Command line entry point: ``loccsim <command> ...``.

Exit status: 0 pass, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import reports
from .builtin import PROTOCOLS, get_protocol
from .catalog import SETS, get_set, named_states
from .protocol import MASS_TOL, lift_mixed
from .serialize import ProtocolFormatError, dumps, load
from .tensor import LayoutError, schmidt_decompose, schmidt_rank
from .upb import NotProductError, SeesawConfig, check_upb, complement_projector

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 0

log = logging.getLogger("loccsim")


class UsageError(Exception):
    pass


def _emit(args, command: str, result: dict, text) -> None:
    if args.format == "json":
        print(reports.to_json(command, result))
    else:
        print(text(result))


def _seed(args) -> int:
    if args.seed is None:
        log.warning("no --seed given, using default seed %d", DEFAULT_SEED)
        return DEFAULT_SEED
    return args.seed


def _lookup(fn, name):
    try:
        return fn(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _verify_tree(args, tree) -> int:
    cset = _lookup(get_set, args.set)
    rep = lift_mixed(tree, cset, tol=args.tol)
    _emit(args, "verify", reports.verification_result(rep, tree, cset, args.tol), reports.verification_text)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    if (args.protocol is None) == (args.protocol_file is None):
        raise UsageError("give exactly one of --protocol or --protocol-file")
    tree = _lookup(get_protocol, args.protocol) if args.protocol else load(args.protocol_file)
    return _verify_tree(args, tree)


def cmd_import(args) -> int:
    return _verify_tree(args, load(args.path))


def cmd_export(args) -> int:
    text = dumps(_lookup(get_protocol, args.protocol))
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.protocol} to {args.output}")
    return EXIT_PASS


def cmd_upb_check(args) -> int:
    cset = _lookup(get_set, args.set)
    cfg = SeesawConfig(restarts=args.restarts, max_iters=args.iters, seed=_seed(args))
    v = check_upb(cset, cfg)
    q = complement_projector(cset.kets())
    _emit(args, "upb-check", reports.upb_result(cset.name, v, q), reports.upb_text)
    return EXIT_PASS


def cmd_hierarchy(args) -> int:
    rows = reports.hierarchy_rows()
    _emit(args, "hierarchy", reports.hierarchy_result(rows), reports.hierarchy_text)
    ok = all(r.provenance != reports.UNVERIFIED for r in rows)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_lock_demo(args) -> int:
    if args.pairs < 1:
        raise UsageError("--pairs must be at least 1")
    t = reports.lock_demo(args.pairs, args.bit, _seed(args))
    _emit(args, "lock-demo", reports.lock_result(t), reports.lock_text)
    return EXIT_PASS if t.all_success else EXIT_FAIL


def cmd_schmidt(args) -> int:
    states = named_states()
    if args.state not in states:
        raise UsageError(f"unknown state {args.state!r}; choose from {', '.join(states)}")
    k = states[args.state]
    parties = k.layout.parties
    sd = schmidt_decompose(k, parties)
    c = sd.coefficients / max(float((sd.coefficients ** 2).sum()) ** 0.5, 1e-300)
    r = schmidt_rank(k, parties)
    _emit(args, "schmidt", reports.schmidt_result(args.state, c[:r], r), reports.schmidt_text)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loccsim", description="Entanglement-assisted LOCC discrimination checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("verify", help="verify a protocol on a state set")
    sp.add_argument("--set", required=True, help=f"one of: {', '.join(SETS)}")
    sp.add_argument("--protocol", help=f"built-in protocol: {', '.join(PROTOCOLS)}")
    sp.add_argument("--protocol-file", help="protocol in the JSON exchange format")
    sp.add_argument("--tol", type=float, default=MASS_TOL)
    fmt(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("upb-check", help="search the complement of a product set for product states")
    sp.add_argument("--set", required=True)
    sp.add_argument("--restarts", type=int, default=50)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--seed", type=int)
    fmt(sp)
    sp.set_defaults(func=cmd_upb_check)

    sp = sub.add_parser("hierarchy", help="resource hierarchy table")
    fmt(sp)
    sp.set_defaults(func=cmd_hierarchy)

    sp = sub.add_parser("lock-demo", help="lock a bit in n pairs and extract it with one ebit per pair")
    sp.add_argument("--pairs", type=int, default=4)
    sp.add_argument("--bit", type=int, choices=(0, 1), default=1)
    sp.add_argument("--seed", type=int)
    fmt(sp)
    sp.set_defaults(func=cmd_lock_demo)

    sp = sub.add_parser("schmidt", help="Schmidt coefficients of a named state")
    sp.add_argument("--state", required=True)
    fmt(sp)
    sp.set_defaults(func=cmd_schmidt)

    sp = sub.add_parser("export", help="write a built-in protocol as JSON")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("import", help="load a protocol file and verify it")
    sp.add_argument("path")
    sp.add_argument("--set", required=True)
    sp.add_argument("--tol", type=float, default=MASS_TOL)
    fmt(sp)
    sp.set_defaults(func=cmd_import)
    return p


def main(argv=None) -> int:
    logging.basicConfig(format="loccsim: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except (UsageError, LayoutError, ProtocolFormatError, NotProductError, OSError, ValueError) as exc:
        print(f"loccsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
