"""Command line interface.

Exit codes: 0 success, 1 verification failure or invalid protocol,
2 usage or parse error, 3 state-space cap exceeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import composer, formats, semantics, verifier
from .dot import to_dot
from .model import Protocol, ProtocolError
from .protolib import UnknownKey
from .specs import ComposedSpec, SpecError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EXPLOSION = 0, 1, 2, 3

log = logging.getLogger("popmod")


class UsageError(Exception):
    pass


def rewrite_builtin_flags(argv: list[str]) -> list[str]:
    """Turn ``--builtin KEY`` into the positional source ``builtin:KEY``."""
    out: list[str] = []
    it = iter(argv)
    for arg in it:
        if arg == "--builtin":
            key = next(it, None)
            if key is None:
                raise UsageError("--builtin needs a key")
            out.append(formats.BUILTIN_PREFIX + key)
        elif arg.startswith("--builtin="):
            out.append(formats.BUILTIN_PREFIX + arg.split("=", 1)[1])
        else:
            out.append(arg)
    return out


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parse_init(p: Protocol, text: str | None, n: int | None):
    if text is None:
        if n is None:
            raise UsageError("give --n or --init")
        return semantics.initial_configuration(p, n)
    counts = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        q, _, k = item.partition("=")
        try:
            counts[q] = int(k)
        except ValueError:
            raise UsageError(f"bad --init entry {item!r}") from None
    return semantics.initial_configuration(p, n, counts)


def _default_mode(p: Protocol, spec) -> str:
    if p.is_shutdown:
        return "shutdown"
    if not isinstance(spec, ComposedSpec) and spec.is_predicate:
        return "predicate"
    return "spec"


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    try:
        p = formats.load_protocol(args.file)
    except ProtocolError as exc:
        print(f"invalid: {exc}")
        return EXIT_FAIL
    silent = len(p.transitions) - len(p.nonsilent)
    print(f"valid: {p.name} mode={p.mode.value} states={len(p.states)} "
          f"transitions={len(p.nonsilent)} silent={silent} inputs={len(p.inputs)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = formats.load_protocol(args.file)
    init = _parse_init(p, args.init, args.n)
    script = semantics.RequestScript.parse(args.requests) if args.requests else None
    tr = semantics.run(p, init, seed=args.seed, script=script, max_steps=args.max_steps,
                       removal_delay=args.removal_delay)
    tr.stabilization_index = semantics.detect_stabilization(tr, p.output, args.window)
    final = tr.final
    print(f"steps: {len(tr)}")
    print(f"final configuration: {final.project()}")
    print("final outputs: " + " ".join(semantics.outputs_of(final, p.output)))
    stab = "none" if tr.stabilization_index is None else tr.stabilization_index
    print(f"stabilization index (observed): {stab}")
    print(f"deadlocked: {'yes' if tr.deadlocked else 'no'}")
    if args.trace:
        _write(args.trace, formats.emit_trace(tr))
    return EXIT_OK


def cmd_verify(args) -> int:
    p = formats.load_protocol(args.file)
    spec = formats.load_spec(args.spec)
    mode = args.mode or _default_mode(p, spec)
    report = verifier.verify(p, spec, mode, args.max_n, args.max_requests,
                             cap=args.cap, jobs=args.jobs)
    print(f"{report.protocol}: {report.check.value} check against {spec.name}")
    if report.note:
        print(report.note)
    print(report.table())
    for line in report.result_lines():
        print(line)
    bad = report.first_failure
    if bad is not None:
        print(f"counterexample (n={bad.n}, R={bad.budget}, clause {bad.clause}): {bad.reason}")
        if bad.counterexample is not None:
            text = formats.emit_trace(bad.counterexample)
            if args.counterexample:
                _write(args.counterexample, text)
            else:
                sys.stdout.write(text)
    if args.dot:
        g = verifier.build_graph(p, args.max_n, args.max_requests if p.is_shutdown else 0,
                                 cap=args.cap)
        _write(args.dot, to_dot(g))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_compose(args) -> int:
    p1 = formats.load_protocol(args.file1)
    p2 = formats.load_protocol(args.file2)
    pc = composer.compose_full(p1, p2, strict_paper_rule2=args.strict_paper_rule2,
                               relabel=not args.no_relabel)
    _write(args.output, formats.emit_protocol(pc))
    print(f"composed {pc.name}: {len(pc.states)} states, {len(pc.nonsilent)} transitions",
          file=sys.stderr)
    return EXIT_OK


def _spec_ref(source: str, out_dir: Path) -> str:
    if source.startswith(formats.BUILTIN_PREFIX):
        return source
    return os.path.relpath(Path(source).resolve(), out_dir.resolve())


def cmd_spec_compose(args) -> int:
    ComposedSpec(formats.load_spec(args.spec_a), formats.load_spec(args.spec_b))
    out_dir = Path.cwd() if args.output == "-" else Path(args.output).parent
    text = formats.emit_composed_spec(_spec_ref(args.spec_a, out_dir),
                                      _spec_ref(args.spec_b, out_dir))
    _write(args.output, text)
    return EXIT_OK


def cmd_graph(args) -> int:
    p = formats.load_protocol(args.file)
    g = verifier.build_graph(p, args.n, args.max_requests if p.is_shutdown else 0, cap=args.cap)
    _write(args.dot, to_dot(g))
    print(f"{len(g)} nodes, {len(g.src)} edges, {len(verifier.bottom_sccs(g))} bottom SCCs",
          file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="popmod",
        description="Population protocols with shutdown requests: simulate, verify, compose.",
        epilog="Any protocol or spec path may be replaced by --builtin <key>.",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a protocol file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one random execution")
    p.add_argument("file")
    p.add_argument("--n", type=int)
    p.add_argument("--init", help="input counts, e.g. q1=3,q0=1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--requests", help="request script <step>:<agent|any>[,...]")
    p.add_argument("--removal-delay", type=int, default=1)
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--trace", help="write the trace file here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="exhaustive bounded verification")
    p.add_argument("file")
    p.add_argument("--spec", required=True)
    p.add_argument("--max-n", type=int, required=True)
    p.add_argument("--max-requests", type=int, default=0)
    p.add_argument("--mode", choices=["predicate", "spec", "shutdown"])
    p.add_argument("--dot", help="DOT export of the largest case")
    p.add_argument("--counterexample", help="write the first counterexample trace here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--cap", type=int, default=verifier.DEFAULT_NODE_CAP)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compose", help="direct composition of two shutdown protocols")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--strict-paper-rule2", action="store_true",
                   help="inner requests use the partner's second component")
    p.add_argument("--no-relabel", action="store_true")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("spec-compose", help="write a composed spec file")
    p.add_argument("spec_a")
    p.add_argument("spec_b")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_spec_compose)

    p = sub.add_parser("graph", help="DOT export of the reachability graph")
    p.add_argument("file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-requests", type=int, default=0)
    p.add_argument("--dot", required=True)
    p.add_argument("--cap", type=int, default=verifier.DEFAULT_NODE_CAP)
    p.set_defaults(func=cmd_graph)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = rewrite_builtin_flags(argv)
    except UsageError as exc:
        print(f"popmod: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except verifier.Explosion as exc:
        print(f"popmod: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except (ProtocolError, SpecError, semantics.SemanticsError, composer.CompositionError,
            UnknownKey, UsageError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"popmod: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
