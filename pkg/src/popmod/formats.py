"""Text formats for protocols, specifications and traces.

Protocol files::

    protocol <name> mode=plain|shutdown
    state <id> output=<token> [shutdown=<id>] [input]
    bot <id>
    trans <q1> <q2> -> <q1'> <q2'>

Spec files hold ``spec``, ``inputs``, ``outputs`` and ``formula`` lines, or
a single ``composed <A> <B>`` line naming two other spec sources.  A source
is a path (relative to the referring file) or ``builtin:<key>``.

Trace files have one ``INIT`` line, one ``STEP`` line per step and an
``END`` line.  ``#`` starts a comment everywhere.
"""

from __future__ import annotations

from pathlib import Path

from .model import (
    AgentConfiguration,
    Mode,
    Protocol,
    ProtocolError,
    UnknownState,
    validate_protocol,
)
from .semantics import SemanticsError, Step, StepKind, Trace
from .specs import ComposedSpec, Spec, SpecError, formula_text, parse_formula

BUILTIN_PREFIX = "builtin:"


class FormatError(ProtocolError):
    """Malformed file content; ``line`` is 1-based when known."""


def _lines(text: str):
    for k, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield k, body


# ---------------------------------------------------------------------------
# protocols


def parse_protocol(text: str) -> Protocol:
    """Parse a protocol file; errors carry the offending line number."""
    lines = list(_lines(text))
    if not lines:
        raise FormatError("empty protocol file")
    k, head = lines[0]
    parts = head.split()
    if len(parts) != 3 or parts[0] != "protocol" or not parts[2].startswith("mode="):
        raise FormatError("expected 'protocol <name> mode=plain|shutdown'", k)
    name = parts[1]
    try:
        mode = Mode(parts[2][len("mode="):])
    except ValueError:
        raise FormatError(f"unknown mode {parts[2]!r}", k) from None

    states: list[str] = []
    declared: dict[str, int] = {}
    output: dict[str, str] = {}
    shutdown: dict[str, str] = {}
    shutdown_line: dict[str, int] = {}
    inputs: set[str] = set()
    transitions: list[tuple[str, str, str, str]] = []
    bots: list[tuple[int, str]] = []

    for k, body in lines[1:]:
        parts = body.split()
        head = parts[0]
        if head == "state":
            if len(parts) < 3:
                raise FormatError("expected 'state <id> output=<token> ...'", k)
            q = parts[1]
            if q in declared:
                raise FormatError(f"state {q} declared twice", k)
            declared[q] = k
            states.append(q)
            for opt in parts[2:]:
                if opt.startswith("output="):
                    output[q] = opt[len("output="):]
                elif opt.startswith("shutdown="):
                    shutdown[q] = opt[len("shutdown="):]
                    shutdown_line[q] = k
                elif opt == "input":
                    inputs.add(q)
                else:
                    raise FormatError(f"unknown state attribute {opt!r}", k)
            if q not in output:
                raise FormatError(f"state {q} has no output", k)
            if mode is Mode.SHUTDOWN and q not in shutdown:
                raise FormatError(f"state {q} has no shutdown= image", k)
            if mode is Mode.PLAIN and q in shutdown:
                raise FormatError("shutdown= is only allowed in shutdown mode", k)
        elif head == "bot":
            if len(parts) != 2:
                raise FormatError("expected 'bot <id>'", k)
            if mode is Mode.PLAIN:
                raise FormatError("bot line in a plain protocol", k)
            bots.append((k, parts[1]))
        elif head == "trans":
            if len(parts) != 6 or parts[3] != "->":
                raise FormatError("expected 'trans <q1> <q2> -> <q1'> <q2'>'", k)
            t = (parts[1], parts[2], parts[4], parts[5])
            for q in t:
                if q not in declared:
                    raise UnknownState(f"transition references undeclared state {q}", k)
            transitions.append(t)
        else:
            raise FormatError(f"unknown directive {head!r}", k)

    if mode is Mode.SHUTDOWN and len(bots) != 1:
        raise FormatError(f"shutdown protocols need exactly one bot line, found {len(bots)}",
                          bots[1][0] if len(bots) > 1 else None)
    bot = bots[0][1] if bots else None
    if bot is not None and bot not in declared:
        raise UnknownState(f"bot state {bot} is not declared", bots[0][0])
    for q, target in shutdown.items():
        if target not in declared:
            raise UnknownState(f"shutdown image {target} is not declared", shutdown_line[q])
    return validate_protocol(
        name, states, transitions, inputs, output, mode,
        shutdown if mode is Mode.SHUTDOWN else None, bot,
    )


def emit_protocol(p: Protocol) -> str:
    """Canonical text: states in declaration order, transitions sorted."""
    out = [f"protocol {p.name} mode={p.mode.value}"]
    for q in p.states:
        line = f"state {q} output={p.output[q]}"
        if p.is_shutdown:
            line += f" shutdown={p.shutdown_map[q]}"
        if q in p.inputs:
            line += " input"
        out.append(line)
    if p.is_shutdown:
        out.append(f"bot {p.bot}")
    for t in sorted(p.transitions):
        out.append(f"trans {t[0]} {t[1]} -> {t[2]} {t[3]}")
    return "\n".join(out) + "\n"


def load_protocol(source: str) -> Protocol:
    """Read a protocol from a path or a ``builtin:<key>`` reference."""
    if source.startswith(BUILTIN_PREFIX):
        from .protolib import builtin

        value = builtin(source[len(BUILTIN_PREFIX):]).value
        if not isinstance(value, Protocol):
            raise FormatError(f"{source} is not a protocol")
        return value
    return parse_protocol(Path(source).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# specifications


def parse_spec(text: str, base: Path | None = None) -> Spec | ComposedSpec:
    lines = list(_lines(text))
    if not lines:
        raise FormatError("empty spec file")
    if lines[0][1].split()[0] == "composed":
        k, body = lines[0]
        parts = body.split()
        if len(parts) != 3 or len(lines) != 1:
            raise FormatError("expected a single 'composed <A> <B>' line", k)
        try:
            return ComposedSpec(load_spec(parts[1], base), load_spec(parts[2], base))
        except SpecError as exc:
            raise FormatError(str(exc), k) from exc
    fields: dict[str, tuple[int, str]] = {}
    for k, body in lines:
        key, _, rest = body.partition(" ")
        if key not in ("spec", "inputs", "outputs", "formula"):
            raise FormatError(f"unknown directive {key!r}", k)
        if key in fields:
            raise FormatError(f"duplicate {key} line", k)
        fields[key] = (k, rest.strip())
    for key in ("spec", "inputs", "outputs", "formula"):
        if key not in fields:
            raise FormatError(f"missing {key} line")
    k, formula = fields["formula"]
    try:
        return Spec(
            fields["spec"][1],
            tuple(fields["inputs"][1].split()),
            tuple(fields["outputs"][1].split()),
            parse_formula(formula),
        )
    except SpecError as exc:
        raise FormatError(str(exc), k) from exc


def emit_spec(s: Spec) -> str:
    return (
        f"spec {s.name}\n"
        f"inputs {' '.join(s.inputs)}\n"
        f"outputs {' '.join(s.outputs)}\n"
        f"formula {formula_text(s.formula)}\n"
    )


def emit_composed_spec(first: str, second: str) -> str:
    return f"composed {first} {second}\n"


def load_spec(source: str, base: Path | None = None) -> Spec | ComposedSpec:
    if source.startswith(BUILTIN_PREFIX):
        from .protolib import builtin

        key = source[len(BUILTIN_PREFIX):]
        value = builtin(key if key.startswith("spec:") else f"spec:{key}").value
        return value
    path = Path(source)
    if base is not None and not path.is_absolute():
        path = base / path
    return parse_spec(path.read_text(encoding="utf-8"), path.parent)


# ---------------------------------------------------------------------------
# traces


def emit_trace(tr: Trace) -> str:
    out = ["INIT " + " ".join(f"{a}={tr.initial[a]}" for a in sorted(tr.initial.assignment))]
    for k, (step, _) in enumerate(tr.steps, start=1):
        if step.kind is StepKind.PROTOCOL:
            t = step.transition
            out.append(f"STEP {k} PROTOCOL {step.agent1} {step.agent2} "
                       f"{t[0]} {t[1]} -> {t[2]} {t[3]}")
        else:
            out.append(f"STEP {k} {step.kind.value} {step.agent1}")
    stab = "none" if tr.stabilization_index is None else tr.stabilization_index
    out.append(f"END steps={len(tr.steps)} deadlocked={str(tr.deadlocked).lower()} "
               f"stabilization={stab}")
    return "\n".join(out) + "\n"


def parse_trace(text: str, p: Protocol) -> Trace:
    """Parse a trace file and replay it through ``p``."""
    lines = list(_lines(text))
    if not lines or not lines[0][1].startswith("INIT"):
        raise FormatError("trace must start with an INIT line", lines[0][0] if lines else None)
    assignment = {}
    for item in lines[0][1].split()[1:]:
        agent, _, q = item.partition("=")
        try:
            assignment[int(agent)] = q
        except ValueError:
            raise FormatError(f"bad agent entry {item!r}", lines[0][0]) from None
    tr = Trace(AgentConfiguration(assignment))
    ended = False
    for k, body in lines[1:]:
        parts = body.split()
        if ended:
            raise FormatError("content after END", k)
        if parts[0] == "END":
            ended = True
            for opt in parts[1:]:
                key, _, value = opt.partition("=")
                if key == "deadlocked":
                    tr.deadlocked = value == "true"
                elif key == "stabilization" and value != "none":
                    tr.stabilization_index = int(value)
            continue
        if parts[0] != "STEP" or len(parts) < 4:
            raise FormatError("expected 'STEP <k> <kind> ...'", k)
        try:
            if int(parts[1]) != len(tr.steps) + 1:
                raise FormatError(f"step number {parts[1]} out of order", k)
            kind = StepKind(parts[2])
            if kind is StepKind.PROTOCOL:
                if len(parts) != 10 or parts[7] != "->":
                    raise FormatError("expected 'STEP <k> PROTOCOL <a1> <a2> <q1> <q2> -> "
                                      "<q1'> <q2'>'", k)
                step = Step(kind, int(parts[3]), int(parts[4]),
                            (parts[5], parts[6], parts[8], parts[9]))
            else:
                step = Step(kind, int(parts[3]))
            tr.append(step, p)
        except (SemanticsError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(str(exc), k) from exc
    return tr
