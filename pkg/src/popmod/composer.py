"""Direct composition of two shutdown-aware protocols.

Every agent of the composed protocol carries a state of each protocol,
the input its second component was (re)started from, and a flag telling
whether that second component has been asked to shut down.  The first
protocol runs unchanged; whenever an agent's first-protocol output
disagrees with the input its second component was started from, the
second component is asked to shut down and, once it reaches the
shutdown state, restarts from the current first-protocol output.  When
both components are shut down the agent shuts down.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import BOT_OUT, Mode, Protocol, normalize_silent, validate_protocol

BOT = "_BOT_"
TOP_FLAG = "T"
BOT_FLAG = "B"


class CompositionError(ValueError):
    pass


class NotDisjoint(CompositionError):
    pass


class NotCompatible(CompositionError):
    pass


class BotOutputLeak(CompositionError):
    pass


@dataclass(frozen=True)
class ComposedState:
    q1: str
    q2: str
    start: str
    flag: str

    @property
    def name(self) -> str:
        return f"({self.q1}|{self.q2}|{self.start}|{self.flag})"


def _require_shutdown(*ps: Protocol) -> None:
    for p in ps:
        if not p.is_shutdown:
            raise CompositionError(f"protocol {p.name} has no shutdown requests")


def rename_states(p: Protocol, mapping: dict[str, str], name: str | None = None) -> Protocol:
    """Rename states (not output values) of ``p``."""
    r = lambda q: mapping.get(q, q)  # noqa: E731
    return validate_protocol(
        name or p.name,
        [r(q) for q in p.states],
        [tuple(r(q) for q in t) for t in p.transitions],
        {r(q) for q in p.inputs},
        {r(q): v for q, v in p.output.items()},
        p.mode,
        {r(q): r(v) for q, v in p.shutdown_map.items()} if p.shutdown_map else None,
        r(p.bot) if p.bot is not None else None,
    )


def make_disjoint(p1: Protocol, p2: Protocol) -> tuple[Protocol, Protocol, dict[str, str]]:
    """Rename states of ``p2`` so the shutdown state is the only shared state.

    A clashing name ``q`` becomes ``q__2``; if that is taken too, ``q__2_1``,
    ``q__2_2`` and so on.  Output values of ``p1`` name input states of
    ``p2``, so they follow the same renaming.  Returns
    ``(p1, renamed p2, renaming of p2)``.
    """
    _require_shutdown(p1, p2)
    taken = set(p1.states) | set(p2.states)
    mapping: dict[str, str] = {}
    if p2.bot != p1.bot:
        if p1.bot in p2.states:
            raise NotDisjoint(f"{p1.bot} is a regular state of {p2.name}")
        mapping[p2.bot] = p1.bot
    for q in p2.states:
        if q == p2.bot or q not in p1.states:
            continue
        candidate = f"{q}__2"
        k = 0
        while candidate in taken:
            k += 1
            candidate = f"{q}__2_{k}"
        taken.add(candidate)
        mapping[q] = candidate
    if not mapping:
        return p1, p2, {}
    out1 = {q: mapping.get(v, v) if v != BOT_OUT else v for q, v in p1.output.items()}
    if out1 != dict(p1.output):
        p1 = p1.replace(output=out1)
    return p1, rename_states(p2, mapping), mapping


def _value_state(p2: Protocol, v: str) -> str:
    """The second-protocol state standing for first-protocol output ``v``."""
    return p2.bot if v == BOT_OUT else v


def ensure_compatible(p1: Protocol, p2: Protocol) -> tuple[Protocol, Protocol]:
    """Make every output value of ``p1`` an input state of ``p2``.

    A non-shutdown state of ``p1`` with the reserved output gets a fresh
    output token instead.  Each output value of ``p1`` missing from the
    inputs of ``p2`` is added to ``p2`` as a silent input state that
    outputs itself and is sent straight to the shutdown state on request.
    """
    _require_shutdown(p1, p2)
    leaks = [q for q in p1.states if q != p1.bot and p1.output[q] == BOT_OUT]
    if leaks:
        fresh = "BOT_VALUE"
        while fresh in p2.states or fresh in p1.output.values():
            fresh += "_"
        out1 = dict(p1.output)
        for q in leaks:
            out1[q] = fresh
        p1 = p1.replace(output=out1)
    missing = [
        v for v in p1.output_alphabet
        if v != BOT_OUT and v not in p2.inputs
    ]
    if not missing:
        return p1, p2
    for v in missing:
        if v in p2.states:
            raise NotCompatible(f"output {v} of {p1.name} is a non-input state of {p2.name}")
    output = dict(p2.output)
    shutdown = dict(p2.shutdown_map)
    for v in missing:
        output[v] = v
        shutdown[v] = p2.bot
    p2 = validate_protocol(
        p2.name,
        p2.states + tuple(missing),
        p2.transitions,
        set(p2.inputs) | set(missing),
        output,
        Mode.SHUTDOWN,
        shutdown,
        p2.bot,
    )
    return p1, p2


def _check_preconditions(p1: Protocol, p2: Protocol) -> None:
    _require_shutdown(p1, p2)
    shared = set(p1.states) & set(p2.states)
    if p1.bot != p2.bot or shared != {p1.bot}:
        raise NotDisjoint(f"shared states {sorted(shared)}; only the shutdown state may be shared")
    for p in (p1, p2):
        leaks = [q for q in p.states if q != p.bot and p.output[q] == BOT_OUT]
        if leaks:
            raise BotOutputLeak(f"{p.name}: states {leaks} output {BOT_OUT}")
    missing = [v for v in p1.output_alphabet if _value_state(p2, v) not in p2.inputs]
    if missing:
        raise NotCompatible(f"outputs {missing} of {p1.name} are not input states of {p2.name}")


def compose(p1: Protocol, p2: Protocol, strict_paper_rule2: bool = False,
            name: str | None = None) -> Protocol:
    """Direct composition of two disjoint, compatible shutdown protocols.

    With ``strict_paper_rule2`` an inner request applies the second
    protocol's request map to the partner's second component rather than
    the agent's own.  Do-nothing transitions are left out of the result.
    """
    _check_preconditions(p1, p2)
    p1n = normalize_silent(p1)
    p2n = normalize_silent(p2)
    bot1, bot2 = p1.bot, p2.bot
    starts = [q for q in p2.states if q in p2.inputs and q != bot2]
    flags = (TOP_FLAG, BOT_FLAG)
    inner = [ComposedState(a, b, i, f)
             for a in p1.states for b in p2.states for i in starts for f in flags]
    o1 = {q: _value_state(p2, p1.output[q]) for q in p1.states}

    def out(s: ComposedState) -> str:
        if s.flag == TOP_FLAG and s.start == o1[s.q1]:
            return p2.output[s.q2]
        return p2.output[o1[s.q1]]

    states = [s.name for s in inner] + [BOT]
    output = {s.name: out(s) for s in inner}
    output[BOT] = BOT_OUT
    shutdown = {s.name: ComposedState(p1.shutdown_map[s.q1], s.q2, s.start, s.flag).name
                for s in inner}
    shutdown[BOT] = BOT

    rules: set[tuple[str, str, str, str]] = set()
    tags = list(itertools.product(starts, flags))
    # both components step together
    for t1 in p1n.transitions:
        for t2 in p2n.transitions:
            if t1[0] == t1[2] and t1[1] == t1[3] and t2[0] == t2[2] and t2[1] == t2[3]:
                continue
            for (i1, b1), (i2, b2) in itertools.product(tags, repeat=2):
                rules.add((
                    ComposedState(t1[0], t2[0], i1, b1).name,
                    ComposedState(t1[1], t2[1], i2, b2).name,
                    ComposedState(t1[2], t2[2], i1, b1).name,
                    ComposedState(t1[3], t2[3], i2, b2).name,
                ))
    tops = [s for s in inner if s.flag == TOP_FLAG]
    for a in tops:
        # first-protocol output drifted from the start value: ask component 2 to stop
        if o1[a.q1] == a.start:
            continue
        for partner in tops:
            target = partner.q2 if strict_paper_rule2 else a.q2
            new = ComposedState(a.q1, p2.shutdown_map[target], a.start, BOT_FLAG)
            rules.add((a.name, partner.name, new.name, partner.name))
    for a in inner:
        if a.q2 != bot2:
            continue
        if a.q1 != bot1 and a.flag == BOT_FLAG:
            # component 2 is down: restart it from the current first output
            new = ComposedState(a.q1, o1[a.q1], o1[a.q1], TOP_FLAG).name
        elif a.q1 == bot1:
            new = BOT
        else:
            continue
        for partner in inner:
            rules.add((a.name, partner.name, new, partner.name))
    return validate_protocol(
        name or f"{p1.name}+{p2.name}",
        states,
        rules,
        {ComposedState(q, o1[q], o1[q], TOP_FLAG).name for q in p1.proper_inputs} | {BOT},
        output,
        Mode.SHUTDOWN,
        shutdown,
        BOT,
    )


def composed_state_count(p1: Protocol, p2: Protocol) -> int:
    starts = [q for q in p2.states if q in p2.inputs and q != p2.bot]
    return len(p1.states) * len(p2.states) * len(starts) * 2 + 1


def relabel_inputs(pc: Protocol, p1: Protocol) -> tuple[Protocol, dict[str, str]]:
    """Give the composed input states the names of the first protocol's inputs."""
    mapping = {}
    for q in p1.proper_inputs:
        v = p1.output[q]
        mapping[ComposedState(q, v, v, TOP_FLAG).name] = q
    for old, new in mapping.items():
        if old not in pc.states:
            raise CompositionError(f"{old} is not a state of {pc.name}")
        if new in pc.states and new != old:
            raise CompositionError(f"input name {new} already names a composed state")
    return rename_states(pc, mapping), mapping


def compose_full(p1: Protocol, p2: Protocol, strict_paper_rule2: bool = False,
                 relabel: bool = True) -> Protocol:
    """Disjoint renaming, compatibility padding, composition and input relabelling."""
    p1, p2, _ = make_disjoint(p1, p2)
    p1, p2 = ensure_compatible(p1, p2)
    pc = compose(p1, p2, strict_paper_rule2)
    if relabel:
        pc, _ = relabel_inputs(pc, p1)
    return pc
