"""Core protocol types: plain and shutdown-aware population protocols.

A protocol is a finite state set, an ordered-pair transition relation,
a non-empty set of input states and an output map.  Shutdown-aware
protocols add a request map and a distinguished silent shutdown state.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

#: Output token reserved for the shutdown state.
BOT_OUT = "_BOT_"

Transition = tuple[str, str, str, str]


class Mode(enum.Enum):
    PLAIN = "plain"
    SHUTDOWN = "shutdown"


class ProtocolError(ValueError):
    """A protocol description violates a structural invariant."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownState(ProtocolError):
    pass


class BotNotSilent(ProtocolError):
    pass


class BotBadMaps(ProtocolError):
    pass


class EmptyInputs(ProtocolError):
    pass


class BadToken(ProtocolError):
    pass


def check_token(name: str) -> None:
    if not name or any(ch.isspace() for ch in name) or "#" in name or name == "->":
        raise BadToken(f"invalid state or output token {name!r}")


def is_silent(t: Transition) -> bool:
    return t[0] == t[2] and t[1] == t[3]


@dataclass(frozen=True, eq=True)
class Protocol:
    name: str
    states: tuple[str, ...]
    transitions: frozenset[Transition]
    inputs: frozenset[str]
    output: Mapping[str, str]
    mode: Mode = Mode.PLAIN
    shutdown_map: Mapping[str, str] | None = None
    bot: str | None = None

    @property
    def output_alphabet(self) -> tuple[str, ...]:
        seen = dict.fromkeys(self.output[q] for q in self.states)
        return tuple(seen)

    @property
    def is_shutdown(self) -> bool:
        return self.mode is Mode.SHUTDOWN

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {q: k for k, q in enumerate(self.states)}

    @cached_property
    def by_left(self) -> dict[tuple[str, str], tuple[tuple[str, str], ...]]:
        """Non-silent right-hand sides keyed by left pair."""
        table: dict[tuple[str, str], list[tuple[str, str]]] = {}
        for t in sorted(self.transitions):
            if not is_silent(t):
                table.setdefault((t[0], t[1]), []).append((t[2], t[3]))
        return {k: tuple(v) for k, v in table.items()}

    @property
    def nonsilent(self) -> list[Transition]:
        return sorted(t for t in self.transitions if not is_silent(t))

    @property
    def proper_inputs(self) -> tuple[str, ...]:
        """Input states other than the shutdown state, in declaration order."""
        return tuple(q for q in self.states if q in self.inputs and q != self.bot)

    def request(self, q: str) -> str:
        if self.shutdown_map is None:
            raise ProtocolError(f"protocol {self.name} has no shutdown requests")
        return self.shutdown_map[q]

    def replace(self, **changes) -> "Protocol":
        fields = dict(
            name=self.name,
            states=self.states,
            transitions=self.transitions,
            inputs=self.inputs,
            output=self.output,
            mode=self.mode,
            shutdown_map=self.shutdown_map,
            bot=self.bot,
        )
        fields.update(changes)
        return validate_protocol(**fields)


def validate_protocol(
    name: str,
    states: Iterable[str],
    transitions: Iterable[Iterable[str]],
    inputs: Iterable[str],
    output: Mapping[str, str],
    mode: Mode | str = Mode.PLAIN,
    shutdown_map: Mapping[str, str] | None = None,
    bot: str | None = None,
) -> Protocol:
    """Build a :class:`Protocol`, raising on the first violated invariant."""
    mode = Mode(mode)
    states = tuple(states)
    for q in states:
        check_token(q)
    if len(set(states)) != len(states):
        dup = next(q for q, c in Counter(states).items() if c > 1)
        raise ProtocolError(f"state {dup} declared twice")
    known = set(states)

    def need(q: str, what: str) -> None:
        if q not in known:
            raise UnknownState(f"{what} references undeclared state {q}")

    trans = set()
    for t in transitions:
        t = tuple(t)
        if len(t) != 4:
            raise ProtocolError(f"transition {t} is not a quadruple")
        for q in t:
            need(q, "transition")
        trans.add(t)
    inputs = frozenset(inputs)
    for q in inputs:
        need(q, "input set")
    if not inputs:
        raise EmptyInputs("the input set is empty")
    for q in states:
        if q not in output:
            raise ProtocolError(f"state {q} has no output value")
    for q in output:
        need(q, "output map")
    output = {q: output[q] for q in states}
    for v in output.values():
        check_token(v)

    if mode is Mode.PLAIN:
        if shutdown_map is not None or bot is not None:
            raise ProtocolError("plain protocols carry no shutdown map or shutdown state")
        for q, v in output.items():
            if v == BOT_OUT:
                raise BotBadMaps(f"state {q} uses the reserved output {BOT_OUT}")
    else:
        if bot is None or shutdown_map is None:
            raise ProtocolError("shutdown protocols need a shutdown map and a shutdown state")
        need(bot, "shutdown state")
        for q in states:
            if q not in shutdown_map:
                raise ProtocolError(f"state {q} has no shutdown request image")
            need(shutdown_map[q], "shutdown map")
        for q in shutdown_map:
            need(q, "shutdown map")
        shutdown_map = {q: shutdown_map[q] for q in states}
        if shutdown_map[bot] != bot:
            raise BotBadMaps("the shutdown state must be a fixed point of the request map")
        if output[bot] != BOT_OUT:
            raise BotBadMaps(f"the shutdown state must output {BOT_OUT}")
        if bot not in inputs:
            raise BotBadMaps("the shutdown state must be an input state")
        for t in sorted(trans):
            if (t[0] == bot or t[1] == bot) and not is_silent(t):
                raise BotNotSilent(
                    "shutdown state takes part in non-silent transition "
                    f"({t[0]}, {t[1]}) -> ({t[2]}, {t[3]})"
                )
    return Protocol(
        name=name,
        states=states,
        transitions=frozenset(trans),
        inputs=inputs,
        output=output,
        mode=mode,
        shutdown_map=shutdown_map,
        bot=bot,
    )


def normalize_silent(p: Protocol) -> Protocol:
    """Add the do-nothing transition for every ordered pair of states."""
    extra = {(a, b, a, b) for a in p.states for b in p.states}
    if extra <= p.transitions:
        return p
    return p.replace(transitions=p.transitions | extra)


@dataclass(frozen=True)
class Configuration:
    """A multiset of states; agent identities quotiented away."""

    counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {q: int(k) for q, k in self.counts.items() if k}
        if any(k < 0 for k in clean.values()):
            raise ValueError("negative count in configuration")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def of(cls, states: Iterable[str]) -> "Configuration":
        return cls(Counter(states))

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    @property
    def support(self) -> frozenset[str]:
        return frozenset(q for q, k in self.counts.items() if k > 0)

    def __getitem__(self, q: str) -> int:
        return self.counts.get(q, 0)

    def __hash__(self):
        return hash(tuple(self.counts.items()))

    def __str__(self):
        return "{" + ", ".join(f"{q}:{k}" for q, k in self.counts.items()) + "}"


@dataclass(frozen=True)
class AgentConfiguration:
    """Agent identity to state assignment, used by traces."""

    assignment: Mapping[int, str]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    @classmethod
    def uniform(cls, state: str, n: int) -> "AgentConfiguration":
        return cls({a: state for a in range(1, n + 1)})

    @classmethod
    def from_states(cls, states: Iterable[str]) -> "AgentConfiguration":
        return cls({a: q for a, q in enumerate(states, start=1)})

    def __getitem__(self, agent: int) -> str:
        return self.assignment[agent]

    def __contains__(self, agent: int) -> bool:
        return agent in self.assignment

    def __iter__(self) -> Iterator[int]:
        return iter(self.assignment)

    def __len__(self) -> int:
        return len(self.assignment)

    def __hash__(self):
        return hash(tuple(sorted(self.assignment.items())))

    @property
    def size(self) -> int:
        return len(self.assignment)

    def project(self) -> Configuration:
        return Configuration.of(self.assignment.values())

    def states(self) -> tuple[str, ...]:
        return tuple(self.assignment[a] for a in sorted(self.assignment))

    def with_states(self, updates: Mapping[int, str]) -> "AgentConfiguration":
        new = dict(self.assignment)
        new.update(updates)
        return AgentConfiguration(new)

    def without(self, agent: int) -> "AgentConfiguration":
        new = dict(self.assignment)
        del new[agent]
        return AgentConfiguration(new)


AugState = tuple[str, str, bool]


class AugmentedProtocol:
    """A protocol whose agents also remember their initial state and
    whether they have received a shutdown request.

    Augmented states are ``(initial, current, requested)`` and are also
    numbered densely so the verifier can work with small integers:
    ``index = (k_initial * |Q| + k_current) * 2 + requested``.
    """

    def __init__(self, base: Protocol, initials: Iterable[str] | None = None):
        self.base = base
        self.initials = tuple(base.proper_inputs if initials is None else initials)
        self._init_index = {q: k for k, q in enumerate(self.initials)}
        self.nq = len(base.states)
        idx = base.state_index
        self._bot = idx[base.bot] if base.bot is not None else -1
        self._req = [idx[base.shutdown_map[q]] for q in base.states] if base.is_shutdown else None
        # non-silent steps on current components, keyed by left pair of indices
        self.steps: dict[tuple[int, int], tuple[tuple[int, int, Transition], ...]] = {}
        for (a, b), rights in base.by_left.items():
            self.steps[(idx[a], idx[b])] = tuple(
                (idx[c], idx[d], (a, b, c, d)) for c, d in rights
            )
        self._out = [base.output[q] for q in base.states]

    def __len__(self) -> int:
        return len(self.initials) * self.nq * 2

    def encode(self, initial: str, current: str, requested: bool) -> int:
        return (self._init_index[initial] * self.nq + self.base.state_index[current]) * 2 + int(
            requested
        )

    def decode(self, x: int) -> AugState:
        k, req = divmod(x, 2)
        ki, kq = divmod(k, self.nq)
        return (self.initials[ki], self.base.states[kq], bool(req))

    def current(self, x: int) -> int:
        return (x >> 1) % self.nq

    def current_name(self, x: int) -> str:
        return self.base.states[(x >> 1) % self.nq]

    def initial_name(self, x: int) -> str:
        return self.initials[(x >> 1) // self.nq]

    def requested(self, x: int) -> bool:
        return bool(x & 1)

    def output(self, x: int) -> str:
        return self._out[(x >> 1) % self.nq]

    def is_bot(self, x: int) -> bool:
        return (x >> 1) % self.nq == self._bot

    def with_current(self, x: int, q: int) -> int:
        return x + 2 * (q - (x >> 1) % self.nq)

    def request(self, x: int) -> int:
        """Apply the request map to the current component; the flag sticks."""
        q = (x >> 1) % self.nq
        return self.with_current(x, self._req[q]) | 1

    def input_state(self, q: str) -> int:
        return self.encode(q, q, False)

    @property
    def states(self) -> list[AugState]:
        return [
            (i, q, r) for i in self.initials for q in self.base.states for r in (False, True)
        ]

    @property
    def inputs(self) -> list[AugState]:
        return [(i, i, False) for i in self.initials]

    def transitions(self) -> Iterator[tuple[AugState, AugState, AugState, AugState]]:
        """All augmented transitions, mirroring base transitions on the
        current component."""
        tags = [(i, r) for i in self.initials for r in (False, True)]
        for q1, q2, r1, r2 in sorted(self.base.transitions):
            for (i1, f1), (i2, f2) in itertools.product(tags, repeat=2):
                yield (i1, q1, f1), (i2, q2, f2), (i1, r1, f1), (i2, r2, f2)

    def project(self, node: Iterable[int]) -> Configuration:
        return Configuration.of(self.current_name(x) for x in node)


def augment_with_inputs(p: Protocol, initials: Iterable[str] | None = None) -> AugmentedProtocol:
    return AugmentedProtocol(p, initials)
