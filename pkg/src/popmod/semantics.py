"""Execution semantics: single steps, scheduled runs and traces."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .model import AgentConfiguration, Configuration, Protocol, Transition, is_silent

log = logging.getLogger(__name__)

ANY = "any"


class SemanticsError(ValueError):
    pass


class StateMismatch(SemanticsError):
    pass


class SameAgent(SemanticsError):
    pass


class UnknownAgent(SemanticsError):
    pass


class NotInBot(SemanticsError):
    pass


class PlainModeNoRequests(SemanticsError):
    pass


class PlainModeNoRemoval(SemanticsError):
    pass


class BadScript(SemanticsError):
    pass


class StepKind(enum.Enum):
    PROTOCOL = "PROTOCOL"
    REQUEST = "REQUEST"
    REMOVE = "REMOVE"


@dataclass(frozen=True)
class Step:
    kind: StepKind
    agent1: int
    agent2: int | None = None
    transition: Transition | None = None

    def __post_init__(self):
        if self.kind is StepKind.PROTOCOL:
            if self.agent2 is None or self.transition is None:
                raise ValueError("protocol steps need two agents and a transition")
            if self.agent1 == self.agent2:
                raise SameAgent(f"agent {self.agent1} cannot interact with itself")


def apply_protocol_step(c: AgentConfiguration, a1: int, a2: int, t: Transition) -> AgentConfiguration:
    """Let ``a1`` play the first role and ``a2`` the second role of ``t``."""
    if a1 == a2:
        raise SameAgent(f"agent {a1} cannot interact with itself")
    for a in (a1, a2):
        if a not in c:
            raise UnknownAgent(f"no agent {a} in configuration")
    if (c[a1], c[a2]) != (t[0], t[1]):
        raise StateMismatch(
            f"agents {a1},{a2} are in ({c[a1]}, {c[a2]}), transition needs ({t[0]}, {t[1]})"
        )
    return c.with_states({a1: t[2], a2: t[3]})


def apply_request(c: AgentConfiguration, a: int, p: Protocol) -> AgentConfiguration:
    if not p.is_shutdown:
        raise PlainModeNoRequests(f"protocol {p.name} has no shutdown requests")
    if a not in c:
        raise UnknownAgent(f"no agent {a} in configuration")
    return c.with_states({a: p.shutdown_map[c[a]]})


def apply_removal(c: AgentConfiguration, a: int, p: Protocol) -> AgentConfiguration:
    if not p.is_shutdown:
        raise PlainModeNoRemoval(f"protocol {p.name} has no shutdown state")
    if a not in c:
        raise UnknownAgent(f"no agent {a} in configuration")
    if c[a] != p.bot:
        raise NotInBot(f"agent {a} is in {c[a]}, not in the shutdown state")
    return c.without(a)


def apply_step(c: AgentConfiguration, step: Step, p: Protocol) -> AgentConfiguration:
    if step.kind is StepKind.PROTOCOL:
        if step.transition not in p.transitions and not is_silent(step.transition):
            raise StateMismatch(f"{step.transition} is not a transition of {p.name}")
        return apply_protocol_step(c, step.agent1, step.agent2, step.transition)
    if step.kind is StepKind.REQUEST:
        return apply_request(c, step.agent1, p)
    return apply_removal(c, step.agent1, p)


def enabled_protocol_steps(c: Configuration, p: Protocol) -> set[tuple[tuple[str, str], Transition]]:
    """Transitions whose left pair can be drawn from ``c``, with that pair."""
    out = set()
    for t in p.transitions:
        q1, q2 = t[0], t[1]
        if c[q1] >= 1 and c[q2] >= 1 and (q1 != q2 or c[q1] >= 2):
            out.add(((q1, q2), t))
    return out


@dataclass
class Trace:
    initial: AgentConfiguration
    steps: list[tuple[Step, AgentConfiguration]] = field(default_factory=list)
    stabilization_index: int | None = None
    deadlocked: bool = False

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def configurations(self) -> list[AgentConfiguration]:
        return [self.initial] + [c for _, c in self.steps]

    @property
    def final(self) -> AgentConfiguration:
        return self.steps[-1][1] if self.steps else self.initial

    def append(self, step: Step, p: Protocol) -> AgentConfiguration:
        nxt = apply_step(self.final, step, p)
        self.steps.append((step, nxt))
        return nxt

    def replay(self, p: Protocol) -> None:
        """Re-derive every configuration from its predecessor; raise on mismatch."""
        cur = self.initial
        for k, (step, recorded) in enumerate(self.steps, start=1):
            cur = apply_step(cur, step, p)
            if cur != recorded:
                raise SemanticsError(f"step {k} does not produce the recorded configuration")

    def requested_agents(self) -> set[int]:
        return {s.agent1 for s, _ in self.steps if s.kind is StepKind.REQUEST}


@dataclass(frozen=True)
class RequestScript:
    """Shutdown requests to issue, as ``(after_step_count, target)`` pairs.

    ``target`` is an agent id or :data:`ANY`.
    """

    entries: tuple[tuple[int, int | str], ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        counts = [k for k, _ in entries]
        if any(k < 0 for k in counts) or counts != sorted(counts):
            raise BadScript("request times must be non-negative and non-decreasing")
        for _, target in entries:
            if target != ANY and not isinstance(target, int):
                raise BadScript(f"bad request target {target!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def parse(cls, text: str) -> "RequestScript":
        """Parse ``<step>:<agent|any>[,...]``."""
        entries = []
        for item in filter(None, (s.strip() for s in text.split(","))):
            try:
                when, target = item.split(":")
                target = target.strip().lower()
                entries.append((int(when), ANY if target == ANY else int(target)))
            except ValueError as exc:
                raise BadScript(f"cannot parse request {item!r}") from exc
        return cls(tuple(sorted(entries, key=lambda e: e[0])))

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return ",".join(f"{k}:{t}" for k, t in self.entries)


class Scheduler(enum.Enum):
    UNIFORM = "uniform"


def _protocol_arrays(p: Protocol):
    idx = p.state_index
    rules = p.nonsilent
    arr = np.array([[idx[q] for q in t] for t in rules], dtype=np.int64).reshape(-1, 4)
    return rules, [np.ascontiguousarray(arr[:, k]) for k in range(4)]


def run(
    p: Protocol,
    init: AgentConfiguration,
    seed: int = 0,
    script: RequestScript | None = None,
    max_steps: int = 10_000,
    removal_delay: int = 1,
    scheduler: Scheduler = Scheduler.UNIFORM,
    allow_any_start: bool = False,
) -> Trace:
    """Run ``p`` from ``init`` under a uniformly random scheduler.

    Due script requests go first; an agent in the shutdown state is removed
    at most ``removal_delay`` steps after reaching it; otherwise a uniformly
    chosen enabled non-silent transition fires on uniformly chosen agents.
    The run stops early on deadlock.  A deadlock reached while requests are
    still scheduled fast-forwards to the next request.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    if removal_delay < 1:
        raise ValueError("removal_delay must be positive")
    script = script or RequestScript()
    if script.entries and not p.is_shutdown:
        raise PlainModeNoRequests(f"protocol {p.name} has no shutdown requests")
    for _, target in script.entries:
        if target != ANY and target not in init:
            raise BadScript(f"request targets unknown agent {target}")
    bad = sorted({q for q in init.assignment.values() if q not in p.inputs})
    if bad:
        if not allow_any_start:
            raise SemanticsError(f"initial states {bad} are not input states")
        log.warning("starting from non-input states %s", bad)

    agents = sorted(init.assignment)
    slot = {a: k for k, a in enumerate(agents)}
    idx = p.state_index
    rules, (L1, L2, R1, R2) = _protocol_arrays(p)
    bot = idx[p.bot] if p.is_shutdown else -1

    states = np.array([idx[init[a]] for a in agents], dtype=np.int64)
    alive = np.ones(len(agents), dtype=np.bool_)
    bot_since = np.zeros(len(agents), dtype=np.int64)
    counts = np.bincount(states, minlength=len(p.states)).astype(np.int64)
    step_seq, target_seq = np.random.SeedSequence(seed).spawn(2)
    uniforms = np.random.default_rng(step_seq).random((max_steps, 2))
    pick = np.random.default_rng(target_seq)
    rec_kind = np.full(max_steps, -1, np.int8)
    rec_a1 = np.full(max_steps, -1, np.int64)
    rec_a2 = np.full(max_steps, -1, np.int64)
    rec_t = np.full(max_steps, -1, np.int64)

    pending = list(script.entries)
    t = 0
    deadlocked = False
    while t < max_steps:
        while pending and pending[0][0] <= t and t < max_steps:
            _, target = pending.pop(0)
            live = np.flatnonzero(alive)
            if target == ANY:
                if live.size == 0:
                    continue
                k = int(live[pick.integers(live.size)])
            else:
                k = slot[target]
                if not alive[k]:
                    log.info("dropping request for removed agent %s", target)
                    continue
            old = states[k]
            new = idx[p.shutdown_map[p.states[old]]]
            states[k] = new
            counts[old] -= 1
            counts[new] += 1
            if new == bot and old != bot:
                bot_since[k] = t + 1
            rec_kind[t] = kernels.KIND_REQUEST
            rec_a1[t] = k
            t += 1
        if t >= max_steps:
            break
        stop = pending[0][0] if pending else max_steps
        t, status = kernels.sim_segment(
            states, alive, bot_since, counts, L1, L2, R1, R2, bot, removal_delay,
            uniforms, t, min(stop, max_steps), rec_kind, rec_a1, rec_a2, rec_t,
        )
        if status == kernels.STATUS_DEADLOCK:
            if pending:
                pending[0] = (t, pending[0][1])
                continue
            deadlocked = True
            break

    trace = Trace(init, deadlocked=deadlocked)
    for k in range(t):
        kind = rec_kind[k]
        if kind == kernels.KIND_PROTOCOL:
            step = Step(StepKind.PROTOCOL, agents[rec_a1[k]], agents[rec_a2[k]], rules[rec_t[k]])
        elif kind == kernels.KIND_REQUEST:
            step = Step(StepKind.REQUEST, agents[rec_a1[k]])
        else:
            step = Step(StepKind.REMOVE, agents[rec_a1[k]])
        trace.append(step, p)
    return trace


def detect_stabilization(tr: Trace, output: Mapping[str, str], window: int = 1) -> int | None:
    """Index from which every surviving agent's output is constant.

    Only an observation on a finite prefix: the index is reported when at
    least ``window`` steps follow it, or when the trace ended in deadlock.
    """
    if window < 1:
        raise ValueError("window must be positive")
    configs = tr.configurations
    survivors = list(configs[-1])
    n0 = 0
    for a in survivors:
        last = output[configs[-1][a]]
        for k in range(len(configs) - 1, -1, -1):
            c = configs[k]
            if a not in c or output[c[a]] != last:
                n0 = max(n0, k + 1)
                break
    if tr.deadlocked or len(configs) - 1 - n0 >= window:
        return n0
    return None


def outputs_of(c: AgentConfiguration, output: Mapping[str, str]) -> tuple[str, ...]:
    return tuple(output[c[a]] for a in sorted(c.assignment))


def build_trace(p: Protocol, init: AgentConfiguration, steps: Iterable[Step]) -> Trace:
    tr = Trace(init)
    for s in steps:
        tr.append(s, p)
    return tr


def initial_configuration(p: Protocol, n: int | None = None,
                          counts: Mapping[str, int] | None = None) -> AgentConfiguration:
    """Agents 1..n in input states: ``counts`` or all ``n`` in the only input."""
    if counts is None:
        if len(p.proper_inputs) != 1:
            raise SemanticsError(
                f"protocol {p.name} has inputs {list(p.proper_inputs)}; give explicit counts"
            )
        return AgentConfiguration.uniform(p.proper_inputs[0], n or 0)
    seq: Sequence[str] = [q for q in p.states for _ in range(counts.get(q, 0))]
    if n is not None and len(seq) != n:
        raise SemanticsError(f"counts sum to {len(seq)}, expected {n}")
    return AgentConfiguration.from_states(seq)


__all__ = [
    "ANY",
    "Step",
    "StepKind",
    "Trace",
    "RequestScript",
    "Scheduler",
    "apply_protocol_step",
    "apply_request",
    "apply_removal",
    "apply_step",
    "enabled_protocol_steps",
    "run",
    "detect_stabilization",
    "is_silent",
]
