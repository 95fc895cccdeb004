"""Exhaustive verification at bounded population size.

The state space is explored over multisets of augmented agent states
(initial input, current state, requested flag).  Fair executions that
eventually stop receiving requests end in a bottom strongly connected
component of the request-free part of the graph and visit all of it, so
each property is decided by inspecting bottom SCCs:

* a predicate is computed when every reachable bottom SCC is a consensus
  on the predicate's value;
* a specification is implemented when no transition inside a bottom SCC
  changes an agent's output (per-agent stabilisation) and the
  (initial, output) pairs of the SCC satisfy the specification;
* with shutdown requests, additionally no unrequested agent ever reaches
  the shutdown state and every requested agent is gone from the SCC.
  SCCs where all survivors were requested are extinction outcomes and
  carry no obligation.

Request steps are bounded by a budget ``R`` per case, so a pass covers
all schedules with at most ``R`` requests and says nothing beyond.
"""

from __future__ import annotations

import enum
import time
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np

from .kernels import bottom_components
from .model import AgentConfiguration, AugmentedProtocol, Configuration, Protocol
from .semantics import Step, StepKind, Trace
from .specs import ComposedSpec, PairMultiset, Spec, SpecError, UnknownPairAtom

DEFAULT_NODE_CAP = 5_000_000

PROTOCOL, REQUEST, REMOVE = 0, 1, 2


class EdgeKind(enum.IntEnum):
    PROTOCOL = PROTOCOL
    REQUEST = REQUEST
    REMOVE = REMOVE


class Explosion(RuntimeError):
    def __init__(self, nodes: int, cap: int):
        self.nodes = nodes
        super().__init__(f"state space exceeds {cap} nodes ({nodes} reached)")


class CheckKind(enum.Enum):
    PREDICATE = "predicate"
    SPEC = "spec"
    SHUTDOWN = "shutdown"


Node = tuple[int, ...]


@dataclass
class ReachGraph:
    """Explicit reachability graph over augmented multiset configurations.

    ``label[e]`` is ``(x, y, x2, y2, transition)`` for protocol edges,
    ``(x, x2)`` for requests and ``(x,)`` for removals, in augmented
    state indices.
    """

    protocol: Protocol
    aug: AugmentedProtocol
    n: int
    budget: int
    nodes: list[Node] = field(default_factory=list)
    index: dict[Node, int] = field(default_factory=dict)
    requests_used: list[int] = field(default_factory=list)
    parent: list[int] = field(default_factory=list)
    roots: list[int] = field(default_factory=list)
    src: list[int] = field(default_factory=list)
    dst: list[int] = field(default_factory=list)
    kind: list[int] = field(default_factory=list)
    label: list[tuple] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def edges(self) -> Iterable[tuple[int, EdgeKind, int]]:
        for s, k, d in zip(self.src, self.kind, self.dst):
            yield s, EdgeKind(k), d

    def configuration(self, v: int) -> Configuration:
        return self.aug.project(self.nodes[v])

    def describe(self, v: int) -> str:
        """Compact node label: ``state:count`` with ``*`` on requested agents."""
        multi_input = len(self.aug.initials) > 1
        c = Counter()
        for x in self.nodes[v]:
            name = self.aug.current_name(x)
            if multi_input:
                name = f"{self.aug.initial_name(x)}>{name}"
            if self.aug.requested(x):
                name += "*"
            c[name] += 1
        return " ".join(f"{q}:{k}" for q, k in sorted(c.items())) or "(empty)"

    def path_to(self, v: int) -> list[int]:
        path = []
        while self.parent[v] >= 0:
            e = self.parent[v]
            path.append(e)
            v = self.src[e]
        path.reverse()
        return path

    def root_of_path(self, v: int) -> int:
        while self.parent[v] >= 0:
            v = self.src[self.parent[v]]
        return v


def _successors(aug: AugmentedProtocol, node: Node, with_requests: bool):
    """Yield ``(kind, label, successor)`` for every enabled step of ``node``."""
    counts = Counter(node)
    present = sorted(counts)
    for x in present:
        cx = aug.current(x)
        for y in present:
            if x == y and counts[x] < 2:
                continue
            rules = aug.steps.get((cx, aug.current(y)))
            if not rules:
                continue
            for r1, r2, t in rules:
                x2 = aug.with_current(x, r1)
                y2 = aug.with_current(y, r2)
                rest = list(node)
                rest.remove(x)
                rest.remove(y)
                rest.append(x2)
                rest.append(y2)
                yield PROTOCOL, (x, y, x2, y2, t), tuple(sorted(rest))
    if not aug.base.is_shutdown:
        return
    for x in present:
        if aug.is_bot(x):
            rest = list(node)
            rest.remove(x)
            yield REMOVE, (x,), tuple(rest)
    if with_requests:
        for x in present:
            x2 = aug.request(x)
            if x2 != x:
                rest = list(node)
                rest.remove(x)
                rest.append(x2)
                yield REQUEST, (x, x2), tuple(sorted(rest))


def input_nodes(aug: AugmentedProtocol, n: int) -> list[Node]:
    starts = [aug.input_state(q) for q in aug.initials]
    return [tuple(sorted(c)) for c in combinations_with_replacement(starts, n)]


def build_graph(p: Protocol, n: int, budget: int = 0, cap: int = DEFAULT_NODE_CAP,
                aug: AugmentedProtocol | None = None) -> ReachGraph:
    """Explore everything reachable from size-``n`` input configurations
    with at most ``budget`` request steps.

    Nodes are found in order of the fewest requests needed to reach them
    (a 0-1 breadth-first search), so ``requests_used`` is that minimum and
    parent pointers give request-minimal witness paths.
    """
    if n < 1:
        raise ValueError("population size must be at least 1")
    if budget < 0:
        raise ValueError("request budget must be non-negative")
    if not p.is_shutdown:
        budget = 0
    aug = aug or AugmentedProtocol(p)
    g = ReachGraph(p, aug, n, budget)
    dist: dict[Node, int] = {}
    parent_of: dict[Node, int] = {}
    queue: deque[tuple[int, Node]] = deque()
    for r in input_nodes(aug, n):
        dist[r] = 0
        parent_of[r] = -1
        queue.append((0, r))
    done: set[Node] = set()
    pending_edges = []

    def intern(node: Node) -> int:
        k = g.index.get(node)
        if k is None:
            k = len(g.nodes)
            if k >= cap:
                raise Explosion(k, cap)
            g.index[node] = k
            g.nodes.append(node)
            g.requests_used.append(dist[node])
            g.parent.append(-1)
        return k

    while queue:
        d, node = queue.popleft()
        if node in done or d != dist[node]:
            continue
        done.add(node)
        v = intern(node)
        for kind, label, succ in _successors(aug, node, d < budget):
            cost = d + (kind == REQUEST)
            if succ not in dist or cost < dist[succ]:
                dist[succ] = cost
                parent_of[succ] = len(pending_edges)
                if kind == REQUEST:
                    queue.append((cost, succ))
                else:
                    queue.appendleft((cost, succ))
            pending_edges.append((v, succ, kind, label))

    for v, succ, kind, label in pending_edges:
        g.src.append(v)
        g.dst.append(g.index[succ])
        g.kind.append(kind)
        g.label.append(label)
    for node, k in g.index.items():
        g.parent[k] = parent_of[node]
        g.requests_used[k] = dist[node]
    g.roots = sorted(g.index[r] for r in input_nodes(aug, n))
    return g


def bottom_sccs(g: ReachGraph) -> list[frozenset[int]]:
    """Bottom SCCs of the request-free part of ``g`` (protocol and removal edges)."""
    kind = np.asarray(g.kind, dtype=np.int64)
    keep = kind != REQUEST
    src = np.asarray(g.src, dtype=np.int64)[keep]
    dst = np.asarray(g.dst, dtype=np.int64)[keep]
    return [frozenset(int(v) for v in b) for b in bottom_components(len(g.nodes), src, dst)]


# ---------------------------------------------------------------------------
# counterexamples


def witness_trace(g: ReachGraph, v: int, extra: tuple | None = None) -> Trace:
    """Concrete agent-level trace from an input configuration to node ``v``.

    ``extra`` is an optional protocol-edge label applied at the end.
    """
    aug, p = g.aug, g.protocol
    root = g.nodes[g.root_of_path(v)]
    aug_of = {a: x for a, x in enumerate(root, start=1)}
    tr = Trace(AgentConfiguration({a: aug.current_name(x) for a, x in aug_of.items()}))

    def agent_in(x, exclude=None):
        return min(a for a, y in aug_of.items() if y == x and a != exclude)

    labels = [(g.kind[e], g.label[e]) for e in g.path_to(v)]
    if extra is not None:
        labels.append((PROTOCOL, extra))
    for kind, label in labels:
        if kind == PROTOCOL:
            x, y, x2, y2, t = label
            a1 = agent_in(x)
            a2 = agent_in(y, exclude=a1)
            tr.append(Step(StepKind.PROTOCOL, a1, a2, t), p)
            aug_of[a1], aug_of[a2] = x2, y2
        elif kind == REQUEST:
            x, x2 = label
            a = agent_in(x)
            tr.append(Step(StepKind.REQUEST, a), p)
            aug_of[a] = x2
        else:
            (x,) = label
            a = agent_in(x)
            tr.append(Step(StepKind.REMOVE, a), p)
            del aug_of[a]
    return tr


# ---------------------------------------------------------------------------
# reports


@dataclass
class CaseResult:
    n: int
    budget: int
    passed: bool
    nodes: int
    bsccs: int
    elapsed: float
    reason: str = ""
    clause: str = ""
    counterexample: Trace | None = None

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def result_line(self) -> str:
        return (
            f"RESULT n={self.n} R={self.budget} verdict={self.verdict} "
            f"nodes={self.nodes} bsccs={self.bsccs}"
        )


@dataclass
class VerificationReport:
    protocol: str
    check: CheckKind
    cases: list[CaseResult] = field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def counterexample(self) -> Trace | None:
        for c in self.cases:
            if not c.passed:
                return c.counterexample
        return None

    @property
    def first_failure(self) -> CaseResult | None:
        return next((c for c in self.cases if not c.passed), None)

    def result_lines(self) -> list[str]:
        return [c.result_line() for c in self.cases]

    def table(self) -> str:
        rows = [f"{'n':>3} {'R':>3}  verdict {'nodes':>9} {'bsccs':>6} {'time':>8}  detail"]
        for c in self.cases:
            rows.append(
                f"{c.n:>3} {c.budget:>3}  {c.verdict:<7} {c.nodes:>9} {c.bsccs:>6} "
                f"{c.elapsed:>7.3f}s  {c.reason}"
            )
        return "\n".join(rows)


# ---------------------------------------------------------------------------
# checks


def _output_change(aug: AugmentedProtocol, node: Node):
    """A protocol step at ``node`` that changes a participant's output, if any."""
    counts = Counter(node)
    for x in counts:
        for y in counts:
            if x == y and counts[x] < 2:
                continue
            for r1, r2, t in aug.steps.get((aug.current(x), aug.current(y)), ()):
                x2 = aug.with_current(x, r1)
                y2 = aug.with_current(y, r2)
                if aug.output(x2) != aug.output(x) or aug.output(y2) != aug.output(y):
                    return (x, y, x2, y2, t)
    return None


def _pairs(aug: AugmentedProtocol, node: Node) -> PairMultiset:
    return PairMultiset.of((aug.initial_name(x), aug.output(x)) for x in node)


class _SpecCache:
    def __init__(self, spec):
        self.spec = spec
        self.memo: dict[PairMultiset, tuple[bool, str]] = {}

    def __call__(self, m: PairMultiset) -> tuple[bool, str]:
        hit = self.memo.get(m)
        if hit is None:
            try:
                ok = self.spec.holds(m)
                hit = (ok, "" if ok else f"pairs {m} violate {self.spec.name}")
            except UnknownPairAtom as exc:
                hit = (False, str(exc))
            self.memo[m] = hit
        return hit


def _fail(g, bsccs, t0, clause, reason, v, extra=None) -> CaseResult:
    return CaseResult(
        g.n, g.budget, False, len(g), bsccs, time.perf_counter() - t0,
        reason=reason, clause=clause, counterexample=witness_trace(g, v, extra),
    )


def _check_case(p: Protocol, spec, n: int, budget: int, check: CheckKind,
                cap: int = DEFAULT_NODE_CAP, true: str = "true", false: str = "false") -> CaseResult:
    t0 = time.perf_counter()
    g = build_graph(p, n, budget, cap=cap)
    aug = g.aug
    bottoms = bottom_sccs(g)
    nb = len(bottoms)
    holds = _SpecCache(spec)

    if check is CheckKind.SHUTDOWN:
        for v, node in enumerate(g.nodes):
            for x in node:
                if aug.is_bot(x) and not aug.requested(x):
                    return _fail(g, nb, t0, "c", "an agent reached the shutdown state "
                                 "without a shutdown request", v)

    for b in sorted(bottoms, key=min):
        members = sorted(b)
        first = g.nodes[members[0]]
        if check is CheckKind.PREDICATE:
            inputs = Counter(aug.initial_name(x) for x in first)
            expected = true if spec.holds_on_inputs(inputs) else false
            for v in members:
                wrong = sorted({aug.output(x) for x in g.nodes[v]} - {expected})
                if wrong:
                    return _fail(g, nb, t0, "consensus",
                                 f"bottom SCC at {g.describe(v)} outputs {wrong}, "
                                 f"expected {expected}-consensus", v)
            continue
        if check is CheckKind.SHUTDOWN:
            if all(aug.requested(x) for x in first):
                continue  # extinction outcome
            for v in members:
                node = g.nodes[v]
                if any(aug.is_bot(x) for x in node):
                    return _fail(g, nb, t0, "a", f"bottom SCC at {g.describe(v)} keeps an "
                                 "agent in the shutdown state", v)
                if any(aug.requested(x) for x in node):
                    return _fail(g, nb, t0, "b", f"bottom SCC at {g.describe(v)} keeps a "
                                 "requested agent that never shuts down", v)
        frozen_clause, spec_clause = ("d", "e") if check is CheckKind.SHUTDOWN else ("a", "b")
        for v in members:
            change = _output_change(aug, g.nodes[v])
            if change is not None:
                return _fail(g, nb, t0, frozen_clause,
                             f"bottom SCC at {g.describe(v)} contains a step "
                             f"changing an output: {change[4]}", v, extra=change)
        ok, why = holds(_pairs(aug, first))
        if not ok:
            return _fail(g, nb, t0, spec_clause, why, members[0])
    return CaseResult(n, g.budget, True, len(g), nb, time.perf_counter() - t0)


def _run_cases(p, spec, cases, check, cap, jobs) -> list[CaseResult]:
    if jobs and jobs > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_check_case, p, spec, n, r, check, cap) for n, r in cases]
            return [f.result() for f in futures]
    return [_check_case(p, spec, n, r, check, cap) for n, r in cases]


def check_computes_predicate(p: Protocol, pred: Spec, n_max: int,
                             cap: int = DEFAULT_NODE_CAP, jobs: int = 1) -> VerificationReport:
    """Every fair run from an input configuration ends in a stable consensus
    on the predicate's value (output tokens ``true``/``false``)."""
    if not pred.is_predicate:
        raise SpecError(f"{pred.name} is not a predicate on inputs")
    cases = [(n, 0) for n in range(1, n_max + 1)]
    return VerificationReport(
        p.name, CheckKind.PREDICATE, _run_cases(p, pred, cases, CheckKind.PREDICATE, cap, jobs)
    )


def check_implements_spec(p: Protocol, spec: Spec | ComposedSpec, n_max: int,
                          cap: int = DEFAULT_NODE_CAP, jobs: int = 1) -> VerificationReport:
    cases = [(n, 0) for n in range(1, n_max + 1)]
    return VerificationReport(
        p.name, CheckKind.SPEC, _run_cases(p, spec, cases, CheckKind.SPEC, cap, jobs)
    )


def check_implements_spec_with_shutdown(
    p: Protocol, spec: Spec | ComposedSpec, n_max: int, r_max: int,
    cap: int = DEFAULT_NODE_CAP, jobs: int = 1,
) -> VerificationReport:
    if not p.is_shutdown:
        raise ValueError(f"protocol {p.name} has no shutdown requests")
    cases = [(n, r) for n in range(1, n_max + 1) for r in range(r_max + 1)]
    return VerificationReport(
        p.name, CheckKind.SHUTDOWN, _run_cases(p, spec, cases, CheckKind.SHUTDOWN, cap, jobs),
        note=f"covers schedules with at most {r_max} shutdown requests",
    )


def verify(p: Protocol, spec, mode: CheckKind | str, n_max: int, r_max: int = 0,
           cap: int = DEFAULT_NODE_CAP, jobs: int = 1) -> VerificationReport:
    mode = CheckKind(mode)
    if mode is CheckKind.PREDICATE:
        return check_computes_predicate(p, spec, n_max, cap, jobs)
    if mode is CheckKind.SPEC:
        return check_implements_spec(p, spec, n_max, cap, jobs)
    return check_implements_spec_with_shutdown(p, spec, n_max, r_max, cap, jobs)


def bottom_node_sets(p: Protocol, n: int, budget: int = 0,
                     cap: int = DEFAULT_NODE_CAP) -> tuple[ReachGraph, set[Node]]:
    """All nodes lying in some bottom SCC, for cross-checking simulations."""
    g = build_graph(p, n, budget, cap=cap)
    inside = set()
    for b in bottom_sccs(g):
        inside.update(g.nodes[v] for v in b)
    return g, inside


def augmented_node(aug: AugmentedProtocol, initial: AgentConfiguration,
                   final: AgentConfiguration, requested: Sequence[int] | set[int]) -> Node:
    """Multiset node of an agent-level configuration reached by a run."""
    return tuple(sorted(
        aug.encode(initial[a], final[a], a in requested) for a in final
    ))
