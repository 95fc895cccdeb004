"""Graphviz export of reachability graphs."""

from __future__ import annotations

from .verifier import EdgeKind, ReachGraph, bottom_sccs


def _quote(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return '"' + body + '"'


def count_vector(g: ReachGraph, v: int) -> str:
    c = g.configuration(v)
    return "(" + ",".join(str(c[q]) for q in g.protocol.states) + ")"


def to_dot(g: ReachGraph) -> str:
    """Nodes carry the count vector over protocol states (in declaration order)
    and the augmented multiset; bottom SCC members are double circles."""
    bottom = set()
    for b in bottom_sccs(g):
        bottom.update(b)
    order = ",".join(g.protocol.states)
    out = [
        f"digraph {_quote(g.protocol.name)} {{",
        f"  label={_quote(f'{g.protocol.name} n={g.n} R={g.budget} vector=({order})')};",
        "  node [shape=circle];",
    ]
    for v in range(len(g)):
        shape = "doublecircle" if v in bottom else "circle"
        label = _quote(f"{count_vector(g, v)}\n{g.describe(v)}")
        out.append(f"  n{v} [label={label}, shape={shape}];")
    for s, kind, d in g.edges():
        out.append(f"  n{s} -> n{d} [label={EdgeKind(kind).name}];")
    out.append("}")
    return "\n".join(out) + "\n"
