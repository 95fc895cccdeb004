import pytest

from popmod import composer as C
from popmod import protolib as L
from popmod import verifier as V
from popmod.model import BOT_OUT, validate_protocol
from popmod.specs import ComposedSpec
from oracles import base_reachable

BOT = "_BOT_"


def tiny(name, states, outputs, inputs=None, transitions=()):
    """Shutdown protocol whose states all request straight to the shutdown state."""
    states = tuple(states) + (BOT,)
    out = dict(outputs)
    out[BOT] = BOT_OUT
    return validate_protocol(
        name, states, transitions, set(inputs or states) | {BOT}, out, "shutdown",
        {q: BOT for q in states}, BOT,
    )


def first_component(name: str) -> str:
    return name[1:-1].split("|")[0] if name.startswith("(") else name


def test_rename_on_clash():
    p1 = tiny("a", ["even"], {"even": "x"})
    p2 = tiny("b", ["even", "x"], {"even": "even", "x": "x"})
    q1, q2, mapping = C.make_disjoint(p1, p2)
    assert mapping == {"even": "even__2"}
    assert "even__2" in q2.states and set(q1.states) & set(q2.states) == {BOT}


def test_already_disjoint():
    p1 = tiny("a", ["s"], {"s": "x"})
    p2 = tiny("b", ["x"], {"x": "x"})
    q1, q2, mapping = C.make_disjoint(p1, p2)
    assert mapping == {} and (q1, q2) == (p1, p2)


def test_rename_escalates():
    p1 = tiny("a", ["even", "even__2"], {"even": "x", "even__2": "x"})
    p2 = tiny("b", ["even", "x"], {"even": "even", "x": "x"})
    _, _, mapping = C.make_disjoint(p1, p2)
    assert mapping == {"even": "even__2_1"}


def test_rename_follows_output_values():
    q1, q2, mapping = C.make_disjoint(L.parity(), L.identity3())
    assert mapping == {"ODD": "ODD__2", "odd": "odd__2", "even": "even__2"}
    assert set(q1.output_alphabet) <= set(q2.inputs) | {BOT_OUT}


def test_compatible_unchanged():
    p1, p2, _ = C.make_disjoint(L.parity(), L.identity3())
    assert C.ensure_compatible(p1, p2) == (p1, p2)


def test_compatible_pads_missing_value():
    p1 = tiny("a", ["s"], {"s": "X"})
    p2 = tiny("b", ["y"], {"y": "y"})
    _, q2 = C.ensure_compatible(p1, p2)
    assert "X" in q2.states and "X" in q2.inputs
    assert q2.output["X"] == "X" and q2.shutdown_map["X"] == BOT
    assert not [t for t in q2.nonsilent if "X" in t]


def test_bot_output_leak_gets_fresh_value():
    p1 = tiny("a", ["s", "t"], {"s": "y", "t": BOT_OUT})
    p2 = tiny("b", ["y"], {"y": "y"})
    q1, q2 = C.ensure_compatible(p1, p2)
    assert q1.output["t"] == "BOT_VALUE" and "BOT_VALUE" in q2.inputs


def test_preconditions():
    with pytest.raises(C.NotDisjoint):
        C.compose(L.parity(), L.identity3())
    with pytest.raises(C.CompositionError):
        C.compose(L.threshold3(), L.identity3())


def test_state_count_145():
    pc = C.compose_full(L.parity(), L.identity3())
    assert len(pc.states) == 6 * 4 * 3 * 2 + 1 == 145
    p1, p2, _ = C.make_disjoint(L.parity(), L.identity3())
    assert C.composed_state_count(p1, p2) == 145


def test_family_four_instance():
    p1, p2, _ = C.make_disjoint(L.parity(), L.identity3())
    pc = C.compose(p1, p2)
    a = C.ComposedState(BOT, BOT, "ODD__2", C.BOT_FLAG).name
    for x in pc.states:
        if x == BOT:
            continue
        assert (a, x, BOT, x) in pc.transitions
    assert (a, BOT, BOT, BOT) not in pc.transitions


def test_family_two_variants():
    p1, p2, _ = C.make_disjoint(L.parity(), L.identity3())
    # every identity3 state requests straight to the shutdown state
    assert C.compose(p1, p2).transitions == C.compose(p1, p2, strict_paper_rule2=True).transitions
    q2 = validate_protocol(
        "slow", ("ODD", "odd", "even", "w", BOT), [("w", "w", BOT, BOT)],
        {"ODD", "odd", "even", BOT},
        {"ODD": "ODD", "odd": "odd", "even": "even", "w": "even", BOT: BOT_OUT},
        "shutdown", {"ODD": "w", "odd": BOT, "even": BOT, "w": "w", BOT: BOT}, BOT,
    )
    p1, q2, _ = C.make_disjoint(L.parity(), q2)
    own = C.compose(p1, q2)
    strict = C.compose(p1, q2, strict_paper_rule2=True)
    assert own.transitions != strict.transitions
    assert own.states == strict.states


def test_relabel_inputs():
    p1, p2, _ = C.make_disjoint(L.parity(), L.identity3())
    pc = C.compose(p1, p2)
    relabelled, mapping = C.relabel_inputs(pc, p1)
    assert mapping == {"(ODD|ODD__2|ODD__2|T)": "ODD"}
    assert set(relabelled.inputs) == {"ODD", BOT}
    inverse = {v: k for k, v in mapping.items()}
    assert C.rename_states(relabelled, inverse) == pc


def test_first_component_is_faithful():
    pc = C.compose_full(L.parity(), L.identity3())
    for n, r in [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1)]:
        g = V.build_graph(pc, n, r)
        reach = base_reachable(L.parity(), n, r)
        for node in g.nodes:
            q1s = tuple(sorted(first_component(g.aug.current_name(x)) for x in node))
            assert q1s in reach


@pytest.mark.parametrize("strict", [False, True])
def test_composed_parity_identity_verifies(strict):
    pc = C.compose_full(L.parity(), L.identity3(), strict_paper_rule2=strict)
    cs = ComposedSpec(L.spec_parity(), L.spec_identity3())
    r = V.check_implements_spec_with_shutdown(pc, cs, 3, 1)
    assert r.passed, r.table()


def test_identity_then_identity():
    pc = C.compose_full(L.identity3(), L.identity3())
    cs = ComposedSpec(L.spec_identity3(), L.spec_identity3())
    assert V.check_implements_spec_with_shutdown(pc, cs, 2, 1).passed
