import pytest

from popmod import protolib as L
from popmod.model import (
    BOT_OUT,
    AgentConfiguration,
    AugmentedProtocol,
    BadToken,
    BotBadMaps,
    BotNotSilent,
    Configuration,
    EmptyInputs,
    Mode,
    ProtocolError,
    UnknownState,
    is_silent,
    normalize_silent,
    validate_protocol,
)
from popmod.verifier import build_graph
from oracles import base_reachable


def test_parity_accepted():
    p = L.parity()
    assert p.mode is Mode.SHUTDOWN
    assert len(p.states) == 6
    assert len(p.nonsilent) == 13
    assert p.bot == "_BOT_" and p.output["_BOT_"] == BOT_OUT


def test_zero_transitions_accepted():
    p = validate_protocol("lone", ["a"], [], {"a"}, {"a": "x"})
    assert p.transitions == frozenset()


def test_bot_must_be_silent():
    p = L.parity()
    with pytest.raises(BotNotSilent):
        p.replace(transitions=set(p.transitions) | {("_BOT_", "ODD", "_BOT_", "even")})


def test_bot_silent_self_loop_is_fine():
    p = L.parity()
    q = p.replace(transitions=set(p.transitions) | {("_BOT_", "ODD", "_BOT_", "ODD")})
    assert len(q.nonsilent) == 13


@pytest.mark.parametrize(
    "kwargs, exc",
    [
        (dict(states=["a"], transitions=[("a", "b", "a", "a")]), UnknownState),
        (dict(inputs=set()), EmptyInputs),
        (dict(output={"a": "x"}, states=["a", "b"]), ProtocolError),
        (dict(states=["a b"], output={"a b": "x"}, inputs={"a b"}), BadToken),
        (dict(states=["a", "a"]), ProtocolError),
        (dict(output={"a": BOT_OUT}), BotBadMaps),
        (dict(mode="shutdown"), ProtocolError),
    ],
)
def test_validation_errors(kwargs, exc):
    args = dict(name="t", states=["a"], transitions=[], inputs={"a"}, output={"a": "x"})
    args.update(kwargs)
    with pytest.raises(exc):
        validate_protocol(**args)


def test_shutdown_map_rules():
    base = dict(name="t", states=["a", "B"], transitions=[], inputs={"a", "B"},
                output={"a": "x", "B": BOT_OUT}, mode="shutdown", bot="B")
    validate_protocol(**base, shutdown_map={"a": "B", "B": "B"})
    with pytest.raises(BotBadMaps):
        validate_protocol(**base, shutdown_map={"a": "B", "B": "a"})
    with pytest.raises(BotBadMaps):
        validate_protocol(**{**base, "inputs": {"a"}}, shutdown_map={"a": "B", "B": "B"})
    with pytest.raises(BotBadMaps):
        validate_protocol(**{**base, "output": {"a": "x", "B": "y"}},
                          shutdown_map={"a": "B", "B": "B"})


def test_normalize_threshold3_adds_sixteen():
    p = L.threshold3()
    n = normalize_silent(p)
    assert len(n.transitions) == 22
    assert normalize_silent(n) == n


def test_normalize_empty_two_state():
    p = validate_protocol("t", ["a", "b"], [], {"a"}, {"a": "x", "b": "y"})
    n = normalize_silent(p)
    assert len(n.transitions) == 4 and all(is_silent(t) for t in n.transitions)


def test_configuration_and_agents():
    c = Configuration.of(["q1", "q1", "q0"])
    assert c.size == 3 and c["q1"] == 2 and c["q3"] == 0
    a = AgentConfiguration.from_states(["q1", "q1", "q0"])
    assert a.project() == c
    assert a.without(1).size == 2
    assert a.with_states({3: "q2"})[3] == "q2"


def test_augmented_single_state():
    p = validate_protocol("one", ["q"], [], {"q"}, {"q": "x"})
    aug = AugmentedProtocol(p)
    assert set(aug.states) == {("q", "q", False), ("q", "q", True)}
    assert aug.inputs == [("q", "q", False)]


def test_augmented_encoding_roundtrip():
    aug = AugmentedProtocol(L.parity())
    for s in aug.states:
        x = aug.encode(*s)
        assert aug.decode(x) == s
        assert aug.current_name(x) == s[1] and aug.initial_name(x) == s[0]
        assert aug.requested(x) == s[2]


def test_augmented_request_sticks():
    p = L.parity()
    aug = AugmentedProtocol(p)
    x = aug.input_state("ODD")
    y = aug.request(x)
    assert aug.decode(y) == ("ODD", "even'", True)
    assert aug.decode(aug.request(y)) == ("ODD", "even'", True)


def test_augmented_transitions_project_to_base():
    p = L.parity()
    aug = AugmentedProtocol(p)
    for x, y, x2, y2 in aug.transitions():
        assert (x[1], y[1], x2[1], y2[1]) in p.transitions
        assert (x[0], x[2]) == (x2[0], x2[2]) and (y[0], y[2]) == (y2[0], y2[2])


@pytest.mark.parametrize("key", L.protocol_keys())
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_augmented_projection_matches_base(key, n):
    p = L.builtin(key).value
    budget = 1 if p.is_shutdown else 0
    g = build_graph(p, n, budget)
    projected = {tuple(sorted(g.aug.current_name(x) for x in node)) for node in g.nodes}
    assert projected == base_reachable(p, n, budget)
