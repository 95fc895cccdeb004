import pytest

from popmod import protolib as L
from popmod import semantics as S
from popmod._jit import disable_jit, enable_jit, HAVE_NUMBA
from popmod.model import AgentConfiguration, Configuration
from popmod.semantics import RequestScript, Step, StepKind

T3 = L.threshold3()
PAR = L.parity()


def ac(*states):
    return AgentConfiguration.from_states(states)


def test_role_swap_instance():
    c = S.apply_protocol_step(ac("q1", "q1", "q1"), 3, 1, ("q1", "q1", "q0", "q2"))
    assert c.states() == ("q2", "q1", "q0")


def test_fourth_rule_on_agents_two_one():
    c = S.apply_protocol_step(ac("q3", "q0", "q0"), 2, 1, ("q0", "q3", "q3", "q3"))
    assert c.states() == ("q3", "q3", "q0")


def test_do_nothing_step():
    c = ac("q0", "q2")
    step = Step(StepKind.PROTOCOL, 1, 2, ("q0", "q2", "q0", "q2"))
    assert S.apply_step(c, step, T3) == c


def test_protocol_step_errors():
    with pytest.raises(S.SameAgent):
        S.apply_protocol_step(ac("q1", "q1"), 1, 1, ("q1", "q1", "q0", "q2"))
    with pytest.raises(S.StateMismatch):
        S.apply_protocol_step(ac("q1", "q0"), 1, 2, ("q1", "q1", "q0", "q2"))
    with pytest.raises(S.UnknownAgent):
        S.apply_protocol_step(ac("q1", "q1"), 1, 5, ("q1", "q1", "q0", "q2"))


def test_requests_follow_map():
    c = ac("ODD", "odd", "_BOT_")
    assert S.apply_request(c, 1, PAR)[1] == "even'"
    assert S.apply_request(c, 2, PAR)[2] == "ODD'"
    assert S.apply_request(c, 3, PAR) == c
    with pytest.raises(S.PlainModeNoRequests):
        S.apply_request(ac("q1"), 1, T3)


def test_removal():
    c = AgentConfiguration({1: "_BOT_", 2: "even", 3: "even"})
    assert S.apply_removal(c, 1, PAR).assignment == {2: "even", 3: "even"}
    with pytest.raises(S.NotInBot):
        S.apply_removal(c, 2, PAR)
    assert S.apply_removal(AgentConfiguration({1: "_BOT_"}), 1, PAR).size == 0
    with pytest.raises(S.PlainModeNoRemoval):
        S.apply_removal(ac("q1"), 1, T3)


def test_enabled_steps():
    assert S.enabled_protocol_steps(Configuration.of(["q0", "q2"]), T3) == set()
    assert S.enabled_protocol_steps(Configuration.of(["q1"]), T3) == set()
    assert S.enabled_protocol_steps(Configuration.of(["q1", "q1"]), T3) == {
        (("q1", "q1"), ("q1", "q1", "q0", "q2"))
    }


def test_printed_execution_multisets_and_stabilization():
    steps = [
        Step(StepKind.PROTOCOL, 3, 1, ("q1", "q1", "q0", "q2")),
        Step(StepKind.PROTOCOL, 1, 2, ("q2", "q1", "q0", "q3")),
        Step(StepKind.PROTOCOL, 1, 2, ("q0", "q3", "q3", "q3")),
        Step(StepKind.PROTOCOL, 3, 1, ("q0", "q3", "q3", "q3")),
    ]
    tr = S.build_trace(T3, ac("q1", "q1", "q1"), steps)
    printed = [("q1", "q1", "q1"), ("q2", "q1", "q0"), ("q3", "q0", "q0"),
               ("q3", "q3", "q0"), ("q3", "q3", "q3")]
    got = [c.project() for c in tr.configurations]
    assert got == [Configuration.of(s) for s in printed]
    assert tr.configurations[1].states() == printed[1]
    tr.deadlocked = True
    assert S.detect_stabilization(tr, T3.output) == 4


def test_stabilization_edge_cases():
    tr = S.Trace(ac("q0", "q2"))
    for _ in range(3):
        tr.append(Step(StepKind.PROTOCOL, 1, 2, ("q0", "q2", "q0", "q2")), T3)
    assert S.detect_stabilization(tr, T3.output) == 0
    assert S.detect_stabilization(tr, T3.output, window=4) is None
    swap = L.validate_protocol("swap", ["a", "b"], [("a", "b", "b", "a")], {"a", "b"},
                               {"a": "x", "b": "y"})
    tr = S.Trace(ac("a", "b"))
    for k in range(20):
        tr.append(Step(StepKind.PROTOCOL, 1 + k % 2, 2 - k % 2, ("a", "b", "b", "a")), swap)
    assert S.detect_stabilization(tr, swap.output) is None
    with pytest.raises(ValueError):
        S.detect_stabilization(tr, swap.output, window=0)


def test_run_threshold3_n3_reaches_all_q3():
    for seed in range(10):
        tr = S.run(T3, S.initial_configuration(T3, 3), seed=seed)
        assert tr.deadlocked
        assert tr.final.project() == Configuration.of(["q3"] * 3)
        tr.replay(T3)


def test_run_single_agent_deadlocks_immediately():
    tr = S.run(T3, S.initial_configuration(T3, 1))
    assert len(tr) == 0 and tr.deadlocked


def test_run_parity_with_request():
    for seed in range(20):
        script = RequestScript.parse("0:1")
        tr = S.run(PAR, S.initial_configuration(PAR, 3), seed=seed, script=script)
        assert tr.deadlocked and 1 not in tr.final
        assert S.outputs_of(tr.final, PAR.output) == ("even", "even")
        tr.replay(PAR)


def test_removal_within_delay():
    tr = S.run(PAR, S.initial_configuration(PAR, 5), seed=3,
               script=RequestScript.parse("0:any,2:any,4:any"))
    configs = tr.configurations
    for k, c in enumerate(configs[:-1]):
        bots = [a for a in c if c[a] == "_BOT_"]
        if bots:
            step, _ = tr.steps[k]
            assert step.kind is StepKind.REMOVE or step.kind is StepKind.REQUEST


def test_request_script_parse():
    s = RequestScript.parse("5:any, 0:2")
    assert s.entries == ((0, 2), (5, "any"))
    assert str(s) == "0:2,5:any"
    with pytest.raises(S.BadScript):
        RequestScript.parse("x:y")
    with pytest.raises(S.BadScript):
        S.run(PAR, S.initial_configuration(PAR, 2), script=RequestScript.parse("0:9"))


def test_run_rejects_non_inputs():
    with pytest.raises(S.SemanticsError):
        S.run(T3, ac("q2", "q2"))
    tr = S.run(T3, ac("q2", "q2"), allow_any_start=True)
    assert tr.final.project() == Configuration.of(["q3", "q3"])


def test_replay_detects_tampering():
    tr = S.run(T3, S.initial_configuration(T3, 4), seed=1)
    step, _ = tr.steps[0]
    tr.steps[0] = (step, ac("q3", "q3", "q3", "q3"))
    with pytest.raises(S.SemanticsError):
        tr.replay(T3)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("key", ["threshold3", "parity", "identity3"])
def test_jit_and_numpy_paths_agree(key):
    p = L.builtin(key).value
    init = S.initial_configuration(p, 6) if len(p.proper_inputs) == 1 else \
        S.initial_configuration(p, 6, {"ODD": 2, "odd": 2, "even": 2})
    script = RequestScript.parse("3:any,10:2") if p.is_shutdown else None
    results = []
    for flag in (True, False):
        (enable_jit if flag else disable_jit)()
        try:
            tr = S.run(p, init, seed=11, script=script, max_steps=500)
        finally:
            enable_jit()
        results.append([(s, c.assignment) for s, c in tr.steps])
    assert results[0] == results[1]
