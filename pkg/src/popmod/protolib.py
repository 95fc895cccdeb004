"""Built-in protocols and specifications."""

from __future__ import annotations

from dataclasses import dataclass

from .model import BOT_OUT, Mode, Protocol, validate_protocol
from .specs import Spec, consensus_spec, identity_spec, parse_formula


class UnknownKey(KeyError):
    pass


@dataclass(frozen=True)
class NamedArtifact:
    key: str
    value: Protocol | Spec
    provenance: str


BOT = "_BOT_"


def threshold3() -> Protocol:
    rules = [
        ("q1", "q1", "q0", "q2"),
        ("q2", "q1", "q0", "q3"),
        ("q2", "q2", "q1", "q3"),
        ("q0", "q3", "q3", "q3"),
        ("q1", "q3", "q3", "q3"),
        ("q2", "q3", "q3", "q3"),
    ]
    states = ("q0", "q1", "q2", "q3")
    return validate_protocol(
        "threshold3",
        states,
        rules,
        inputs={"q1"},
        output={q: "true" if q == "q3" else "false" for q in states},
    )


_PARITY_RULES = [
    ("ODD", "ODD", "even", "even"),
    ("ODD", "even", "ODD", "odd"),
    ("odd", "even", "even", "even"),
    ("ODD'", "ODD", BOT, "even"),
    ("ODD'", "odd", BOT, "ODD"),
    ("ODD'", "even", BOT, "ODD"),
    ("ODD'", "ODD'", BOT, "even'"),
    ("ODD'", "even'", BOT, "ODD'"),
    ("even'", "ODD", BOT, "ODD"),
    ("even'", "odd", BOT, "even"),
    ("even'", "even", BOT, "even"),
    ("even'", "ODD'", BOT, "ODD'"),
    ("even'", "even'", BOT, "even'"),
]
_PARITY_STATES = ("ODD", "odd", "ODD'", "even", "even'", BOT)
_PARITY_REQUEST = {"ODD": "even'", "even'": "even'", "odd": "ODD'", "even": "ODD'",
                   "ODD'": "ODD'", BOT: BOT}


# As printed, this rule drops the parity token held by ODD'; agents in
# ODD or ODD' must stay congruent mod 2 to the unrequested agents.
_LOSSY_HANDOVER = ("ODD'", "odd", BOT, "even")


def parity(primed_outputs: bool = False, lossy_handover: bool = False,
           name: str = "parity") -> Protocol:
    """Parity with shutdown requests.

    Primed states are agents that received a request and still hold
    parity bookkeeping.  By default they report the output of their
    unprimed counterpart, so the visible outputs are ``ODD``, ``odd`` and
    ``even``; ``primed_outputs=True`` makes every state output its own
    name instead.  ``lossy_handover=True`` replaces the
    ``(ODD', odd) -> (_BOT_, ODD)`` rule by ``(ODD', odd) -> (_BOT_, even)``,
    which loses the token and breaks the protocol once a request arrives.
    """
    output = {q: q for q in _PARITY_STATES}
    output[BOT] = BOT_OUT
    if not primed_outputs:
        output["ODD'"] = "ODD"
        output["even'"] = "even"
    rules = list(_PARITY_RULES)
    if lossy_handover:
        rules[4] = _LOSSY_HANDOVER
    return validate_protocol(
        name,
        _PARITY_STATES,
        rules,
        inputs={"ODD", BOT},
        output=output,
        mode=Mode.SHUTDOWN,
        shutdown_map=_PARITY_REQUEST,
        bot=BOT,
    )


def identity3() -> Protocol:
    """No interactions; every agent outputs its input and shuts down at once."""
    states = ("ODD", "odd", "even", BOT)
    output = {q: q for q in states}
    output[BOT] = BOT_OUT
    return validate_protocol(
        "identity3",
        states,
        [],
        inputs=set(states),
        output=output,
        mode=Mode.SHUTDOWN,
        shutdown_map={q: BOT for q in states},
        bot=BOT,
    )


def spec_threshold3() -> Spec:
    return Spec("threshold3", ("q1",), ("true", "false"), parse_formula("n(q1,*) >= 3"))


def spec_parity() -> Spec:
    return Spec(
        "parity",
        ("ODD",),
        ("ODD", "odd", "even"),
        parse_formula(
            "(N mod 2 = 1 and n(ODD,ODD) = 1 and n(ODD,odd) = N - 1)"
            " or (N mod 2 = 0 and n(ODD,even) = N)"
        ),
    )


def spec_identity3() -> Spec:
    return identity_spec(("ODD", "odd", "even"), name="identity3")


_REGISTRY = {
    "threshold3": (threshold3, "threshold-3 protocol with output true exactly in q3"),
    "parity": (parity, "parity protocol with shutdown requests, primed states folded"),
    "parity_identity_out": (
        lambda: parity(primed_outputs=True, name="parity_identity_out"),
        "parity protocol with shutdown requests, identity output map",
    ),
    "parity_literal": (
        lambda: parity(primed_outputs=True, lossy_handover=True, name="parity_literal"),
        "parity rules and identity output exactly as first published (lossy handover)",
    ),
    "identity3": (identity3, "silent identity protocol over ODD, odd, even"),
    "spec:threshold3": (spec_threshold3, "predicate: at least 3 agents start in q1"),
    "spec:threshold3-consensus": (
        lambda: consensus_spec(spec_threshold3(), name="threshold3-consensus"),
        "consensus specification of the threshold-3 predicate",
    ),
    "spec:parity": (spec_parity, "one ODD and the rest odd for odd N, all even otherwise"),
    "spec:identity3": (spec_identity3, "every agent outputs its input"),
}


def keys() -> list[str]:
    return list(_REGISTRY)


def builtin(key: str) -> NamedArtifact:
    try:
        make, provenance = _REGISTRY[key]
    except KeyError:
        raise UnknownKey(f"unknown builtin {key!r}; known: {', '.join(_REGISTRY)}") from None
    return NamedArtifact(key, make(), provenance)


def protocol_keys() -> list[str]:
    return [k for k in _REGISTRY if not k.startswith("spec:")]
