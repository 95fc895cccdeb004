from collections import Counter

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from popmod import protolib as L
from popmod.model import AgentConfiguration
from popmod.specs import (
    AlphabetMismatch,
    BudgetExceeded,
    ComposedSpec,
    PairMultiset,
    Spec,
    SpecError,
    SpecSyntaxError,
    UnknownPairAtom,
    consensus_spec,
    eval_composed,
    formula_text,
    identity_spec,
    pairs_multiset,
    parse_formula,
)
from oracles import all_pair_multisets, brute_holds

PARITY = L.spec_parity()
IDENT = L.spec_identity3()


def pm(**kw):
    return PairMultiset({tuple(k.split("_")): v for k, v in kw.items()})


def test_pairs_multiset_examples():
    init = AgentConfiguration.from_states(["ODD"] * 3)
    fin = AgentConfiguration.from_states(["ODD", "odd", "odd"])
    ident = {q: q for q in ("ODD", "odd", "even")}
    assert pairs_multiset(init, fin, ident).counts == {("ODD", "ODD"): 1, ("ODD", "odd"): 2}
    same = pairs_multiset(init, init, ident)
    assert same.counts == {("ODD", "ODD"): 3}
    survivors = AgentConfiguration({2: "even", 3: "even"})
    assert pairs_multiset(init, survivors, ident).counts == {("ODD", "even"): 2}


def test_parity_spec_values():
    assert PARITY.holds(pm(ODD_ODD=1, ODD_odd=2))
    assert PARITY.holds(pm(ODD_even=2))
    assert not PARITY.holds(pm(ODD_ODD=2))
    assert PARITY.holds(PairMultiset({}))


def test_syntax_variants_agree():
    a = parse_formula("N >= 3 and not (n(q1,true) = N) or n(*,false) != 0")
    b = parse_formula("N ≥ 3 ∧ ¬(n(q1,true) = N) ∨ n(*,false) ≠ 0")
    c = parse_formula("N >= 3 & !(n(q1,true) = N) | n(*,false) != 0")
    assert a == b == c


@pytest.mark.parametrize("text", ["n(a,b", "N >=", "3 mod", "n(a,b) = = 1", "foo", ""])
def test_syntax_errors(text):
    with pytest.raises(SpecSyntaxError):
        parse_formula(text)


def test_unknown_atoms_and_reserved():
    with pytest.raises(UnknownPairAtom):
        Spec("s", ("a",), ("x",), "n(b,x) = 0")
    with pytest.raises(SpecError):
        Spec("s", ("a",), ("_BOT_",), "true")
    with pytest.raises(UnknownPairAtom):
        PARITY.holds(pm(ODD_weird=1))


def test_arithmetic():
    f = Spec("s", ("a", "b"), ("x",), "2*n(a,x) - n(b,x) + 1 = N mod 3")
    assert not f.holds(pm(a_x=2, b_x=1))
    assert f.holds(pm(a_x=1, b_x=1))
    assert not f.holds(pm(a_x=0, b_x=2))


def test_predicate_helpers():
    t3 = L.spec_threshold3()
    assert t3.is_predicate and not PARITY.is_predicate
    assert t3.holds_on_inputs({"q1": 3}) and not t3.holds_on_inputs({"q1": 2})
    cons = consensus_spec(t3)
    assert cons.holds(pm(q1_true=4)) and not cons.holds(pm(q1_true=2))
    assert cons.holds(pm(q1_false=2))
    with pytest.raises(SpecError):
        PARITY.holds_on_inputs({"ODD": 1})


def test_composed_examples():
    cs = ComposedSpec(PARITY, IDENT)
    assert eval_composed(cs, pm(ODD_ODD=1, ODD_odd=2))
    never = Spec("never", ("ODD", "odd", "even"), ("ODD", "odd", "even"), "false")
    assert not eval_composed(ComposedSpec(PARITY, never), pm(ODD_ODD=1, ODD_odd=2))
    ii = ComposedSpec(IDENT, IDENT)
    assert eval_composed(ii, pm(odd_odd=2, even_even=1))
    assert not eval_composed(ii, pm(odd_even=1))


def test_composed_alphabet_and_budget():
    with pytest.raises(AlphabetMismatch):
        ComposedSpec(L.spec_threshold3(), IDENT)
    cs = ComposedSpec(PARITY, IDENT, cap=10)
    with pytest.raises(BudgetExceeded):
        eval_composed(cs, pm(ODD_ODD=3, ODD_odd=3))


# composed specs over 3-letter alphabets checked exhaustively up to total 4
A, B, C = ("a", "b", "c"), ("u", "v", "w"), ("x", "y", "z")
FIRSTS = [
    Spec("f1", A, B, "n(a,u) = n(*,v) and n(c,*) <= 1"),
    Spec("f2", A, B, "n(*,w) = 0 or N mod 2 = 1"),
    Spec("f3", A, B, "n(a,v) + n(b,v) >= n(c,u)"),
]
SECONDS = [
    Spec("g1", B, C, "n(u,x) + n(v,y) + n(w,z) = N"),
    Spec("g2", B, C, "n(*,x) >= 2*n(v,*) and not n(w,y) = 1"),
    Spec("g3", B, C, "n(u,*) = n(*,z) mod 2"),
]


@pytest.mark.parametrize("first", FIRSTS, ids=lambda s: s.name)
@pytest.mark.parametrize("second", SECONDS, ids=lambda s: s.name)
def test_composed_matches_brute_force(first, second):
    cs = ComposedSpec(first, second)
    for m in all_pair_multisets(A, C, 4):
        assert eval_composed(cs, PairMultiset(dict(m))) == brute_holds(cs, m), m


def test_nested_composition():
    inner = ComposedSpec(PARITY, IDENT)
    outer = ComposedSpec(inner, IDENT)
    for m in all_pair_multisets(("ODD",), ("ODD", "odd", "even"), 4):
        assert eval_composed(outer, PairMultiset(dict(m))) == brute_holds(outer, m)


# ---------------------------------------------------------------------------
# formula round trip

names = st.sampled_from(["a", "b", "*"])
terms = st.recursive(
    st.one_of(
        st.integers(0, 9).map(str),
        st.just("N"),
        st.tuples(names, st.sampled_from(["x", "y", "*"])).map(lambda p: f"n({p[0]},{p[1]})"),
    ),
    lambda t: st.one_of(
        st.tuples(t, st.sampled_from(["+", "-"]), t).map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
        st.tuples(st.integers(1, 5), t).map(lambda p: f"{p[0]}*{p[1]}"),
        st.tuples(t, st.integers(1, 5)).map(lambda p: f"({p[0]}) mod {p[1]}"),
    ),
    max_leaves=4,
)
formulas = st.recursive(
    st.tuples(terms, st.sampled_from(["=", "!=", "<", "<=", ">", ">="]), terms)
    .map(lambda p: f"{p[0]} {p[1]} {p[2]}"),
    lambda f: st.one_of(
        f.map(lambda s: f"not ({s})"),
        st.tuples(f, st.sampled_from(["and", "or"]), f).map(lambda p: f"({p[0]}) {p[1]} ({p[2]})"),
    ),
    max_leaves=4,
)


@settings(max_examples=300, deadline=None)
@given(formulas, st.dictionaries(st.tuples(st.sampled_from("ab"), st.sampled_from("xy")),
                                 st.integers(0, 4)))
def test_formula_text_roundtrip(text, counts):
    try:
        f = parse_formula(text)
    except SpecError:
        assume(False)
    g = parse_formula(formula_text(f))
    assert g == f
    m = PairMultiset({k: v for k, v in counts.items() if v})
    s = Spec("r", ("a", "b"), ("x", "y"), f)
    assert s.holds(m) == Spec("r", ("a", "b"), ("x", "y"), g).holds(m)


def test_identity_spec_shape():
    s = identity_spec(("p", "q"))
    assert s.holds(pm(p_p=2, q_q=1)) and not s.holds(pm(p_q=1))
    assert Counter(a.output for a in []) == Counter()
