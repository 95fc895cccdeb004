"""Specifications: predicates on multisets of (input state, output value) pairs.

Formulas are boolean combinations of linear and modular constraints over
pair counts.  Concrete syntax::

    (N mod 2 = 1 and n(ODD,ODD) = 1 and n(ODD,odd) = N - 1)
      or (N mod 2 = 0 and n(ODD,even) = N)

``n(i,o)`` counts pairs, ``*`` in either slot sums over that slot and
``N`` is the total.  ``and``/``or``/``not`` may also be written
``&``/``|``/``!`` or with the usual logic symbols.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Union

from .model import BOT_OUT, AgentConfiguration

WILD = "*"


class SpecError(ValueError):
    pass


class SpecSyntaxError(SpecError):
    pass


class UnknownPairAtom(SpecError):
    pass


class AlphabetMismatch(SpecError):
    pass


class DomainMismatch(SpecError):
    pass


class BudgetExceeded(SpecError):
    pass


# ---------------------------------------------------------------------------
# pair multisets


@dataclass(frozen=True)
class PairMultiset:
    counts: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {tuple(k): int(v) for k, v in self.counts.items() if v}
        if any(v < 0 for v in clean.values()):
            raise ValueError("negative pair count")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, str]]) -> "PairMultiset":
        return cls(Counter(pairs))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, i: str, o: str) -> int:
        if i == WILD and o == WILD:
            return self.total
        if i == WILD:
            return sum(v for (_, b), v in self.counts.items() if b == o)
        if o == WILD:
            return sum(v for (a, _), v in self.counts.items() if a == i)
        return self.counts.get((i, o), 0)

    def __hash__(self):
        return hash(tuple(self.counts.items()))

    def __str__(self):
        return "{" + ", ".join(f"({a},{b}):{k}" for (a, b), k in self.counts.items()) + "}"


def pairs_multiset(initial: AgentConfiguration, final: AgentConfiguration,
                   output: Mapping[str, str]) -> PairMultiset:
    """Pair each surviving agent's initial state with its final output."""
    extra = [a for a in final if a not in initial]
    if extra:
        raise DomainMismatch(f"agents {extra} are not in the initial configuration")
    return PairMultiset.of((initial[a], output[final[a]]) for a in final)


# ---------------------------------------------------------------------------
# syntax tree


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Total:
    pass


@dataclass(frozen=True)
class Count:
    input: str
    output: str


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Sub:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Scale:
    factor: int
    term: "Term"


@dataclass(frozen=True)
class Mod:
    term: "Term"
    modulus: int


@dataclass(frozen=True)
class Cmp:
    op: str
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Const:
    value: bool


Term = Union[Num, Total, Count, Add, Sub, Scale, Mod]
Formula = Union[Cmp, Not, And, Or, Const]

_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def eval_term(t: Term, count: Callable[[str, str], int]) -> int:
    match t:
        case Num(v):
            return v
        case Total():
            return count(WILD, WILD)
        case Count(i, o):
            return count(i, o)
        case Add(a, b):
            return eval_term(a, count) + eval_term(b, count)
        case Sub(a, b):
            return eval_term(a, count) - eval_term(b, count)
        case Scale(k, a):
            return k * eval_term(a, count)
        case Mod(a, k):
            return eval_term(a, count) % k
    raise TypeError(f"not a term: {t!r}")


def eval_formula(f: Formula, count: Callable[[str, str], int]) -> bool:
    match f:
        case Const(v):
            return v
        case Cmp(op, a, b):
            return _CMP[op](eval_term(a, count), eval_term(b, count))
        case Not(a):
            return not eval_formula(a, count)
        case And(args):
            return all(eval_formula(a, count) for a in args)
        case Or(args):
            return any(eval_formula(a, count) for a in args)
    raise TypeError(f"not a formula: {f!r}")


def atoms(node) -> Iterable[Count]:
    match node:
        case Count():
            yield node
        case Add(a, b) | Sub(a, b) | Cmp(_, a, b):
            yield from atoms(a)
            yield from atoms(b)
        case Scale(_, a) | Mod(a, _) | Not(a):
            yield from atoms(a)
        case And(args) | Or(args):
            for a in args:
                yield from atoms(a)


def _term_text(t: Term, prec: int = 0) -> str:
    match t:
        case Num(v):
            return str(v) if v >= 0 else f"({v})"
        case Total():
            return "N"
        case Count(i, o):
            return f"n({i},{o})"
        case Add(a, b):
            s = f"{_term_text(a, 1)} + {_term_text(b, 2)}"
            return f"({s})" if prec > 1 else s
        case Sub(a, b):
            s = f"{_term_text(a, 1)} - {_term_text(b, 2)}"
            return f"({s})" if prec > 1 else s
        case Scale(k, a):
            return f"{k}*{_term_text(a, 3)}" if k >= 0 else f"({k})*{_term_text(a, 3)}"
        case Mod(a, k):
            s = f"{_term_text(a, 2)} mod {k}"
            return f"({s})" if prec > 2 else s
    raise TypeError(t)


def formula_text(f: Formula, top: bool = True) -> str:
    """Canonical concrete syntax; parses back to an equal tree."""
    match f:
        case Const(v):
            return "true" if v else "false"
        case Cmp(op, a, b):
            return f"{_term_text(a)} {op} {_term_text(b)}"
        case Not(a):
            return f"not {formula_text(a, False)}"
        case And(args):
            s = " and ".join(formula_text(a, False) for a in args)
            return s if top else f"({s})"
        case Or(args):
            s = " or ".join(formula_text(a, False) for a in args)
            return s if top else f"({s})"
    raise TypeError(f)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<atom>n\(\s*(?P<ai>[^\s,()]+)\s*,\s*(?P<ao>[^\s,()]+)\s*\))
      | (?P<num>\d+)
      | (?P<word>[A-Za-z_]+)
      | (?P<op><=|>=|!=|≤|≥|≠|=|<|>|\+|-|−|\*|\(|\)|&&|\|\||&|\||!|∧|∨|¬)
    )""",
    re.VERBOSE,
)
_OP_ALIASES = {"≤": "<=", "≥": ">=", "≠": "!=", "−": "-", "&&": "and", "&": "and",
               "∧": "and", "||": "or", "|": "or", "∨": "or", "!": "not", "¬": "not"}


def _tokenize(text: str) -> list[tuple[str, object]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SpecSyntaxError(f"unexpected input at column {pos + 1}: {text[pos:pos + 12]!r}")
        pos = m.end()
        if m.group("atom"):
            out.append(("atom", (m.group("ai"), m.group("ao"))))
        elif m.group("num"):
            out.append(("num", int(m.group("num"))))
        elif m.group("word"):
            w = m.group("word")
            if w in ("and", "or", "not", "mod", "true", "false", "N"):
                out.append(("op", w))
            else:
                raise SpecSyntaxError(f"unknown word {w!r}")
        else:
            op = m.group("op")
            out.append(("op", _OP_ALIASES.get(op, op)))
    out.append(("end", None))
    return out


def _scale(k: int, t: Term) -> Term:
    """``k * t`` with literal factors folded together."""
    if isinstance(t, Num):
        return Num(k * t.value)
    if isinstance(t, Scale):
        return Scale(k * t.factor, t.term)
    return Scale(k, t)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        # outcome of reading "( formula )" at a position: (node, end) or None
        self._paren: dict[int, tuple[Formula, int] | None] = {}

    def peek(self):
        return self.toks[self.pos]

    def take(self, value=None):
        tok = self.toks[self.pos]
        if value is not None and tok[1] != value:
            raise SpecSyntaxError(f"expected {value!r}, found {tok[1]!r}")
        self.pos += 1
        return tok

    def at(self, *values) -> bool:
        kind, v = self.peek()
        return kind == "op" and v in values

    def formula(self) -> Formula:
        args = [self.conj()]
        while self.at("or"):
            self.take()
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self) -> Formula:
        args = [self.neg()]
        while self.at("and"):
            self.take()
            args.append(self.neg())
        return args[0] if len(args) == 1 else And(tuple(args))

    def neg(self) -> Formula:
        if self.at("not"):
            self.take()
            return Not(self.neg())
        if self.at("true", "false"):
            return Const(self.take()[1] == "true")
        if self.at("("):
            save = self.pos
            if save not in self._paren:
                try:
                    self.take("(")
                    f = self.formula()
                    self.take(")")
                    self._paren[save] = (f, self.pos)
                except SpecSyntaxError:
                    self._paren[save] = None
            hit = self._paren[save]
            if hit is not None:
                self.pos = hit[1]
                if not self.at(*_CMP, "+", "-", "*", "mod"):
                    return hit[0]
            self.pos = save
        return self.comparison()

    def comparison(self) -> Formula:
        left = self.term()
        kind, op = self.peek()
        if kind != "op" or op not in _CMP:
            raise SpecSyntaxError(f"expected a comparison, found {op!r}")
        self.take()
        right = self.term()
        for a, b in ((left, right), (right, left)):
            if op == "=" and isinstance(a, Mod) and isinstance(b, Num):
                if not 0 <= b.value < a.modulus:
                    raise SpecError(f"residue {b.value} out of range for modulus {a.modulus}")
        return Cmp(op, left, right)

    def term(self) -> Term:
        t = self.product()
        while self.at("+", "-"):
            op = self.take()[1]
            r = self.product()
            t = Add(t, r) if op == "+" else Sub(t, r)
        return t

    def product(self) -> Term:
        t = self.unary()
        while self.at("*", "mod"):
            op = self.take()[1]
            if op == "mod":
                kind, k = self.take()
                if kind != "num" or k < 1:
                    raise SpecSyntaxError("modulus must be an integer literal >= 1")
                t = Mod(t, k)
            else:
                r = self.unary()
                if isinstance(t, Num):
                    t = _scale(t.value, r)
                elif isinstance(r, Num):
                    t = _scale(r.value, t)
                else:
                    raise SpecSyntaxError("multiplication needs an integer literal factor")
        return t

    def unary(self) -> Term:
        kind, v = self.peek()
        if kind == "num":
            self.take()
            return Num(v)
        if kind == "atom":
            self.take()
            return Count(*v)
        if self.at("N"):
            self.take()
            return Total()
        if self.at("-"):
            self.take()
            inner = self.unary()
            return _scale(-1, inner)
        if self.at("("):
            self.take()
            t = self.term()
            self.take(")")
            return t
        raise SpecSyntaxError(f"unexpected {v!r}")


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.peek()[0] != "end":
        raise SpecSyntaxError(f"trailing input at {p.peek()[1]!r}")
    return f


# ---------------------------------------------------------------------------
# specifications


@dataclass(frozen=True)
class Spec:
    """A named formula over declared input and output alphabets."""

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    formula: Formula

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if isinstance(self.formula, str):
            object.__setattr__(self, "formula", parse_formula(self.formula))
        for alphabet in (self.inputs, self.outputs):
            if BOT_OUT in alphabet:
                raise SpecError(f"{BOT_OUT} is reserved and cannot appear in a specification")
        for a in atoms(self.formula):
            if a.input == BOT_OUT or a.output == BOT_OUT:
                raise SpecError(f"{BOT_OUT} is reserved and cannot appear in a specification")
            if a.input != WILD and a.input not in self.inputs:
                raise UnknownPairAtom(f"n({a.input},{a.output}): unknown input {a.input}")
            if a.output != WILD and a.output not in self.outputs:
                raise UnknownPairAtom(f"n({a.input},{a.output}): unknown output {a.output}")

    @property
    def text(self) -> str:
        return formula_text(self.formula)

    @property
    def is_predicate(self) -> bool:
        """True when the formula only counts inputs."""
        return all(a.output == WILD for a in atoms(self.formula))

    def check_pairs(self, m: PairMultiset) -> None:
        for i, o in m.counts:
            if i not in self.inputs or o not in self.outputs:
                raise UnknownPairAtom(f"pair ({i},{o}) is outside the alphabets of {self.name}")

    def holds(self, m: PairMultiset) -> bool:
        self.check_pairs(m)
        return eval_formula(self.formula, m.count)

    def holds_on_inputs(self, counts: Mapping[str, int]) -> bool:
        """Evaluate an input-only formula on an input configuration."""
        if not self.is_predicate:
            raise SpecError(f"{self.name} constrains outputs; it is not a predicate on inputs")
        for q in counts:
            if counts[q] and q not in self.inputs:
                raise UnknownPairAtom(f"input {q} is not declared by {self.name}")

        def count(i, _o):
            return sum(counts.values()) if i == WILD else counts.get(i, 0)

        return eval_formula(self.formula, count)


def eval_spec(s: Spec, m: PairMultiset) -> bool:
    return s.holds(m)


def identity_spec(alphabet: Iterable[str], name: str = "identity") -> Spec:
    """Every agent outputs its own input."""
    alphabet = tuple(alphabet)
    parts = tuple(Cmp("=", Count(a, b), Num(0)) for a in alphabet for b in alphabet if a != b)
    formula = And(parts) if len(parts) > 1 else (parts[0] if parts else Const(True))
    return Spec(name, alphabet, alphabet, formula)


def consensus_spec(pred: Spec, true: str = "true", false: str = "false",
                   name: str | None = None) -> Spec:
    """All agents output ``true`` iff ``pred`` holds of the inputs."""
    if not pred.is_predicate:
        raise SpecError(f"{pred.name} is not a predicate on inputs")
    formula = Or((
        And((pred.formula, Cmp("=", Count(WILD, true), Total()))),
        And((Not(pred.formula), Cmp("=", Count(WILD, false), Total()))),
    ))
    return Spec(name or f"{pred.name}-consensus", pred.inputs, (true, false), formula)


def extend_for_padding(s: Spec, values: Iterable[str], as_inputs: bool = True) -> Spec:
    """Accept anything that mentions one of the padded ``values``."""
    values = [v for v in values if v not in (s.inputs if as_inputs else s.outputs)]
    if not values:
        return s
    if as_inputs:
        extra = tuple(Cmp(">=", Count(v, WILD), Num(1)) for v in values)
        extra += tuple(Cmp(">=", Count(WILD, v), Num(1)) for v in values if v not in s.outputs)
        return Spec(s.name, s.inputs + tuple(values),
                    s.outputs + tuple(v for v in values if v not in s.outputs),
                    Or((s.formula,) + extra))
    return Spec(s.name, s.inputs, s.outputs + tuple(values), s.formula)


@dataclass(frozen=True)
class ComposedSpec:
    """Relational composition: first relates A to B, second relates B to C."""

    first: Spec | "ComposedSpec"
    second: Spec | "ComposedSpec"
    cap: int = 10**7

    def __post_init__(self):
        if tuple(self.first.outputs) != tuple(self.second.inputs):
            if set(self.first.outputs) != set(self.second.inputs):
                raise AlphabetMismatch(
                    f"outputs {list(self.first.outputs)} of {self.first.name} differ from "
                    f"inputs {list(self.second.inputs)} of {self.second.name}"
                )

    @property
    def name(self) -> str:
        return f"{self.second.name}∘{self.first.name}"

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(self.first.inputs)

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(self.second.outputs)

    def check_pairs(self, m: PairMultiset) -> None:
        for i, o in m.counts:
            if i not in self.inputs or o not in self.outputs:
                raise UnknownPairAtom(f"pair ({i},{o}) is outside the alphabets of {self.name}")

    def holds(self, m: PairMultiset) -> bool:
        return eval_composed(self, m)


def _splits(k: int, parts: int):
    """All ways to write ``k`` as an ordered sum of ``parts`` non-negative ints."""
    for bars in itertools.combinations(range(k + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + parts - 1 - prev - 1)
        yield out


def eval_composed(cs: ComposedSpec, m: PairMultiset) -> bool:
    """Search for middle values witnessing the composed relation.

    Each (a, c) pair of ``m`` is split among the middle alphabet in every
    possible way; a split is a witness when its (a, b) half satisfies the
    first relation and its (b, c) half the second.
    """
    cs.check_pairs(m)
    middle = tuple(cs.first.outputs)
    items = list(m.counts.items())
    if not middle:
        return False
    size = 1
    for _, k in items:
        size *= math.comb(k + len(middle) - 1, len(middle) - 1)
    if size > cs.cap:
        raise BudgetExceeded(f"{size} candidate middle assignments exceed the cap {cs.cap}")
    for choice in itertools.product(*(list(_splits(k, len(middle))) for _, k in items)):
        ab: Counter = Counter()
        bc: Counter = Counter()
        for ((a, c), _), split in zip(items, choice):
            for b, j in zip(middle, split):
                if j:
                    ab[(a, b)] += j
                    bc[(b, c)] += j
        if cs.first.holds(PairMultiset(ab)) and cs.second.holds(PairMultiset(bc)):
            return True
    return False
