"""scLTL formulas over a single-letter-per-position alphabet.

Formulas are immutable trees in negation normal form (negation only on
atoms).  A word is a sequence of proposition indices; at each position
exactly one proposition holds.

The automaton built by :func:`compile_formula` reads one letter at a time
and progresses the formula.  Progressed formulas are kept as minimal
disjunctive normal forms over their temporal sub-formulas, which makes the
progression closure finite.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence


class FormulaError(ValueError):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class UnknownProposition(FormulaSyntaxError):
    pass


class NegationOnCompound(FormulaSyntaxError):
    pass


class EmptyWord(FormulaError):
    pass


class StateExplosion(FormulaError):
    pass


@dataclass(frozen=True)
class Proposition:
    name: str
    index: int


# --------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    prop: int


@dataclass(frozen=True)
class NegAtom(Formula):
    prop: int


@dataclass(frozen=True)
class Or(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class And(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


TRUE = TrueF()
FALSE = FalseF()

_RANK = {TrueF: 0, FalseF: 1, Atom: 2, NegAtom: 3, Eventually: 4, Until: 5, And: 6, Or: 7}


@lru_cache(maxsize=None)
def sort_key(f: Formula) -> tuple:
    """Stable structural encoding used to order And/Or children."""
    r = _RANK[type(f)]
    if isinstance(f, (Atom, NegAtom)):
        return (r, f.prop)
    if isinstance(f, Eventually):
        return (r, sort_key(f.child))
    if isinstance(f, Until):
        return (r, sort_key(f.left), sort_key(f.right))
    if isinstance(f, (And, Or)):
        return (r, tuple(sort_key(c) for c in f.children))
    return (r,)


def _junction(cls, parts: Iterable[Formula]) -> Formula:
    unit, zero = (TRUE, FALSE) if cls is And else (FALSE, TRUE)
    flat: set[Formula] = set()
    for p in parts:
        if p == zero:
            return zero
        if p == unit:
            continue
        if isinstance(p, cls):
            flat.update(p.children)
        else:
            flat.add(p)
    if not flat:
        return unit
    if len(flat) == 1:
        return next(iter(flat))
    return cls(tuple(sorted(flat, key=sort_key)))


def conj(*parts: Formula) -> Formula:
    return _junction(And, parts)


def disj(*parts: Formula) -> Formula:
    return _junction(Or, parts)


def canonical(f: Formula) -> Formula:
    """Flatten, deduplicate and sort every And/Or; absorb constants."""
    if isinstance(f, And):
        return conj(*(canonical(c) for c in f.children))
    if isinstance(f, Or):
        return disj(*(canonical(c) for c in f.children))
    if isinstance(f, Until):
        return Until(canonical(f.left), canonical(f.right))
    if isinstance(f, Eventually):
        return Eventually(canonical(f.child))
    return f


def depth(f: Formula) -> int:
    if isinstance(f, (And, Or)):
        return 1 + max(depth(c) for c in f.children)
    if isinstance(f, Until):
        return 1 + max(depth(f.left), depth(f.right))
    if isinstance(f, Eventually):
        return 1 + depth(f.child)
    return 0


def propositions(f: Formula) -> set[int]:
    if isinstance(f, (Atom, NegAtom)):
        return {f.prop}
    if isinstance(f, (And, Or)):
        return set().union(*(propositions(c) for c in f.children))
    if isinstance(f, Until):
        return propositions(f.left) | propositions(f.right)
    if isinstance(f, Eventually):
        return propositions(f.child)
    return set()


def to_text(f: Formula, names: Sequence[str] | None = None) -> str:
    def name(i):
        return names[i] if names is not None else f"p{i}"

    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        return name(f.prop)
    if isinstance(f, NegAtom):
        return "!" + name(f.prop)
    if isinstance(f, Eventually):
        return f"F ({to_text(f.child, names)})"
    if isinstance(f, Until):
        return f"({to_text(f.left, names)}) U ({to_text(f.right, names)})"
    op = " & " if isinstance(f, And) else " | "
    return "(" + op.join(to_text(c, names) for c in f.children) + ")"


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[!|&()]))")
_PN = re.compile(r"p(\d+)$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}",
                                     len(text) - len(text[pos:].lstrip()))
        start = m.start("id") if m.group("id") else m.start("op")
        if m.group("id"):
            word = m.group("id")
            kind = "op" if word in ("U", "F") else "id"
            tokens.append((kind, word, start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, props: Mapping[str, int] | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.props = props

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "id":
            raise FormulaSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Formula:
        f = self.or_expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise FormulaSyntaxError(f"unexpected token {val!r}", pos)
        return f

    def or_expr(self):
        parts = [self.and_expr()]
        while self.peek()[1] == "|" and self.peek()[0] == "op":
            self.take()
            parts.append(self.and_expr())
        return disj(*parts)

    def and_expr(self):
        parts = [self.until_expr()]
        while self.peek()[1] == "&" and self.peek()[0] == "op":
            self.take()
            parts.append(self.until_expr())
        return conj(*parts)

    def until_expr(self):
        left = self.unary()
        if self.peek()[:2] == ("op", "U"):
            self.take()
            return Until(left, self.until_expr())
        return left

    def unary(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "F":
            self.take()
            return Eventually(self.unary())
        if kind == "op" and val == "!":
            self.take()
            kind2, val2, pos2 = self.peek()
            if kind2 != "id" or val2 in ("true", "false"):
                raise NegationOnCompound("negation may only be applied to an atomic proposition", pos)
            self.take()
            return NegAtom(self.resolve(val2, pos2))
        if kind == "op" and val == "(":
            self.take()
            f = self.or_expr()
            self.expect(")")
            return f
        if kind == "id":
            self.take()
            if val == "true":
                return TRUE
            if val == "false":
                return FALSE
            return Atom(self.resolve(val, pos))
        raise FormulaSyntaxError(f"unexpected {val or 'end of input'!r}", pos)

    def resolve(self, name: str, pos: int) -> int:
        if self.props is not None and name in self.props:
            return self.props[name]
        m = _PN.match(name)
        if m:
            idx = int(m.group(1))
            if self.props is None or idx in set(self.props.values()):
                return idx
        raise UnknownProposition(f"unknown proposition {name!r}", pos)


def parse(text: str, props: Mapping[str, int] | Sequence[Proposition] | None = None) -> Formula:
    """Parse a formula.

    Grammar: atoms are ``pN`` or names declared in ``props``; operators are
    ``!`` (atoms only), ``F``, ``U`` (right associative), ``&`` and ``|`` in
    decreasing order of precedence; parentheses group.
    """
    if props is not None and not isinstance(props, Mapping):
        props = {p.name: p.index for p in props}
    return _Parser(text, props).parse()


# --------------------------------------------------------------------------
# Finite-trace semantics


def eval_finite(word: Sequence[int], phi: Formula) -> bool:
    """Does the finite word satisfy ``phi`` at position 0?"""
    n = len(word)
    if n == 0:
        raise EmptyWord("cannot evaluate a formula on an empty word")

    @lru_cache(maxsize=None)
    def holds(f: Formula, i: int) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Atom):
            return word[i] == f.prop
        if isinstance(f, NegAtom):
            return word[i] != f.prop
        if isinstance(f, Or):
            return any(holds(c, i) for c in f.children)
        if isinstance(f, And):
            return all(holds(c, i) for c in f.children)
        if isinstance(f, Eventually):
            return any(holds(f.child, j) for j in range(i, n))
        if isinstance(f, Until):
            for j in range(i, n):
                if holds(f.right, j):
                    return True
                if not holds(f.left, j):
                    return False
            return False
        raise TypeError(f"not a formula: {f!r}")

    return holds(phi, 0)


def satisfied_by_prefix(word: Sequence[int], phi: Formula) -> bool:
    return any(eval_finite(word[:k], phi) for k in range(1, len(word) + 1))


# --------------------------------------------------------------------------
# Progression

Clause = frozenset  # conjunction of literals
Dnf = frozenset  # disjunction of clauses

_DNF_TRUE: Dnf = frozenset([frozenset()])
_DNF_FALSE: Dnf = frozenset()


def _absorb(clauses: Iterable[Clause]) -> Dnf:
    cs = sorted(set(clauses), key=len)
    kept: list[Clause] = []
    for c in cs:
        if not any(k <= c for k in kept):
            kept.append(c)
    return frozenset(kept)


def _dnf_or(*ds: Dnf) -> Dnf:
    return _absorb(c for d in ds for c in d)


def _dnf_and(d1: Dnf, d2: Dnf) -> Dnf:
    return _absorb(a | b for a in d1 for b in d2)


@lru_cache(maxsize=None)
def _dnf(f: Formula) -> Dnf:
    if isinstance(f, TrueF):
        return _DNF_TRUE
    if isinstance(f, FalseF):
        return _DNF_FALSE
    if isinstance(f, Or):
        return _dnf_or(*(_dnf(c) for c in f.children))
    if isinstance(f, And):
        out = _DNF_TRUE
        for c in f.children:
            out = _dnf_and(out, _dnf(c))
        return out
    return frozenset([frozenset([f])])


def _from_dnf(d: Dnf) -> Formula:
    return disj(*(conj(*clause) for clause in d))


@lru_cache(maxsize=None)
def _progress_dnf(f: Formula, letter: int) -> Dnf:
    if isinstance(f, TrueF):
        return _DNF_TRUE
    if isinstance(f, FalseF):
        return _DNF_FALSE
    if isinstance(f, Atom):
        return _DNF_TRUE if f.prop == letter else _DNF_FALSE
    if isinstance(f, NegAtom):
        return _DNF_FALSE if f.prop == letter else _DNF_TRUE
    if isinstance(f, Or):
        return _dnf_or(*(_progress_dnf(c, letter) for c in f.children))
    if isinstance(f, And):
        out = _DNF_TRUE
        for c in f.children:
            out = _dnf_and(out, _progress_dnf(c, letter))
            if not out:
                break
        return out
    keep = frozenset([frozenset([f])])
    if isinstance(f, Until):
        return _dnf_or(_progress_dnf(f.right, letter),
                       _dnf_and(_progress_dnf(f.left, letter), keep))
    if isinstance(f, Eventually):
        return _dnf_or(_progress_dnf(f.child, letter), keep)
    raise TypeError(f"not a formula: {f!r}")


def progress(phi: Formula, letter: int) -> Formula:
    """Obligation left on the rest of the word after reading ``letter``."""
    return _from_dnf(_progress_dnf(phi, letter))


# --------------------------------------------------------------------------
# Automata


@dataclass(frozen=True)
class SpecAutomaton:
    """Complete DFA over proposition indices ``0..n_letters-1``.

    Accepting states are absorbing; ``sink`` is the absorbing rejecting
    state (``None`` when no such state exists).
    """

    n_letters: int
    delta: tuple[tuple[int, ...], ...]
    initial: int
    accepting: frozenset[int]
    sink: int | None
    labels: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def step(self, state: int, letter: int) -> int:
        return self.delta[state][letter]

    def run(self, word: Iterable[int]) -> int:
        s = self.initial
        for a in word:
            s = self.delta[s][a]
        return s

    def accepts(self, word: Iterable[int]) -> bool:
        s = self.initial
        if s in self.accepting:
            return True
        for a in word:
            s = self.delta[s][a]
            if s in self.accepting:
                return True
        return False

    def to_text(self) -> str:
        lines = [f"initial {self.initial}",
                 "accepting " + " ".join(str(s) for s in sorted(self.accepting))]
        if self.sink is not None:
            lines.append(f"sink {self.sink}")
        for s, label in enumerate(self.labels):
            lines.append(f"# {s}: {label}")
        for s, row in enumerate(self.delta):
            for a, t in enumerate(row):
                lines.append(f"{s} p{a} {t}")
        return "\n".join(lines) + "\n"


def compile_formula(phi: Formula, n_letters: int | None = None,
                    max_states: int = 100_000,
                    names: Sequence[str] | None = None) -> SpecAutomaton:
    """Build the progression automaton of ``phi``.

    States are the distinct (up to minimal DNF) formulas reachable from
    ``phi`` by :func:`progress`; ``true`` is the only accepting state and
    ``false`` the rejecting sink.
    """
    if n_letters is None:
        n_letters = max(propositions(phi), default=0) + 1
    if propositions(phi) and max(propositions(phi)) >= n_letters:
        raise FormulaError("formula mentions propositions outside the alphabet")
    keys: dict[Dnf, int] = {}
    forms: list[Formula] = []
    rows: list[list[int]] = []

    def state_of(key: Dnf, form: Formula) -> int:
        if key not in keys:
            if len(forms) >= max_states:
                raise StateExplosion(f"automaton exceeds {max_states} states")
            keys[key] = len(forms)
            forms.append(form)
            rows.append([])
            queue.append(key)
        return keys[key]

    queue: deque[Dnf] = deque()
    init_key = _dnf(phi)
    state_of(init_key, phi)
    while queue:
        key = queue.popleft()
        s = keys[key]
        for a in range(n_letters):
            nxt = _progress_dnf(forms[s], a)
            rows[s].append(state_of(nxt, _from_dnf(nxt)))
    sink = state_of(_DNF_FALSE, FALSE)
    if not rows[sink]:
        rows[sink] = [sink] * n_letters
    accepting = frozenset([keys[_DNF_TRUE]]) if _DNF_TRUE in keys else frozenset()
    return SpecAutomaton(
        n_letters=n_letters,
        delta=tuple(tuple(r) for r in rows),
        initial=0,
        accepting=accepting,
        sink=sink,
        labels=tuple(to_text(f, names) for f in forms),
    )


def _reachable(aut: SpecAutomaton) -> list[int]:
    seen = {aut.initial}
    order = [aut.initial]
    i = 0
    while i < len(order):
        for t in aut.delta[order[i]]:
            if t not in seen:
                seen.add(t)
                order.append(t)
        i += 1
    return order


def minimize(aut: SpecAutomaton) -> SpecAutomaton:
    """Hopcroft partition refinement on the reachable part of ``aut``."""
    order = _reachable(aut)
    states = set(order)
    letters = range(aut.n_letters)
    inverse: list[dict[int, set[int]]] = [dict() for _ in letters]
    for s in order:
        for a in letters:
            inverse[a].setdefault(aut.delta[s][a], set()).add(s)

    acc = frozenset(states & aut.accepting)
    rej = frozenset(states - aut.accepting)
    partition = {b for b in (acc, rej) if b}
    work = {min((acc, rej), key=len)} if acc and rej else set()
    while work:
        splitter = work.pop()
        for a in letters:
            pre: set[int] = set()
            for t in splitter:
                pre |= inverse[a].get(t, set())
            if not pre:
                continue
            for block in list(partition):
                inside = block & pre
                if not inside or inside == block:
                    continue
                outside = block - inside
                partition.remove(block)
                partition.update((frozenset(inside), frozenset(outside)))
                if block in work:
                    work.remove(block)
                    work.update((frozenset(inside), frozenset(outside)))
                else:
                    work.add(min(frozenset(inside), frozenset(outside), key=len))

    rank = {s: i for i, s in enumerate(order)}
    blocks = sorted(partition, key=lambda b: min(rank[s] for s in b))
    block_of = {s: i for i, b in enumerate(blocks) for s in b}
    reps = [min(b, key=rank.__getitem__) for b in blocks]
    delta = tuple(tuple(block_of[aut.delta[r][a]] for a in letters) for r in reps)
    accepting = frozenset(block_of[s] for s in acc)

    # a dead block cannot reach acceptance; the minimal DFA has at most one
    alive = set(accepting)
    changed = True
    while changed:
        changed = False
        for i, row in enumerate(delta):
            if i not in alive and any(t in alive for t in row):
                alive.add(i)
                changed = True
    dead = [i for i in range(len(blocks)) if i not in alive]
    return SpecAutomaton(
        n_letters=aut.n_letters,
        delta=delta,
        initial=block_of[aut.initial],
        accepting=accepting,
        sink=dead[0] if dead else None,
        labels=tuple(aut.labels[r] for r in reps),
    )
