"""Untyped lambda-terms: syntax, parsing, substitution and head reduction.

Terms use named binders.  Alpha-equivalence (via de Bruijn keys) is the
working notion of equality; structural == on the dataclasses compares
names literally and is only used for hashing/memo keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union


# ---------------------------------------------------------------------------
# Syntax

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Abs:
    binder: str
    body: "Term"

    def __str__(self) -> str:
        binders = [self.binder]
        body = self.body
        while isinstance(body, Abs):
            binders.append(body.binder)
            body = body.body
        return "\\" + " ".join(binders) + "." + _str_app(body)


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"

    def __str__(self) -> str:
        return _str_app(self)


Term = Union[Var, Abs, App]


def _str_atom(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    return "(" + str(t) + ")"


def _str_app(t: Term) -> str:
    if isinstance(t, App):
        return _str_app(t.fn) + " " + _str_atom(t.arg)
    return _str_atom(t)


def abs_many(binders: list[str], body: Term) -> Term:
    for b in reversed(binders):
        body = Abs(b, body)
    return body


def app_many(fn: Term, args: list[Term]) -> Term:
    for a in args:
        fn = App(fn, a)
    return fn


@lru_cache(maxsize=None)
def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Abs):
        return free_vars(t.body) - {t.binder}
    return free_vars(t.fn) | free_vars(t.arg)


def fresh_name(base: str, avoid: frozenset[str] | set[str]) -> str:
    """Deterministic fresh name: base, then base1, base2, ..."""
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def subst(t: Term, x: str, s: Term) -> Term:
    """Capture-free substitution t[s/x]."""
    if isinstance(t, Var):
        return s if t.name == x else t
    if isinstance(t, App):
        return App(subst(t.fn, x, s), subst(t.arg, x, s))
    if t.binder == x:
        return t
    if t.binder in free_vars(s) and x in free_vars(t.body):
        b2 = fresh_name(t.binder, free_vars(s) | free_vars(t.body) | {x})
        body = subst(t.body, t.binder, Var(b2))
        return Abs(b2, subst(body, x, s))
    return Abs(t.binder, subst(t.body, x, s))


# ---------------------------------------------------------------------------
# Alpha-equivalence

def debruijn_key(t: Term, stack: tuple[str, ...] = ()) -> tuple:
    """Hashable key identifying t up to renaming of bound variables.

    Free variables bound in `stack` (innermost last) become indices counted
    from the innermost end; other free variables keep their names.
    """
    if isinstance(t, Var):
        for i, b in enumerate(reversed(stack)):
            if b == t.name:
                return ("b", i)
        return ("f", t.name)
    if isinstance(t, Abs):
        return ("l", debruijn_key(t.body, stack + (t.binder,)))
    return ("a", debruijn_key(t.fn, stack), debruijn_key(t.arg, stack))


def alpha_eq(t: Term, u: Term) -> bool:
    return debruijn_key(t) == debruijn_key(u)


# ---------------------------------------------------------------------------
# Parsing

class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        if self.pos >= len(self.text) or not self.text[self.pos].isalpha():
            raise ParseError("expected identifier", self.pos)
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        return self.text[start : self.pos]

    def term(self) -> Term:
        c = self.peek()
        if c in ("\\", "λ"):
            self.pos += 1
            binders = [self.ident()]
            while self.peek() not in (".", ""):
                binders.append(self.ident())
            if self.peek() != ".":
                raise ParseError("expected '.'", self.pos)
            self.pos += 1
            return abs_many(binders, self.term())
        return self.app()

    def app(self) -> Term:
        t = self.atom()
        while True:
            c = self.peek()
            if c == "" or c in ").":
                return t
            if c in ("\\", "λ"):
                # abstraction body extends maximally right
                return App(t, self.term())
            t = App(t, self.atom())

    def atom(self) -> Term:
        c = self.peek()
        if c == "(":
            self.pos += 1
            t = self.term()
            if self.peek() != ")":
                raise ParseError("expected ')'", self.pos)
            self.pos += 1
            return t
        return Var(self.ident())


def parse(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.skip_ws()
    if p.pos != len(text):
        raise ParseError("trailing input", p.pos)
    return t


# ---------------------------------------------------------------------------
# Head reduction

@dataclass(frozen=True)
class HeadForm:
    """A head-normal form  \\x1...xm. y M1 ... Mn."""

    binders: tuple[str, ...]
    head: str
    args: tuple[Term, ...]

    def to_term(self) -> Term:
        return abs_many(list(self.binders), app_many(Var(self.head), list(self.args)))

    def __str__(self) -> str:
        return str(self.to_term())


@dataclass(frozen=True)
class OutOfFuel:
    """Head reduction did not finish; carries the last reduct.

    `looped` is set when an earlier reduct recurred (alpha-equivalently),
    which proves genuine head divergence.  Without it nothing is claimed.
    """

    last: Term
    looped: bool = False


def _decompose(t: Term) -> tuple[list[str], Term, list[Term]]:
    binders: list[str] = []
    while isinstance(t, Abs):
        binders.append(t.binder)
        t = t.body
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return binders, t, args


def head_reduce(t: Term, fuel: int) -> HeadForm | OutOfFuel:
    """Big-step head reduction, spending one fuel unit per beta head-step."""
    seen = {debruijn_key(t)}
    current = t
    while True:
        binders, spine, args = _decompose(current)
        if isinstance(spine, Var):
            return HeadForm(tuple(binders), spine.name, tuple(args))
        assert isinstance(spine, Abs)
        if fuel <= 0:
            return OutOfFuel(current)
        fuel -= 1
        reduced = app_many(subst(spine.body, spine.binder, args[0]), args[1:])
        current = abs_many(binders, reduced)
        key = debruijn_key(current)
        if key in seen:
            return OutOfFuel(current, looped=True)
        seen.add(key)


# ---------------------------------------------------------------------------
# Combinator library

I = parse("\\x.x")
OMEGA = parse("(\\x.x x) (\\x.x x)")
THETA = parse("(\\u v.v (u u v)) (\\u v.v (u u v))")
SUCC = parse("\\u f x.u f (f x)")


def church(n: int) -> Term:
    if n < 0:
        raise ValueError("Church numerals need n >= 0")
    body: Term = Var("x")
    for _ in range(n):
        body = App(Var("f"), body)
    return Abs("f", Abs("x", body))


def combinator(name: str, n: int | None = None) -> Term:
    """Look up a library combinator by name; Church(n) via name='church'."""
    table = {"i": I, "omega": OMEGA, "theta": THETA, "succ": SUCC}
    key = name.lower()
    if key == "church":
        if n is None:
            raise ValueError("church requires an index")
        return church(n)
    if key not in table:
        raise ValueError(f"unknown combinator {name!r}")
    return table[key]


def iter_subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Abs):
        yield from iter_subterms(t.body)
    elif isinstance(t, App):
        yield from iter_subterms(t.fn)
        yield from iter_subterms(t.arg)
