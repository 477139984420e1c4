"""The observational-identity/denotational-separation counterexample.

For a bound table g, the term family  G_n = \\u e x1..x_{g(n)}. e (u x1)
... (u x_{g(n)})  drives the meta-level unfolding  step n ~> G_n applied
to step n+1, whose Bohm tree is the g-indexed infinite eta-expansion of
the identity.  Truncations at depth k live inside every finite
approximation; a chain witness makes the element {a0} => a0 separate the
identity from all truncations while the trees stay eta-infinitely equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import bohm
from .bohm import BohmTree, BTNode, GenNode, TreeGen, geetinf, truncate
from .hyper import ChainWitness, GTable, Invalid, check_chain
from .interp import (
    Budget,
    NotFoundWithinBudget,
    Proven,
    member_bt_ind,
    member_term,
    universe_for,
)
from .kweb import (
    Antichain,
    Arrow,
    Element,
    KModel,
    WindowExhausted,
    antichain_of,
    elem_key,
    elem_size,
    elem_to_json,
)
from .terms import Term, Var, abs_many, app_many, parse


@dataclass
class JgFamily:
    g: GTable

    def width(self, n: int) -> int:
        w = self.g(n)
        if w < 0:
            raise ValueError("g must be >= 0")
        return w


def make_G(fam: JgFamily, n: int) -> Term:
    """The closed level term \\u e x1..x_{g(n)}. e (u x1) ... (u x_{g(n)})."""
    w = fam.width(n)
    xs = [f"x{i}" for i in range(1, w + 1)]
    body = app_many(Var("e"), [app_many(Var("u"), [Var(x)]) for x in xs])
    return abs_many(["u", "e"] + xs, body)


class JgGen(TreeGen):
    """Generator of the Bohm tree of the stage-n unfolding applied to a
    variable; level d has g(n+d) binders, each child expanding one binder.

    With closed=True the root also abstracts the argument variable, which
    merges with the level-0 binders in the head-normal form.
    """

    def __init__(self, fam: JgFamily, n: int, arg: str = "z", closed: bool = False):
        self.fam = fam
        self.n = n
        self.arg = arg
        self.closed = closed

    def _binders(self, d: int) -> tuple[str, ...]:
        level = tuple(
            f"x{d}_{i}" for i in range(1, self.fam.width(self.n + d) + 1)
        )
        if d == 0 and self.closed:
            return (self.arg,) + level
        return level

    def expand(self, path):
        d = len(path)
        w = self.fam.width(self.n + d)
        head = self.arg if d == 0 else f"x{d - 1}_{path[-1] + 1}"
        return GenNode(self._binders(d), head, w)

    def state_key(self, path):
        d = len(path)
        last = path[-1] if path else None
        if self.fam.g.kind == "const":
            return ("jg-const", self.fam.g.k, d == 0, self.closed and d == 0, last)
        return ("jg", self.n + d, d == 0, last)

    def free_names(self, path):
        d = len(path)
        if d == 0:
            return frozenset() if self.closed else frozenset((self.arg,))
        return frozenset((f"x{d - 1}_{path[-1] + 1}",))

    def var_role(self, path, name):
        d = len(path)
        if name == self.arg:
            return ("glob", name)
        if name.startswith("x") and "_" in name:
            lvl, idx = name[1:].split("_", 1)
            return ("up", d - int(lvl), int(idx))
        return ("glob", name)


def jg_bt(fam: JgFamily, n: int, arg: str = "z") -> TreeGen:
    return JgGen(fam, n, arg)


def jg_closed_bt(fam: JgFamily, n: int = 0, arg: str = "z") -> TreeGen:
    return JgGen(fam, n, arg, closed=True)


@dataclass
class JgTruncation:
    n: int
    k: int
    tree: BohmTree  # free variable is the argument name


def jg_trunc(fam: JgFamily, n: int, k: int, arg: str = "z") -> JgTruncation:
    for d in range(k):
        fam.width(n + d)  # raise early if the table is exhausted
    return JgTruncation(n, k, truncate(jg_bt(fam, n, arg), k))


def check_identity(fam: JgFamily, n: int, depth: int, arg: str = "z") -> bool:
    """The stage-n tree eta-infinitely expands the bare variable, to depth."""
    if depth == 0:
        return True
    return geetinf(jg_bt(fam, n, arg), BTNode((), arg, ()), depth)


# ---------------------------------------------------------------------------
# Separation experiment

@dataclass
class Holds:
    n: int
    k: int
    universe_size: int


@dataclass
class CounterDerivationFound:
    n: int
    k: int
    derivation: object


def _closure_universe(
    model: KModel, seeds: Sequence[Element], depth: int, budget: Budget
) -> tuple[Element, ...]:
    """Seeds, their unfolding parts to `depth` and sub-elements, plus small
    size-bounded padding; recorded so Holds is auditable.

    The variable rule only consults the supplied antichain and the
    application premises are bounded by the target's unfolding arity, so
    the closure part already carries every element a derivation could use;
    the padding is kept small on wide-atom models."""
    out: set[Element] = set()
    todo = [model.canonicalize(e) for e in seeds]
    for _ in range(depth + 1):
        nxt = []
        for e in todo:
            if e in out:
                continue
            out.add(e)
            if isinstance(e, Arrow):
                nxt.extend(e.premise.elems)
                nxt.append(e.conclusion)
            try:
                prem, tail = model.unfold1(e)
            except WindowExhausted:
                continue
            nxt.extend(prem.elems)
            nxt.append(tail)
        todo = nxt
    pad_level, pad_size = (1, min(budget.size, 4)) if len(model.atoms) <= 8 else (0, 2)
    out.update(model.enumerate_elements(pad_level, pad_size))
    return tuple(sorted(out, key=elem_key))


def check_ank(
    model: KModel,
    w: ChainWitness,
    n: int,
    k: int,
    a: Antichain,
    budget: Budget,
) -> Union[Holds, CounterDerivationFound]:
    """No derivation puts alpha_n in the truncation's interpretation at a.

    Decided two ways: exactly on the finite tree (premises come from
    unfolding elements of a, so the node search is exhaustive), and via
    the term route over an unfolding-closed universe as a cross-check.
    """
    a = model.normalize_antichain(a)
    alpha_n = model.canonicalize(w.alphas[n])
    if not any(alpha_n == e for e in a):
        raise ValueError("precondition: alpha_n must belong to a")
    if w.N < n + k:
        raise ValueError(f"witness horizon {w.N} too short for n+k={n + k}")
    verdict = check_chain(model, w)
    if isinstance(verdict, Invalid):
        raise ValueError(f"invalid witness at {verdict.n}: {verdict.reason}")
    fam = JgFamily(w.g)
    trunc = jg_trunc(fam, n, k)
    seeds = [model.canonicalize(x) for x in w.alphas[n : n + k + 1]] + list(a)
    uni = _closure_universe(model, seeds, k + 2, budget)
    deep = Budget(budget.level, budget.size, budget.app_width, max(budget.depth, k + 2))
    env = (("z", a),)
    bt_res = member_bt_ind(model, env, bohm.TreeOfBT(trunc.tree), alpha_n, deep)
    if isinstance(bt_res, Proven):
        return CounterDerivationFound(n, k, bt_res.derivation)
    term_res = member_term(
        model, env, bohm.bt_to_term(trunc.tree), alpha_n, deep, universe=uni
    )
    if isinstance(term_res, Proven):
        return CounterDerivationFound(n, k, term_res.derivation)
    return Holds(n, k, len(uni))


@dataclass
class Separated:
    report: dict


@dataclass
class NotSeparatedWithinBudget:
    report: dict


def separate(
    model: KModel,
    w: ChainWitness,
    K: int,
    budget: Budget,
) -> Union[Separated, NotSeparatedWithinBudget]:
    """The full pipeline: {a0} => a0 interprets the identity but not any
    depth-k truncation for k <= K, while the trees stay observationally
    identical to depth K."""
    verdict = check_chain(model, w)
    if isinstance(verdict, Invalid):
        raise ValueError(f"invalid witness at {verdict.n}: {verdict.reason}")
    if w.N < K:
        raise ValueError(f"witness horizon {w.N} < K={K}")
    alpha0 = model.canonicalize(w.alphas[0])
    a = model.normalize_antichain([alpha0])
    element = model.canonicalize(Arrow(a, alpha0))
    report: dict = {
        "model": model.name,
        "element": elem_to_json(element),
        "g": w.g.to_json(),
        "K": K,
        "budgets": {
            "level": budget.level,
            "size": budget.size,
            "app_width": budget.app_width,
            "depth": budget.depth,
        },
        "per_k": [],
    }
    from .terms import I

    id_res = member_term(model, (), I, element, budget)
    report["identity_has_element"] = isinstance(id_res, Proven)
    ok = report["identity_has_element"]
    for k in range(K + 1):
        res = check_ank(model, w, 0, k, a, budget)
        entry = {"k": k, "holds": isinstance(res, Holds)}
        if isinstance(res, Holds):
            entry["universe_size"] = res.universe_size
        report["per_k"].append(entry)
        ok = ok and isinstance(res, Holds)
    report["identity_to_depth"] = check_identity(JgFamily(w.g), 0, K)
    ok = ok and report["identity_to_depth"]
    report["separated"] = ok
    return Separated(report) if ok else NotSeparatedWithinBudget(report)
