"""Interpretation of terms and Bohm trees in a K-model.

Membership queries run the intersection-type systems: a syntax-directed
search for terms, and a node-by-node search for Bohm trees where the
premise antichains come from unfolding elements of the head variable's
antichain (no synthesis needed).

For the term-level application rule the premise antichain is not
enumerated blindly: the argument's provable targets within the budget
universe form a downward-closed set, and by contravariance its antichain
of maximal elements is the principal candidate -- if any premise inside
the universe works, this one does.  Search is therefore complete relative
to the budget universe, and NotFoundWithinBudget is never read as a
semantic refutation.

Coinductive membership builds the judgment graph to the depth budget and
evaluates it twice: with the frontier assumed true (optimistic) and false
(pessimistic).  Pessimistic truth exhibits a regular infinite derivation;
optimistic-only truth is bounded evidence; optimistic failure refutes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import bohm
from .bohm import (
    GEN_OMEGA,
    GEN_UNRESOLVED,
    BohmTree,
    GenNode,
    TreeGen,
    as_gen,
    quasi_finite_to_depth,
)
from .kweb import Antichain, Arrow, Element, KModel, WindowExhausted, elem_key
from .terms import Abs, App, Term, Var, free_vars


# ---------------------------------------------------------------------------
# Budgets, universes, results

@dataclass(frozen=True)
class Budget:
    level: int = 2
    size: int = 6
    app_width: int = 2
    depth: int = 10

    def __post_init__(self):
        if min(self.level, self.size, self.app_width, self.depth) < 0:
            raise ValueError("budget components must be >= 0")


@dataclass(frozen=True)
class ExpElement:
    """A point of D^n => D: one antichain per free variable, plus a result."""

    env: tuple[Antichain, ...]
    result: Element

    def __str__(self) -> str:
        if not self.env:
            return str(self.result)
        return "(" + ", ".join(str(a) for a in self.env) + ") |- " + str(self.result)


@dataclass
class Derivation:
    rule: str
    judgment: str
    witness: dict
    premises: list

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "judgment": self.judgment,
            "witness": self.witness,
            "premises": [p.to_json() for p in self.premises],
        }

    def to_text(self, indent: int = 0) -> str:
        pad = "  " * indent
        lines = [f"{pad}[{self.rule}] {self.judgment}"]
        for key, val in self.witness.items():
            lines.append(f"{pad}  {key}: {val}")
        for p in self.premises:
            lines.append(p.to_text(indent + 1))
        return "\n".join(lines)


@dataclass
class LoopMark:
    judgment: str

    def to_json(self) -> dict:
        return {"loop": self.judgment}

    def to_text(self, indent: int = 0) -> str:
        return "  " * indent + f"[loop] {self.judgment}"


@dataclass
class Proven:
    derivation: Derivation


@dataclass
class NotFoundWithinBudget:
    note: str = ""


@dataclass
class ProvenRegular:
    derivation: Derivation


@dataclass
class HoldsToDepth:
    depth: int


@dataclass
class Refuted:
    pass


def universe_for(model: KModel, budget: Budget) -> tuple[Element, ...]:
    return model.enumerate_elements(budget.level, budget.size)


Env = Sequence[tuple[str, Antichain]]


def _lookup(env: Env, name: str) -> Antichain:
    for n, a in reversed(list(env)):
        if n == name:
            return a
    raise KeyError(f"unbound variable {name!r}")


# ---------------------------------------------------------------------------
# Term membership

def member_term(
    model: KModel,
    env: Env,
    term: Term,
    target: Element,
    budget: Budget,
    universe: Optional[Sequence[Element]] = None,
) -> Union[Proven, NotFoundWithinBudget]:
    """Search for a finite typing derivation   env |- term : target."""
    uni_cache: list = [tuple(universe)] if universe is not None else []

    def uni() -> tuple[Element, ...]:
        # only application nodes consult the universe; build it on demand
        if not uni_cache:
            uni_cache.append(universe_for(model, budget))
        return uni_cache[0]

    env = tuple((n, model.normalize_antichain(a)) for n, a in env)
    target = model.canonicalize(target)
    memo: dict = {}
    info: dict = {}

    def envkey(e: tuple, t: Term) -> tuple:
        # judgments depend only on the bindings of the subject's free vars
        return tuple(sorted((n, _lookup(e, n)) for n in free_vars(t)))

    def prove(e: tuple, t: Term, tgt: Element) -> bool:
        key = (envkey(e, t), t, tgt)
        if key in memo:
            return memo[key]
        if isinstance(t, Var):
            a = _lookup(e, t.name)
            r = False
            for beta in a:
                if model.leq(tgt, beta):
                    info[key] = ("var", beta)
                    r = True
                    break
        elif isinstance(t, Abs):
            try:
                b, tgt2 = model.unfold1(tgt)
            except WindowExhausted:
                memo[key] = False
                return False
            sub = (e + ((t.binder, b),), t.body, tgt2)
            r = prove(*sub)
            if r:
                info[key] = ("abs", b, sub)
        else:
            provable = [beta for beta in uni() if prove(e, t.arg, beta)]
            bstar = model.normalize_antichain(provable)
            arrow = model.canonicalize(Arrow(bstar, tgt))
            fnsub = (e, t.fn, arrow)
            r = prove(*fnsub)
            if r:
                info[key] = ("app", bstar, fnsub, [(e, t.arg, b) for b in bstar])
        memo[key] = r
        return r

    def build(e: tuple, t: Term, tgt: Element) -> Derivation:
        key = (envkey(e, t), t, tgt)
        judgment = _judge_str(key[0], str(t), tgt)
        tag = info[key]
        if tag[0] == "var":
            return Derivation("I-id/I-weak/I-<=", judgment, {"above": str(tag[1])}, [])
        if tag[0] == "abs":
            return Derivation(
                "I-lambda", judgment, {"peeled": str(tag[1])}, [build(*tag[2])]
            )
        bstar, fnsub, argsubs = tag[1], tag[2], tag[3]
        prem = [build(*fnsub)] + [build(*s) for s in argsubs]
        return Derivation("I-@", judgment, {"premise-antichain": str(bstar)}, prem)

    if prove(env, term, target):
        return Proven(build(env, term, target))
    return NotFoundWithinBudget(f"universe of {len(uni_cache[0]) if uni_cache else 0} elements")


def _judge_str(env, subject: str, tgt: Element) -> str:
    ctx = ", ".join(f"{n}:{a}" for n, a in env)
    return f"{ctx} |- {subject} : {tgt}"


# ---------------------------------------------------------------------------
# Direct interpretation over a finite universe

def interp_set(
    model: KModel,
    term: Term,
    budget: Budget,
    free_order: Optional[Sequence[str]] = None,
    universe: Optional[Sequence[Element]] = None,
) -> frozenset[ExpElement]:
    """Bottom-up interpretation, complete relative to the budget universe."""
    uni = tuple(universe) if universe is not None else universe_for(model, budget)
    memo: dict = {}

    def denot(t: Term, e: tuple) -> frozenset[Element]:
        key = (t, tuple(sorted((n, _lookup(e, n)) for n in free_vars(t))))
        if key in memo:
            return memo[key]
        if isinstance(t, Var):
            a = _lookup(e, t.name)
            out = frozenset(
                alpha for alpha in uni if any(model.leq(alpha, b) for b in a)
            )
        elif isinstance(t, Abs):
            acc = []
            for gamma in uni:
                try:
                    b, alpha = model.unfold1(gamma)
                except WindowExhausted:
                    continue
                if alpha in denot(t.body, e + ((t.binder, b),)):
                    acc.append(gamma)
            out = frozenset(acc)
        else:
            dm = denot(t.fn, e)
            dn = denot(t.arg, e)
            tails = set()
            for gamma in dm:
                try:
                    b, alpha = model.unfold1(gamma)
                except WindowExhausted:
                    continue
                if all(beta in dn for beta in b):
                    tails.add(alpha)
            out = frozenset(
                alpha
                for alpha in uni
                if any(model.leq(alpha, t2) for t2 in tails)
            )
        memo[key] = out
        return out

    names = list(free_order) if free_order is not None else sorted(free_vars(term))
    if not names:
        return frozenset(ExpElement((), a) for a in denot(term, ()))
    pools = model.enumerate_antichains(uni, max_card=budget.app_width)
    rows = []
    for combo in itertools.product(pools, repeat=len(names)):
        e = tuple(zip(names, combo))
        for alpha in denot(term, e):
            rows.append(ExpElement(tuple(combo), alpha))
    return frozenset(rows)


# ---------------------------------------------------------------------------
# Bohm tree membership: shared judgment machinery

def _env_sig(gen: TreeGen, path, envd: dict, fv) -> tuple:
    names = sorted(envd) if fv is None else sorted(n for n in envd if n in fv)
    return tuple((gen.var_role(path, n), envd[n]) for n in names)


class _BTGraph:
    """AND-OR graph of Bohm-tree typing judgments, built to a depth cap."""

    def __init__(
        self,
        model: KModel,
        gen: TreeGen,
        env: Env,
        target: Element,
        budget: Budget,
        use_states: bool,
    ):
        self.model = model
        self.gen = gen
        self.budget = budget
        self.use_states = use_states
        env0 = {n: model.normalize_antichain(a) for n, a in env}
        self.root = self._jid((), env0, model.canonicalize(target))
        self.entries: dict = {}
        todo = [(self.root, (), env0, model.canonicalize(target))]
        queued = {self.root}
        while todo:
            jid, path, envd, tgt = todo.pop()
            entry = self._expand(path, envd, tgt)
            self.entries[jid] = entry
            if entry[0] == "node":
                for _w, children in entry[1]:
                    for cjid, cpath, cenv, ctgt in children:
                        if cjid not in queued:
                            queued.add(cjid)
                            todo.append((cjid, cpath, cenv, ctgt))

    def _jid(self, path, envd: dict, tgt: Element):
        skey = self.gen.state_key(path) if self.use_states else None
        if skey is None:
            skey = ("path", path)
        return (skey, _env_sig(self.gen, path, envd, self.gen.free_names(path)), tgt)

    def _expand(self, path, envd, tgt):
        if len(path) >= self.budget.depth:
            return ("frontier",)
        desc = self.gen.expand(path)
        if desc is GEN_OMEGA or isinstance(desc, bohm.GenOmega):
            # no rule for Omega: its interpretation is empty
            return ("node", [], None)
        if desc is GEN_UNRESOLVED or isinstance(desc, bohm.GenUnresolved):
            return ("unresolved",)
        assert isinstance(desc, GenNode)
        m = len(desc.binders)
        try:
            premises, tail = self.model.unfold(tgt, m)
        except WindowExhausted:
            return ("unresolved",)
        envd2 = dict(envd)
        for b, a in zip(desc.binders, premises):
            envd2[b] = a
        if desc.head not in envd2:
            raise KeyError(f"unbound head variable {desc.head!r} (open tree?)")
        a_y = envd2[desc.head]
        instances = []
        partial = None
        for cand in a_y:
            try:
                bs, beta = self.model.unfold(cand, desc.arity)
            except WindowExhausted:
                partial = "window"
                continue
            if not self.model.leq(tail, beta):
                continue
            children = []
            for jdx in range(desc.arity):
                cpath = path + (jdx,)
                for gamma in bs[jdx]:
                    cjid = self._jid(cpath, envd2, gamma)
                    children.append((cjid, cpath, envd2, gamma))
            witness = {
                "head": desc.head,
                "chosen": str(cand),
                "unfolded": [str(b) for b in bs],
                "tail": str(beta),
            }
            instances.append(((witness, desc, tail), children))
        return ("node", instances, partial)

    def evaluate(self, frontier_value: bool) -> dict:
        val = {}
        for jid, entry in self.entries.items():
            val[jid] = frontier_value if entry[0] in ("frontier", "unresolved") else True
        changed = True
        while changed:
            changed = False
            for jid, entry in self.entries.items():
                if entry[0] != "node" or not val[jid]:
                    continue
                if entry[2] is not None and frontier_value:
                    # a window-skipped candidate could still support the goal
                    continue
                ok = any(
                    all(val[c[0]] for c in children) for _w, children in entry[1]
                )
                if not ok:
                    val[jid] = False
                    changed = True
        return val

    def derivation(self, val: dict) -> Derivation:
        def build(jid, on_path: tuple) -> Union[Derivation, LoopMark]:
            label = _jid_str(jid)
            if jid in on_path:
                return LoopMark(label)
            entry = self.entries[jid]
            if entry[0] in ("frontier", "unresolved"):
                return Derivation("open", label, {"status": entry[0]}, [])
            for (witness, desc, tail), children in entry[1]:
                if all(val[c[0]] for c in children):
                    prem = [build(c[0], on_path + (jid,)) for c in children]
                    return Derivation("BT-lambda/BT-@", label, dict(witness), prem)
            raise AssertionError("no supported instance for a true judgment")

        result = build(self.root, ())
        assert isinstance(result, Derivation)
        return result


def _jid_str(jid) -> str:
    skey, env_sig, tgt = jid
    ctx = ", ".join(f"{r}:{a}" for r, a in env_sig)
    return f"[{skey}] {ctx} |- . : {tgt}"


def member_bt_coind(
    model: KModel,
    env: Env,
    u: Union[BohmTree, TreeGen],
    target: Element,
    budget: Budget,
    cycles: bool = True,
) -> Union[ProvenRegular, HoldsToDepth, Refuted]:
    graph = _BTGraph(model, as_gen(u), env, target, budget, use_states=cycles)
    opt = graph.evaluate(True)
    if not opt[graph.root]:
        return Refuted()
    if cycles:
        pess = graph.evaluate(False)
        if pess[graph.root]:
            return ProvenRegular(graph.derivation(pess))
    return HoldsToDepth(budget.depth)


def member_bt_ind(
    model: KModel,
    env: Env,
    u: Union[BohmTree, TreeGen],
    target: Element,
    budget: Budget,
) -> Union[Proven, NotFoundWithinBudget]:
    """Finite-derivation membership: target inside some finite truncation."""
    gen = as_gen(u)
    env0 = {n: model.normalize_antichain(a) for n, a in env}
    target = model.canonicalize(target)
    memo_true: dict = {}
    memo_false: dict = {}

    def jkey(path, envd, tgt):
        fv = gen.free_names(path)
        return (path, _env_sig(gen, path, envd, fv), tgt)

    def search(path, envd, tgt, on_path) -> Optional[Derivation]:
        key = jkey(path, envd, tgt)
        if key in memo_true:
            return memo_true[key]
        if key in on_path or memo_false.get(key, 0) >= budget.depth - len(path):
            return None
        if len(path) >= budget.depth:
            return None
        desc = gen.expand(path)
        if not isinstance(desc, GenNode):
            return None
        m = len(desc.binders)
        try:
            premises, tail = model.unfold(tgt, m)
        except WindowExhausted:
            return None
        envd2 = dict(envd)
        for b, a in zip(desc.binders, premises):
            envd2[b] = a
        if desc.head not in envd2:
            raise KeyError(f"unbound head variable {desc.head!r} (open tree?)")
        label = _jid_str(key)
        for cand in envd2[desc.head]:
            try:
                bs, beta = model.unfold(cand, desc.arity)
            except WindowExhausted:
                continue
            if not model.leq(tail, beta):
                continue
            prem = []
            ok = True
            for jdx in range(desc.arity):
                for gamma in bs[jdx]:
                    sub = search(path + (jdx,), envd2, gamma, on_path | {key})
                    if sub is None:
                        ok = False
                        break
                    prem.append(sub)
                if not ok:
                    break
            if ok:
                witness = {
                    "head": desc.head,
                    "chosen": str(cand),
                    "unfolded": [str(b) for b in bs],
                }
                d = Derivation("BT-lambda/BT-@", label, witness, prem)
                memo_true[key] = d
                return d
        memo_false[key] = max(
            memo_false.get(key, 0), budget.depth - len(path)
        )
        return None

    d = search((), env0, target, frozenset())
    if d is None:
        return NotFoundWithinBudget(f"no finite derivation to depth {budget.depth}")
    return Proven(d)


def member_bt_qf(
    model: KModel,
    env: Env,
    u: Union[BohmTree, TreeGen],
    target: Element,
    budget: Budget,
    sub: Optional[Union[BohmTree, TreeGen]] = None,
) -> Union[ProvenRegular, HoldsToDepth, Refuted]:
    """Quasi-finite membership: coinductive membership on a quasi-finite
    sub-tree (the whole tree by default, when its evidence passes)."""
    chosen = u if sub is None else sub
    ok, why = quasi_finite_to_depth(chosen, budget.depth)
    if not ok:
        raise ValueError(f"sub-tree is not quasi-finite to depth: {why}")
    if sub is not None and not _subset_to_depth(as_gen(sub), as_gen(u), budget.depth):
        raise ValueError("sub-tree is not included in the tree to the explored depth")
    return member_bt_coind(model, env, chosen, target, budget, cycles=True)


def _subset_to_depth(g1: TreeGen, g2: TreeGen, depth: int) -> bool:
    def rec(path, e1, e2, ctr, d) -> bool:
        if d <= 0:
            return True
        d1, d2 = g1.expand(path), g2.expand(path)
        if not isinstance(d1, GenNode):
            return True
        if not isinstance(d2, GenNode):
            return False
        if len(d1.binders) != len(d2.binders) or d1.arity != d2.arity:
            return False
        e1b, e2b = dict(e1), dict(e2)
        for x, y in zip(d1.binders, d2.binders):
            i = next(ctr)
            e1b[x] = i
            e2b[y] = i
        if e1b.get(d1.head, ("fv", d1.head)) != e2b.get(d2.head, ("fv", d2.head)):
            return False
        return all(
            rec(path + (i,), e1b, e2b, ctr, d - 1) for i in range(d1.arity)
        )

    return rec((), {}, {}, itertools.count(), depth)


# ---------------------------------------------------------------------------
# Report helpers

def result_json(res) -> dict:
    if isinstance(res, Proven):
        return {"verdict": "proven", "derivation": res.derivation.to_json()}
    if isinstance(res, ProvenRegular):
        return {"verdict": "proven-regular", "derivation": res.derivation.to_json()}
    if isinstance(res, HoldsToDepth):
        return {"verdict": "holds-to-depth", "depth": res.depth}
    if isinstance(res, Refuted):
        return {"verdict": "refuted"}
    if isinstance(res, NotFoundWithinBudget):
        return {"verdict": "not-found-within-budget", "note": res.note}
    raise TypeError(f"not a membership result: {res!r}")
