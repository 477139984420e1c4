"""Bohm trees: computation, inclusion, infinite-eta comparison, classes.

Finite trees are `BohmTree` values; infinite trees are presented by
demand-driven `TreeGen` generators.  Depth-cut positions, fuel exhaustion
and genuine head divergence all print as the Omega leaf, so every tree
produced here under-approximates the real Bohm tree; no operation claims
tree equality, only truncation facts.

Coinductive relations are decided to an explicit depth: "holds to depth k"
with the cut assumed to hold (gfp convention).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from .terms import (
    OMEGA,
    HeadForm,
    OutOfFuel,
    Term,
    Var,
    abs_many,
    app_many,
    debruijn_key,
    free_vars,
    fresh_name,
    head_reduce,
)


# ---------------------------------------------------------------------------
# Finite trees

class OmegaLeaf:
    """The undefined leaf; a singleton."""

    _instance: Optional["OmegaLeaf"] = None

    def __new__(cls) -> "OmegaLeaf":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "_"


OMEGA_LEAF = OmegaLeaf()


@dataclass(frozen=True)
class BTNode:
    binders: tuple[str, ...]
    head: str
    children: tuple["BohmTree", ...]

    def __repr__(self) -> str:
        return format_tree(self)


BohmTree = Union[OmegaLeaf, BTNode]


def format_tree(t: BohmTree) -> str:
    """Render in the textual format  W ::= '_' | '\\' ident* '.' ident W*."""
    if isinstance(t, OmegaLeaf):
        return "_"
    parts = ["\\" + " ".join(t.binders) + "." + t.head]
    for c in t.children:
        parts.append("_" if isinstance(c, OmegaLeaf) else "(" + format_tree(c) + ")")
    return " ".join(parts)


def parse_tree(text: str) -> BohmTree:
    pos = 0

    def skip() -> None:
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def ident() -> str:
        nonlocal pos
        skip()
        start = pos
        if pos >= len(text) or not text[pos].isalpha():
            raise ValueError(f"expected identifier at {pos}")
        while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
            pos += 1
        return text[start:pos]

    def tree() -> BohmTree:
        nonlocal pos
        skip()
        if pos < len(text) and text[pos] == "_":
            pos += 1
            return OMEGA_LEAF
        if pos >= len(text) or text[pos] != "\\":
            raise ValueError(f"expected '_' or '\\' at {pos}")
        pos += 1
        binders = []
        skip()
        while pos < len(text) and text[pos] != ".":
            binders.append(ident())
            skip()
        pos += 1  # '.'
        head = ident()
        children = []
        while True:
            skip()
            if pos < len(text) and text[pos] == "_":
                pos += 1
                children.append(OMEGA_LEAF)
            elif pos < len(text) and text[pos] == "(":
                pos += 1
                children.append(tree())
                skip()
                if pos >= len(text) or text[pos] != ")":
                    raise ValueError(f"expected ')' at {pos}")
                pos += 1
            else:
                break
        return BTNode(tuple(binders), head, tuple(children))

    result = tree()
    skip()
    if pos != len(text):
        raise ValueError(f"trailing input at {pos}")
    return result


def bt_to_term(t: BohmTree, omega_term: Term = OMEGA) -> Term:
    """Read a finite tree back as a term, Omega leaves becoming a looping term."""
    if isinstance(t, OmegaLeaf):
        return omega_term
    body = app_many(Var(t.head), [bt_to_term(c, omega_term) for c in t.children])
    return abs_many(list(t.binders), body)


def height(t: BohmTree) -> int:
    if isinstance(t, OmegaLeaf):
        return 0
    return 1 + max((height(c) for c in t.children), default=0)


def count_omegas(t: BohmTree) -> int:
    if isinstance(t, OmegaLeaf):
        return 1
    return sum(count_omegas(c) for c in t.children)


def rename_binders_unique(t: BohmTree, reserved: set[str] | None = None) -> BohmTree:
    """Rename binders so every binder in the tree is distinct."""
    used = set(reserved or set())

    def visit(node: BohmTree, env: dict[str, str]) -> BohmTree:
        if isinstance(node, OmegaLeaf):
            return node
        newb = []
        env2 = dict(env)
        for b in node.binders:
            nb = fresh_name(b, used)
            used.add(nb)
            env2[b] = nb
            newb.append(nb)
        head = env2.get(node.head, node.head)
        return BTNode(tuple(newb), head, tuple(visit(c, env2) for c in node.children))

    return visit(t, {})


# ---------------------------------------------------------------------------
# Generators

@dataclass(frozen=True)
class GenNode:
    binders: tuple[str, ...]
    head: str
    arity: int


class GenOmega:
    """Genuine Omega: proven divergence or a real leaf."""


class GenUnresolved:
    """Fuel ran out before a head-normal form; nothing is known."""


GEN_OMEGA = GenOmega()
GEN_UNRESOLVED = GenUnresolved()

Path = tuple[int, ...]


class TreeGen:
    """Demand-driven presentation of a (possibly infinite) Bohm tree.

    `expand` must be total and deterministic.  `state_key`, when not None,
    identifies the subtree at a path up to binder renaming: equal keys must
    generate identical subtrees; it powers cycle detection.
    """

    def expand(self, path: Path):
        raise NotImplementedError

    def state_key(self, path: Path):
        return None

    def free_names(self, path: Path) -> Optional[frozenset[str]]:
        return None

    def var_role(self, path: Path, name: str):
        """Renaming-stable identity of a variable visible at `path`."""
        return name

    def subtree(self, path: Path) -> "TreeGen":
        return _Shifted(self, path) if path else self


class _Shifted(TreeGen):
    def __init__(self, base: TreeGen, prefix: Path):
        self.base = base
        self.prefix = tuple(prefix)

    def expand(self, path: Path):
        return self.base.expand(self.prefix + tuple(path))

    def state_key(self, path: Path):
        return self.base.state_key(self.prefix + tuple(path))

    def free_names(self, path: Path):
        return self.base.free_names(self.prefix + tuple(path))

    def var_role(self, path: Path, name: str):
        return self.base.var_role(self.prefix + tuple(path), name)

    def subtree(self, path: Path) -> TreeGen:
        return _Shifted(self.base, self.prefix + tuple(path))


class TreeTermGen(TreeGen):
    """Bohm tree of a term, head-reducing with a fixed fuel at each node."""

    def __init__(self, term: Term, fuel: int = 100):
        self.term = term
        self.fuel = fuel
        # path -> (kind, payload); payload for nodes: (GenNode, args, stack, used)
        self._memo: dict[Path, tuple] = {}

    def _node(self, path: Path):
        if path in self._memo:
            return self._memo[path]
        if not path:
            subterm, stack, used = self.term, (), set(free_vars(self.term))
        else:
            parent = self._node(path[:-1])
            if parent[0] != "node":
                raise ValueError(f"no node at {path}")
            _, args, stack, used = parent[1]
            if path[-1] >= len(args):
                raise ValueError(f"no child {path[-1]} at {path[:-1]}")
            subterm = args[path[-1]]
        result = head_reduce(subterm, self.fuel)
        if isinstance(result, OutOfFuel):
            kind = "omega" if result.looped else "unresolved"
            entry = (kind, debruijn_key(subterm, stack))
        else:
            binders, args2, used2 = [], list(result.args), set(used)
            renames = []
            for b in result.binders:
                nb = fresh_name(b, used2)
                used2.add(nb)
                binders.append(nb)
                if nb != b:
                    renames.append((b, nb))
            if renames:
                from .terms import subst

                for i, a in enumerate(args2):
                    for b, nb in renames:
                        a = subst(a, b, Var(nb))
                    args2[i] = a
            head = result.head
            for b, nb in renames:
                if head == b:
                    head = nb
            desc = GenNode(tuple(binders), head, len(args2))
            entry = (
                "node",
                (desc, tuple(args2), stack + tuple(binders), frozenset(used2)),
                debruijn_key(subterm, stack),
            )
        self._memo[path] = entry
        return entry

    def expand(self, path: Path):
        entry = self._node(path)
        if entry[0] == "omega":
            return GEN_OMEGA
        if entry[0] == "unresolved":
            return GEN_UNRESOLVED
        return entry[1][0]

    def state_key(self, path: Path):
        entry = self._node(path)
        return ("term", entry[2] if entry[0] == "node" else entry[1], entry[0])

    def free_names(self, path: Path):
        if not path:
            return frozenset(free_vars(self.term))
        parent = self._node(path[:-1])
        _, args, stack, _ = parent[1]
        return frozenset(free_vars(args[path[-1]]))

    def var_role(self, path: Path, name: str):
        entry = self._node(path)
        stack = entry[1][2] if entry[0] == "node" else ()
        # role stable under renaming: distance from the innermost binder
        for i, b in enumerate(reversed(stack)):
            if b == name:
                return ("up", i)
        return ("glob", name)


class TreeOfBT(TreeGen):
    """Wrap a finite tree as a generator (leaves are genuine Omegas)."""

    def __init__(self, tree: BohmTree):
        self.tree = tree

    def _at(self, path: Path) -> BohmTree:
        node = self.tree
        for i in path:
            if isinstance(node, OmegaLeaf):
                raise ValueError(f"no node at {path}")
            node = node.children[i]
        return node

    def expand(self, path: Path):
        node = self._at(path)
        if isinstance(node, OmegaLeaf):
            return GEN_OMEGA
        return GenNode(node.binders, node.head, len(node.children))

    def state_key(self, path: Path):
        return ("bt", path)

    def free_names(self, path: Path):
        node = self._at(path)
        out: set[str] = set()

        def visit(n: BohmTree, bound: frozenset[str]) -> None:
            if isinstance(n, OmegaLeaf):
                return
            bound2 = bound | set(n.binders)
            if n.head not in bound2:
                out.add(n.head)
            for c in n.children:
                visit(c, bound2)

        visit(node, frozenset())
        return frozenset(out)


def as_gen(x: Union[BohmTree, TreeGen]) -> TreeGen:
    if isinstance(x, (OmegaLeaf, BTNode)):
        return TreeOfBT(x)
    return x


def truncate(gen: TreeGen, depth: int) -> BohmTree:
    """Depth-`depth` truncation; unresolved and cut positions become Omega."""

    def visit(path: Path) -> BohmTree:
        if len(path) >= depth:
            return OMEGA_LEAF
        desc = gen.expand(path)
        if not isinstance(desc, GenNode):
            return OMEGA_LEAF
        return BTNode(
            desc.binders,
            desc.head,
            tuple(visit(path + (i,)) for i in range(desc.arity)),
        )

    return visit(())


def bt(t: Term, depth: int, fuel: int = 100) -> BohmTree:
    """Bohm tree of a term, truncated at `depth` with per-node `fuel`."""
    return truncate(TreeTermGen(t, fuel), depth)


# ---------------------------------------------------------------------------
# Inclusion and alpha equality

def _match_heads(hu, hv) -> bool:
    return hu == hv


def _head_id(head: str, env: dict[str, object]):
    return env.get(head, ("fv", head))


def bt_alpha_eq(u: BohmTree, v: BohmTree) -> bool:
    """Structural equality modulo renaming of binders."""

    def rec(a: BohmTree, b: BohmTree, ea: dict, eb: dict, ctr: itertools.count) -> bool:
        ou, ov = isinstance(a, OmegaLeaf), isinstance(b, OmegaLeaf)
        if ou or ov:
            return ou and ov
        if len(a.binders) != len(b.binders) or len(a.children) != len(b.children):
            return False
        ea2, eb2 = dict(ea), dict(eb)
        for x, y in zip(a.binders, b.binders):
            i = next(ctr)
            ea2[x] = i
            eb2[y] = i
        if _head_id(a.head, ea2) != _head_id(b.head, eb2):
            return False
        return all(
            rec(ca, cb, ea2, eb2, ctr) for ca, cb in zip(a.children, b.children)
        )

    return rec(u, v, {}, {}, itertools.count())


def bt_subset(u: BohmTree, v: BohmTree) -> bool:
    """Inclusion of finite trees: Omega below everything, shapes match above."""

    def rec(a: BohmTree, b: BohmTree, ea: dict, eb: dict, ctr: itertools.count) -> bool:
        if isinstance(a, OmegaLeaf):
            return True
        if isinstance(b, OmegaLeaf):
            return False
        if len(a.binders) != len(b.binders) or len(a.children) != len(b.children):
            return False
        ea2, eb2 = dict(ea), dict(eb)
        for x, y in zip(a.binders, b.binders):
            i = next(ctr)
            ea2[x] = i
            eb2[y] = i
        if _head_id(a.head, ea2) != _head_id(b.head, eb2):
            return False
        return all(
            rec(ca, cb, ea2, eb2, ctr) for ca, cb in zip(a.children, b.children)
        )

    return rec(u, v, {}, {}, itertools.count())


# ---------------------------------------------------------------------------
# Infinite eta expansion (depth-bounded)

@dataclass
class EtaReport:
    holds: bool
    depth: int
    omega_matches: int = 0


class _VLeaf:
    """A virtual variable leaf synthesised by the eta rules."""

    def __init__(self, head_id: int):
        self.head_id = head_id


def _resolve(side):
    """Return (kind, binders, raw_head, arity, path); raw_head is a name
    for generator nodes and an allocated id for virtual leaves."""
    if isinstance(side, _VLeaf):
        return ("node", (), side.head_id, 0, None)
    gen, path = side
    desc = gen.expand(path)
    if isinstance(desc, GenOmega):
        return ("omega", (), None, 0, path)
    if isinstance(desc, GenUnresolved):
        return ("unresolved", (), None, 0, path)
    return ("node", desc.binders, desc.head, desc.arity, path)


def _resolved_head(raw, env: dict[str, object]):
    return raw if isinstance(raw, int) else _head_id(raw, env)


def geetinf_report(
    u: Union[BohmTree, TreeGen],
    v: Union[BohmTree, TreeGen],
    depth: int,
) -> EtaReport:
    """Decide  u >=eta-inf v  to the given depth (cut assumed to hold)."""
    gu, gv = as_gen(u), as_gen(v)
    ctr = itertools.count()
    report = EtaReport(True, depth)

    def rec(su, eu, sv, ev, d) -> bool:
        if d <= 0:
            return True
        ku, bu, hu, au, pu = _resolve(su)
        kv, bv, hv, av, pv = _resolve(sv)
        if ku == "unresolved" or kv == "unresolved":
            return False
        if ku == "omega" or kv == "omega":
            if ku == "omega" and kv == "omega":
                report.omega_matches += 1
                return True
            return False
        m = len(bu) - len(bv)
        if m < 0 or au - av != m:
            return False
        eu2, ev2 = dict(eu), dict(ev)
        extra_ids = []
        for i in range(len(bu)):
            ident = next(ctr)
            eu2[bu[i]] = ident
            if i < len(bv):
                ev2[bv[i]] = ident
            else:
                extra_ids.append(ident)
        if _resolved_head(hu, eu2) != _resolved_head(hv, ev2):
            return False
        for i in range(au):
            cu = (su[0], pu + (i,))
            if i < av:
                cv = (sv[0], pv + (i,))
            else:
                cv = _VLeaf(extra_ids[i - av])
            if not rec(cu, eu2, cv, ev2, d - 1):
                return False
        return True

    report.holds = rec((gu, ()), {}, (gv, ()), {}, depth)
    return report


def geetinf(
    u: Union[BohmTree, TreeGen], v: Union[BohmTree, TreeGen], depth: int
) -> bool:
    return geetinf_report(u, v, depth).holds


# ---------------------------------------------------------------------------
# Finiteness classes

@dataclass
class BTClass:
    """Classification report for a finite tree.

    `realized_bound[n]` is the largest relative occurrence depth
    (occurrence depth minus binding depth) among variables abstracted at
    depth n; it is the pointwise-maximal quasi-finiteness witness for the
    tree.  Free variables count as abstracted at depth 0.
    """

    finite: bool
    omega_count: int
    omega_by_depth: dict[int, int]
    omega_at_every_depth: bool
    realized_bound: dict[int, int]
    violations: list[tuple[str, int, int]]
    quasi_finite: bool

    @property
    def label(self) -> str:
        if not self.quasi_finite:
            return "omega-finite" if not self.omega_at_every_depth else "none"
        return "finite"


def classify(
    x: BohmTree, gbound: Optional[Callable[[int], int] | dict[int, int]] = None
) -> BTClass:
    bound_fn: Optional[Callable[[int], int]] = None
    if gbound is not None:
        bound_fn = gbound.get if isinstance(gbound, dict) else gbound

    omega_by_depth: dict[int, int] = {}
    realized: dict[int, int] = {}
    violations: list[tuple[str, int, int]] = []
    max_depth = 0

    def visit(node: BohmTree, depth: int, binder_depth: dict[str, int]) -> None:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        if isinstance(node, OmegaLeaf):
            omega_by_depth[depth] = omega_by_depth.get(depth, 0) + 1
            return
        env = dict(binder_depth)
        for b in node.binders:
            env[b] = depth
        nd = env.get(node.head, 0)
        rel = depth - nd
        realized[nd] = max(realized.get(nd, 0), rel)
        if bound_fn is not None:
            limit = bound_fn(nd)
            if limit is not None and rel > limit:
                violations.append((node.head, nd, depth))
        for c in node.children:
            visit(c, depth + 1, env)

    visit(x, 0, {})
    total = sum(omega_by_depth.values())
    every = (
        total > 0
        and max_depth >= 1
        and all(omega_by_depth.get(d, 0) >= 1 for d in range(1, max_depth + 1))
    )
    return BTClass(
        finite=True,
        omega_count=total,
        omega_by_depth=omega_by_depth,
        omega_at_every_depth=every,
        realized_bound=realized,
        violations=violations,
        quasi_finite=not violations,
    )


def quasi_finite_to_depth(
    x: Union[BohmTree, TreeGen],
    depth: int,
    gbound: Optional[Callable[[int], int] | dict[int, int]] = None,
) -> tuple[bool, str]:
    """Check quasi-finiteness evidence on the depth-`depth` truncation.

    Flags an Omega at every depth (not Omega-finite as a prefix trend) and
    realized occurrence bounds that still grow between depth-1 and depth
    (no stable witness).  Bounded evidence only, never a proof.
    """
    gen = as_gen(x)
    deep = classify(truncate(gen, depth), gbound)
    if deep.violations:
        v = deep.violations[0]
        return False, f"occurrence bound violated for {v[0]} (depth {v[2]})"
    if deep.omega_at_every_depth:
        return False, "omega count grows with depth"
    if depth >= 2:
        shallow = classify(truncate(gen, depth - 1))
        for n, r in deep.realized_bound.items():
            if n <= depth - 2 - r and shallow.realized_bound.get(n, 0) < r:
                return False, f"occurrence bound for depth-{n} binders still growing"
    return True, "ok"


# ---------------------------------------------------------------------------
# Distribution of eta-expansion over inclusion

class Direction(Enum):
    LE_OVER_QF = "le_qf"
    GE_OVER_QF = "ge_qf"
    GE_OVER_F = "ge_f"


class DistributeError(ValueError):
    def __init__(self, path: Path, reason: str):
        super().__init__(f"at node {list(path)}: {reason}")
        self.path = path
        self.reason = reason


def _leaf(name: str) -> BTNode:
    return BTNode((), name, ())


def distribute(
    x: BohmTree, u: BohmTree, v: BohmTree, direction: Direction
) -> BohmTree:
    """Construct Y with  x <=eta-inf Y subset v  (LE direction) or
    x >=eta-inf Y subset v  (GE directions), assuming x subset u and
    u <=eta-inf v (LE) or u >=eta-inf v (GE) on the supplied finite trees."""
    if not bt_subset(x, u):
        raise DistributeError((), "x is not included in u")

    le = direction is Direction.LE_OVER_QF

    def rec(xn: BohmTree, un: BohmTree, vn: BohmTree, path: Path) -> BohmTree:
        if isinstance(xn, OmegaLeaf):
            return OMEGA_LEAF
        assert isinstance(un, BTNode)
        if isinstance(vn, OmegaLeaf):
            raise DistributeError(path, "v is Omega where u is a node")
        if le:
            k = len(vn.binders) - len(un.binders)
            if k < 0 or len(vn.children) - len(un.children) != k:
                raise DistributeError(path, "v is not an eta-expansion of u here")
            m = len(un.children)
            kids = [
                rec(xn.children[i], un.children[i], vn.children[i], path + (i,))
                for i in range(m)
            ]
            kids.extend(vn.children[m:])
            return BTNode(vn.binders, vn.head, tuple(kids))
        k = len(un.binders) - len(vn.binders)
        if k < 0 or len(un.children) - len(vn.children) != k:
            raise DistributeError(path, "u is not an eta-expansion of v here")
        m = len(vn.children)
        for i in range(k):
            expanded = xn.children[m + i]
            want = _leaf(xn.binders[len(vn.binders) + i])
            if not geetinf(expanded, want, height(expanded) + 1):
                raise DistributeError(
                    path + (m + i,),
                    "x does not eta-expand the variable required here",
                )
        kids = tuple(
            rec(xn.children[i], un.children[i], vn.children[i], path + (i,))
            for i in range(m)
        )
        return BTNode(vn.binders, vn.head, kids)

    return rec(x, u, v, ())


# ---------------------------------------------------------------------------
# Bounded observational-order check

class HStar(Enum):
    CONFIRMED = "confirmed"
    REFUTED = "refuted"
    UNKNOWN = "unknown"


_REF, _UNK, _CONF = 0, 1, 2


def hstar_leq(m: Term, n: Term, depth: int, fuel: int = 100) -> HStar:
    """Search to `depth` for trees U, V with BT(m) <=eta U subset V >=eta BT(n).

    Confirmed means the joint witness closes to the explored depth; Refuted
    means a finite structural obstruction between resolved head-normal
    forms (or a proven-divergent side); Unknown otherwise.
    """
    gm, gn = TreeTermGen(m, fuel), TreeTermGen(n, fuel)
    ctr = itertools.count()

    def rec(sm, em, sn, en, d) -> int:
        if d <= 0:
            return _CONF
        km, bm, hm, am, pm = _resolve(sm)
        kn, bn, hn, an, pn = _resolve(sn)
        if km == "omega":
            return _CONF
        if km == "unresolved":
            return _UNK
        if kn == "omega":
            return _REF
        if kn == "unresolved":
            return _UNK
        n1, j = len(bm), am
        n2, kk = len(bn), an
        if n2 - n1 != kk - j:
            return _REF
        m1 = max(0, n2 - n1)
        em2, en2 = dict(em), dict(en)
        ids = [next(ctr) for _ in range(n1 + m1)]
        for i in range(n1):
            em2[bm[i]] = ids[i]
        for i in range(n2):
            en2[bn[i]] = ids[i]
        if _resolved_head(hm, em2) != _resolved_head(hn, en2):
            return _REF
        verdict = _CONF
        for c in range(j + m1):
            cm = (sm[0], pm + (c,)) if c < j else _VLeaf(ids[n1 + c - j])
            cn = (sn[0], pn + (c,)) if c < kk else _VLeaf(ids[n2 + c - kk])
            r = rec(cm, em2, cn, en2, d - 1)
            if r == _REF:
                return _REF
            verdict = min(verdict, r)
        return verdict

    out = rec((gm, ()), {}, (gn, ()), {}, depth)
    return {_REF: HStar.REFUTED, _UNK: HStar.UNKNOWN, _CONF: HStar.CONFIRMED}[out]
