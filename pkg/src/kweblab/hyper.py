"""Hyperimmunity witnesses: chains, labeled trees and their decorations.

A chain witness exhibits, to a finite horizon N, a sequence (alpha_n) and
a bound table g with  alpha_n = a_1 => ... => a_g(n) => tail  and
alpha_{n+1} in the union of the a_k.  A Valid verdict always means "valid
to horizon N": hyperimmunity itself, a statement over all recursive
bounds, is never claimed; searches report found / none-within-budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .kweb import Antichain, Element, KModel, WindowExhausted, elem_from_json, elem_key, elem_to_json


# ---------------------------------------------------------------------------
# Bound tables

@dataclass(frozen=True)
class GTable:
    """The bound g as an explicit finite object: a table or a named preset.

    Recursiveness is vacuous at finite horizons, so presets exist only for
    convenience and reporting.
    """

    kind: str  # "table" | "const" | "id" | "poly"
    values: tuple[int, ...] = ()
    k: int = 0
    coeffs: tuple[int, ...] = ()

    def __call__(self, n: int) -> int:
        if self.kind == "table":
            if n >= len(self.values):
                raise IndexError(f"g table exhausted at index {n}")
            return self.values[n]
        if self.kind == "const":
            return self.k
        if self.kind == "id":
            return max(1, n)
        if self.kind == "poly":
            return sum(c * n**i for i, c in enumerate(self.coeffs))
        raise ValueError(f"unknown g kind {self.kind}")

    @staticmethod
    def table(values: Sequence[int]) -> "GTable":
        return GTable("table", values=tuple(values))

    @staticmethod
    def const(k: int) -> "GTable":
        return GTable("const", k=k)

    @staticmethod
    def parse(text: str) -> "GTable":
        if text == "id":
            return GTable("id")
        if text.startswith("const:"):
            return GTable.const(int(text.split(":", 1)[1]))
        if text.startswith("poly:"):
            return GTable("poly", coeffs=tuple(int(c) for c in text.split(":")[1].split(",")))
        if text.startswith("table:"):
            with open(text.split(":", 1)[1]) as fh:
                return GTable.table(json.load(fh))
        return GTable.table([int(c) for c in text.split(",")])

    def to_json(self):
        if self.kind == "table":
            return list(self.values)
        if self.kind == "const":
            return {"preset": "const", "k": self.k}
        if self.kind == "id":
            return {"preset": "id"}
        return {"preset": "poly", "coeffs": list(self.coeffs)}

    @staticmethod
    def from_json(data) -> "GTable":
        if isinstance(data, list):
            return GTable.table(data)
        if data["preset"] == "const":
            return GTable.const(data["k"])
        if data["preset"] == "id":
            return GTable("id")
        return GTable("poly", coeffs=tuple(data["coeffs"]))


# ---------------------------------------------------------------------------
# Chain witnesses

@dataclass
class ChainWitness:
    g: GTable
    alphas: list[Element]  # length >= N + 1
    N: int

    def to_json(self) -> dict:
        return {
            "g": self.g.to_json(),
            "alphas": [elem_to_json(a) for a in self.alphas],
            "N": self.N,
        }

    @staticmethod
    def from_json(data: dict) -> "ChainWitness":
        return ChainWitness(
            GTable.from_json(data["g"]),
            [elem_from_json(a) for a in data["alphas"]],
            data["N"],
        )

    @staticmethod
    def load(path: str) -> "ChainWitness":
        with open(path) as fh:
            return ChainWitness.from_json(json.load(fh))


@dataclass
class Valid:
    horizon: int


@dataclass
class Invalid:
    n: int
    reason: str


def check_chain(model: KModel, w: ChainWitness) -> Union[Valid, Invalid]:
    """Verify the witness invariant for all n < N."""
    if w.N < 1:
        return Invalid(0, "horizon must be >= 1")
    if len(w.alphas) < w.N + 1:
        return Invalid(0, f"need {w.N + 1} chain elements, got {len(w.alphas)}")
    alphas = [model.canonicalize(a) for a in w.alphas]
    for n in range(w.N):
        gn = w.g(n)
        premises, _tail = model.unfold(alphas[n], gn)
        if not any(alphas[n + 1] == e for a in premises for e in a):
            return Invalid(n, f"{alphas[n + 1]} not among the first {gn} premises of {alphas[n]}")
    return Valid(w.N)


@dataclass
class Found:
    witness: ChainWitness


@dataclass
class NoneWithinBudget:
    starts: int


def search_chain(
    model: KModel,
    g: GTable,
    N: int,
    size: int,
    level: int = 1,
) -> Union[Found, NoneWithinBudget]:
    """Exhaustive chain search over start elements of bounded size.

    Branches whose unfolding leaves the atom window are pruned, keeping
    NoneWithinBudget honest as a budget-relative verdict.
    """
    starts = model.enumerate_elements(level, size)

    def extend(chain: list[Element]) -> bool:
        n = len(chain) - 1
        if n >= N:
            return True
        try:
            premises, _ = model.unfold(chain[-1], g(n))
        except WindowExhausted:
            return False
        seen = set()
        for a in premises:
            for cand in a:
                if cand in seen:
                    continue
                seen.add(cand)
                chain.append(cand)
                if extend(chain):
                    return True
                chain.pop()
        return False

    for start in starts:
        chain = [start]
        if extend(chain):
            return Found(ChainWitness(g, chain, N))
    return NoneWithinBudget(len(starts))


# ---------------------------------------------------------------------------
# Labeled trees and decorations

Node = tuple[int, ...]


@dataclass
class NatTree:
    """Finitely branching tree of integer words with an integer label map.

    children_count(node) gives the branching; child letters are 1-based.
    """

    children_count: Callable[[Node], int]
    label: Callable[[Node], int]

    def nodes_at_depth(self, depth: int) -> list[Node]:
        layer: list[Node] = [()]
        for _ in range(depth):
            nxt = []
            for node in layer:
                nxt.extend(node + (i,) for i in range(1, self.children_count(node) + 1))
            layer = nxt
        return layer


Decoration = dict[Node, Element]


def validate_decoration(model: KModel, tree: NatTree, dec: Decoration) -> Union[Valid, Invalid]:
    """Check the decoration condition against the tree's labels."""
    for mu in sorted(dec, key=lambda n: (len(n), n)):
        if not mu:
            continue
        nu = mu[:-1]
        if nu not in dec:
            return Invalid(len(mu), f"father of {mu} undecorated")
        t = tree.label(mu)
        try:
            premises, _ = model.unfold(dec[nu], t)
        except WindowExhausted:
            return Invalid(len(mu), f"cannot unfold decoration of {nu} by {t}")
        if t == 0 or not any(dec[mu] == e for e in premises[t - 1]):
            return Invalid(len(mu), f"{dec[mu]} not in premise {t} of {dec[nu]}")
    return Valid(max((len(n) for n in dec), default=0))


def chain_to_tree(model: KModel, w: ChainWitness) -> tuple[NatTree, Decoration]:
    """The g-bounded prefix tree with the inductive partial decoration.

    Labels are the child letters (the unfolding position used); the root is
    labeled 0.  Decorated depth-d nodes all carry alpha_d.
    """
    verdict = check_chain(model, w)
    if isinstance(verdict, Invalid):
        raise ValueError(f"invalid witness at n={verdict.n}: {verdict.reason}")
    g, N = w.g, w.N
    alphas = [model.canonicalize(a) for a in w.alphas]

    def children_count(node: Node) -> int:
        return g(len(node)) if len(node) < N else 0

    def label(node: Node) -> int:
        return node[-1] if node else 0

    tree = NatTree(children_count, label)
    dec: Decoration = {(): alphas[0]}
    layer: list[Node] = [()]
    for d in range(N):
        premises, _ = model.unfold(alphas[d], g(d))
        good = [i for i in range(1, g(d) + 1) if any(alphas[d + 1] == e for e in premises[i - 1])]
        nxt = []
        for node in layer:
            for i in good:
                child = node + (i,)
                dec[child] = alphas[d + 1]
                nxt.append(child)
        layer = nxt
    return tree, dec


@dataclass
class NoInfiniteBranchWithinDepth:
    depth: int
    reached: int


def tree_to_chain(
    model: KModel, tree: NatTree, dec: Decoration, depth: int
) -> Union[ChainWitness, NoInfiniteBranchWithinDepth]:
    """Extract a chain witness from a decorated branch of the given depth.

    The bound g(n) is the maximal label on tree depth n+1, as the branch's
    own letters are majored by it.
    """
    best: list[Node] = []

    def dfs(node: Node, branch: list[Node]) -> bool:
        nonlocal best
        if len(branch) > len(best):
            best = list(branch)
        if len(branch) - 1 >= depth:
            return True
        for i in range(1, tree.children_count(node) + 1):
            child = node + (i,)
            if child in dec:
                branch.append(child)
                if dfs(child, branch):
                    return True
                branch.pop()
        return False

    if () not in dec or not dfs((), [()]):
        return NoInfiniteBranchWithinDepth(depth, len(best) - 1)
    branch = best
    g_values = []
    layer: list[Node] = [()]
    for n in range(depth):
        if layer and len(layer) <= 4096:
            nxt = []
            for node in layer:
                nxt.extend(node + (i,) for i in range(1, tree.children_count(node) + 1))
            layer = nxt
            labels = [tree.label(mu) for mu in layer]
        else:
            # layer too wide to enumerate: major the branch by its decorated
            # cousins at this depth, still a recursive bound over the letters
            layer = []
            labels = [tree.label(mu) for mu in dec if len(mu) == n + 1]
        g_values.append(max(labels) if labels else 0)
    alphas = [dec[mu] for mu in branch]
    return ChainWitness(GTable.table(g_values), alphas, depth)


# ---------------------------------------------------------------------------
# Builtin witnesses

def builtin_witness(model: KModel, N: int = 10) -> ChainWitness:
    """The characteristic non-well-founded chain of a builtin model."""
    from .kweb import Atom, hf_atom

    name = model.name
    if name == "dstar":
        alphas = [Atom("p") if i % 2 == 0 else Atom("q") for i in range(N + 1)]
        return ChainWitness(GTable.const(1), alphas, N)
    if name == "park":
        return ChainWitness(GTable.const(1), [Atom("*")] * (N + 1), N)
    if name == "zbar":
        return ChainWitness(GTable.const(1), [Atom(str(-i)) for i in range(N + 1)], N)
    if name == "hf":
        if model.window is None or model.window < N + 1:
            raise ValueError(f"hf table too short for horizon {N}")
        table = []
        for n in range(N):
            j = 1
            while hf_atom(n, j + 1) in model.atoms:
                j += 1
            table.append(j)
        alphas = [Atom(hf_atom(i, 1)) for i in range(N + 1)]
        return ChainWitness(GTable.table(table), alphas, N)
    raise ValueError(f"no builtin witness for model {name!r}")
