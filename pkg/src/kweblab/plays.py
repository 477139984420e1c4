"""Plays over closed Bohm trees and path decorations of their labeled plays.

The play is the justification-pointer tree: player nodes sit at even depth
and own the applications, opponent nodes at odd depth own the
abstractions.  Player labels are application indices in the father's
arity; opponent labels are abstraction indices at the justifying player
node.  A path decoration threads model elements down one branch of the
source tree and induces a decoration of the play, which in turn yields a
chain witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import bohm
from .bohm import (
    BohmTree,
    BTNode,
    OmegaLeaf,
    Path,
    TreeGen,
    as_gen,
    rename_binders_unique,
    truncate,
)
from .hyper import Decoration, NatTree, Valid, Invalid
from .interp import (
    Budget,
    Env,
    HoldsToDepth,
    NotFoundWithinBudget,
    ProvenRegular,
    Refuted,
    member_bt_coind,
    member_bt_ind,
)
from .kweb import Antichain, Element, KModel


@dataclass
class PlayNode:
    polarity: str  # "P" | "O"
    subject: Path  # address in the source Bohm tree
    label: int
    children: list["PlayNode"] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "polarity": self.polarity,
            "subject": list(self.subject),
            "label": self.label,
            "children": [c.to_json() for c in self.children],
        }


@dataclass
class LabeledPlay:
    tree: BohmTree  # renamed, truncated source
    root: PlayNode
    nodes: dict[Path, BTNode]  # subject index
    binder_site: dict[str, tuple[Path, int]]  # binder -> (address, 1-based index)

    def to_text(self) -> str:
        lines: list[str] = []

        def visit(n: PlayNode, indent: int) -> None:
            subj = self.nodes.get(n.subject)
            shown = bohm.format_tree(subj) if subj is not None else "_"
            lines.append("  " * indent + f"{n.polarity}({shown})  l={n.label}")
            for c in n.children:
                visit(c, indent + 1)

        visit(self.root, 0)
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"tree": bohm.format_tree(self.tree), "play": self.root.to_json()}

    def find(self, polarity: str, subject: Path) -> Optional[PlayNode]:
        hit = None

        def visit(n: PlayNode) -> None:
            nonlocal hit
            if hit is None and n.polarity == polarity and n.subject == subject:
                hit = n
                return
            for c in n.children:
                visit(c)

        visit(self.root)
        return hit

    def parent_of(self, node: PlayNode) -> Optional[PlayNode]:
        def visit(n: PlayNode) -> Optional[PlayNode]:
            for c in n.children:
                if c is node:
                    return n
                deep = visit(c)
                if deep is not None:
                    return deep
            return None

        return visit(self.root)


def build_labeled_play(
    x: Union[BohmTree, TreeGen],
    depth: int,
    occurrence_bound: Optional[int] = None,
) -> LabeledPlay:
    """Construct the labeled play of the depth-truncated tree.

    The source must be closed; binders are renamed apart on entry.  When an
    occurrence bound is supplied, a binder occurring deeper below its
    abstraction than the bound is an error (the scan for player sons is
    only safe on quasi-finite trees).
    """
    tree = rename_binders_unique(truncate(as_gen(x), depth))
    nodes: dict[Path, BTNode] = {}
    binder_site: dict[str, tuple[Path, int]] = {}
    occurrences: dict[str, list[Path]] = {}

    def index(node: BohmTree, path: Path, scope: dict[str, int]) -> None:
        if isinstance(node, OmegaLeaf):
            return
        nodes[path] = node
        scope2 = dict(scope)
        for i, b in enumerate(node.binders):
            binder_site[b] = (path, i + 1)
            scope2[b] = len(path)
        if node.head not in scope2:
            raise ValueError(f"open tree: head {node.head!r} unbound at {list(path)}")
        occurrences.setdefault(node.head, []).append(path)
        if occurrence_bound is not None:
            rel = len(path) - scope2[node.head]
            if rel > occurrence_bound:
                raise ValueError(
                    f"occurrence of {node.head!r} at depth {len(path)} exceeds "
                    f"the declared bound {occurrence_bound}"
                )
        for i, c in enumerate(node.children):
            index(c, path + (i,), scope2)

    index(tree, (), {})

    def build_P(path: Path, label: int) -> PlayNode:
        pnode = PlayNode("P", path, label)
        node = nodes.get(path)
        if node is None:
            return pnode
        for i, b in enumerate(node.binders):
            for occ in occurrences.get(b, ()):
                pnode.children.append(build_O(occ, i + 1))
        return pnode

    def build_O(path: Path, label: int) -> PlayNode:
        onode = PlayNode("O", path, label)
        node = nodes[path]
        for i in range(len(node.children)):
            onode.children.append(build_P(path + (i,), i + 1))
        return onode

    root = build_P((), 0)
    return LabeledPlay(tree, root, nodes, binder_site)


def check_play_invariants(play: LabeledPlay) -> list[str]:
    """Alternation, label ranges and node completeness; [] when clean."""
    problems: list[str] = []

    def visit(n: PlayNode, depth: int) -> None:
        want = "P" if depth % 2 == 0 else "O"
        if n.polarity != want:
            problems.append(f"polarity {n.polarity} at play depth {depth}")
        for c in n.children:
            if n.polarity == "P":
                if c.polarity != "O":
                    problems.append("player son is not an opponent")
                site = play.binder_site.get(play.nodes[c.subject].head)
                if site is None or site[0] != n.subject:
                    problems.append(f"opponent {c.subject} not justified by father")
                nb = len(play.nodes[n.subject].binders)
                if not (1 <= c.label <= nb):
                    problems.append(f"opponent label {c.label} out of range {nb}")
            else:
                if c.polarity != "P":
                    problems.append("opponent son is not a player")
                arity = len(play.nodes[n.subject].children)
                if not (1 <= c.label <= arity):
                    problems.append(f"player label {c.label} out of range {arity}")
            visit(c, depth + 1)

    visit(play.root, 0)

    plays_P = set()
    plays_O = set()

    def collect(n: PlayNode) -> None:
        (plays_P if n.polarity == "P" else plays_O).add(n.subject)
        for c in n.children:
            collect(c)

    collect(play.root)
    for path in play.nodes:
        if path not in plays_P:
            problems.append(f"P({list(path)}) missing")
        if path not in plays_O:
            problems.append(f"O({list(path)}) missing")

    def omegas(node: BohmTree, path: Path) -> None:
        if isinstance(node, OmegaLeaf):
            if path not in plays_P:
                problems.append(f"P({list(path)}) missing for an Omega leaf")
            if path in plays_O:
                problems.append(f"O({list(path)}) present for an Omega leaf")
            return
        for i, c in enumerate(node.children):
            omegas(c, path + (i,))

    omegas(play.tree, ())
    return problems


# ---------------------------------------------------------------------------
# Path decorations

@dataclass
class PathDecoration:
    path: list[Path]  # Y_0 .. Y_H (addresses, Y_0 = root)
    alpha_seq: list[Element]  # alpha^0 .. alpha^H
    beta_seq: list[Element]  # beta^0 .. beta^{H-1}
    var_assign: dict[str, Antichain]

    def to_json(self) -> dict:
        from .kweb import elem_to_json

        return {
            "path": [list(p) for p in self.path],
            "alphas": [elem_to_json(a) for a in self.alpha_seq],
            "betas": [elem_to_json(b) for b in self.beta_seq],
            "vars": {
                n: [elem_to_json(e) for e in a] for n, a in self.var_assign.items()
            },
        }


class ConstructionStuck(RuntimeError):
    def __init__(self, n: int, why: str):
        super().__init__(f"path decoration stuck at step {n}: {why}")
        self.n = n


def _accepted(res) -> bool:
    return isinstance(res, (ProvenRegular, HoldsToDepth))


def path_decoration(
    model: KModel,
    x: Union[BohmTree, TreeGen],
    alpha: Element,
    horizon: int,
    budget: Budget,
) -> PathDecoration:
    """Thread a coinductively-provable but inductively-unproven membership
    down one branch, recording the witnessing elements at every step."""
    gen = as_gen(x)
    alpha = model.canonicalize(alpha)
    coind = member_bt_coind(model, (), gen, alpha, budget)
    if not _accepted(coind):
        raise ValueError("precondition: coinductive membership was refuted")
    ind = member_bt_ind(model, (), gen, alpha, budget)
    if not isinstance(ind, NotFoundWithinBudget):
        raise ValueError("precondition: membership is already inductive (no gap)")

    env: dict[str, Antichain] = {}
    path: list[Path] = [()]
    alphas = [alpha]
    betas: list[Element] = []
    cur: Path = ()
    cur_alpha = alpha
    for n in range(horizon):
        desc = gen.expand(cur)
        if not isinstance(desc, bohm.GenNode):
            raise ConstructionStuck(n, "path reached a non-node")
        premises, tail = model.unfold(cur_alpha, len(desc.binders))
        for b, a in zip(desc.binders, premises):
            env[b] = a
        if desc.head not in env:
            raise ConstructionStuck(n, f"head {desc.head!r} unbound (open tree)")
        chosen = None
        for cand in env[desc.head]:
            bs, beta_tail = model.unfold(cand, desc.arity)
            if not model.leq(tail, beta_tail):
                continue
            for j in range(desc.arity):
                for gamma in bs[j]:
                    sub = gen.subtree(cur + (j,))
                    env_list = tuple(sorted(env.items()))
                    ind_j = member_bt_ind(model, env_list, sub, gamma, budget)
                    if not isinstance(ind_j, NotFoundWithinBudget):
                        continue
                    coind_j = member_bt_coind(model, env_list, sub, gamma, budget)
                    if _accepted(coind_j):
                        chosen = (cand, j, gamma)
                        break
                if chosen:
                    break
            if chosen:
                break
        if not chosen:
            raise ConstructionStuck(n, "no child keeps the coinductive/inductive gap")
        cand, j, gamma = chosen
        betas.append(cand)
        cur = cur + (j,)
        path.append(cur)
        alphas.append(gamma)
        cur_alpha = gamma
    return PathDecoration(path, alphas, betas, dict(env))


def decoration_check(
    model: KModel, play: LabeledPlay, pd: PathDecoration
) -> Union[Valid, Invalid]:
    """Materialize the induced play decoration and verify it against labels."""
    horizon = len(pd.beta_seq)
    for n in range(horizon):
        y_next = pd.path[n + 1]
        pnode = play.find("P", y_next)
        if pnode is None:
            return Invalid(n, f"P({list(y_next)}) not in the play")
        lab = pnode.label
        premises, _ = model.unfold(pd.beta_seq[n], lab)
        if lab == 0 or not any(pd.alpha_seq[n + 1] == e for e in premises[lab - 1]):
            return Invalid(n, "alpha^{n+1} not in the labeled premise of beta^n")
        onode = play.find("O", pd.path[n])
        if onode is None:
            return Invalid(n, f"O({list(pd.path[n])}) not in the play")
        parent = play.parent_of(onode)
        if parent is None or parent.polarity != "P":
            return Invalid(n, "opponent node has no player father")
        m_addr = parent.subject
        try:
            m = pd.path.index(m_addr)
        except ValueError:
            return Invalid(n, "justifier is off the decorated path")
        premises, _ = model.unfold(pd.alpha_seq[m], onode.label)
        if onode.label == 0 or not any(
            pd.beta_seq[n] == e for e in premises[onode.label - 1]
        ):
            return Invalid(n, "beta^n not in the labeled premise of alpha^m")
    return Valid(horizon)


def play_decoration(
    play: LabeledPlay, pd: PathDecoration
) -> tuple[NatTree, Decoration]:
    """View the play as a labeled tree with the induced partial decoration.

    Node words index play children 1-based; labels are the play labels.
    Feeding the result to the chain extractor yields a chain witness.
    """
    index: dict[tuple[int, ...], PlayNode] = {}

    def walk(n: PlayNode, word: tuple[int, ...]) -> None:
        index[word] = n
        for i, c in enumerate(n.children):
            walk(c, word + (i + 1,))

    walk(play.root, ())

    def children_count(word):
        return len(index[word].children) if word in index else 0

    def label(word):
        return index[word].label if word else 0

    wanted: dict[tuple[str, Path], Element] = {}
    for i, addr in enumerate(pd.path):
        wanted[("P", addr)] = pd.alpha_seq[i]
        if i < len(pd.beta_seq):
            wanted[("O", addr)] = pd.beta_seq[i]
    dec: Decoration = {}
    for word, node in index.items():
        key = (node.polarity, node.subject)
        if key in wanted:
            dec[word] = wanted[key]
    # keep only the connected decorated prefix rooted at the play root
    dec = {
        w: e
        for w, e in dec.items()
        if all(w[:i] in dec for i in range(len(w)))
    }
    return NatTree(children_count, label), dec
