"""Partial K-model webs, their completions, and the example models.

A model is a base poset of atoms plus a partial injection j from
(antichain, element) pairs onto the atoms.  Elements of the completion are
finite syntax trees over the atoms; membership in a completion level is
computed, not stored.  An arrow whose (premise, conclusion) pair lies in
Dom(j) is canonically rewritten to the corresponding atom.

Models with an infinite intended base (the integer and functional
examples) carry a bounded atom window; atoms at the edge have no
j-preimage and unfolding them raises WindowExhausted instead of wrapping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union


class WindowExhausted(Exception):
    def __init__(self, atom: str):
        super().__init__(f"atom {atom!r} has no unfolding inside the declared window")
        self.atom = atom


# ---------------------------------------------------------------------------
# Elements

@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Antichain:
    elems: tuple["Element", ...]

    def __str__(self) -> str:
        return "{" + ",".join(str(e) for e in self.elems) + "}"

    def __iter__(self):
        return iter(self.elems)

    def __len__(self) -> int:
        return len(self.elems)


@dataclass(frozen=True)
class Arrow:
    premise: Antichain
    conclusion: "Element"

    def __str__(self) -> str:
        return f"{self.premise} -> {self.conclusion}"


Element = Union[Atom, Arrow]

EMPTY = Antichain(())


def elem_size(e: Element) -> int:
    if isinstance(e, Atom):
        return 1
    return 1 + sum(elem_size(x) for x in e.premise) + elem_size(e.conclusion)


def elem_key(e: Element):
    """Total deterministic order on element syntax; size-lexicographic."""
    if isinstance(e, Atom):
        return (elem_size(e), 0, e.name)
    return (
        elem_size(e),
        1,
        tuple(elem_key(x) for x in e.premise),
        elem_key(e.conclusion),
    )


def antichain_of(elems: Iterable[Element]) -> Antichain:
    """Unordered collection as a deterministic tuple (no order pruning)."""
    return Antichain(tuple(sorted(set(elems), key=elem_key)))


def elem_to_json(e: Element):
    if isinstance(e, Atom):
        return e.name
    return {"arrow": [[elem_to_json(x) for x in e.premise], elem_to_json(e.conclusion)]}


def elem_from_json(data) -> Element:
    if isinstance(data, str):
        return Atom(data)
    prem, concl = data["arrow"]
    return Arrow(antichain_of(elem_from_json(x) for x in prem), elem_from_json(concl))


def parse_element(text: str) -> Element:
    """Parse  elt ::= '{' [elt (',' elt)*] '}' '->' elt | atom | '(' elt ')'."""
    pos = 0

    def skip():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def atom_name() -> str:
        nonlocal pos
        skip()
        start = pos
        if pos < len(text) and text[pos] == "*":
            pos += 1
            return "*"
        if pos < len(text) and text[pos] == "-":
            pos += 1
        while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
            pos += 1
        if pos == start:
            raise ValueError(f"expected atom at {start}")
        return text[start:pos]

    def elt() -> Element:
        nonlocal pos
        skip()
        if pos < len(text) and text[pos] == "(":
            pos += 1
            e = elt()
            skip()
            if pos >= len(text) or text[pos] != ")":
                raise ValueError(f"expected ')' at {pos}")
            pos += 1
            return e
        if pos < len(text) and text[pos] == "{":
            pos += 1
            elems = []
            skip()
            if pos < len(text) and text[pos] == "}":
                pos += 1
            else:
                while True:
                    elems.append(elt())
                    skip()
                    if pos < len(text) and text[pos] == ",":
                        pos += 1
                        continue
                    if pos < len(text) and text[pos] == "}":
                        pos += 1
                        break
                    raise ValueError(f"expected ',' or '}}' at {pos}")
            skip()
            if text[pos : pos + 2] != "->":
                raise ValueError(f"expected '->' at {pos}")
            pos += 2
            return Arrow(antichain_of(elems), elt())
        return Atom(atom_name())

    e = elt()
    skip()
    if pos != len(text):
        raise ValueError(f"trailing input at {pos}")
    return e


# ---------------------------------------------------------------------------
# Models

class KModel:
    """A partial K-model (base poset + partial iso j) and query machinery.

    `j` maps (premise antichain, conclusion) pairs over the base to atoms;
    it must be injective, order-reflecting, and surjective onto the atoms
    except for a declared window frontier.
    """

    def __init__(
        self,
        name: str,
        atoms: Sequence[str],
        order: Iterable[tuple[str, str]] = (),
        j: Optional[dict] = None,
        window: Optional[int] = None,
        frontier: Iterable[str] = (),
    ):
        self.name = name
        self.atoms = tuple(atoms)
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("invalid spec: duplicate atoms")
        self._le = self._closure(order)
        self._leq_memo: dict = {}
        self._enum_memo: dict = {}
        self.j: dict[tuple[Antichain, Element], str] = {}
        raw = dict(j or {})
        for (prem, concl), atom in raw.items():
            key = (self.normalize_antichain(prem), concl)
            if key in self.j:
                raise ValueError("invalid spec: duplicate j entry")
            self.j[key] = atom
        self.j_inv: dict[str, tuple[Antichain, Element]] = {}
        for key, atom in self.j.items():
            if atom in self.j_inv:
                raise ValueError("invalid spec: j is not injective")
            self.j_inv[atom] = key
        self.frontier = frozenset(frontier)
        self.window = window
        missing = set(self.atoms) - set(self.j_inv)
        if missing != set(self.frontier):
            raise ValueError(
                f"invalid spec: j not surjective onto atoms ({sorted(missing)} "
                f"uncovered, declared frontier {sorted(self.frontier)})"
            )
        if self.frontier and window is None:
            raise ValueError("invalid spec: frontier atoms need a declared window")
        self._validate_iso()

    def _closure(self, order) -> frozenset[tuple[str, str]]:
        le = {(a, a) for a in self.atoms}
        for a, b in order:
            if a not in self.atoms or b not in self.atoms:
                raise ValueError(f"invalid spec: order over unknown atoms {(a, b)}")
            le.add((a, b))
        changed = True
        while changed:
            changed = False
            for a, b in list(le):
                for c, d in list(le):
                    if b == c and (a, d) not in le:
                        le.add((a, d))
                        changed = True
        for a, b in le:
            if a != b and (b, a) in le:
                raise ValueError("invalid spec: base order not antisymmetric")
        return frozenset(le)

    def _validate_iso(self) -> None:
        entries = list(self.j.items())
        for (a1, c1), v1 in entries:
            for x in a1:
                self._check_base(x)
            self._check_base(c1)
            for (a2, c2), v2 in entries:
                pair_le = self.leq_antichain(a2, a1) and self.leq(c1, c2)
                atom_le = (v1, v2) in self._le
                if pair_le != atom_le:
                    raise ValueError(
                        f"invalid spec: j not an order iso at {v1!r}, {v2!r}"
                    )

    def _check_base(self, e: Element) -> None:
        if not isinstance(e, Atom) or e.name not in self.atoms:
            raise ValueError(f"invalid spec: j entry uses non-base element {e}")

    # -- order -------------------------------------------------------------

    def leq(self, x: Element, y: Element) -> bool:
        """Order on the completion; premise antichains compare contravariantly.

        Comparisons that would unfold past the window are conservatively
        false.  Self-revisits (possible only on malformed webs) accept, per
        the gfp reading of the completed order.
        """
        key = (x, y)
        memo = self._leq_memo
        if key in memo:
            v = memo[key]
            if v is None:
                return True
            return v
        if isinstance(x, Atom) and isinstance(y, Atom):
            r = (x.name, y.name) in self._le
            memo[key] = r
            return r
        memo[key] = None
        try:
            ax, cx = self.unfold1(x)
            ay, cy = self.unfold1(y)
            r = self.leq_antichain(ay, ax) and self.leq(cx, cy)
        except WindowExhausted:
            r = False
        memo[key] = r
        return r

    def leq_antichain(self, a: Antichain, b: Antichain) -> bool:
        return all(any(self.leq(x, y) for y in b) for x in a)

    def normalize_antichain(self, a: Iterable[Element] | Antichain) -> Antichain:
        """Keep only the maximal elements (canonical antichain of a subset)."""
        elems = sorted(
            {self.canonicalize(e) for e in (a.elems if isinstance(a, Antichain) else a)},
            key=elem_key,
        )
        keep = []
        for e in elems:
            if any(e != f and self.leq(e, f) for f in elems):
                continue
            keep.append(e)
        return Antichain(tuple(keep))

    # -- canonical forms and unfolding ---------------------------------------

    def canonicalize(self, e: Element) -> Element:
        if isinstance(e, Atom):
            if e.name not in self.atoms:
                raise ValueError(f"unknown atom {e.name!r}")
            return e
        prem = self.normalize_antichain(
            Antichain(tuple(self.canonicalize(x) for x in e.premise))
        )
        concl = self.canonicalize(e.conclusion)
        atom = self.j.get((prem, concl))
        if atom is not None:
            return Atom(atom)
        return Arrow(prem, concl)

    def unfold1(self, e: Element) -> tuple[Antichain, Element]:
        if isinstance(e, Arrow):
            return e.premise, e.conclusion
        if e.name in self.frontier:
            raise WindowExhausted(e.name)
        if e.name not in self.j_inv:
            raise ValueError(f"unknown atom {e.name!r}")
        return self.j_inv[e.name]

    def unfold(self, e: Element, n: int) -> tuple[list[Antichain], Element]:
        """Unfold e as  a_1 => ... => a_n => tail  via the web isomorphism."""
        premises = []
        cur = self.canonicalize(e)
        for _ in range(n):
            a, cur = self.unfold1(cur)
            premises.append(a)
        return premises, cur

    def level_of(self, e: Element) -> int:
        if isinstance(e, Atom):
            return 0
        parts = [self.level_of(x) for x in e.premise] + [self.level_of(e.conclusion)]
        return 1 + max(parts, default=0)

    # -- enumeration ---------------------------------------------------------

    def enumerate_elements(self, level: int, size: int) -> tuple[Element, ...]:
        """All canonical elements of E_level with syntax size <= size."""
        key = (level, size)
        if key in self._enum_memo:
            return self._enum_memo[key]
        current: list[Element] = [Atom(a) for a in self.atoms if size >= 1]
        current.sort(key=elem_key)
        for _ in range(level):
            new = list(current)
            seen = set(current)
            for prem in self.enumerate_antichains(current, max_total_size=size - 2):
                psize = sum(elem_size(x) for x in prem)
                for concl in current:
                    if 1 + psize + elem_size(concl) > size:
                        continue
                    if (prem, concl) in self.j:
                        continue
                    arrow = Arrow(prem, concl)
                    if arrow not in seen:
                        seen.add(arrow)
                        new.append(arrow)
            new.sort(key=elem_key)
            current = new
        result = tuple(current)
        self._enum_memo[key] = result
        return result

    def enumerate_antichains(
        self,
        pool: Sequence[Element],
        max_card: Optional[int] = None,
        max_total_size: Optional[int] = None,
    ) -> list[Antichain]:
        """Antichains over `pool` in deterministic order, empty one first."""
        pool = sorted(set(pool), key=elem_key)
        out = [EMPTY]
        stack: list[tuple[list[Element], int, int]] = [([], 0, 0)]
        while stack:
            chosen, start, tsize = stack.pop()
            for i in range(start, len(pool)):
                e = pool[i]
                sz = tsize + elem_size(e)
                if max_total_size is not None and sz > max_total_size:
                    continue
                if any(self.leq(e, f) or self.leq(f, e) for f in chosen):
                    continue
                ext = chosen + [e]
                out.append(Antichain(tuple(ext)))
                if max_card is None or len(ext) < max_card:
                    stack.append((ext, i + 1, sz))
        out.sort(key=lambda a: tuple(elem_key(e) for e in a.elems))
        out.sort(key=lambda a: sum(elem_size(e) for e in a.elems))
        return out

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        data = {
            "atoms": list(self.atoms),
            "order": sorted([a, b] for (a, b) in self._le if a != b),
            "j": [
                {
                    "premise": [elem_to_json(x) for x in prem],
                    "conclusion": elem_to_json(concl),
                    "atom": atom,
                }
                for (prem, concl), atom in sorted(
                    self.j.items(), key=lambda kv: kv[1]
                )
            ],
        }
        if self.window is not None:
            data["window"] = self.window
        return data

    @classmethod
    def from_json(cls, data: dict, name: str = "model") -> "KModel":
        j = {}
        for entry in data.get("j", []):
            prem = antichain_of(elem_from_json(x) for x in entry["premise"])
            concl = elem_from_json(entry["conclusion"])
            j[(prem, concl)] = entry["atom"]
        atoms = data["atoms"]
        covered = {entry["atom"] for entry in data.get("j", [])}
        frontier = [a for a in atoms if a not in covered]
        return cls(
            name,
            atoms,
            [tuple(p) for p in data.get("order", [])],
            j,
            window=data.get("window"),
            frontier=frontier,
        )

    @classmethod
    def load(cls, path: str, name: Optional[str] = None) -> "KModel":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_json(data, name or path)

    def __repr__(self) -> str:
        return f"<KModel {self.name}: {len(self.atoms)} atoms>"


# ---------------------------------------------------------------------------
# Builtin models

def _a(*names: str) -> Antichain:
    return antichain_of(Atom(n) for n in names)


def dinf() -> KModel:
    return KModel("dinf", ["*"], j={(EMPTY, Atom("*")): "*"})


def park() -> KModel:
    return KModel("park", ["*"], j={(_a("*"), Atom("*")): "*"})


def dstar() -> KModel:
    return KModel(
        "dstar",
        ["p", "q"],
        order=[("p", "q")],
        j={(_a("p"), Atom("q")): "q", (_a("q"), Atom("p")): "p"},
    )


def omega_bar(window: int = 8) -> KModel:
    atoms = [str(n) for n in range(window + 1)]
    j = {
        (_a(*[str(k) for k in range(n)]), Atom(str(n))): str(n)
        for n in range(window + 1)
    }
    return KModel("omegabar", atoms, j=j, window=window)


def z_bar(window: int = 8) -> KModel:
    atoms = [str(n) for n in range(-window, window + 1)]
    j = {
        (_a(str(n)), Atom(str(n + 1))): str(n + 1)
        for n in range(-window, window)
    }
    return KModel("zbar", atoms, j=j, window=window, frontier=[str(-window)])


def hf_atom(n: int, j: int) -> str:
    return f"a{n}_{j}"


def hf(table: Sequence[int]) -> KModel:
    """Functional model for a finite table f (all values >= 1).

    The base carries the minimal order making j an order isomorphism:
    every a{n}_{j} sits below *, since ({a(n+1)_1},*) <= ({},*) holds in
    the exponential order and their images must compare the same way.
    Unfoldings, and hence the chain search, are unaffected.
    """
    if not table or any(v < 1 for v in table):
        raise ValueError("invalid spec: hf table must be non-empty with values >= 1")
    levels = len(table)
    atoms = ["*"]
    for n in range(levels):
        atoms.extend(hf_atom(n, j) for j in range(1, table[n] + 1))
    j: dict = {(EMPTY, Atom("*")): "*"}
    for n in range(levels):
        for k in range(1, table[n]):
            j[(EMPTY, Atom(hf_atom(n, k + 1)))] = hf_atom(n, k)
        if n + 1 < levels:
            j[(_a(hf_atom(n + 1, 1)), Atom("*"))] = hf_atom(n, table[n])
    order = [(a, "*") for a in atoms if a != "*"]
    frontier = [hf_atom(levels - 1, table[levels - 1])]
    return KModel("hf", atoms, order=order, j=j, window=levels, frontier=frontier)


def well_stratified(
    atoms: Sequence[str] | None = None,
    j: Optional[dict] = None,
    order: Iterable[tuple[str, str]] = (),
) -> KModel:
    """A well-stratified partial model: every j premise must be empty."""
    if atoms is None:
        atoms = ["s", "t"]
        j = {(EMPTY, Atom("s")): "t", (EMPTY, Atom("t")): "s"}
    for (prem, _), _atom in (j or {}).items():
        if len(prem) != 0:
            raise ValueError("invalid spec: well-stratified premises must be empty")
    return KModel("wellstrat", atoms, order=order, j=j)


def builtin_model(name: str, window: Optional[int] = None, table=None) -> KModel:
    key = name.lower().replace("-", "").replace("_", "")
    if key == "dinf":
        return dinf()
    if key == "park":
        return park()
    if key == "dstar":
        return dstar()
    if key in ("omegabar", "obar"):
        return omega_bar(window if window is not None else 8)
    if key == "zbar":
        return z_bar(window if window is not None else 8)
    if key == "hf":
        if table is None:
            raise ValueError("hf requires a table of f values")
        return hf(table)
    if key in ("wellstrat", "wellstratified"):
        return well_stratified()
    raise ValueError(f"unknown builtin model {name!r}")


BUILTIN_NAMES = ("dinf", "park", "dstar", "omegabar", "zbar", "hf", "wellstrat")
