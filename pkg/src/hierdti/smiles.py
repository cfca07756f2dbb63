"""SMILES front end.

Parses a practical SMILES subset into a :class:`Molecule`: typed atoms,
typed bonds, implicit hydrogens from a fixed valence table and ring flags
from bridge detection.

Aromaticity is taken from the notation as written (lowercase atoms); no
kekulization or aromaticity perception is attempted. Stereo marks and
isotopes are parsed and dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

__all__ = [
    "Atom",
    "Bond",
    "Molecule",
    "SmilesError",
    "UnsupportedToken",
    "UnbalancedRingClosure",
    "UnbalancedParenthesis",
    "Disconnected",
    "ValenceExceeded",
    "parse_smiles",
    "ring_membership",
    "BOND_ORDERS",
]


class SmilesError(ValueError):
    """Base class for every SMILES parsing failure."""


class UnsupportedToken(SmilesError):
    pass


class UnbalancedRingClosure(SmilesError):
    pass


class UnbalancedParenthesis(SmilesError):
    pass


class Disconnected(SmilesError):
    pass


class ValenceExceeded(SmilesError):
    pass


BOND_ORDERS = ("single", "double", "triple", "aromatic")
_BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic",
                 "/": "single", "\\": "single"}
# aromatic bonds count 1 here; aromatic atoms get +1 on top (see _implicit_h)
_ORDER_VALUE = {"single": 1, "double": 2, "triple": 3, "aromatic": 1}

ORGANIC = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
VALENCES = {
    "B": (3,), "C": (4,), "N": (3,), "O": (2,), "P": (3, 5), "S": (2, 4, 6),
    "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

ELEMENTS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu
Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb
Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs
Mt Ds Rg Cn Nh Fl Mc Lv Ts Og
""".split())

_BRACKET_RE = re.compile(
    r"""
    (?P<isotope>\d+)?
    (?P<symbol>[A-Z][a-z]?|[bcnops])
    (?P<chiral>@(?:@|TH[12]|AL[12]|SP[1-3]|TB\d{1,2}|OH\d{1,2})?)?
    (?P<hcount>H\d?)?
    (?P<charge>\+\+|--|[+-]\d*)?
    $""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: Optional[int] = None
    implicit_h: int = 0
    in_ring: bool = False

    @property
    def total_h(self) -> int:
        return self.implicit_h + (self.explicit_h or 0)


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str
    in_ring: bool = False

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""
    _adj: tuple[tuple[tuple[int, int], ...], ...] = field(
        default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for k, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, k))
            adj[bond.b].append((bond.a, k))
        object.__setattr__(self, "_adj", tuple(tuple(x) for x in adj))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> tuple[tuple[int, int], ...]:
        """(neighbor atom, bond index) pairs of atom ``i``."""
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def bond_order_sum(self, i: int) -> int:
        return sum(_ORDER_VALUE[self.bonds[k].order] for _, k in self._adj[i])

    def permuted(self, perm: list[int]) -> "Molecule":
        """Relabel atoms so that old atom ``i`` becomes new atom ``perm[i]``."""
        atoms: list[Optional[Atom]] = [None] * len(self.atoms)
        for old, new in enumerate(perm):
            atoms[new] = self.atoms[old]
        bonds = tuple(replace(b, a=perm[b.a], b=perm[b.b]) for b in self.bonds)
        return Molecule(tuple(atoms), bonds, self.source)  # type: ignore[arg-type]


@dataclass
class _ProtoAtom:
    element: str
    aromatic: bool
    charge: int = 0
    hcount: Optional[int] = None


def _tokenize_bracket(body: str, pos: int) -> _ProtoAtom:
    m = _BRACKET_RE.match(body)
    if m is None:
        raise UnsupportedToken(f"unsupported bracket atom [{body}] at position {pos}")
    symbol = m.group("symbol")
    aromatic = symbol.islower()
    element = symbol.capitalize() if aromatic else symbol
    if not aromatic and element not in ELEMENTS:
        raise UnsupportedToken(f"unknown element symbol {symbol!r} at position {pos}")
    hcount = None
    if m.group("hcount"):
        hcount = int(m.group("hcount")[1:] or 1)
    charge = 0
    c = m.group("charge")
    if c:
        if c in ("++", "--"):
            charge = 2 if c == "++" else -2
        else:
            charge = int(c[1:] or 1) * (1 if c[0] == "+" else -1)
    return _ProtoAtom(element, aromatic, charge, hcount if hcount is not None else 0)


def parse_smiles(s: str) -> Molecule:
    """Parse a SMILES string into a :class:`Molecule`.

    Raises:
        UnsupportedToken: wildcard, reaction arrow, unknown symbol or malformed input.
        UnbalancedRingClosure: an unmatched or ill-formed ring-closure digit.
        UnbalancedParenthesis: unmatched ``(`` or ``)``.
        Disconnected: dot-separated components.
        ValenceExceeded: bond-order sum above the largest valence in the table.
    """
    if not s or not s.strip():
        raise UnsupportedToken("empty SMILES")
    s = s.strip()
    atoms: list[_ProtoAtom] = []
    bonds: dict[tuple[int, int], str] = {}
    bond_list: list[tuple[int, int, str]] = []
    stack: list[Optional[int]] = []
    open_rings: dict[int, tuple[int, Optional[str], int]] = {}
    prev: Optional[int] = None
    pending: Optional[str] = None
    i, n = 0, len(s)

    def add_bond(a: int, b: int, order: Optional[str], pos: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b or key in bonds:
            raise UnbalancedRingClosure(f"duplicate or self bond at position {pos}")
        if order is None:
            order = "aromatic" if atoms[a].aromatic and atoms[b].aromatic else "single"
        bonds[key] = order
        bond_list.append((a, b, order))

    def add_atom(atom: _ProtoAtom, pos: int) -> None:
        nonlocal prev, pending
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending, pos)
        elif pending is not None:
            raise UnsupportedToken(f"bond symbol without a preceding atom at position {pos}")
        prev, pending = idx, None

    while i < n:
        ch = s[i]
        if ch == "[":
            j = s.find("]", i)
            if j < 0:
                raise UnsupportedToken(f"unterminated bracket atom at position {i}")
            add_atom(_tokenize_bracket(s[i + 1:j], i), i)
            i = j + 1
        elif ch in "BCNOPSFI":
            two = s[i:i + 2]
            if two in ("Cl", "Br"):
                add_atom(_ProtoAtom(two, False), i)
                i += 2
            else:
                add_atom(_ProtoAtom(ch, False), i)
                i += 1
        elif ch in "bcnops":
            add_atom(_ProtoAtom(ch.upper(), True), i)
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise UnsupportedToken(f"consecutive bond symbols at position {i}")
            pending = _BOND_SYMBOLS[ch]
            i += 1
        elif ch == "(":
            if prev is None or pending is not None:
                raise UnbalancedParenthesis(f"branch opened without an atom at position {i}")
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise UnbalancedParenthesis(f"unmatched ')' at position {i}")
            if pending is not None:
                raise UnsupportedToken(f"dangling bond before ')' at position {i}")
            prev = stack.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                digits = s[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise UnbalancedRingClosure(f"malformed %nn ring label at position {i}")
                label, width = int(digits), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise UnbalancedRingClosure(f"ring label without an atom at position {i}")
            if label in open_rings:
                other, order, _ = open_rings.pop(label)
                if order is not None and pending is not None and order != pending:
                    raise UnbalancedRingClosure(f"conflicting ring bond orders for label {label}")
                add_bond(other, prev, order or pending, i)
            else:
                open_rings[label] = (prev, pending, i)
            pending = None
            i += width
        elif ch == ".":
            raise Disconnected(f"multi-component SMILES (dot at position {i})")
        elif ch in "*>":
            raise UnsupportedToken(f"unsupported token {ch!r} at position {i}")
        else:
            raise UnsupportedToken(f"unsupported token {ch!r} at position {i}")

    if stack:
        raise UnbalancedParenthesis("unclosed '('")
    if open_rings:
        labels = ", ".join(str(k) for k in sorted(open_rings))
        raise UnbalancedRingClosure(f"unclosed ring label(s): {labels}")
    if pending is not None:
        raise UnsupportedToken("dangling bond at end of input")
    if not atoms:
        raise UnsupportedToken("no atoms")

    bond_objs = tuple(Bond(a, b, order) for a, b, order in bond_list)
    draft = Molecule(tuple(Atom(p.element, p.aromatic) for p in atoms), bond_objs, s)
    atom_ring, bond_ring = ring_membership(draft)
    if not all(_reachable(draft)):
        raise Disconnected("bond graph is not connected")
    # an aromatic-typed bond outside any ring is a plain single bond (biaryl links)
    bond_objs = tuple(
        Bond(b.a, b.b, b.order if (b.order != "aromatic" or r) else "single", r)
        for b, r in zip(bond_objs, bond_ring)
    )
    draft = Molecule(draft.atoms, bond_objs, s)
    final_atoms = []
    for k, p in enumerate(atoms):
        implicit = 0
        if p.hcount is None:
            implicit = _implicit_h(draft, k, p)
        final_atoms.append(Atom(p.element, p.aromatic, p.charge, p.hcount, implicit, atom_ring[k]))
    return Molecule(tuple(final_atoms), bond_objs, s)


def _implicit_h(mol: Molecule, k: int, p: _ProtoAtom) -> int:
    valences = VALENCES[p.element]
    used = mol.bond_order_sum(k)
    if used > valences[-1]:
        raise ValenceExceeded(
            f"atom {k} ({p.element}) has bond-order sum {used} > {valences[-1]}")
    if p.aromatic:
        # one valence unit goes to the aromatic system
        return max(0, valences[0] - used - 1)
    for v in valences:
        if v >= used:
            return v - used
    return 0  # unreachable: guarded above


def _reachable(mol: Molecule) -> list[bool]:
    seen = [False] * mol.n_atoms
    seen[0] = True
    todo = [0]
    while todo:
        i = todo.pop()
        for j, _ in mol.neighbors(i):
            if not seen[j]:
                seen[j] = True
                todo.append(j)
    return seen


def ring_membership(mol: Molecule) -> tuple[list[bool], list[bool]]:
    """Flag cycle bonds (non-bridges) and the atoms incident to them.

    Iterative Tarjan bridge search, so deep chains do not hit the recursion
    limit. Returns ``(atom_flags, bond_flags)``.
    """
    n = mol.n_atoms
    disc = [-1] * n
    low = [0] * n
    is_bridge = [False] * len(mol.bonds)
    t = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        # frames: (atom, bond used to enter it, neighbor iterator position)
        stack = [(root, -1, 0)]
        while stack:
            v, via, pos = stack[-1]
            nbrs = mol.neighbors(v)
            if pos < len(nbrs):
                stack[-1] = (v, via, pos + 1)
                w, k = nbrs[pos]
                if k == via:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = t
                    t += 1
                    stack.append((w, k, 0))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        is_bridge[via] = True
    bond_flags = [not x for x in is_bridge]
    atom_flags = [False] * n
    for bond, flag in zip(mol.bonds, bond_flags):
        if flag:
            atom_flags[bond.a] = atom_flags[bond.b] = True
    return atom_flags, bond_flags


def molecule_to_dict(mol: Molecule) -> dict:
    """JSON-ready diagnostic dump (atoms, bonds, ring flags)."""
    return {
        "smiles": mol.source,
        "atoms": [
            {
                "index": i,
                "element": a.element,
                "aromatic": a.aromatic,
                "formal_charge": a.formal_charge,
                "explicit_h": a.explicit_h,
                "implicit_h": a.implicit_h,
                "in_ring": a.in_ring,
            }
            for i, a in enumerate(mol.atoms)
        ],
        "bonds": [
            {"index": k, "a": b.a, "b": b.b, "order": b.order, "in_ring": b.in_ring}
            for k, b in enumerate(mol.bonds)
        ],
    }
