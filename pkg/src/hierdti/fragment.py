"""Motif partitioning: BRICS strategic bonds plus the ring-branch rule.

The BRICS environments (Degen et al., ChemMedChem 2008) are encoded as
one-neighbourhood predicates over :class:`~hierdti.smiles.Molecule`
fields instead of SMARTS queries. Each predicate mirrors the usual SMARTS
definition of the environment:

====  =========================================================
L1    acyl carbon ``[C;D3]([#0,#6,#7,#8])(=O)``
L3    ether oxygen ``[O;D2]-;!@[#0,#6,#1]``
L4    ``[C;!D1;!$(C=*)]-;!@[#6]``
L5    amine nitrogen, no N=, no single bond to non C/S, not a lactam N
L6    ``[C;D3;!R](=O)-;!@[#0,#6,#7,#8]``
L7    olefinic ``[C;D2,D3]-[#6]`` (paired over an acyclic C=C)
L8    ``[C;!R;!D1;!$(C!-*)]``
L9    ``[n;+0;$(n(:[c,n,o,s]):[c,n,o,s])]``
L10   ``[N;R;$(N(@C(=O))@[C,N,O,S])]``
L11   ``[S;D2](-;!@[#0,#6])``
L12   ``[S;D4]([#6,#0])(=O)(=O)``
L13   ``[C;$(C(-;@[C,N,O,S])-;@[N,O,S])]``
L14   ``[c;$(c(:[c,n,o,s]):[n,o,s])]``
L15   ``[C;$(C(-;@C)-;@C)]``
L16   ``[c;$(c(:c):c)]``
====  =========================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .smiles import Molecule

__all__ = [
    "CleavageRule",
    "MotifPartition",
    "BRICS_RULES",
    "environment_labels",
    "brics_cleavable_bonds",
    "ring_branch_bonds",
    "fragment",
    "partition_to_dict",
]


@dataclass(frozen=True)
class CleavageRule:
    id: str
    donor_env: str
    acceptor_env: str
    bond_order: str = "single"


# (env_a, env_b, order); environment pairs that BRICS cleaves
_PAIRS = [
    ("L1", "L3"), ("L1", "L5"), ("L1", "L10"),
    ("L3", "L4"), ("L3", "L13"), ("L3", "L14"), ("L3", "L15"), ("L3", "L16"),
    ("L4", "L5"), ("L4", "L11"),
    ("L5", "L12"), ("L5", "L14"), ("L5", "L16"), ("L5", "L13"), ("L5", "L15"),
    ("L6", "L13"), ("L6", "L14"), ("L6", "L15"), ("L6", "L16"),
    ("L8", "L9"), ("L8", "L10"), ("L8", "L13"), ("L8", "L14"), ("L8", "L15"), ("L8", "L16"),
    ("L9", "L13"), ("L9", "L14"), ("L9", "L15"), ("L9", "L16"),
    ("L10", "L13"), ("L10", "L14"), ("L10", "L15"), ("L10", "L16"),
    ("L11", "L13"), ("L11", "L14"), ("L11", "L15"), ("L11", "L16"),
    ("L13", "L14"), ("L13", "L15"), ("L13", "L16"),
    ("L14", "L14"), ("L14", "L15"), ("L14", "L16"),
    ("L15", "L16"),
    ("L16", "L16"),
]

BRICS_RULES: tuple[CleavageRule, ...] = tuple(
    [CleavageRule(f"{a}-{b}", a, b) for a, b in _PAIRS]
    + [CleavageRule("L7-L7", "L7", "L7", "double")]
)

_RULE_INDEX: dict[str, set[frozenset[str]]] = {}
for _rule in BRICS_RULES:
    _RULE_INDEX.setdefault(_rule.bond_order, set()).add(
        frozenset((_rule.donor_env, _rule.acceptor_env)))


@dataclass(frozen=True)
class MotifPartition:
    motifs: tuple[tuple[int, ...], ...]
    cut_bonds: tuple[int, ...]

    @property
    def n_motifs(self) -> int:
        return len(self.motifs)

    def assignment(self, n_atoms: int) -> list[int]:
        """Motif index of every atom."""
        owner = [-1] * n_atoms
        for m, members in enumerate(self.motifs):
            for a in members:
                owner[a] = m
        return owner


# -- environment predicates -------------------------------------------------


class _Env:
    """Neighbourhood view of one atom, shared by every predicate."""

    __slots__ = ("mol", "i", "atom", "nbrs")

    def __init__(self, mol: Molecule, i: int):
        self.mol = mol
        self.i = i
        self.atom = mol.atoms[i]
        self.nbrs = [(j, mol.atoms[j], mol.bonds[k]) for j, k in mol.neighbors(i)]

    @property
    def D(self) -> int:
        return len(self.nbrs)

    def aliphatic(self, element: str) -> bool:
        return self.atom.element == element and not self.atom.aromatic

    def aromatic(self, element: str) -> bool:
        return self.atom.element == element and self.atom.aromatic

    def has(self, pred: Callable, exclude: tuple[int, ...] = ()) -> list[int]:
        return [j for j, a, b in self.nbrs if j not in exclude and pred(a, b)]


def _aliph(*elements: str):
    return lambda a: not a.aromatic and a.element in elements


def _arom(*elements: str):
    return lambda a: a.aromatic and a.element in elements


def _elem(*elements: str):
    return lambda a: a.element in elements


def _single_or_arom(b) -> bool:
    # unspecified SMARTS bond
    return b.order in ("single", "aromatic")


def _two_distinct(e: _Env, p1: Callable, p2: Callable) -> bool:
    for j in e.has(p1):
        if e.has(p2, exclude=(j,)):
            return True
    return False


def _carbonyl(e: _Env) -> bool:
    return bool(e.has(lambda a, b: b.order == "double" and _aliph("O")(a)))


def _L1(e: _Env) -> bool:
    return (e.aliphatic("C") and e.D == 3 and _carbonyl(e)
            and bool(e.has(lambda a, b: _single_or_arom(b) and _elem("C", "N", "O")(a))))


def _L3(e: _Env) -> bool:
    return (e.aliphatic("O") and e.D == 2
            and bool(e.has(lambda a, b: b.order == "single" and not b.in_ring
                           and _elem("C", "H")(a))))


def _L4(e: _Env) -> bool:
    return (e.aliphatic("C") and e.D != 1
            and not e.has(lambda a, b: b.order == "double")
            and bool(e.has(lambda a, b: b.order == "single" and not b.in_ring
                           and a.element == "C")))


def _lactam_n(e: _Env) -> bool:
    # [N;R]@[C;R]=O
    if not e.atom.in_ring:
        return False
    for j, a, b in e.nbrs:
        if b.in_ring and _aliph("C")(a) and a.in_ring and _carbonyl(_Env(e.mol, j)):
            return True
    return False


def _L5(e: _Env) -> bool:
    return (e.aliphatic("N") and e.D != 1
            and not e.has(lambda a, b: b.order == "double")
            and not e.has(lambda a, b: b.order == "single" and a.element not in ("C", "S", "H"))
            and not _lactam_n(e))


def _L6(e: _Env) -> bool:
    return (e.aliphatic("C") and e.D == 3 and not e.atom.in_ring and _carbonyl(e)
            and bool(e.has(lambda a, b: b.order == "single" and not b.in_ring
                           and _elem("C", "N", "O")(a))))


def _L7(e: _Env) -> bool:
    return (e.aliphatic("C") and e.D in (2, 3)
            and bool(e.has(lambda a, b: b.order == "single" and a.element == "C")))


def _L8(e: _Env) -> bool:
    return (e.aliphatic("C") and not e.atom.in_ring and e.D != 1
            and not e.has(lambda a, b: b.order != "single"))


def _L9(e: _Env) -> bool:
    if not (e.aromatic("N") and e.atom.formal_charge == 0):
        return False
    p = lambda a, b: b.order == "aromatic" and _arom("C", "N", "O", "S")(a)  # noqa: E731
    return _two_distinct(e, p, p)


def _L10(e: _Env) -> bool:
    if not (e.aliphatic("N") and e.atom.in_ring):
        return False
    for j, a, b in e.nbrs:
        if b.in_ring and _aliph("C")(a) and _carbonyl(_Env(e.mol, j)):
            if e.has(lambda a2, b2: b2.in_ring and _aliph("C", "N", "O", "S")(a2), exclude=(j,)):
                return True
    return False


def _L11(e: _Env) -> bool:
    return (e.aliphatic("S") and e.D == 2
            and bool(e.has(lambda a, b: b.order == "single" and not b.in_ring
                           and a.element == "C")))


def _L12(e: _Env) -> bool:
    if not (e.aliphatic("S") and e.D == 4):
        return False
    oxo = e.has(lambda a, b: b.order == "double" and _aliph("O")(a))
    return len(oxo) >= 2 and bool(e.has(lambda a, b: _single_or_arom(b) and a.element == "C"))


def _ring_single(pred: Callable) -> Callable:
    return lambda a, b: b.order == "single" and b.in_ring and pred(a)


def _L13(e: _Env) -> bool:
    return e.aliphatic("C") and _two_distinct(
        e, _ring_single(_aliph("C", "N", "O", "S")), _ring_single(_aliph("N", "O", "S")))


def _L14(e: _Env) -> bool:
    return e.aromatic("C") and _two_distinct(
        e,
        lambda a, b: b.order == "aromatic" and _arom("C", "N", "O", "S")(a),
        lambda a, b: b.order == "aromatic" and _arom("N", "O", "S")(a),
    )


def _L15(e: _Env) -> bool:
    p = _ring_single(_aliph("C"))
    return e.aliphatic("C") and _two_distinct(e, p, p)


def _L16(e: _Env) -> bool:
    p = lambda a, b: b.order == "aromatic" and _arom("C")(a)  # noqa: E731
    return e.aromatic("C") and _two_distinct(e, p, p)


_ENVIRONMENTS: dict[str, Callable[[_Env], bool]] = {
    "L1": _L1, "L3": _L3, "L4": _L4, "L5": _L5, "L6": _L6, "L7": _L7,
    "L8": _L8, "L9": _L9, "L10": _L10, "L11": _L11, "L12": _L12, "L13": _L13,
    "L14": _L14, "L15": _L15, "L16": _L16,
}


def environment_labels(mol: Molecule) -> list[frozenset[str]]:
    """The BRICS environments each atom satisfies."""
    out = []
    for i in range(mol.n_atoms):
        e = _Env(mol, i)
        out.append(frozenset(name for name, pred in _ENVIRONMENTS.items() if pred(e)))
    return out


def brics_cleavable_bonds(mol: Molecule) -> set[int]:
    """Indices of acyclic bonds whose endpoint environments form a BRICS pair."""
    labels = environment_labels(mol)
    out = set()
    for k, bond in enumerate(mol.bonds):
        if bond.in_ring or bond.order not in _RULE_INDEX:
            continue
        pairs = _RULE_INDEX[bond.order]
        la, lb = labels[bond.a], labels[bond.b]
        if any(frozenset((x, y)) in pairs for x in la for y in lb):
            out.add(k)
    return out


def ring_branch_bonds(mol: Molecule) -> set[int]:
    """Bonds joining a ring atom to a non-ring atom."""
    atoms = mol.atoms
    return {k for k, b in enumerate(mol.bonds) if atoms[b.a].in_ring != atoms[b.b].in_ring}


def fragment(mol: Molecule) -> MotifPartition:
    """Cut BRICS and ring-branch bonds; motifs are the remaining components.

    Motifs are ordered by their smallest atom index and list their atoms in
    ascending order.
    """
    cut = brics_cleavable_bonds(mol) | ring_branch_bonds(mol)
    parent = list(range(mol.n_atoms))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k, bond in enumerate(mol.bonds):
        if k not in cut:
            ra, rb = find(bond.a), find(bond.b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(mol.n_atoms):
        groups.setdefault(find(i), []).append(i)
    motifs = tuple(tuple(g) for g in sorted(groups.values(), key=lambda g: g[0]))
    return MotifPartition(motifs, tuple(sorted(cut)))


def partition_to_dict(mol: Molecule, part: MotifPartition) -> dict:
    return {
        "smiles": mol.source,
        "motifs": [list(m) for m in part.motifs],
        "cut_bonds": sorted(sorted((mol.bonds[k].a, mol.bonds[k].b)) for k in part.cut_bonds),
    }
