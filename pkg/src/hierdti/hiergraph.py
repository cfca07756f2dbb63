"""Three-level molecular graph: atom layer, motif layer, one global node.

Bonds become edges in both directions. Each atom sends one edge to its
motif and each motif sends one edge to the global node; these two kinds
point upward only, so nothing flows from the global node back to atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fragment import MotifPartition
from .smiles import Molecule

ATOM, MOTIF, GLOBAL = "atom", "motif", "global"

EDGE_TYPES = ("single", "double", "triple", "aromatic", "atom_to_motif", "motif_to_global")
EDGE_CODE = {name: i for i, name in enumerate(EDGE_TYPES)}
N_EDGE_TYPES = len(EDGE_TYPES)

ELEMENT_VOCAB = ("C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B")
MAX_DEGREE = 6
CHARGES = (-2, -1, 0, 1, 2)
MAX_H = 4

# column offsets of the one-hot blocks
_EL = 0
_DEG = _EL + len(ELEMENT_VOCAB) + 1
_CHG = _DEG + MAX_DEGREE + 1
_ARO = _CHG + len(CHARGES)
_HYD = _ARO + 1
_MOTIF_CODE = _HYD + MAX_H + 1
_GLOBAL_CODE = _MOTIF_CODE + 1
N_NODE_FEATURES = _GLOBAL_CODE + 1


class PartitionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class HierGraph:
    """Node levels plus typed directed edges (``src -> dst``).

    ``levels`` lists atoms first, then motifs, then the global node (when
    present). ``motif_members[k]`` are the atom nodes of motif node
    ``n_atoms + k``.
    """

    levels: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    motif_members: tuple[tuple[int, ...], ...]
    n_atoms: int

    @property
    def n_nodes(self) -> int:
        return len(self.levels)

    @property
    def n_motifs(self) -> int:
        return len(self.motif_members)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def has_global(self) -> bool:
        return bool(self.levels) and self.levels[-1] == GLOBAL

    @property
    def global_index(self) -> Optional[int]:
        return self.n_nodes - 1 if self.has_global else None

    def atom_nodes(self) -> range:
        return range(self.n_atoms)

    def motif_nodes(self) -> range:
        return range(self.n_atoms, self.n_atoms + self.n_motifs)


def _bond_edges(mol: Molecule) -> tuple[list[int], list[int], list[int]]:
    src, dst, typ = [], [], []
    for bond in mol.bonds:
        code = EDGE_CODE[bond.order]
        src += [bond.a, bond.b]
        dst += [bond.b, bond.a]
        typ += [code, code]
    return src, dst, typ


def _pack(levels, src, dst, typ, members, n_atoms) -> HierGraph:
    return HierGraph(
        tuple(levels),
        np.asarray(src, dtype=np.int64),
        np.asarray(dst, dtype=np.int64),
        np.asarray(typ, dtype=np.int64),
        tuple(tuple(m) for m in members),
        n_atoms,
    )


def build_hiergraph(mol: Molecule, part: MotifPartition) -> HierGraph:
    """Atom, motif and global levels wired as bond / atom->motif / motif->global edges."""
    n = mol.n_atoms
    owner = [-1] * n
    for k, members in enumerate(part.motifs):
        for a in members:
            if not 0 <= a < n or owner[a] >= 0:
                raise PartitionMismatch(f"atom {a} is out of range or in two motifs")
            owner[a] = k
    if any(o < 0 for o in owner):
        missing = [i for i, o in enumerate(owner) if o < 0]
        raise PartitionMismatch(f"atoms {missing} belong to no motif")
    src, dst, typ = _bond_edges(mol)
    m = part.n_motifs
    for a in range(n):
        src.append(a)
        dst.append(n + owner[a])
        typ.append(EDGE_CODE["atom_to_motif"])
    g = n + m
    for k in range(m):
        src.append(n + k)
        dst.append(g)
        typ.append(EDGE_CODE["motif_to_global"])
    levels = [ATOM] * n + [MOTIF] * m + [GLOBAL]
    return _pack(levels, src, dst, typ, part.motifs, n)


def build_atom_global_graph(mol: Molecule) -> HierGraph:
    """Motif-free variant: atoms feed the global node directly."""
    n = mol.n_atoms
    src, dst, typ = _bond_edges(mol)
    src += list(range(n))
    dst += [n] * n
    typ += [EDGE_CODE["motif_to_global"]] * n
    return _pack([ATOM] * n + [GLOBAL], src, dst, typ, (), n)


def build_atom_graph(mol: Molecule) -> HierGraph:
    """Plain molecular graph: atom nodes and bond edges only."""
    src, dst, typ = _bond_edges(mol)
    return _pack([ATOM] * mol.n_atoms, src, dst, typ, (), mol.n_atoms)


def _one_hot_index(value, choices) -> int:
    try:
        return choices.index(value)
    except ValueError:
        return len(choices)


def atom_features(mol: Molecule, i: int) -> np.ndarray:
    atom = mol.atoms[i]
    x = np.zeros(N_NODE_FEATURES)
    x[_EL + _one_hot_index(atom.element, ELEMENT_VOCAB)] = 1.0
    x[_DEG + min(mol.degree(i), MAX_DEGREE)] = 1.0
    x[_CHG + CHARGES.index(max(-2, min(2, atom.formal_charge)))] = 1.0
    x[_ARO] = 1.0 if atom.aromatic else 0.0
    x[_HYD + min(atom.total_h, MAX_H)] = 1.0
    return x


def initial_features(g: HierGraph, mol: Molecule) -> tuple[np.ndarray, np.ndarray]:
    """Raw node feature matrix and per-edge type codes.

    Atom rows concatenate one-hot blocks for element (10 symbols + other),
    degree 0-6, formal charge -2..+2, an aromatic flag and hydrogen count
    0-4. Motif and global rows carry a single reserved one-hot code.
    """
    if g.n_atoms != mol.n_atoms:
        raise PartitionMismatch("graph and molecule disagree on atom count")
    X = np.zeros((g.n_nodes, N_NODE_FEATURES))
    for i in range(mol.n_atoms):
        X[i] = atom_features(mol, i)
    for k in g.motif_nodes():
        X[k, _MOTIF_CODE] = 1.0
    if g.has_global:
        X[g.global_index, _GLOBAL_CODE] = 1.0
    return X, g.etype.copy()


def graph_to_dict(g: HierGraph) -> dict:
    return {
        "nodes": [{"index": i, "level": lvl} for i, lvl in enumerate(g.levels)],
        "edges": [
            {"src": int(s), "dst": int(d), "type": EDGE_TYPES[t]}
            for s, d, t in zip(g.src, g.dst, g.etype)
        ],
        "motif_members": [list(m) for m in g.motif_members],
    }


def graph_to_dot(g: HierGraph, mol: Optional[Molecule] = None) -> str:
    lines = ["digraph hiergraph {", "  rankdir=BT;"]
    for i, lvl in enumerate(g.levels):
        if lvl == ATOM:
            label = mol.atoms[i].element if mol is not None else f"a{i}"
            lines.append(f'  n{i} [label="{label}{i}", shape=circle];')
        elif lvl == MOTIF:
            lines.append(f'  n{i} [label="m{i - g.n_atoms}", shape=box];')
        else:
            lines.append(f'  n{i} [label="G", shape=doublecircle];')
    for s, d, t in zip(g.src, g.dst, g.etype):
        kind = EDGE_TYPES[t]
        if kind in ("atom_to_motif", "motif_to_global"):
            lines.append(f"  n{s} -> n{d} [style=dashed];")
        elif s < d:
            lines.append(f'  n{s} -> n{d} [dir=both, label="{kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
