"""Random molecules and a planted-signal interaction fixture.

Used by the test-suite sweeps and the overfit check. Molecules are grown as
graphs (chains, aromatic six-rings, saturated rings, carbonyls, occasional
extra ring closures) under valence limits and written out as SMILES by a
depth-first walk, so every generated string parses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DtiRecord

_MAX_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "F": 1, "Cl": 1, "Br": 1}
_ORDER_COST = {"single": 1, "double": 2, "triple": 3, "aromatic": 1}
_BOND_SYMBOL = {"double": "=", "triple": "#"}


@dataclass
class _Graph:
    elements: list[str] = field(default_factory=list)
    aromatic: list[bool] = field(default_factory=list)
    bonds: dict[tuple[int, int], str] = field(default_factory=dict)

    def add_atom(self, element: str, aromatic: bool = False) -> int:
        self.elements.append(element)
        self.aromatic.append(aromatic)
        return len(self.elements) - 1

    def bond(self, a: int, b: int, order: str) -> None:
        self.bonds[(min(a, b), max(a, b))] = order

    def neighbors(self, i: int) -> list[tuple[int, str]]:
        return [(b if a == i else a, o) for (a, b), o in self.bonds.items() if i in (a, b)]

    def free_valence(self, i: int) -> int:
        used = sum(_ORDER_COST[o] for _, o in self.neighbors(i))
        if self.aromatic[i]:
            used += 1
            cap = 4 if self.elements[i] == "C" else 0
        else:
            cap = _MAX_VALENCE[self.elements[i]]
        return cap - used


def _add_ring(g: _Graph, rng: np.random.Generator, kind: str) -> list[int]:
    if kind == "aromatic":
        size = 6
        elems = ["C"] * 6
        if rng.random() < 0.3:
            elems[int(rng.integers(1, 6))] = "N"
        atoms = [g.add_atom(e, True) for e in elems]
        order = "aromatic"
    else:
        size = int(rng.choice([5, 6]))
        elems = ["C"] * size
        if rng.random() < 0.4:
            elems[int(rng.integers(1, size))] = str(rng.choice(["N", "O"]))
        atoms = [g.add_atom(e) for e in elems]
        order = "single"
    for k in range(size):
        g.bond(atoms[k], atoms[(k + 1) % size], order)
    return atoms


def random_graph(rng: np.random.Generator, n_units: Optional[int] = None,
                 elements: tuple[str, ...] = ("C", "C", "C", "N", "O", "S", "F", "Cl")) -> _Graph:
    g = _Graph()
    n_units = n_units if n_units is not None else int(rng.integers(1, 12))
    first = rng.random()
    if first < 0.3:
        _add_ring(g, rng, "aromatic")
    elif first < 0.45:
        _add_ring(g, rng, "aliphatic")
    else:
        g.add_atom("C")
    for _ in range(n_units):
        open_atoms = [i for i in range(len(g.elements)) if g.free_valence(i) > 0]
        if not open_atoms:
            break
        anchor = int(rng.choice(open_atoms))
        r = rng.random()
        if r < 0.15:
            ring = _add_ring(g, rng, "aromatic")
            g.bond(anchor, ring[0], "single")
        elif r < 0.25:
            ring = _add_ring(g, rng, "aliphatic")
            g.bond(anchor, ring[0], "single")
        elif r < 0.35 and not g.aromatic[anchor] and g.elements[anchor] == "C" and g.free_valence(anchor) >= 2:
            o = g.add_atom("O")
            g.bond(anchor, o, "double")
        else:
            el = str(rng.choice(elements))
            new = g.add_atom(el)
            g.bond(anchor, new, "single")
    # occasional extra ring closure between distant aliphatic atoms
    if rng.random() < 0.2 and len(g.elements) > 5:
        cands = [i for i in range(len(g.elements))
                 if not g.aromatic[i] and g.free_valence(i) > 0]
        if len(cands) >= 2:
            a, b = (int(x) for x in rng.choice(cands, size=2, replace=False))
            if _distance(g, a, b) >= 3:
                g.bond(a, b, "single")
    return g


def _distance(g: _Graph, a: int, b: int) -> int:
    seen = {a: 0}
    frontier = [a]
    while frontier:
        nxt = []
        for i in frontier:
            for j, _ in g.neighbors(i):
                if j not in seen:
                    seen[j] = seen[i] + 1
                    nxt.append(j)
        frontier = nxt
    return seen.get(b, 10 ** 9)


def _atom_token(g: _Graph, i: int) -> str:
    el = g.elements[i]
    return el.lower() if g.aromatic[i] else el


def write_smiles(g: _Graph, rng: Optional[np.random.Generator] = None,
                 start: int = 0) -> tuple[str, list[int]]:
    """Depth-first SMILES for ``g``; also returns the atom order of the output.

    With ``rng`` the neighbour visiting order is shuffled, giving a different
    but equivalent string.
    """
    n = len(g.elements)
    adj = {i: g.neighbors(i) for i in range(n)}
    if rng is not None:
        for i in adj:
            adj[i] = [adj[i][k] for k in rng.permutation(len(adj[i]))]
    visited: set[int] = set()
    tree_edges: set[tuple[int, int]] = set()
    order: list[int] = []

    # first pass: spanning tree and ring-closure edges in visiting order
    def visit(root: int) -> None:
        stack = [(root, -1)]
        while stack:
            v, parent = stack.pop()
            if v in visited:
                continue
            visited.add(v)
            order.append(v)
            if parent >= 0:
                tree_edges.add((min(v, parent), max(v, parent)))
            for w, _ in reversed(adj[v]):
                if w not in visited:
                    stack.append((w, v))

    visit(start)
    rank = {v: k for k, v in enumerate(order)}
    closures: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    label = 0
    free_labels: list[int] = []
    ring_edges = [e for e in g.bonds if e not in tree_edges]
    ring_edges.sort(key=lambda e: (min(rank[e[0]], rank[e[1]]), max(rank[e[0]], rank[e[1]])))
    labels: dict[tuple[int, int], int] = {}
    # assign labels so that open rings never share a label
    events = []
    for e in ring_edges:
        a, b = sorted(e, key=lambda x: rank[x])
        events.append((rank[a], 0, e))
        events.append((rank[b], 1, e))
    for _, kind, e in sorted(events, key=lambda t: (t[0], -t[1])):
        if kind == 0:
            if free_labels:
                lab = free_labels.pop(0)
            else:
                label += 1
                lab = label
            labels[e] = lab
        else:
            free_labels.append(labels[e])
            free_labels.sort()
    for e, lab in labels.items():
        closures[e[0]].append((e[1], lab))
        closures[e[1]].append((e[0], lab))

    def bond_text(a: int, b: int) -> str:
        o = g.bonds[(min(a, b), max(a, b))]
        if o in _BOND_SYMBOL:
            return _BOND_SYMBOL[o]
        if o == "single" and g.aromatic[a] and g.aromatic[b]:
            return "-"
        return ""

    def ring_label(lab: int) -> str:
        return str(lab) if lab < 10 else f"%{lab:02d}"

    out: list[str] = []
    seen: set[int] = set()
    opened: set[int] = set()

    def emit(v: int, parent: int) -> None:
        seen.add(v)
        out.append(_atom_token(g, v))
        for w, lab in sorted(closures[v], key=lambda t: rank[t[0]]):
            if lab in opened and w in seen:
                out.append(ring_label(lab))
                opened.discard(lab)
            else:
                out.append(bond_text(v, w) + ring_label(lab))
                opened.add(lab)
        children = [w for w in order if (min(v, w), max(v, w)) in tree_edges and w != parent
                    and w not in seen and rank[w] > rank[v]]
        children.sort(key=lambda w: rank[w])
        for k, w in enumerate(children):
            branch = k < len(children) - 1
            if branch:
                out.append("(")
            out.append(bond_text(v, w))
            emit(w, v)
            if branch:
                out.append(")")

    emit(start, -1)
    # children are emitted in first-pass rank order, so the textual atom
    # order is exactly the first-pass preorder
    return "".join(out), order


def random_smiles(rng: np.random.Generator, **kwargs) -> str:
    return write_smiles(random_graph(rng, **kwargs))[0]


def random_corpus(n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    return [random_smiles(rng) for _ in range(n)]


# -- separable interaction fixture ----------------------------------------------------

_RESIDUES = "ADEFGHIKLMNPQRSTVY"  # W and C are reserved for the planted signal
_SIGNAL = "WCWCWC"


def separable_pairs(n: int = 32, seed: int = 0) -> list[DtiRecord]:
    """Balanced pairs where positives carry a benzenesulfonamide and a ``WCWCWC`` run.

    Negatives never contain sulfur, tryptophan or cysteine, so either the
    drug or the protein alone separates the classes.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % 2
        g = random_graph(rng, n_units=int(rng.integers(2, 7)), elements=("C", "C", "C", "N", "O", "F"))
        # the aryl group bonds to the first written atom, which needs a free valence
        start = next((i for i in range(len(g.elements)) if g.free_valence(i) > 0), 0)
        body = write_smiles(g, start=start)[0]
        smiles = f"{body}" if label == 0 else f"NS(=O)(=O)c1ccc(cc1){body}"
        length = int(rng.integers(20, 41))
        seq = "".join(rng.choice(list(_RESIDUES), size=length))
        if label:
            pos = int(rng.integers(0, length - len(_SIGNAL)))
            seq = seq[:pos] + _SIGNAL + seq[pos + len(_SIGNAL):]
        out.append(DtiRecord(smiles, seq, label))
    return out
