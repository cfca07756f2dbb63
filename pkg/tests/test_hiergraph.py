import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierdti.fragment import MotifPartition, fragment
from hierdti.hiergraph import (
    EDGE_CODE,
    ELEMENT_VOCAB,
    N_NODE_FEATURES,
    PartitionMismatch,
    build_atom_global_graph,
    build_atom_graph,
    build_hiergraph,
    graph_to_dict,
    graph_to_dot,
    initial_features,
)
from hierdti.smiles import parse_smiles
from hierdti.synthetic import random_graph, write_smiles


def hier(smiles):
    m = parse_smiles(smiles)
    return m, build_hiergraph(m, fragment(m))


def test_toluene_counts():
    _, g = hier("c1ccccc1C")
    assert (g.n_nodes, g.n_edges) == (10, 23)
    assert g.levels.count("global") == 1


def test_methane_counts():
    _, g = hier("C")
    assert (g.n_nodes, g.n_edges) == (3, 2)


def test_aspirin_counts():
    m, g = hier("CC(=O)Oc1ccccc1C(=O)O")
    n_m = fragment(m).n_motifs
    assert n_m == 4
    assert g.n_nodes == 13 + n_m + 1
    assert g.n_edges == 2 * 13 + 13 + n_m


def test_partition_mismatch():
    m = parse_smiles("CCO")
    with pytest.raises(PartitionMismatch):
        build_hiergraph(m, MotifPartition(((0, 1),), ()))
    with pytest.raises(PartitionMismatch):
        build_hiergraph(m, MotifPartition(((0, 1), (1, 2)), ()))


def test_edge_direction_invariants():
    m, g = hier("CC(C)Cc1ccc(C(C)C(=O)O)cc1")
    edges = list(zip(g.src.tolist(), g.dst.tolist(), g.etype.tolist()))
    bond_edges = {(s, d) for s, d, t in edges if t < EDGE_CODE["atom_to_motif"]}
    assert all((d, s) in bond_edges for s, d in bond_edges)
    up = [(s, d) for s, d, t in edges if t == EDGE_CODE["atom_to_motif"]]
    assert sorted(s for s, _ in up) == list(g.atom_nodes())
    assert all(g.levels[d] == "motif" for _, d in up)
    top = [(s, d) for s, d, t in edges if t == EDGE_CODE["motif_to_global"]]
    assert sorted(s for s, _ in top) == list(g.motif_nodes())
    assert all(d == g.global_index for _, d in top)
    # nothing flows out of the global node, and nothing flows down from motifs
    assert g.global_index not in g.src.tolist()
    assert not any(g.levels[s] == "motif" and g.levels[d] == "atom" for s, d, _ in edges)


def test_atom_features():
    m, g = hier("CCO")
    X, etype = initial_features(g, m)
    assert X.shape == (5, N_NODE_FEATURES) and N_NODE_FEATURES == 31
    row = X[1]  # middle carbon: degree 2, two hydrogens
    expect = np.zeros(31)
    expect[ELEMENT_VOCAB.index("C")] = 1
    expect[11 + 2] = 1       # degree block starts after 11 element slots
    expect[18 + 2] = 1       # charge block: -2..2, neutral is the middle slot
    expect[24 + 2] = 1       # H block after the aromatic flag at 23
    assert np.array_equal(row, expect)
    assert np.array_equal(etype, g.etype)


def test_reserved_codes_and_symmetry():
    m1, g1 = hier("c1ccccc1")
    m2, g2 = hier("CC(=O)O")
    X1, _ = initial_features(g1, m1)
    X2, _ = initial_features(g2, m2)
    assert np.array_equal(X1[g1.global_index], X2[g2.global_index])
    assert X1[g1.global_index].sum() == 1 and X1[6].sum() == 1
    assert not np.array_equal(X1[6], X1[g1.global_index])  # motif code differs from global code
    assert all(np.array_equal(X1[0], X1[i]) for i in range(6))


def test_unknown_element_and_clamping():
    m, g = hier("[Se+3]")
    x = initial_features(g, m)[0][0]
    assert x[len(ELEMENT_VOCAB)] == 1        # OTHER slot
    assert x[18 + 4] == 1                    # +3 clamped to +2


def test_variants():
    m = parse_smiles("c1ccccc1C")
    g = build_atom_global_graph(m)
    assert (g.n_nodes, g.n_edges) == (8, 21)
    g = build_atom_graph(m)
    assert (g.n_nodes, g.n_edges, g.has_global) == (7, 14, False)


def test_exports():
    m, g = hier("CCO")
    d = graph_to_dict(g)
    assert len(d["nodes"]) == 5 and len(d["edges"]) == 8
    dot = graph_to_dot(g, m)
    assert dot.startswith("digraph") and dot.count("->") == 2 + 3 + 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_count_formula(seed):
    m = parse_smiles(write_smiles(random_graph(np.random.default_rng(seed)))[0])
    p = fragment(m)
    g = build_hiergraph(m, p)
    assert g.n_nodes == m.n_atoms + p.n_motifs + 1
    assert g.n_edges == 2 * len(m.bonds) + m.n_atoms + p.n_motifs
    X1, _ = initial_features(g, m)
    X2, _ = initial_features(build_hiergraph(m, fragment(m)), m)
    assert np.array_equal(X1, X2)
