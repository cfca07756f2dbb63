"""Build the reference fragmentation fixture with RDKit.

Run once, offline, before the package build:

    python scripts/make_fragment_fixture.py > tests/fixtures/fragment_reference.tsv

Each molecule is rewritten in RDKit's canonical aromatic form so the atom
order of the stored SMILES equals RDKit's atom order. Cut bonds are the
union of RDKit's BRICS bonds and every bond joining a ring atom to a
non-ring atom; motifs are the connected components that remain.
RDKit is only needed for this script.
"""

import json
import sys

from rdkit import Chem
from rdkit.Chem import BRICS

DRUGS = [
    "CC(=O)Oc1ccccc1C(=O)O",  # aspirin
    "CC(C)Cc1ccc(C(C)C(=O)O)cc1",  # ibuprofen
    "CC(=O)Nc1ccc(O)cc1",  # paracetamol
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",  # caffeine
    "CCO",
    "c1ccccc1C",
    "c1ccc(cc1)c1ccccc1",
    "CN1CCC[C@H]1c1cccnc1",  # nicotine
    "CC(C)NCC(O)COc1cccc2ccccc12",  # propranolol
    "COc1ccc2[nH]cc(CCNC(C)=O)c2c1",  # melatonin
    "CN(C)CCCN1c2ccccc2CCc2ccccc21",  # imipramine
    "Clc1ccc(cc1)C(c1ccccc1)N1CCN(CC1)CCOCC(=O)O",  # cetirizine
    "CC(=O)Nc1ccc(cc1)S(=O)(=O)N",
    "Nc1ccc(cc1)S(=O)(=O)Nc1ccccn1",  # sulfapyridine
    "OC(=O)c1ccccc1O",  # salicylic acid
    "CCN(CC)CC(=O)Nc1c(C)cccc1C",  # lidocaine
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",  # diazepam
    "O=C(O)CCc1ccccc1",
    "CCOC(=O)c1ccc(N)cc1",  # benzocaine
    "CN1CCN(CC1)c1ccc(cc1)C(=O)N",
    "COc1cc(C=O)ccc1O",  # vanillin
    "OCC1OC(O)C(O)C(O)C1O",  # glucose (no stereo)
    "CC(N)Cc1ccccc1",  # amphetamine
    "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1",  # phenytoin
    "CCCCC(CC)COC(=O)c1ccccc1C(=O)OCC(CC)CCCC",
    "c1ccc2c(c1)ccc1ccccc12",  # phenanthrene
    "Oc1ccc(cc1)C=Cc1cc(O)cc(O)c1",  # resveratrol
    "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1",  # salbutamol
    "COc1ccc(CCN)cc1OC",
    "NC(=O)c1cccnc1",  # nicotinamide
    "CSCCC(N)C(=O)O",  # methionine
    "NCCc1c[nH]c2ccc(O)cc12",  # serotonin
    "CC1=C(C(=O)OC)C(c2cccc(c2)[N+](=O)[O-])C(C(=O)OC)=C(C)N1",  # nifedipine-like
    "Fc1ccc(cc1)C(=O)CCCN1CCC(O)(CC1)c1ccc(Cl)cc1",  # haloperidol
    "CC(=O)OCC[N+](C)(C)C",  # acetylcholine
    "C1CCC(CC1)NC(=O)Nc1ccccc1",
    "c1ccc(cc1)Oc1ccccc1",  # diphenyl ether
    "CCSc1ccccc1",
    "O=C(Nc1ccccc1)c1ccco1",
    "Cc1onc(c1)C(=O)NCc1ccccc1",
    "CN1C=NC2=C1C(=O)NC(=O)N2",
    "CC(C)=CCCC(C)=CCO",  # geraniol
    "C=CC(=O)OC",
    "OC(=O)C=Cc1ccccc1",  # cinnamic acid
    "N#Cc1ccc(cc1)C(=O)O",
    "CC(C)Oc1ccc(cc1)S(=O)(=O)N1CCCC1",
    "O=C1CCCN1Cc1ccccc1",
    "COC(=O)C1CCCCC1",
    "CCN1CCN(CC1)C(=O)c1cc2ccccc2s1",
    "Brc1cccc(c1)NC(=O)C1CC1",
]


def reference_partition(mol):
    cut = {tuple(sorted(b)) for b, _ in BRICS.FindBRICSBonds(mol)}
    for bond in mol.GetBonds():
        a, b = bond.GetBeginAtomIdx(), bond.GetEndAtomIdx()
        if mol.GetAtomWithIdx(a).IsInRing() != mol.GetAtomWithIdx(b).IsInRing():
            cut.add(tuple(sorted((a, b))))
    parent = list(range(mol.GetNumAtoms()))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for bond in mol.GetBonds():
        a, b = bond.GetBeginAtomIdx(), bond.GetEndAtomIdx()
        if (min(a, b), max(a, b)) not in cut:
            parent[find(a)] = find(b)
    groups = {}
    for i in range(mol.GetNumAtoms()):
        groups.setdefault(find(i), []).append(i)
    motifs = sorted(groups.values(), key=min)
    return {"motifs": motifs, "cut_bonds": sorted(list(c) for c in cut)}


def main():
    if len(DRUGS) != 50:
        raise SystemExit(f"expected 50 molecules, got {len(DRUGS)}")
    for smi in DRUGS:
        canon = Chem.MolToSmiles(Chem.MolFromSmiles(smi), isomericSmiles=False)
        mol = Chem.MolFromSmiles(canon)
        part = reference_partition(mol)
        sys.stdout.write(f"{canon}\t{json.dumps(part, separators=(',', ':'))}\n")


if __name__ == "__main__":
    main()
