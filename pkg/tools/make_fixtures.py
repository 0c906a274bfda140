"""Regenerate the frozen chemistry fixtures under tests/fixtures/.

Needs RDKit (a development-only dependency). Molecular facts (atom and bond
counts, hydrogen counts, aromatic and ring flags, bond orders) come from
RDKit; fingerprint bits are then computed from those RDKit graphs with the
recursive reference definition in tests/oracles.py. The package itself is
only used to report disagreements, never to produce expected values.

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from rdkit import Chem

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import environment_bits  # noqa: E402

CORPUS = [
    # organic subset, chains and branches
    "C", "CC", "CCO", "C-C-O", "CC(=O)O", "C#N", "C=C", "CC#CC", "CCN(CC)CC", "ClCCl", "BrC(Br)Br",
    "FC(F)(F)F", "ICC", "OCC(O)CO", "CC(C)(C)C", "CC(C)CC(C)(C)O", "NCCN", "C=CC=C", "CSC", "S", "P",
    "CS(=O)(=O)N", "CS(C)=O", "OP(=O)(O)O", "B(O)(O)O", "CC(=O)Cl",
    # rings, ring-closure variants
    "C1CC1", "C1CCCCC1", "C=1CCCC1", "C1CCC2CCCCC2C1", "C%10CCCCC%10", "C%11CC%11CCC", "C12C3C4C1C5C2C3C45",
    "C1C2CC3CC1CC(C2)C3",
    # aromatics
    "c1ccccc1", "c1:c:c:c:c:c:1", "c1ccncc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1", "c1ccc2ccccc2c1",
    "c1ccc2[nH]ccc2c1", "c1cnc[nH]1", "n1ccccc1", "Cc1ccccc1O", "c1ccc(cc1)S(=O)(=O)N",
    "CC(=O)Oc1ccccc1C(=O)O", "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "CC(=O)Nc1ccc(O)cc1",
    "Cc1cc(no1)NS(=O)(=O)c1ccc(N)cc1", "O=C(O)c1cn(C2CC2)c2cc(N3CCNCC3)c(F)cc2c1=O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    # charges and brackets
    "[NH4+]", "[O-]C=O", "C[N+](C)(C)C", "[Na+].[Cl-]", "CC(=O)[O-]", "[NH3+]CC(=O)[O-]",
    "[O-][N+](=O)c1ccccc1", "C[S-]", "[Fe+2]", "[13CH3]O", "[CH2]", "[OH2]",
    # stereo (accepted and ignored)
    "C[C@H](N)C(=O)O", "C[C@@H](O)CC", "F/C=C/F", "F/C=C\\Cl", "N[C@@H](Cc1ccccc1)C(=O)O",
    "CN1CCC[C@H]1c2cccnc2", "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
    "CC1(C)S[C@@H]2[C@H](NC(=O)Cc3ccccc3)C(=O)N2[C@H]1C(=O)O",
    # explicit hydrogens, disconnected parts
    "[H]C([H])([H])[H]", "[H]OC", "CCO.O", "CN(C)C(=N)N=C(N)N",
]

FINGERPRINT_SET = [
    "C", "CC", "CCO", "CC(=O)O", "C#N", "CCN(CC)CC", "FC(F)(F)F", "CS(=O)(=O)N", "OP(=O)(O)O",
    "C1CC1", "C1CCCCC1", "C1CCC2CCCCC2C1", "C12C3C4C1C5C2C3C45",
    "c1ccccc1", "c1ccncc1", "c1ccsc1", "c1cc[nH]c1", "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1",
    "c1ccc(cc1)S(=O)(=O)N", "CC(=O)Oc1ccccc1C(=O)O", "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "CC(=O)Nc1ccc(O)cc1",
    "Cc1cc(no1)NS(=O)(=O)c1ccc(N)cc1", "O=C(O)c1cn(C2CC2)c2cc(N3CCNCC3)c(F)cc2c1=O",
    "[NH3+]CC(=O)[O-]", "[O-][N+](=O)c1ccccc1", "C[N+](C)(C)C", "N[C@@H](Cc1ccccc1)C(=O)O",
    "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
]

BOND_CODE = {Chem.BondType.SINGLE: 1, Chem.BondType.DOUBLE: 2, Chem.BondType.TRIPLE: 3,
             Chem.BondType.AROMATIC: 4}


def as_written(smiles: str) -> Chem.Mol:
    mol = Chem.MolFromSmiles(smiles, sanitize=False)
    return Chem.RemoveHs(mol, sanitize=False)


def describe(smiles: str) -> dict:
    mol = Chem.MolFromSmiles(smiles)
    if mol is None:
        raise ValueError(f"RDKit rejects {smiles}")
    atoms = list(mol.GetAtoms())
    return {
        "smiles": smiles,
        "atoms": len(atoms),
        "bonds": mol.GetNumBonds(),
        "symbols": [a.GetSymbol() for a in atoms],
        "hydrogens": [a.GetTotalNumHs() for a in atoms],
        "charges": [a.GetFormalCharge() for a in atoms],
        # aromaticity as written (no perception), matching the parser's contract
        "aromatic": [int(a.GetIsAromatic()) for a in as_written(smiles).GetAtoms()],
        "in_ring": [int(a.IsInRing()) for a in atoms],
        # bond orders as written too, so Kekule input keeps its single/double bonds
        "bond_list": sorted(
            [min(b.GetBeginAtomIdx(), b.GetEndAtomIdx()), max(b.GetBeginAtomIdx(), b.GetEndAtomIdx()),
             BOND_CODE[b.GetBondType()]]
            for b in as_written(smiles).GetBonds()
        ),
    }


def fingerprint_entry(smiles: str, radius: int = 2, nbits: int = 1024) -> dict:
    mol = Chem.MolFromSmiles(smiles)
    invariants = [
        (a.GetAtomicNum(), a.GetDegree(), a.GetFormalCharge(), a.GetTotalNumHs(), int(a.GetIsAromatic()),
         int(a.IsInRing()))
        for a in mol.GetAtoms()
    ]
    bonds = [(b.GetBeginAtomIdx(), b.GetEndAtomIdx(), BOND_CODE[b.GetBondType()]) for b in mol.GetBonds()]
    bits = sorted(environment_bits(invariants, bonds, radius, nbits))
    return {"smiles": smiles, "radius": radius, "nbits": nbits, "on_bits": bits}


def main():
    out = ROOT / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    corpus = [describe(s) for s in CORPUS]
    (out / "smiles_corpus.json").write_text(json.dumps(corpus, indent=1) + "\n")
    fps = [fingerprint_entry(s) for s in FINGERPRINT_SET]
    (out / "fingerprints.json").write_text(json.dumps(fps, indent=1) + "\n")
    print(f"{len(corpus)} corpus entries, {len(fps)} fingerprints")

    try:
        from bridgedpi.chem import morgan_fingerprint, parse_smiles
    except ImportError:
        return
    for entry in corpus:
        mol = parse_smiles(entry["smiles"])
        got = (len(mol.atoms), len(mol.bonds), [a.hydrogens for a in mol.atoms], [int(a.aromatic) for a in mol.atoms])
        want = (entry["atoms"], entry["bonds"], entry["hydrogens"], entry["aromatic"])
        if got != want:
            print("parser disagrees:", entry["smiles"], got, want)
    for entry in fps:
        bits = morgan_fingerprint(parse_smiles(entry["smiles"]), 2, 1024).on_bits
        if list(bits) != entry["on_bits"]:
            print("fingerprint disagrees:", entry["smiles"])


if __name__ == "__main__":
    main()
