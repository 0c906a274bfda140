"""Synthetic drug-protein data with a known, learnable labelling rule.

A pair is positive exactly when the protein carries the motif ``MOTIF`` and
the drug's fingerprint has every bit in ``marker_bits()`` set. Marker bits
are the radius-0 environment bits of the sulfonyl sulfur in a
``S(=O)(=O)N`` substituent; drugs without that substituent are rejected if
they happen to set those bits, so the rule is equivalent to "motif-bearing
protein and sulfonamide-bearing drug".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chem import environment_ids, morgan_fingerprint, parse_smiles
from .data_io import PairRecord
from .protein import AMINO_ACIDS

MOTIF = "WCHMY"
MARKER = "S(=O)(=O)N"
SCAFFOLDS = (
    "c1cc({0})ccc1{1}",
    "c1cc({0})cnc1{1}",
    "c1ccc2c(c1)cc({0})n2{1}",
    "C1CC({0})CCN1{1}",
    "c1c({0})sc({1})c1",
    "C(CC{0})Oc1ccccc1{1}",
)
DECOYS = ("C", "CC", "O", "OC", "F", "Cl", "Br", "N", "C(=O)O", "C#N", "C(F)(F)F", "CO", "N(C)C", "C(C)C")


def marker_bits(nbits: int = 1024, radius: int = 2) -> tuple[int, ...]:
    """Fingerprint bits contributed by the sulfonyl sulfur's radius-0 environment."""
    mol = parse_smiles("C" + MARKER)
    ids = environment_ids(mol, 0)[0]
    return (ids[1] % nbits,)


def has_motif(sequence: str) -> bool:
    return MOTIF in sequence


def has_marker(smiles: str, nbits: int = 1024, radius: int = 2) -> bool:
    bits = morgan_fingerprint(parse_smiles(smiles), radius, nbits).bits
    return all(bits[b] for b in marker_bits(nbits, radius))


def label_rule(sequence: str, smiles: str, nbits: int = 1024, radius: int = 2) -> int:
    return int(has_motif(sequence) and has_marker(smiles, nbits, radius))


@dataclass
class SyntheticSpec:
    n_pairs: int = 3000
    n_proteins: int = 200
    n_drugs: int = 160
    min_length: int = 60
    max_length: int = 150
    seed: int = 0
    nbits: int = 1024
    radius: int = 2


def _protein(rng: np.random.Generator, spec: SyntheticSpec, motif: bool) -> str:
    while True:
        length = int(rng.integers(spec.min_length, spec.max_length + 1))
        seq = "".join(rng.choice(list(AMINO_ACIDS), size=length))
        if MOTIF in seq:
            continue
        if motif:
            pos = int(rng.integers(0, length - len(MOTIF) + 1))
            seq = seq[:pos] + MOTIF + seq[pos + len(MOTIF):]
        return seq


def _drug(rng: np.random.Generator, spec: SyntheticSpec, marker: bool, taken: set) -> str:
    while True:
        scaffold = SCAFFOLDS[int(rng.integers(len(SCAFFOLDS)))]
        a, b = (DECOYS[int(i)] for i in rng.integers(len(DECOYS), size=2))
        if marker:
            if rng.random() < 0.5:
                a = MARKER
            else:
                b = MARKER
        smiles = scaffold.format(a, b)
        if smiles in taken:
            continue
        if has_marker(smiles, spec.nbits, spec.radius) != marker:
            continue  # folded-bit collision; draw again
        taken.add(smiles)
        return smiles


def make_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> list[PairRecord]:
    """Generate ``spec.n_pairs`` labelled pairs with exactly half positives.

    Proteins and drugs are split evenly between rule-carrying and plain ones;
    negatives are drawn uniformly from the three non-positive combinations.
    """
    n_motif = spec.n_proteins // 2
    n_marker = spec.n_drugs // 2
    n_pos = spec.n_pairs // 2
    pos_room = n_motif * n_marker
    neg_room = spec.n_proteins * spec.n_drugs - pos_room
    if n_pos > pos_room or spec.n_pairs - n_pos > neg_room:
        raise ValueError(f"{spec.n_pairs} pairs do not fit in {spec.n_proteins} proteins x {spec.n_drugs} drugs "
                         f"({pos_room} positive and {neg_room} negative combinations)")
    if spec.min_length < len(MOTIF) or spec.min_length > spec.max_length:
        raise ValueError(f"need {len(MOTIF)} <= min_length <= max_length")
    rng = np.random.default_rng(spec.seed)
    proteins = [(f"P{i:04d}", _protein(rng, spec, i < n_motif)) for i in range(spec.n_proteins)]
    taken: set = set()
    drugs = [(f"D{i:04d}", _drug(rng, spec, i < n_marker, taken)) for i in range(spec.n_drugs)]
    groups = {
        (pm, dm): ([p for k, p in enumerate(proteins) if (k < n_motif) == pm],
                   [d for k, d in enumerate(drugs) if (k < n_marker) == dm])
        for pm in (True, False) for dm in (True, False)
    }
    negatives = [(True, False), (False, True), (False, False)]
    labels = np.array([1] * n_pos + [0] * (spec.n_pairs - n_pos))
    labels = rng.permutation(labels)
    used = set()
    records = []
    for y in labels:
        while True:
            key = (True, True) if y else negatives[int(rng.integers(3))]
            prots, drgs = groups[key]
            (pid, seq) = prots[int(rng.integers(len(prots)))]
            (did, smi) = drgs[int(rng.integers(len(drgs)))]
            if (pid, did) not in used:
                used.add((pid, did))
                break
        records.append(PairRecord(pid, did, seq, smi, int(y)))
    return records
