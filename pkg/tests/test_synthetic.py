import numpy as np
import pytest

from bridgedpi.chem import morgan_fingerprint, parse_smiles
from bridgedpi.metrics import roc_auc
from bridgedpi.synthetic import MOTIF, SyntheticSpec, has_marker, has_motif, label_rule, make_synthetic, marker_bits

SPEC = SyntheticSpec(n_pairs=400, n_proteins=40, n_drugs=30, seed=4)


@pytest.fixture(scope="module")
def data():
    return make_synthetic(SPEC)


def test_size_balance_and_uniqueness(data):
    assert len(data) == 400
    assert 0.45 <= np.mean([r.label for r in data]) <= 0.55
    assert len({(r.protein_id, r.drug_id) for r in data}) == 400


def test_same_seed_same_data(data):
    assert make_synthetic(SPEC) == data
    assert make_synthetic(SyntheticSpec(**{**SPEC.__dict__, "seed": 5})) != data


def test_every_label_follows_the_rule(data):
    for r in data:
        assert r.label == label_rule(r.protein_sequence, r.smiles)


def test_rule_indicator_product_separates_perfectly(data):
    # the closed-form rule used as a one-feature classifier
    feature = np.array([has_motif(r.protein_sequence) * has_marker(r.smiles) for r in data], dtype=float)
    assert roc_auc(feature, [r.label for r in data]) == 1.0


def test_each_protein_and_drug_has_consistent_sequence(data):
    seqs, smiles = {}, {}
    for r in data:
        assert seqs.setdefault(r.protein_id, r.protein_sequence) == r.protein_sequence
        assert smiles.setdefault(r.drug_id, r.smiles) == r.smiles


def test_lengths_and_motif_placement(data):
    for r in data:
        assert SPEC.min_length <= len(r.protein_sequence) <= SPEC.max_length
        assert r.protein_sequence.count(MOTIF) <= 1


def test_marker_bit_is_the_sulfonyl_sulfur_environment():
    (bit,) = marker_bits()
    fp = morgan_fingerprint(parse_smiles("c1ccccc1S(=O)(=O)N"), radius=0)
    assert bit in fp.on_bits
    assert bit not in morgan_fingerprint(parse_smiles("c1ccccc1C(=O)N")).on_bits


def test_infeasible_sizes_rejected():
    with pytest.raises(ValueError):
        make_synthetic(SyntheticSpec(n_pairs=60, n_proteins=10, n_drugs=10))
    with pytest.raises(ValueError):
        make_synthetic(SyntheticSpec(n_pairs=10, n_proteins=10, n_drugs=10, min_length=3))
