"""Save a trained model, load it back and score every drug against every protein."""

import tempfile
from pathlib import Path

import numpy as np

from bridgedpi.data_io import load_checkpoint, save_checkpoint
from bridgedpi.model import ModelConfig
from bridgedpi.pipeline import model_from_checkpoint, run_experiment
from bridgedpi.synthetic import MOTIF, SyntheticSpec, make_synthetic
from bridgedpi.train import TrainConfig

records = make_synthetic(SyntheticSpec(n_pairs=1200, n_proteins=80, n_drugs=60, seed=3))
model_cfg = ModelConfig(embed_dim=16, protein_mlp_widths=(64, 16), drug_mlp_widths=(64, 32, 16),
                        hyper_node_count=4, token_embed_dim=8, protein_max_len=160, smiles_max_len=64)
train_cfg = TrainConfig(batch_size=64, max_epochs=6, seed=0)
result = run_experiment(records, model_cfg, train_cfg)
print(f"validation AUC {result.best_val_auc:.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.bdpi"
    save_checkpoint(path, result.checkpoint(records, train_cfg))
    print(f"checkpoint: {path.stat().st_size} bytes")
    model = model_from_checkpoint(load_checkpoint(path))

proteins = {
    "with_motif": "MKLAG" + MOTIF + "GGSLLKPQEEAVKRLLDEGHA",
    "without": "MKLAGGGSLLKPQEEAVKRLLDEGHAWCHMA",
}
drugs = {"sulfonamide": "Nc1ccc(cc1)S(=O)(=O)N", "amide": "Nc1ccc(cc1)C(=O)N", "ethanol": "CCO"}

seqs = [s for s in proteins.values()] * len(drugs)
smiles = [s for s in drugs.values() for _ in proteins]
matrix = model.predict(model.featurize(seqs, smiles)).reshape(len(drugs), len(proteins))
print(f"{'':<12}" + "".join(f"{p:>12}" for p in proteins))
for name, row in zip(drugs, matrix):
    print(f"{name:<12}" + "".join(f"{x:>12.3f}" for x in row))
# reloaded weights give the same numbers as the in-memory model
print(np.array_equal(result.model.predict(model.featurize(seqs, smiles)), matrix.ravel()))
