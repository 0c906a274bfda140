"""Reverse-mode gradients checked against central differences."""

import numpy as np

from bridgedpi import autodiff as ad
from bridgedpi.autodiff import Tape, Tensor, finite_difference_check
from bridgedpi.model import BridgeDPI, Mode, ModelConfig
from bridgedpi.train import compute_loss

rng = np.random.default_rng(0)

# a small two-layer function, differentiated by the tape
w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
x = Tensor(rng.normal(size=(5, 3)))
with Tape() as tape:
    y = ad.tsum(ad.sigmoid(ad.relu(x @ w)))
grads = tape.backward(y)
print("dy/dw:\n", np.round(grads[w], 4))

report = finite_difference_check(lambda: ad.tsum(ad.sigmoid(ad.relu(x @ w))), {"w": w})
print(f"max relative error {report.max_error:.2e}")

# the whole network in float64 on a two-pair batch
config = ModelConfig(embed_dim=6, protein_mlp_widths=(8, 6), drug_mlp_widths=(8, 7, 6), hyper_node_count=4,
                     token_embed_dim=4, protein_max_len=12, smiles_max_len=10, fingerprint_bits=64)
model = BridgeDPI(config, seed=0, dtype=np.float64)
batch = model.featurize(["MKTWCHMYAAGHK", "GGSLLKPQ"], ["c1ccccc1S(=O)(=O)N", "CCO"])
mode = Mode(training=False, dropout=False)


def loss():
    return compute_loss(model.forward_batch(batch, mode), [1, 0], model.params, 0.01)


# central differences lose precision below ~1e-7 gradients, so use a wider step here
report = finite_difference_check(loss, dict(model.params.tensors), step=1e-4, max_entries=20)
print(f"full model: {sum(report.checked.values())} coordinates, max relative error {report.max_error:.2e}")
