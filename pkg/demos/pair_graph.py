"""Inside one forward pass: embeddings, the per-pair graph and the propagation."""

import numpy as np

from bridgedpi.model import BridgeDPI, ModelConfig, build_pair_graph, gnn_forward

config = ModelConfig(embed_dim=16, protein_mlp_widths=(32, 16), drug_mlp_widths=(32, 24, 16), hyper_node_count=4,
                     token_embed_dim=8, protein_max_len=64, smiles_max_len=32)
model = BridgeDPI(config, seed=1)
batch = model.featurize(["MKTWCHMYAAGHKLLAEEK", "GGSLLKPQ"], ["Nc1ccc(cc1)S(=O)(=O)N", "CCO"])

u, v = model.embed(batch)
print("protein embeddings", u.shape, "drug embeddings", v.shape)

graph = build_pair_graph(u, v, model.hyper_nodes())
np.set_printoptions(precision=2, suppress=True)
# node 0 is the protein, node 1 the drug, then the hyper-nodes
print("cosine adjacency for pair 0:\n", graph.adjacency.data[0])
print("after ReLU and symmetric normalisation:\n", graph.operator.data[0])
print("largest eigenvalue:", np.linalg.eigvalsh(graph.operator.data[0]).max().round(6))

u_hat, v_hat = gnn_forward(graph, model.gnn_layers())
print("|u_hat - u| per pair:", np.linalg.norm(u_hat.data - u.data, axis=1))
print("probabilities:", model.predict(batch))

# m = -1 skips the graph and multiplies the embeddings directly
bypass = BridgeDPI(ModelConfig(**{**config.to_dict(), "hyper_node_count": -1}), seed=1)
print("bypass probabilities:", bypass.predict(batch))
