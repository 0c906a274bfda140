import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgedpi import autodiff as ad
from bridgedpi.autodiff import Tensor
from bridgedpi.model import (
    BridgeDPI,
    FeatureBatch,
    Featurizer,
    Mode,
    ModelConfig,
    build_pair_graph,
    embed_drug,
    embed_protein,
    gnn_forward,
    init_params,
    predict_pair,
)
from gradcases import small_model_config
from oracles import power_iteration

PROTEINS = ["MKTWCHMYAAGHK", "GGSLLKPQ", "ACDEFGHIKLMNPQRSTVWY"]
DRUGS = ["c1ccccc1S(=O)(=O)N", "CCO", "CC(=O)Nc1ccc(O)cc1"]


def make(config=None, seed=0, dtype=np.float64):
    config = config or small_model_config()
    model = BridgeDPI(config, seed=seed, dtype=dtype)
    return model, model.featurize(PROTEINS, DRUGS)


def test_default_config_matches_published_sizes():
    c = ModelConfig()
    assert c.embed_dim == 128
    assert c.protein_mlp_widths == (1024, 128)
    assert c.drug_mlp_widths == (1024, 256, 128)
    assert (c.gnn_layers, c.head_layers, c.hyper_node_count) == (3, 2, 64)
    assert c.dropout_rate == 0.5


@pytest.mark.parametrize("changes", [
    {"protein_mlp_widths": (8, 5)},
    {"hyper_node_count": -2},
    {"use_protein_kmer": False, "use_protein_cnn": False},
    {"use_drug_fp": False, "use_drug_cnn": False},
    {"head_layers": 0},
    {"dropout_rate": 1.0},
])
def test_config_validation(changes):
    with pytest.raises(ValueError):
        ModelConfig(**{**small_model_config().to_dict(), **changes})


def test_config_dict_round_trip():
    c = small_model_config()
    assert ModelConfig.from_dict(c.to_dict()) == c


def test_output_shape_and_range():
    model, batch = make()
    probs = model.predict(batch)
    assert probs.shape == (3,) and probs.dtype == np.float64
    assert np.all((probs > 0) & (probs < 1))


def test_init_is_seeded_and_per_tensor():
    a = init_params(small_model_config(), seed=3)
    b = init_params(small_model_config(), seed=3)
    c = init_params(small_model_config(), seed=4)
    assert all(np.array_equal(a[n].data, b[n].data) for n in a.names())
    assert not np.array_equal(a["gnn.0.weight"].data, c["gnn.0.weight"].data)
    # dropping a branch leaves every other tensor's initial value unchanged
    d = init_params(ModelConfig(**{**small_model_config().to_dict(), "use_drug_cnn": False}), seed=3)
    assert all(np.array_equal(d[n].data, a[n].data) for n in d.names())


def test_l2_names_exclude_bias_bn_and_hyper_nodes():
    params = init_params(small_model_config())
    names = params.decay_names()
    assert "hyper_nodes" not in names
    assert not any(n.endswith((".bias", ".gamma", ".beta")) for n in names)
    assert "gnn.0.weight" in names and "protein_cnn.embed.table" in names


def test_hyper_node_permutation_invariance():
    model, batch = make(small_model_config(m=6))
    before = model.predict(batch)
    bank = model.params["hyper_nodes"]
    bank.data = bank.data[np.random.default_rng(0).permutation(bank.shape[0])]
    after = model.predict(batch)
    assert np.max(np.abs(after - before)) < 1e-6


def test_residual_identity_with_zero_gnn_weights():
    model, batch = make()
    for i in range(model.config.gnn_layers):
        model.params[f"gnn.{i}.weight"].data[...] = 0
        model.params[f"gnn.{i}.bias"].data[...] = 0
    u, v = model.embed(batch)
    graph = build_pair_graph(u, v, model.hyper_nodes())
    u_hat, v_hat = gnn_forward(graph, model.gnn_layers())
    assert np.array_equal(u_hat.data, u.data) and np.array_equal(v_hat.data, v.data)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 14), st.integers(1, 9), st.integers(0, 10_000))
def test_propagation_operator_spectral_bound(m, d, seed):
    rng = np.random.default_rng(seed)
    u, v = Tensor(rng.normal(size=(1, d))), Tensor(rng.normal(size=(1, d)))
    bank = Tensor(rng.normal(size=(m, d))) if m else None
    graph = build_pair_graph(u, v, bank)
    op = graph.operator.data[0]
    assert op.shape == (m + 2, m + 2)
    assert np.allclose(op, op.T, atol=1e-12)
    assert abs(power_iteration(op)) <= 1 + 1e-6
    assert np.all(graph.filtered.data >= 0)


BRANCH_ZEROING = {
    "use_protein_kmer": lambda p: (p["protein_mlp.1.weight"].data.fill(0), p["protein_mlp.1.bias"].data.fill(0)),
    "use_protein_cnn": lambda p: (p["protein_cnn.conv.kernel"].data.fill(0), p["protein_cnn.conv.bias"].data.fill(0)),
    "use_drug_fp": lambda p: (p["drug_mlp.2.weight"].data.fill(0), p["drug_mlp.2.bias"].data.fill(0)),
    "use_drug_cnn": lambda p: (p["drug_cnn.conv.kernel"].data.fill(0), p["drug_cnn.conv.bias"].data.fill(0)),
}


@pytest.mark.parametrize("branch", sorted(BRANCH_ZEROING))
def test_disabled_branch_equals_zeroed_branch(branch):
    full, batch = make()
    BRANCH_ZEROING[branch](full.params)
    off, _ = make(ModelConfig(**{**small_model_config().to_dict(), branch: False}))
    assert np.array_equal(full.predict(batch), off.predict(batch))


def test_protein_without_cnn_is_mlp_output_exactly():
    config = ModelConfig(**{**small_model_config().to_dict(), "use_protein_cnn": False})
    model, batch = make(config)
    u = embed_protein(batch.kmer, batch.protein_tokens, model.params, config)
    x = Tensor(batch.kmer)
    p = model.params
    h = x @ p["protein_mlp.0.weight"] + p["protein_mlp.0.bias"]
    h = ad.relu(ad.batchnorm(h, p["protein_mlp.0.bn.gamma"], p["protein_mlp.0.bn.beta"],
                             p.buffers["protein_mlp.0.bn.running_mean"], p.buffers["protein_mlp.0.bn.running_var"],
                             training=False))
    h = h @ p["protein_mlp.1.weight"] + p["protein_mlp.1.bias"]
    assert np.array_equal(u.data, h.data)


def test_both_branches_disabled_rejected_at_call():
    config = small_model_config()
    model, batch = make(config)
    config.use_drug_fp = config.use_drug_cnn = False
    with pytest.raises(ValueError):
        embed_drug(batch.fingerprint, batch.drug_tokens, model.params, config)


def test_bypass_skips_graph():
    config = small_model_config(m=-1)
    model, batch = make(config)
    assert "hyper_nodes" not in model.params and "gnn.0.weight" not in model.params
    u, v = model.embed(batch)
    direct = predict_pair(u, v, model.params, config).data
    assert np.array_equal(model.predict(batch), direct)


def test_zero_hyper_nodes_builds_two_node_graph():
    model, batch = make(small_model_config(m=0))
    u, v = model.embed(batch)
    graph = build_pair_graph(u, v, None)
    assert graph.operator.shape == (3, 2, 2)
    assert model.predict(batch).shape == (3,)


def test_graph_shape_errors():
    u = Tensor(np.ones((2, 4)))
    with pytest.raises(ValueError):
        build_pair_graph(u, Tensor(np.ones((2, 3))), None)
    with pytest.raises(ValueError):
        build_pair_graph(u, u, Tensor(np.ones((3, 5))))


def test_pairs_are_independent_at_inference():
    model, batch = make()
    together = model.predict(batch)
    alone = np.concatenate([model.predict(batch.take(slice(i, i + 1))) for i in range(3)])
    assert np.allclose(together, alone, atol=1e-12)


def test_training_mode_dropout_depends_on_rng_only():
    model, batch = make()
    a = model.forward_batch(batch, Mode(True, np.random.default_rng(1))).data
    b = model.forward_batch(batch, Mode(True, np.random.default_rng(1))).data
    assert np.array_equal(a, b)


def test_featurizer_caches_and_shapes():
    config = small_model_config()
    feat = Featurizer(config)
    batch = feat.batch(PROTEINS[:2], DRUGS[:2])
    assert isinstance(batch, FeatureBatch)
    assert batch.kmer.shape == (2, 8420)
    assert batch.protein_tokens.shape == (2, config.protein_max_len)
    assert batch.fingerprint.shape == (2, config.fingerprint_bits)
    assert batch.drug_tokens.shape == (2, config.smiles_max_len)
    assert feat.protein(PROTEINS[0]) is feat.protein(PROTEINS[0])


def test_empty_batch_rejected():
    model, batch = make()
    with pytest.raises(ValueError):
        model.forward_batch(batch.take(slice(0, 0)))
