"""The hyper-node graph network for drug-protein interaction scoring.

Each (protein, drug) pair becomes a small graph whose nodes are the protein
embedding ``u``, the drug embedding ``v`` and ``m`` learnable hyper-nodes
shared by all pairs. Edges are ReLU-filtered cosine similarities, the
adjacency is degree-normalised and a residual GNN mixes the nodes. The
interaction probability is read from the element-wise product of the first
two output rows.

Layer order inside every hidden MLP/head layer is
affine -> batchnorm -> ReLU -> dropout; the final affine layer of each
embedding MLP is left plain so embeddings can take either sign.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .chem import morgan_fingerprint, parse_smiles
from .protein import (
    DEFAULT_PROTEIN_MAX_LEN,
    DEFAULT_SMILES_MAX_LEN,
    KMER_DIM,
    PROTEIN_VOCAB,
    SMILES_VOCAB,
    Vocabulary,
    block_normalize,
    encode_sequence,
    kmer_features,
)


@dataclass
class ModelConfig:
    embed_dim: int = 128
    protein_mlp_widths: tuple[int, ...] = (1024, 128)
    drug_mlp_widths: tuple[int, ...] = (1024, 256, 128)
    gnn_layers: int = 3
    head_layers: int = 2
    hyper_node_count: int = 64  # -1 removes the graph stage
    dropout_rate: float = 0.5
    use_protein_kmer: bool = True
    use_protein_cnn: bool = True
    use_drug_fp: bool = True
    use_drug_cnn: bool = True
    token_embed_dim: int = 64
    protein_kernel_width: int = 7
    drug_kernel_width: int = 5
    protein_max_len: int = DEFAULT_PROTEIN_MAX_LEN
    smiles_max_len: int = DEFAULT_SMILES_MAX_LEN
    protein_vocab_size: int = PROTEIN_VOCAB.size
    smiles_vocab_size: int = SMILES_VOCAB.size
    fingerprint_bits: int = 1024
    fingerprint_radius: int = 2
    hyper_node_std: float = 0.1
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        self.protein_mlp_widths = tuple(int(w) for w in self.protein_mlp_widths)
        self.drug_mlp_widths = tuple(int(w) for w in self.drug_mlp_widths)
        self.validate()

    def validate(self):
        for name in ("protein_mlp_widths", "drug_mlp_widths"):
            widths = getattr(self, name)
            if not widths or widths[-1] != self.embed_dim:
                raise ValueError(f"{name} must end with embed_dim={self.embed_dim}")
        if self.hyper_node_count < -1:
            raise ValueError("hyper_node_count must be >= -1")
        if not (self.use_protein_kmer or self.use_protein_cnn):
            raise ValueError("at least one protein branch must be enabled")
        if not (self.use_drug_fp or self.use_drug_cnn):
            raise ValueError("at least one drug branch must be enabled")
        if self.head_layers < 1 or self.gnn_layers < 0:
            raise ValueError("head_layers must be >= 1 and gnn_layers >= 0")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def uses_graph(self) -> bool:
        return self.hyper_node_count >= 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protein_mlp_widths"] = list(self.protein_mlp_widths)
        d["drug_mlp_widths"] = list(self.drug_mlp_widths)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


# --------------------------------------------------------------------------
# parameters


DECAY_SUFFIXES = (".weight", ".kernel", ".table")


@dataclass
class ModelParams:
    """Learnable tensors plus non-learnable batchnorm running statistics."""

    tensors: dict[str, Tensor] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors)

    def decay_names(self) -> list[str]:
        """Weight matrices, kernels and embedding tables (no biases/BN/hyper-nodes)."""
        return [n for n in self.tensors if n.endswith(DECAY_SUFFIXES)]

    def copy(self) -> ModelParams:
        return ModelParams(
            {k: Tensor(t.data.copy(), requires_grad=t.requires_grad, name=k) for k, t in self.tensors.items()},
            {k: v.copy() for k, v in self.buffers.items()},
        )

    def astype(self, dtype) -> ModelParams:
        return ModelParams(
            {k: Tensor(t.data.astype(dtype), requires_grad=t.requires_grad, name=k) for k, t in self.tensors.items()},
            {k: v.astype(dtype) for k, v in self.buffers.items()},
        )

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())


def _rng_for(seed: int, name: str) -> np.random.Generator:
    # per-tensor streams: toggling one branch leaves the others' init unchanged
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) for affine and conv layers, N(0, 1) for token
    tables, N(0, hyper_node_std) for hyper-nodes, (1, 0) for batchnorm."""
    p = ModelParams()

    def add(name, shape, kind, fan_in=None):
        rng = _rng_for(seed, name)
        if kind == "uniform":
            bound = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, size=shape)
        elif kind == "normal":
            arr = rng.normal(0.0, 1.0, size=shape)
        elif kind == "hyper":
            arr = rng.normal(0.0, config.hyper_node_std, size=shape)
        elif kind == "ones":
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        p.tensors[name] = Tensor(arr.astype(dtype), requires_grad=True, name=name)

    def mlp(prefix, in_dim, widths, hidden_bn=True):
        for i, w in enumerate(widths):
            add(f"{prefix}.{i}.weight", (in_dim, w), "uniform", in_dim)
            add(f"{prefix}.{i}.bias", (w,), "uniform", in_dim)
            if hidden_bn and i < len(widths) - 1:
                add(f"{prefix}.{i}.bn.gamma", (w,), "ones")
                add(f"{prefix}.{i}.bn.beta", (w,), "zeros")
                p.buffers[f"{prefix}.{i}.bn.running_mean"] = np.zeros(w, dtype=dtype)
                p.buffers[f"{prefix}.{i}.bn.running_var"] = np.ones(w, dtype=dtype)
            in_dim = w

    def cnn(prefix, vocab, width):
        add(f"{prefix}.embed.table", (vocab, config.token_embed_dim), "normal")
        fan_in = config.token_embed_dim * width
        add(f"{prefix}.conv.kernel", (width, config.token_embed_dim, config.embed_dim), "uniform", fan_in)
        add(f"{prefix}.conv.bias", (config.embed_dim,), "uniform", fan_in)

    d = config.embed_dim
    if config.use_protein_kmer:
        mlp("protein_mlp", KMER_DIM, config.protein_mlp_widths)
    if config.use_protein_cnn:
        cnn("protein_cnn", config.protein_vocab_size, config.protein_kernel_width)
    if config.use_drug_fp:
        mlp("drug_mlp", config.fingerprint_bits, config.drug_mlp_widths)
    if config.use_drug_cnn:
        cnn("drug_cnn", config.smiles_vocab_size, config.drug_kernel_width)
    if config.hyper_node_count > 0:
        add("hyper_nodes", (config.hyper_node_count, d), "hyper")
    if config.uses_graph:
        for i in range(config.gnn_layers):
            add(f"gnn.{i}.weight", (d, d), "uniform", d)
            add(f"gnn.{i}.bias", (d,), "uniform", d)
    mlp("head", d, [d] * (config.head_layers - 1) + [1])
    return p


# --------------------------------------------------------------------------
# features


@dataclass
class FeatureBatch:
    kmer: np.ndarray  # (B, 8420) block-normalised k-mer vectors
    protein_tokens: np.ndarray  # (B, protein_max_len) int
    fingerprint: np.ndarray  # (B, nbits) 0/1
    drug_tokens: np.ndarray  # (B, smiles_max_len) int

    def __len__(self):
        return self.kmer.shape[0]

    def take(self, index) -> FeatureBatch:
        return FeatureBatch(self.kmer[index], self.protein_tokens[index],
                            self.fingerprint[index], self.drug_tokens[index])


class Featurizer:
    """Turns raw sequences/SMILES into model inputs, caching per unique string."""

    def __init__(self, config: ModelConfig, protein_vocab: Vocabulary = PROTEIN_VOCAB,
                 smiles_vocab: Vocabulary = SMILES_VOCAB):
        self.config = config
        self.protein_vocab = protein_vocab
        self.smiles_vocab = smiles_vocab
        self._proteins: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._drugs: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def protein(self, sequence: str) -> tuple[np.ndarray, np.ndarray]:
        hit = self._proteins.get(sequence)
        if hit is None:
            kmer = block_normalize(kmer_features(sequence)).astype(np.float32)
            tokens = encode_sequence(sequence, self.config.protein_max_len, self.protein_vocab)
            hit = self._proteins[sequence] = (kmer, tokens)
        return hit

    def drug(self, smiles: str) -> tuple[np.ndarray, np.ndarray]:
        hit = self._drugs.get(smiles)
        if hit is None:
            fp = morgan_fingerprint(parse_smiles(smiles), self.config.fingerprint_radius,
                                    self.config.fingerprint_bits)
            tokens = encode_sequence(smiles, self.config.smiles_max_len, self.smiles_vocab)
            hit = self._drugs[smiles] = (fp.bits.astype(np.float32), tokens)
        return hit

    def batch(self, sequences: list[str], smiles: list[str]) -> FeatureBatch:
        prot = [self.protein(s) for s in sequences]
        drug = [self.drug(s) for s in smiles]
        return FeatureBatch(
            np.stack([k for k, _ in prot]),
            np.stack([t for _, t in prot]),
            np.stack([f for f, _ in drug]),
            np.stack([t for _, t in drug]),
        )


# --------------------------------------------------------------------------
# network pieces


@dataclass
class Mode:
    training: bool = False
    rng: np.random.Generator | None = None
    dropout: bool = True  # only consulted in training mode

    @property
    def use_dropout(self) -> bool:
        return self.training and self.dropout


INFERENCE = Mode()


def _mlp(params: ModelParams, prefix: str, x: Tensor, n_layers: int, config: ModelConfig,
         mode: Mode) -> Tensor:
    for i in range(n_layers):
        x = x @ params[f"{prefix}.{i}.weight"] + params[f"{prefix}.{i}.bias"]
        if i == n_layers - 1:
            break
        x = ad.batchnorm(x, params[f"{prefix}.{i}.bn.gamma"], params[f"{prefix}.{i}.bn.beta"],
                         params.buffers[f"{prefix}.{i}.bn.running_mean"],
                         params.buffers[f"{prefix}.{i}.bn.running_var"],
                         training=mode.training, momentum=config.bn_momentum, eps=config.bn_eps)
        x = ad.relu(x)
        if mode.use_dropout and config.dropout_rate > 0:
            x = ad.dropout(x, config.dropout_rate, mode.rng)
    return x


def _sequence_cnn(params: ModelParams, prefix: str, tokens: np.ndarray) -> Tensor:
    emb = ad.embedding(params[f"{prefix}.embed.table"], tokens)
    conv = ad.conv1d(emb, params[f"{prefix}.conv.kernel"], params[f"{prefix}.conv.bias"])
    return ad.global_maxpool(ad.relu(conv))


def _dtype(params: ModelParams):
    return next(iter(params.tensors.values())).dtype


def embed_protein(kmer, tokens, params: ModelParams, config: ModelConfig, mode: Mode = INFERENCE) -> Tensor:
    """Protein embedding ``u``: k-mer MLP output plus CNN sequence features."""
    if not (config.use_protein_kmer or config.use_protein_cnn):
        raise ValueError("both protein branches are disabled")
    out = None
    if config.use_protein_kmer:
        x = Tensor(np.asarray(kmer, dtype=_dtype(params)))
        out = _mlp(params, "protein_mlp", x, len(config.protein_mlp_widths), config, mode)
    if config.use_protein_cnn:
        seq = _sequence_cnn(params, "protein_cnn", np.asarray(tokens))
        out = seq if out is None else out + seq
    return out


def embed_drug(fingerprint, tokens, params: ModelParams, config: ModelConfig, mode: Mode = INFERENCE) -> Tensor:
    """Drug embedding ``v``: fingerprint MLP output plus CNN SMILES features."""
    if not (config.use_drug_fp or config.use_drug_cnn):
        raise ValueError("both drug branches are disabled")
    out = None
    if config.use_drug_fp:
        x = Tensor(np.asarray(fingerprint, dtype=_dtype(params)))
        out = _mlp(params, "drug_mlp", x, len(config.drug_mlp_widths), config, mode)
    if config.use_drug_cnn:
        seq = _sequence_cnn(params, "drug_cnn", np.asarray(tokens))
        out = seq if out is None else out + seq
    return out


@dataclass
class PairGraph:
    nodes: Tensor  # (B, m+2, d), rows ordered (u, v, n_1..n_m)
    adjacency: Tensor  # cosine similarities
    filtered: Tensor  # ReLU(adjacency)
    operator: Tensor  # D^-1/2 ReLU(A) D^-1/2
    layers: list[Tensor] = field(default_factory=list)


def build_pair_graph(u: Tensor, v: Tensor, bank: Tensor | None) -> PairGraph:
    """Stack ``u``, ``v`` and the hyper-node bank into per-pair graphs.

    ``u`` and ``v`` are ``(B, d)``; ``bank`` is ``(m, d)`` or None for m = 0.
    """
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError(f"u and v must both be (batch, dim); got {u.shape} and {v.shape}")
    b, d = u.shape
    rows = [ad.reshape(u, (b, 1, d)), ad.reshape(v, (b, 1, d))]
    if bank is not None:
        if bank.ndim != 2 or bank.shape[1] != d:
            raise ValueError(f"hyper-node bank must be (m, {d}); got {bank.shape}")
        rows.append(Tensor(np.zeros((b,) + bank.shape, dtype=u.dtype)) + bank)
    z0 = ad.concat(rows, axis=1)
    adjacency = ad.cosine_similarity_matrix(z0)
    filtered = ad.relu(adjacency)
    return PairGraph(z0, adjacency, filtered, ad.sym_normalize(filtered))


def gnn_forward(graph: PairGraph, layers: list[tuple[Tensor, Tensor]]) -> tuple[Tensor, Tensor]:
    """Residual propagation ``Z <- ReLU(L Z W + b) + Z``; returns rows 0 and 1."""
    z = graph.nodes
    if graph.operator.shape[-1] != z.shape[-2]:
        raise ValueError("operator and node matrix sizes differ")
    graph.layers = [z]
    for w, b in layers:
        z = ad.relu(ad.matmul(ad.matmul(graph.operator, z), w) + b) + z
        graph.layers.append(z)
    return z[:, 0, :], z[:, 1, :]


def predict_pair(u_hat: Tensor, v_hat: Tensor, params: ModelParams, config: ModelConfig,
                 mode: Mode = INFERENCE) -> Tensor:
    """``sigmoid(f_o(u_hat * v_hat))`` as a ``(B,)`` probability vector."""
    h = u_hat * v_hat
    logits = _mlp(params, "head", h, config.head_layers, config, mode)
    return ad.sigmoid(ad.reshape(logits, (logits.shape[0],)))


class BridgeDPI:
    """Parameters, configuration and the batched forward pass."""

    def __init__(self, config: ModelConfig, params: ModelParams | None = None,
                 seed: int = 0, dtype=np.float32):
        config.validate()
        self.config = config
        self.params = params if params is not None else init_params(config, seed, dtype)
        self.featurizer = Featurizer(config)

    @property
    def dtype(self):
        return _dtype(self.params)

    def gnn_layers(self) -> list[tuple[Tensor, Tensor]]:
        return [(self.params[f"gnn.{i}.weight"], self.params[f"gnn.{i}.bias"])
                for i in range(self.config.gnn_layers)]

    def hyper_nodes(self) -> Tensor | None:
        return self.params["hyper_nodes"] if "hyper_nodes" in self.params else None

    def embed(self, batch: FeatureBatch, mode: Mode = INFERENCE) -> tuple[Tensor, Tensor]:
        u = embed_protein(batch.kmer, batch.protein_tokens, self.params, self.config, mode)
        v = embed_drug(batch.fingerprint, batch.drug_tokens, self.params, self.config, mode)
        return u, v

    def forward_batch(self, batch: FeatureBatch, mode: Mode = INFERENCE) -> Tensor:
        if len(batch) == 0:
            raise ValueError("empty batch")
        u, v = self.embed(batch, mode)
        if self.config.uses_graph:
            graph = build_pair_graph(u, v, self.hyper_nodes())
            u, v = gnn_forward(graph, self.gnn_layers())
        return predict_pair(u, v, self.params, self.config, mode)

    def predict(self, batch: FeatureBatch, batch_size: int = 512) -> np.ndarray:
        """Inference-mode probabilities as a float64 array."""
        out = []
        for start in range(0, len(batch), batch_size):
            part = batch.take(slice(start, start + batch_size))
            out.append(self.forward_batch(part, INFERENCE).data)
        return np.concatenate(out).astype(np.float64) if out else np.zeros(0)

    def featurize(self, sequences: list[str], smiles: list[str]) -> FeatureBatch:
        return self.featurizer.batch(sequences, smiles)
