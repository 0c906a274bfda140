"""Protein k-mer features and character tokenisation for the CNN branches."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
NONSTANDARD = "BJOUXZ"
BLOCK_SIZES = (20, 400, 8000)
BLOCK_SLICES = (slice(0, 20), slice(20, 420), slice(420, 8420))
KMER_DIM = sum(BLOCK_SIZES)

PAD_ID = 0
UNK_ID = 1

_AA_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}
_ZERO_STD = 1e-12

# SMILES characters seen in drug-like datasets; the rest map to UNK_ID
SMILES_ALPHABET = "#%()+-./0123456789:=@BCFHIKLMNOPRSTVZ[\\]abcdeghilnoprstu"

DEFAULT_PROTEIN_MAX_LEN = 1024
DEFAULT_SMILES_MAX_LEN = 128


def kmer_names() -> list[str]:
    """All 8420 k-mers in feature order (lexicographic within each block)."""
    names = []
    for k in (1, 2, 3):
        names.extend("".join(p) for p in product(AMINO_ACIDS, repeat=k))
    return names


def kmer_features(sequence: str) -> np.ndarray:
    """Raw overlapping 1/2/3-mer counts, length 8420.

    Residues outside the 20-letter alphabet are skipped: any k-mer that
    spans one contributes nothing.
    """
    if not sequence:
        raise ValueError("empty protein sequence")
    codes = np.array([_AA_INDEX.get(ch, -1) for ch in sequence.upper()], dtype=np.int64)
    out = np.zeros(KMER_DIM, dtype=np.float64)
    offset = 0
    for k, size in zip((1, 2, 3), BLOCK_SIZES):
        if len(codes) >= k:
            windows = np.lib.stride_tricks.sliding_window_view(codes, k)
            windows = windows[(windows >= 0).all(axis=1)]
            idx = np.zeros(len(windows), dtype=np.int64)
            for col in range(k):
                idx = idx * 20 + windows[:, col]
            out[offset : offset + size] += np.bincount(idx, minlength=size)
        offset += size
    return out


def block_normalize(raw: np.ndarray) -> np.ndarray:
    """Standardise each k-mer block separately (population std).

    Blocks whose std is below 1e-12 become all zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != KMER_DIM:
        raise ValueError(f"expected last dimension {KMER_DIM}, got {raw.shape[-1]}")
    out = np.zeros_like(raw)
    for sl in BLOCK_SLICES:
        block = raw[..., sl]
        mean = block.mean(axis=-1, keepdims=True)
        std = block.std(axis=-1, keepdims=True)
        safe = np.where(std < _ZERO_STD, 1.0, std)
        out[..., sl] = np.where(std < _ZERO_STD, 0.0, (block - mean) / safe)
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Character vocabulary; ids 0 and 1 are reserved for pad and unknown."""

    alphabet: str

    def __post_init__(self):
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet has duplicate characters")

    @property
    def size(self) -> int:
        return len(self.alphabet) + 2

    def index(self, ch: str) -> int:
        pos = self.alphabet.find(ch)
        return UNK_ID if pos < 0 else pos + 2


PROTEIN_VOCAB = Vocabulary(AMINO_ACIDS)
SMILES_VOCAB = Vocabulary(SMILES_ALPHABET)


def encode_sequence(text: str, max_len: int, vocabulary: Vocabulary) -> np.ndarray:
    """Map characters to vocabulary ids, truncate to ``max_len`` and pad with 0."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    lookup = {ch: i + 2 for i, ch in enumerate(vocabulary.alphabet)}
    for pos, ch in enumerate(text[:max_len]):
        ids[pos] = lookup.get(ch, UNK_ID)
    return ids
