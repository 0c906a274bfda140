"""Protein k-mer counts, their per-block standardisation and the token encoding."""

import numpy as np

from bridgedpi.protein import BLOCK_SLICES, PROTEIN_VOCAB, block_normalize, encode_sequence, kmer_features, kmer_names

seq = "MKTWCHMYAAGHKLLA"
raw = kmer_features(seq)
names = kmer_names()
print(f"{len(raw)} features for a {len(seq)}-residue sequence")

# 1-mers, 2-mers and 3-mers sit in three consecutive blocks
for sl in BLOCK_SLICES:
    block = raw[sl]
    top = np.argsort(-block, kind="stable")[:3] + sl.start
    print(f"block {sl.start:>4}:{sl.stop:<5} total {int(block.sum()):>3}  top", [(names[i], int(raw[i])) for i in top])

# each block is standardised separately, so every block ends with mean 0, std 1
norm = block_normalize(raw)
for sl in BLOCK_SLICES:
    print(f"block {sl.start:>4}: mean {norm[sl].mean():+.2e}, std {norm[sl].std():.6f}")

# characters outside the 20 standard residues break k-mers but are not errors
print("with an X:", int(kmer_features("MKXTW")[20:420].sum()), "2-mers")

# the CNN branch reads token ids instead, padded to a fixed length
print(encode_sequence(seq, 20, PROTEIN_VOCAB))
