"""Slow, obviously-correct reference implementations used only by the tests.

None of these import from ``bridgedpi``; they are written from the
definitions so that agreement with the library is meaningful.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

AA = "ACDEFGHIKLMNPQRSTVWY"

# --------------------------------------------------------------------------
# circular fingerprints

M64 = 2**64


def splitmix64(x: int) -> int:
    """The splitmix64 output finalizer (no state increment)."""
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) % M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) % M64
    return x ^ (x >> 31)


def seq_hash(values) -> int:
    h = 0x2545F4914F6CDD1D
    for position, value in enumerate(values, start=1):
        h = splitmix64(h ^ splitmix64((value + position * 0x9E3779B97F4A7C15) % M64))
    return h


def ring_bonds_bruteforce(n_atoms: int, bonds: list[tuple[int, int]]) -> set[int]:
    """A bond lies on a ring iff its ends stay connected once it is removed."""
    out = set()
    for k, (a, b) in enumerate(bonds):
        adj = {i: set() for i in range(n_atoms)}
        for j, (x, y) in enumerate(bonds):
            if j != k:
                adj[x].add(y)
                adj[y].add(x)
        seen, stack = {a}, [a]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if b in seen:
            out.add(k)
    return out


def environment_bits(invariants: list[tuple[int, ...]], bonds: list[tuple[int, int, int]],
                     radius: int, nbits: int) -> set[int]:
    """Recursive definition of the environment identifier of every (atom, r).

    id(a, 0) = H(invariants(a))
    id(a, r) = H(r, id(a, r-1), sorted (bond code, id(nbr, r-1)) pairs, flattened)
    """
    nbrs = {i: [] for i in range(len(invariants))}
    for a, b, code in bonds:
        nbrs[a].append((b, code))
        nbrs[b].append((a, code))

    @lru_cache(maxsize=None)
    def env(atom: int, r: int) -> int:
        if r == 0:
            return seq_hash(invariants[atom])
        pairs = sorted((code, env(nb, r - 1)) for nb, code in nbrs[atom])
        return seq_hash([r, env(atom, r - 1)] + [x for pair in pairs for x in pair])

    return {env(a, r) % nbits for a in range(len(invariants)) for r in range(radius + 1)}


# --------------------------------------------------------------------------
# k-mers


def kmer_oracle(seq: str) -> np.ndarray:
    """Count every substring of length 1-3 made only of standard residues."""
    names = ["".join(p) for k in (1, 2, 3) for p in itertools.product(AA, repeat=k)]
    counts = dict.fromkeys(names, 0)
    for k in (1, 2, 3):
        for i in range(len(seq) - k + 1):
            sub = seq[i : i + k]
            if sub in counts:
                counts[sub] += 1
    return np.array([counts[n] for n in names], dtype=np.float64)


# --------------------------------------------------------------------------
# metrics


def pairwise_auc(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


# --------------------------------------------------------------------------
# linear algebra


def power_iteration(matrix: np.ndarray, iters: int = 2000, seed: int = 0) -> float:
    """Largest-magnitude eigenvalue of a symmetric matrix (Rayleigh quotient)."""
    v = np.random.default_rng(seed).normal(size=matrix.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(v @ matrix @ v)
