"""Dataset files, train/valid/test splits and the binary checkpoint container.

Dataset TSV
    Header row with at least ``protein_id drug_id protein_sequence smiles label``
    (tab separated, any column order). Labels are 0 or 1.

Split manifest
    One line per record: ``index<TAB>partition<TAB>seen_flag`` where the seen
    flag is 1 when the record's protein occurs in the training partition.

Checkpoint (all integers little-endian)
    ``b"BDPI"`` | u32 version | u32 metadata length | metadata (UTF-8 JSON)
    | u32 tensor count | per tensor: u16 name length, name (UTF-8), u8 ndim,
    u32 extent per dimension, float32 values in C order.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .model import ModelConfig, ModelParams
from .protein import PROTEIN_VOCAB, SMILES_VOCAB

COLUMNS = ("protein_id", "drug_id", "protein_sequence", "smiles", "label")


class DatasetFormatError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class PairRecord:
    protein_id: str
    drug_id: str
    protein_sequence: str
    smiles: str
    label: int


def load_dataset(path) -> list[PairRecord]:
    """Read a dataset TSV; every malformed row is reported with its line number."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: missing header row")
    header = lines[0].split("\t")
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise DatasetFormatError(f"{path}: missing column(s) {', '.join(missing)}")
    col = {c: header.index(c) for c in COLUMNS}
    records, problems = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) < len(header):
            problems.append(f"line {lineno}: expected {len(header)} fields, got {len(cells)}")
            continue
        row = {c: cells[i].strip() for c, i in col.items()}
        if row["label"] not in ("0", "1"):
            problems.append(f"line {lineno}: label must be 0 or 1, got {row['label']!r}")
            continue
        if not row["protein_id"] or not row["drug_id"]:
            problems.append(f"line {lineno}: empty protein_id or drug_id")
            continue
        records.append(PairRecord(row["protein_id"], row["drug_id"], row["protein_sequence"],
                                  row["smiles"], int(row["label"])))
    if problems:
        raise DatasetFormatError(f"{path}: " + "; ".join(problems))
    if not records:
        warnings.warn(f"{path}: dataset has a header but no records", stacklevel=2)
    return records


def write_dataset(path, records: list[PairRecord]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE, escapechar="\\")
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([r.protein_id, r.drug_id, r.protein_sequence, r.smiles, r.label])


# --------------------------------------------------------------------------
# splits


@dataclass
class DatasetSplit:
    train: list[int]
    valid: list[int]
    test: list[int] = field(default_factory=list)
    seen: dict[int, bool] = field(default_factory=dict)  # non-train index -> protein in train

    def check_disjoint(self):
        a, b, c = set(self.train), set(self.valid), set(self.test)
        if a & b or a & c or b & c:
            raise ValueError("split partitions overlap")

    def manifest(self) -> str:
        rows = [(i, "train", 1) for i in self.train]
        rows += [(i, "valid", int(self.seen.get(i, False))) for i in self.valid]
        rows += [(i, "test", int(self.seen.get(i, False))) for i in self.test]
        return "".join(f"{i}\t{part}\t{flag}\n" for i, part, flag in sorted(rows))


def _seen_flags(records: list[PairRecord], train: list[int], others: list[int]) -> dict[int, bool]:
    train_proteins = {records[i].protein_id for i in train}
    return {i: records[i].protein_id in train_proteins for i in others}


def split_seen_unseen(records: list[PairRecord], fractions=(0.8, 0.1, 0.1), seed: int = 0,
                      unseen_fraction: float = 0.2) -> DatasetSplit:
    """Train/valid/test split that withholds a seeded subset of proteins from train.

    About ``unseen_fraction`` of the distinct proteins are withheld; their
    records go to valid and test in proportion to those fractions. Seen
    records then fill the remaining valid/test quota and everything else
    trains. Proteins are withheld only while their records fit in the
    valid+test quota.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("fractions must be three non-negative numbers summing to 1")
    n = len(records)
    n_valid = int(round(fractions[1] * n))
    n_test = int(round(fractions[2] * n))
    rng = np.random.default_rng(seed)
    proteins = sorted({r.protein_id for r in records})
    by_protein: dict[str, list[int]] = {p: [] for p in proteins}
    for i, r in enumerate(records):
        by_protein[r.protein_id].append(i)
    target = int(np.floor(unseen_fraction * len(proteins)))
    quota = n_valid + n_test
    withheld, held_records = [], []
    for k in rng.permutation(len(proteins)):
        if len(withheld) >= target:
            break
        rows = by_protein[proteins[k]]
        if len(held_records) + len(rows) > quota or len(withheld) + 1 >= len(proteins):
            continue
        withheld.append(proteins[k])
        held_records.extend(rows)
    if not withheld:
        raise ValueError(f"too few distinct proteins ({len(proteins)}) to withhold any from training")

    held = rng.permutation(sorted(held_records)).tolist()
    v_share = n_valid / quota if quota else 0.0
    n_held_valid = int(round(v_share * len(held)))
    valid, test = held[:n_held_valid], held[n_held_valid:]
    held_set = set(held)
    rest = rng.permutation([i for i in range(n) if i not in held_set]).tolist()
    need_valid = max(n_valid - len(valid), 0)
    need_test = max(n_test - len(test), 0)
    valid += rest[:need_valid]
    test += rest[need_valid : need_valid + need_test]
    train = rest[need_valid + need_test :]
    split = DatasetSplit(sorted(train), sorted(valid), sorted(test))
    split.seen = _seen_flags(records, split.train, split.valid + split.test)
    split.check_disjoint()
    return split


def kfold(records: list[PairRecord], k: int, fold_index: int, seed: int = 0) -> DatasetSplit:
    """Seeded k-fold partition; fold ``fold_index`` is the validation set."""
    n = len(records)
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= {n}")
    if not 0 <= fold_index < k:
        raise ValueError(f"fold_index must be in [0, {k})")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    valid = sorted(folds[fold_index].tolist())
    train = sorted(np.concatenate([f for j, f in enumerate(folds) if j != fold_index]).tolist())
    split = DatasetSplit(train, valid)
    split.seen = _seen_flags(records, train, valid)
    return split


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"BDPI"
FORMAT_VERSION = 1
KNOWN_METADATA = {"model_config", "train_config", "vocabularies", "seed", "best_val_auc",
                  "best_epoch", "buffers", "train_proteins"}


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    vocabularies: dict[str, str] = field(
        default_factory=lambda: {"protein": PROTEIN_VOCAB.alphabet, "smiles": SMILES_VOCAB.alphabet})
    metadata: dict = field(default_factory=dict)  # seed, best_val_auc, train_config, ...


def _encode(ckpt: Checkpoint) -> bytes:
    meta = dict(ckpt.metadata)
    meta["model_config"] = ckpt.config.to_dict()
    meta["vocabularies"] = dict(ckpt.vocabularies)
    meta["buffers"] = sorted(ckpt.params.buffers)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    tensors = [(name, t.data) for name, t in ckpt.params.tensors.items()]
    tensors += [(name, arr) for name, arr in ckpt.params.buffers.items()]
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(path, ckpt: Checkpoint):
    """Write atomically: a temporary file in the same directory, then rename."""
    path = Path(path)
    data = _encode(ckpt)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic bytes; not a checkpoint")
    version, meta_len = r.unpack("<II", "header")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        meta = json.loads(r.take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata: {exc}") from exc
    (count,) = r.unpack("<I", "tensor count")
    arrays = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H", "tensor name")
        name = r.take(name_len, "tensor name").decode("utf-8")
        (ndim,) = r.unpack("<B", f"{name} rank")
        shape = r.unpack(f"<{ndim}I", f"{name} shape")
        size = int(np.prod(shape, dtype=np.int64))
        raw = r.take(4 * size, f"{name} values")
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after tensor data")
    unknown = set(meta) - KNOWN_METADATA
    if unknown:
        warnings.warn(f"checkpoint has unknown metadata keys: {sorted(unknown)}", stacklevel=2)
    if "model_config" not in meta:
        raise CheckpointError("metadata lacks model_config")
    buffer_names = set(meta.get("buffers", []))
    params = ModelParams(
        {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items() if k not in buffer_names},
        {k: v for k, v in arrays.items() if k in buffer_names},
    )
    config = ModelConfig.from_dict(meta["model_config"])
    vocabularies = meta.get("vocabularies", {})
    extra = {k: v for k, v in meta.items() if k not in ("model_config", "vocabularies", "buffers")}
    return Checkpoint(config, params, vocabularies, extra)
