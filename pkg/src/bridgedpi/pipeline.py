"""End-to-end runs: featurise records, train, evaluate by protein stratum."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .data_io import Checkpoint, DatasetSplit, PairRecord, kfold, split_seen_unseen
from .metrics import EvalReport, threshold_metrics
from .model import BridgeDPI, Featurizer, ModelConfig
from .protein import Vocabulary
from .train import Dataset, EpochRecord, TrainConfig, train


@dataclass
class RunConfig:
    """Split settings that sit next to the model and training fields in a config document."""

    train_fraction: float = 0.8
    valid_fraction: float = 0.1
    test_fraction: float = 0.1
    unseen_fraction: float = 0.2
    folds: int | None = None
    fold: int = 0
    threshold: float = 0.5

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


CONFIG_SECTIONS = (ModelConfig, TrainConfig, RunConfig)


def config_keys() -> set[str]:
    return {f.name for cls in CONFIG_SECTIONS for f in fields(cls)}


def split_config(flat: dict) -> tuple[ModelConfig, TrainConfig, RunConfig]:
    """Build the three config objects from one flat key/value mapping."""
    unknown = set(flat) - config_keys()
    if unknown:
        raise KeyError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return ModelConfig.from_dict(flat), TrainConfig.from_dict(flat), RunConfig.from_dict(flat)


def make_split(records: list[PairRecord], run: RunConfig, seed: int) -> DatasetSplit:
    if run.folds:
        return kfold(records, run.folds, run.fold, seed)
    return split_seen_unseen(records, (run.train_fraction, run.valid_fraction, run.test_fraction),
                             seed, run.unseen_fraction)


def to_dataset(featurizer: Featurizer, records: list[PairRecord], index: list[int] | None = None) -> Dataset:
    rows = records if index is None else [records[i] for i in index]
    feats = featurizer.batch([r.protein_sequence for r in rows], [r.smiles for r in rows])
    return Dataset(feats, np.array([r.label for r in rows], dtype=np.int64))


def stratified_reports(scores: np.ndarray, labels: np.ndarray, seen: np.ndarray | None,
                       threshold: float = 0.5) -> dict[str, EvalReport]:
    """Overall report plus seen/unseen-protein strata when flags are given."""
    reports = {"overall": threshold_metrics(scores, labels, threshold)}
    if seen is not None:
        for name, mask in (("seen", seen), ("unseen", ~seen)):
            if mask.any():
                reports[name] = threshold_metrics(scores[mask], labels[mask], threshold)
    return reports


@dataclass
class ExperimentResult:
    model: BridgeDPI
    split: DatasetSplit
    history: list[EpochRecord]
    best_val_auc: float | None
    best_epoch: int | None
    reports: dict[str, EvalReport] = field(default_factory=dict)
    test_scores: np.ndarray | None = None
    seconds: float = 0.0

    def checkpoint(self, records: list[PairRecord], train_cfg: TrainConfig) -> Checkpoint:
        proteins = sorted({records[i].protein_id for i in self.split.train})
        return Checkpoint(
            self.model.config,
            self.model.params,
            {"protein": self.model.featurizer.protein_vocab.alphabet,
             "smiles": self.model.featurizer.smiles_vocab.alphabet},
            {"seed": train_cfg.seed, "best_val_auc": self.best_val_auc, "best_epoch": self.best_epoch,
             "train_config": train_cfg.to_dict(), "train_proteins": proteins},
        )


def run_experiment(records: list[PairRecord], model_cfg: ModelConfig, train_cfg: TrainConfig,
                   run: RunConfig = RunConfig(), split: DatasetSplit | None = None,
                   callbacks=()) -> ExperimentResult:
    """Split (unless given), train, and evaluate the best model.

    Evaluation uses the test partition, or the validation fold when the split
    has no test partition (k-fold runs). Model initialisation and data
    shuffling both derive from ``train_cfg.seed``.
    """
    if split is None:
        split = make_split(records, run, train_cfg.seed)
    model = BridgeDPI(model_cfg, seed=train_cfg.seed)
    tr = to_dataset(model.featurizer, records, split.train)
    va = to_dataset(model.featurizer, records, split.valid)
    result = train(model, tr, va, train_cfg, callbacks)
    out = ExperimentResult(model, split, result.history, result.best_val_auc, result.best_epoch,
                           seconds=result.seconds)
    held = split.test or split.valid
    if held:
        te = to_dataset(model.featurizer, records, held)
        scores = model.predict(te.features)
        seen = np.array([split.seen.get(i, False) for i in held], dtype=bool)
        out.reports = stratified_reports(scores, te.labels, seen, run.threshold)
        out.test_scores = scores
    return out


def model_from_checkpoint(ckpt: Checkpoint) -> BridgeDPI:
    model = BridgeDPI(ckpt.config, params=ckpt.params)
    vocabs = ckpt.vocabularies or {}
    model.featurizer = Featurizer(
        ckpt.config,
        Vocabulary(vocabs["protein"]) if "protein" in vocabs else model.featurizer.protein_vocab,
        Vocabulary(vocabs["smiles"]) if "smiles" in vocabs else model.featurizer.smiles_vocab,
    )
    return model
