"""Cross-entropy training with Adam, L2 regularisation and validation-AUC model selection."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .metrics import roc_auc, threshold_metrics
from .model import BridgeDPI, FeatureBatch, Mode, ModelParams

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient in parameter {name!r}")


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 512
    max_epochs: int = 100
    l2_lambda: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    l2_all_params: bool = False  # True: also penalise biases, BN and hyper-nodes
    patience: int | None = None  # stop after this many epochs without a better val AUC
    deterministic: bool = False  # train without dropout noise

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    features: FeatureBatch
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)


def l2_names(params: ModelParams, all_params: bool = False) -> list[str]:
    return params.names() if all_params else params.decay_names()


def compute_loss(probabilities: Tensor, labels, params: ModelParams | None = None,
                 l2_lambda: float = 0.0, names: list[str] | None = None) -> Tensor:
    """Mean binary cross-entropy plus ``l2_lambda`` times the squared norm of
    the penalised parameters (weight matrices by default)."""
    y = np.asarray(labels)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    p = ad.clip(probabilities, PROB_CLAMP, 1 - PROB_CLAMP)
    yt = Tensor(y.astype(p.dtype))
    nll = -ad.mean(yt * ad.log(p) + (1 - yt) * ad.log(1 - p))
    if params is None or l2_lambda == 0:
        return nll
    if names is None:
        names = params.decay_names()
    penalty = None
    for name in names:
        sq = ad.sum_squares(params[name])
        penalty = sq if penalty is None else penalty + sq
    if penalty is None:
        return nll
    return nll + penalty * l2_lambda


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState,
              config: TrainConfig) -> AdamState:
    """One bias-corrected Adam update, applied in place to ``params``.

    Parameters without an entry in ``grads`` are treated as having zero
    gradient, so their moments still decay.
    """
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    step = config.learning_rate / bc1
    root_bc2 = np.sqrt(bc2)
    for name, p in params.items():
        g = grads.get(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        tmp = np.empty_like(m)
        m *= b1
        v *= b2
        if g is not None:
            np.multiply(g, 1 - b1, out=tmp)
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1 - b2
            v += tmp
        # p -= lr * m_hat / (sqrt(v_hat) + eps)
        np.sqrt(v, out=tmp)
        tmp /= root_bc2
        tmp += config.adam_eps
        np.divide(m, tmp, out=tmp)
        tmp *= step
        p.data -= tmp
    return state


def epoch_rng(seed: int, epoch: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, epoch, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, epoch, stream])))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_auc: float
    val_acc: float


@dataclass
class TrainResult:
    best_params: ModelParams
    best_val_auc: float | None
    best_epoch: int | None
    history: list[EpochRecord]
    seconds: float = 0.0


def history_to_csv(history: list[EpochRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "val_auc", "val_acc"])
    for rec in history:
        writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_auc), repr(rec.val_acc)])
    return buf.getvalue()


def evaluate_auc(model: BridgeDPI, data: Dataset) -> tuple[float, float, np.ndarray]:
    scores = model.predict(data.features)
    report = threshold_metrics(scores, data.labels)
    return roc_auc(scores, data.labels), report.acc, scores


def train(model: BridgeDPI, train_data: Dataset, valid_data: Dataset, config: TrainConfig,
          callbacks: list[Callable[[EpochRecord, BridgeDPI], None]] = ()) -> TrainResult:
    """Mini-batch Adam training; keeps the parameters with the best validation AUC.

    On return ``model.params`` holds the best parameters.
    """
    if len(train_data) == 0 or len(valid_data) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if np.unique(valid_data.labels).size < 2:
        raise ValueError("validation labels hold a single class; AUC is undefined")
    start = time.perf_counter()
    params = model.params
    names = l2_names(params, config.l2_all_params)
    state = AdamState()
    best = params.copy()
    best_auc: float | None = None
    best_epoch: int | None = None
    history: list[EpochRecord] = []
    stale = 0
    n = len(train_data)
    labels = np.asarray(train_data.labels)

    for epoch in range(1, config.max_epochs + 1):
        order = epoch_rng(config.seed, epoch, 0).permutation(n)
        mode = Mode(training=True, rng=epoch_rng(config.seed, epoch, 1), dropout=not config.deterministic)
        total, seen = 0.0, 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            if len(idx) == 1 and n > 1:
                continue  # batchnorm statistics need more than one sample
            batch = train_data.features.take(idx)
            with Tape() as tape:
                probs = model.forward_batch(batch, mode)
                loss = compute_loss(probs, labels[idx], params, config.l2_lambda, names)
            grads = tape.backward(loss)
            by_name = {name: grads[t] for name, t in params.tensors.items() if t in grads}
            for t in params.tensors.values():
                t.grad = None
            adam_step(params.tensors, by_name, state, config)
            total += float(loss.data) * len(idx)
            seen += len(idx)
        val_auc, val_acc, _ = evaluate_auc(model, valid_data)
        rec = EpochRecord(epoch, total / max(seen, 1), val_auc, val_acc)
        history.append(rec)
        log.info("epoch %d loss %.4f val_auc %.4f val_acc %.4f", epoch, rec.train_loss, val_auc, val_acc)
        if best_auc is None or val_auc > best_auc:
            best_auc, best_epoch = val_auc, epoch
            best = params.copy()
            stale = 0
        else:
            stale += 1
        for cb in callbacks:
            cb(rec, model)
        if config.patience is not None and stale >= config.patience:
            break

    model.params = best
    return TrainResult(best, best_auc, best_epoch, history, time.perf_counter() - start)
