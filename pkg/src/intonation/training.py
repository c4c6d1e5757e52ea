"""Training loop: AdamW, early stopping, best-epoch checkpointing.

Every run is a pure function of (initial parameters, data order, config):
one seeded generator drives shuffling and dropout, so two runs with the
same inputs produce bitwise-identical parameters and metrics.

Batches larger than `micro_batch` are processed in chunks to bound the
memory held by LSTM backprop stashes. Chunk losses and gradients are
scaled by chunk_size/batch_size before accumulating, which reproduces the
whole-batch mean exactly up to float summation order. Dropout masks are
drawn per chunk, so changing micro_batch resamples them; any fixed config
remains bit-reproducible run to run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import (
    FeatureRecord,
    confusion_matrix,
    predict_labels,
    scores_from_confusion,
    stack_inputs,
)
from .errors import (
    EmptyDataset,
    MissingFeature,
    NonFiniteGradient,
    NonFiniteLoss,
)
from .model import IntonationModel
from .nn import Param, cross_entropy

log = logging.getLogger(__name__)

SELECTION_METRICS = ("macro_f1", "accuracy")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-5
    max_epochs: int = 300
    batch_size: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    patience: int = 20
    seed: int = 0
    selection_metric: str = "macro_f1"
    class_weights: tuple[float, ...] | None = None
    micro_batch: int = 32

    def validate(self) -> None:
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0 or self.weight_decay < 0:
            raise ValueError("eps must be positive and weight_decay non-negative")
        if min(self.max_epochs, self.batch_size, self.patience, self.micro_batch) < 1:
            raise ValueError("epochs, batch sizes, and patience must be at least 1")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(f"selection_metric must be one of {SELECTION_METRICS}")


class AdamW:
    """Adam moments plus decoupled weight decay:

        p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * weight_decay * p

    With lr = 0 parameters are left bitwise unchanged.
    """

    def __init__(self, params: list[Param], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in params]
        self._v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        cfg = self.cfg
        self.t += 1
        correction1 = 1.0 - cfg.beta1**self.t
        correction2 = 1.0 - cfg.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if not np.isfinite(g).all():
                raise NonFiniteGradient(f"non-finite gradient in {p.name}")
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.value -= cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p.value)


def standardize_llf(records: list[FeatureRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and std over every frame of every record.

    The std is the population value, floored at 1e-6 so constant features
    stay finite after scaling.
    """
    if len(records) < 2:
        raise EmptyDataset("standardization needs at least two records")
    stacked = np.concatenate([_require_llf(r) for r in records], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), 1e-6)
    return mean, std


def _require_llf(record: FeatureRecord) -> np.ndarray:
    if record.llf is None:
        raise MissingFeature(f"record {record.id} has no framewise features")
    return record.llf


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_accuracy: float
    dev_macro_f1: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float = float("-inf")
    stop_reason: str = "max_epochs"
    selection_metric: str = "macro_f1"

    def metrics_lines(self) -> list[str]:
        lines = [
            f"epoch={s.epoch:03d} train_loss={s.train_loss:.6f} "
            f"dev_accuracy={s.dev_accuracy:.6f} dev_macro_f1={s.dev_macro_f1:.6f}"
            for s in self.epochs
        ]
        lines.append(
            f"best_epoch={self.best_epoch:03d} selection={self.selection_metric} "
            f"best_{self.selection_metric}={self.best_metric:.6f} stop={self.stop_reason}"
        )
        return lines


def train(
    model: IntonationModel,
    train_records: list[FeatureRecord],
    dev_records: list[FeatureRecord],
    cfg: TrainConfig = TrainConfig(),
    metrics_path=None,
) -> TrainReport:
    """Fit `model` in place; keeps the epoch whose dev metric was best.

    Improvement is strict, so with patience p and a flat metric the loop
    stops after p epochs beyond the first. Returns the per-epoch report and
    optionally writes it line-by-line to `metrics_path`.
    """
    cfg.validate()
    if not train_records or not dev_records:
        raise EmptyDataset("training needs non-empty train and dev splits")
    if model.cfg.uses_llf:
        mean, std = standardize_llf(train_records)
        model.set_llf_norm(mean, std)

    x_llf, x_emb, y = stack_inputs(model, train_records)
    dev_llf, dev_emb, dev_y = stack_inputs(model, dev_records)

    weights = None
    if cfg.class_weights is not None:
        weights = np.asarray(cfg.class_weights, dtype=np.float64)

    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamW(model.params(), cfg)
    model.zero_grads()

    n = len(train_records)
    report = TrainReport(selection_metric=cfg.selection_metric)
    best_values = model.param_values()
    epochs_since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            batch_loss = 0.0
            for mstart in range(0, len(batch), cfg.micro_batch):
                micro = batch[mstart : mstart + cfg.micro_batch]
                scale = len(micro) / len(batch)
                logits = model.forward_batch(
                    None if x_llf is None else x_llf[micro],
                    None if x_emb is None else x_emb[micro],
                    train=True,
                    rng=rng,
                )
                loss, dlogits = cross_entropy(logits, y[micro], weights)
                batch_loss += loss * scale
                model.backward(dlogits * scale)
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(f"loss became {batch_loss} at epoch {epoch}")
            optimizer.step()
            model.zero_grads()
            total_loss += batch_loss * len(batch)

        dev_pred = predict_labels(model, dev_llf, dev_emb, micro_batch=cfg.micro_batch)
        conf = confusion_matrix(dev_y, dev_pred, model.cfg.n_classes)
        scores = scores_from_confusion(conf)
        stats = EpochStats(
            epoch=epoch,
            train_loss=total_loss / n,
            dev_accuracy=scores.accuracy,
            dev_macro_f1=scores.macro_f1,
        )
        report.epochs.append(stats)
        current = stats.dev_macro_f1 if cfg.selection_metric == "macro_f1" else stats.dev_accuracy
        if current > report.best_metric:
            report.best_metric = current
            report.best_epoch = epoch
            best_values = model.param_values()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        log.info(
            "epoch %d loss %.4f dev_acc %.4f dev_f1 %.4f",
            epoch, stats.train_loss, stats.dev_accuracy, stats.dev_macro_f1,
        )
        if epochs_since_best >= cfg.patience:
            report.stop_reason = "early_stopping"
            break

    model.load_param_values(best_values)
    if metrics_path is not None:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report.metrics_lines()) + "\n")
    return report
