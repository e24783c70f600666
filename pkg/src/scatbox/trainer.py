"""Training loop: Adam updates under a fixed weight-update budget.

The loop draws shuffled batches, takes at most `max_weight_updates`
optimizer steps, evaluates validation accuracy on a fixed cadence, and
keeps the parameters from the best validation point (first maximum on
ties). The reported test accuracy always belongs to that checkpoint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .atloss import ATConfig, CE_ONLY, batch_at_loss_and_grad
from .cnn import ConvClassifier
from .errors import InputError, ParameterError, TrainingDiverged
from .prng import SplitMix64

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_weight_updates: int = 11_000
    eval_every: int = 50
    at: ATConfig = CE_ONLY
    seed: int = 0
    stop_at_val_accuracy: float | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.eval_every < 1:
            raise ParameterError("batch_size and eval_every must be >= 1")
        if self.max_weight_updates < 0:
            raise ParameterError("max_weight_updates must be >= 0")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")


@dataclass
class MetricsRow:
    update: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    history: list[MetricsRow]
    best_update: int
    best_val_accuracy: float
    test_accuracy: float
    confusion: np.ndarray
    model: ConvClassifier


@dataclass
class ArrayDataset:
    """Fully materialized feature arrays for the three splits."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            x, y = getattr(self, f"{name}_x"), getattr(self, f"{name}_y")
            if len(x) != len(y):
                raise InputError(f"{name} features and labels differ in length")
            if len(x) == 0:
                raise InputError(f"{name} split is empty")


class AdamOptimizer:
    """Bias-corrected first/second moment updates, one state per tensor."""

    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.step_index = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        cfg = self.cfg
        self.step_index += 1
        t = self.step_index
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = cfg.beta1 * self.m[i] + (1 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1 - cfg.beta2) * g * g
            m_hat = self.m[i] / (1 - cfg.beta1**t)
            v_hat = self.v[i] / (1 - cfg.beta2**t)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= classes:
        raise InputError("label outside the class range")
    return np.eye(classes)[labels]


def loss_and_grads(
    model: ConvClassifier, x: np.ndarray, targets: np.ndarray, at: ATConfig
) -> tuple[float, list[np.ndarray]]:
    """Mean augmented loss plus L2 penalty, with exact parameter gradients."""
    logits, cache = model.forward(x)
    loss, dlogits = batch_at_loss_and_grad(targets, logits, at)
    grads = model.backward(cache, dlogits)
    l2 = model.spec.l2_weight
    if l2 > 0:
        for i in model.weight_indices():
            loss += l2 * float(np.sum(model.params[i] ** 2))
            grads[i] = grads[i] + 2.0 * l2 * model.params[i]
    return loss, grads


def evaluate(model: ConvClassifier, x: np.ndarray, y: np.ndarray, batch_size: int = 256):
    """Accuracy and the confusion matrix (rows: true class)."""
    classes = model.spec.classes
    confusion = np.zeros((classes, classes), dtype=np.int64)
    for lo in range(0, len(x), batch_size):
        logits = model.logits(x[lo : lo + batch_size])
        pred = logits.argmax(axis=1)
        for t, p in zip(y[lo : lo + batch_size], pred):
            confusion[int(t), int(p)] += 1
    accuracy = float(np.trace(confusion)) / max(1, len(x))
    return accuracy, confusion


def train(model: ConvClassifier, data: ArrayDataset, cfg: TrainConfig) -> TrainResult:
    """Run the budgeted loop; see the module docstring for the contract."""
    classes = model.spec.classes
    optimizer = AdamOptimizer(model.params, cfg)
    order_rng = SplitMix64(cfg.seed).numpy_rng("batch-order")

    best_params = model.clone_params()
    best_update, best_acc = 0, -1.0
    history: list[MetricsRow] = []
    interval_losses: list[float] = []

    updates = 0
    n_train = len(data.train_x)
    batch = min(cfg.batch_size, n_train)
    stop = False
    while updates < cfg.max_weight_updates and not stop:
        perm = order_rng.permutation(n_train)
        for lo in range(0, n_train - batch + 1, batch):
            idx = perm[lo : lo + batch]
            targets = one_hot(data.train_y[idx], classes)
            loss, grads = loss_and_grads(model, data.train_x[idx], targets, cfg.at)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite training loss at update {updates + 1}"
                )
            optimizer.step(model.params, grads)
            updates += 1
            interval_losses.append(loss)

            if updates % cfg.eval_every == 0 or updates == cfg.max_weight_updates:
                val_acc, _ = evaluate(model, data.val_x, data.val_y)
                history.append(
                    MetricsRow(updates, float(np.mean(interval_losses)), val_acc)
                )
                interval_losses.clear()
                if val_acc > best_acc:
                    best_acc, best_update = val_acc, updates
                    best_params = model.clone_params()
                if (
                    cfg.stop_at_val_accuracy is not None
                    and val_acc >= cfg.stop_at_val_accuracy
                ):
                    stop = True
            if updates >= cfg.max_weight_updates or stop:
                break

    model.params = best_params
    if best_acc < 0:  # zero-update run: report the initial parameters
        best_acc, _ = evaluate(model, data.val_x, data.val_y)
        best_acc = float(best_acc)
        best_update = 0
    test_acc, confusion = evaluate(model, data.test_x, data.test_y)
    log.info(
        "training done: %d updates, best val %.4f @ %d, test %.4f",
        updates, best_acc, best_update, test_acc,
    )
    return TrainResult(
        history=history,
        best_update=best_update,
        best_val_accuracy=float(best_acc),
        test_accuracy=float(test_acc),
        confusion=confusion,
        model=model,
    )


def write_metrics_csv(path, history: list[MetricsRow]) -> None:
    lines = ["update,train_loss,val_acc"]
    lines += [f"{r.update},{r.train_loss:.10g},{r.val_accuracy:.10g}" for r in history]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
