"""Categorical cross-entropy and the augmented target loss.

The augmented loss adds, on top of cross-entropy, squared penalties on
inner products of the prediction and the target with feature vectors
that encode what is already known about the classes: instrument-family
memberships and playable frequency ranges. A wrong prediction inside
the target's family scores the same inner product and costs nothing
extra; confusions across families are penalized.

Transforms act on softmax probabilities, so every inner product reads
as class mass assigned to a feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError

CLASS_ORDER = ("clarinet", "flute", "trumpet", "violin", "saxophone", "cello")
N_CLASSES = len(CLASS_ORDER)

_BANK_RESOURCE = "default_transforms.tsv"


@dataclass(frozen=True)
class TargetTransform:
    """One feature vector with its penalty weight."""

    name: str
    vector: tuple[float, ...]
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ParameterError("transform weight must be >= 0")
        if not np.all(np.isfinite(self.vector)):
            raise ParameterError("transform vector must be finite")


@dataclass(frozen=True)
class ATConfig:
    """Transform bank plus the cross-entropy base weight."""

    transforms: tuple[TargetTransform, ...] = ()
    base_weight: float = 1.0

    def __post_init__(self):
        if self.base_weight < 0:
            raise ParameterError("base_weight must be >= 0")

    def matrices(self, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
        """(d x n_classes) vector matrix and (d,) weights, possibly empty."""
        if not self.transforms:
            return np.zeros((0, n_classes)), np.zeros(0)
        vecs = np.array([t.vector for t in self.transforms], dtype=np.float64)
        if vecs.shape[1] != n_classes:
            raise ParameterError(
                f"transform vectors have length {vecs.shape[1]}, expected {n_classes}"
            )
        return vecs, np.array([t.weight for t in self.transforms], dtype=np.float64)


CE_ONLY = ATConfig()


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InputError("logits must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_one_hot(target: np.ndarray) -> None:
    hot = target == 1.0
    if not (np.all((target == 0.0) | hot) and np.count_nonzero(hot, axis=-1).min() == 1
            and np.count_nonzero(hot, axis=-1).max() == 1):
        raise InputError("target must be one-hot")


def cross_entropy(target: np.ndarray, logits: np.ndarray) -> float:
    """-log softmax(logits)[hot class], computed via logsumexp."""
    target = np.asarray(target, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    _check_one_hot(target)
    shifted = logits - logits.max()
    lse = np.log(np.exp(shifted).sum())
    return float(lse - shifted[np.argmax(target)])


def at_loss(target: np.ndarray, logits: np.ndarray, cfg: ATConfig = CE_ONLY) -> float:
    """base_weight * CE + sum_j w_j (<p, v_j> - <y, v_j>)^2."""
    target = np.asarray(target, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    loss = cfg.base_weight * cross_entropy(target, logits)
    vecs, weights = cfg.matrices(target.shape[-1])
    if vecs.shape[0]:
        p = softmax(logits)
        residuals = vecs @ p - vecs @ target
        loss += float(weights @ residuals**2)
    return loss


def at_loss_grad(target: np.ndarray, logits: np.ndarray, cfg: ATConfig = CE_ONLY) -> np.ndarray:
    """Exact gradient of `at_loss` with respect to the logits."""
    target = np.asarray(target, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    _check_one_hot(target)
    p = softmax(logits)
    grad = cfg.base_weight * (p - target)
    vecs, weights = cfg.matrices(target.shape[-1])
    if vecs.shape[0]:
        proj = vecs @ p
        residuals = proj - vecs @ target
        coeff = 2.0 * weights * residuals           # (d,)
        # d<p,v>/dlogits = p*v - <p,v> p  (softmax Jacobian applied to v)
        grad += p * (coeff @ vecs) - float(coeff @ proj) * p
    return grad


def batch_at_loss_and_grad(
    targets: np.ndarray, logits: np.ndarray, cfg: ATConfig = CE_ONLY
) -> tuple[float, np.ndarray]:
    """Mean loss over a batch and its gradient w.r.t. the logit rows.

    Vectorized equivalent of averaging `at_loss` / `at_loss_grad` over
    the rows; the trainer's hot path.
    """
    targets = np.asarray(targets, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    if targets.shape != logits.shape:
        raise InputError("targets and logits must have matching shapes")
    _check_one_hot(targets)
    n = targets.shape[0]
    # softmax inlined without finiteness checks: a diverging run must
    # surface as a non-finite loss for the trainer to diagnose
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    lse = np.log(e.sum(axis=1))
    ce = lse - shifted[np.arange(n), np.argmax(targets, axis=1)]
    p = e / e.sum(axis=1, keepdims=True)
    loss = cfg.base_weight * ce.mean()
    grad = cfg.base_weight * (p - targets) / n
    vecs, weights = cfg.matrices(targets.shape[1])
    if vecs.shape[0]:
        proj = p @ vecs.T                            # (n, d)
        residuals = proj - targets @ vecs.T
        loss += float((weights * residuals**2).sum(axis=1).mean())
        coeff = 2.0 * weights * residuals / n        # (n, d)
        grad += p * (coeff @ vecs) - (coeff * proj).sum(axis=1, keepdims=True) * p
    return float(loss), grad


def parse_transform_line(line: str) -> TargetTransform:
    name, weight, values = line.rstrip("\n").split("\t")
    vector = tuple(float(v) for v in values.split(","))
    return TargetTransform(name=name, vector=vector, weight=float(weight))


def load_transform_bank(path: str | Path) -> tuple[TargetTransform, ...]:
    """Read a bank file: one `name\\tweight\\tv1,...,vK` record per line."""
    out = []
    for raw in Path(path).read_text().splitlines():
        if raw.strip() and not raw.startswith("#"):
            out.append(parse_transform_line(raw))
    return tuple(out)


def save_transform_bank(path: str | Path, transforms) -> None:
    lines = [
        f"{t.name}\t{t.weight:g}\t" + ",".join(f"{v:g}" for v in t.vector)
        for t in transforms
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def default_transforms() -> tuple[TargetTransform, ...]:
    """The 16-transform bank shipped with the package.

    Eight family/mechanism indicators, two normalized fundamental
    frequency range vectors, and six one-vs-rest refinements, in the
    class order clarinet, flute, trumpet, violin, saxophone, cello.
    The bank is data, not ground truth: edit the TSV or pass your own
    file to substitute domain knowledge.
    """
    ref = resources.files("scatbox").joinpath("data").joinpath(_BANK_RESOURCE)
    out = []
    for raw in ref.read_text().splitlines():
        if raw.strip() and not raw.startswith("#"):
            out.append(parse_transform_line(raw))
    return tuple(out)


def default_at_config(lambda_scale: float | None = None) -> ATConfig:
    """AT config with the default bank; optionally override all weights."""
    bank = default_transforms()
    if lambda_scale is not None:
        bank = tuple(
            TargetTransform(t.name, t.vector, lambda_scale) for t in bank
        )
    return ATConfig(transforms=bank, base_weight=1.0)
