"""Occlusion maps: prediction sensitivity to masked time-frequency patches.

A patch slides over the frequency/frame grid (all channels occluded
together, since a time-frequency region is one physical event across
channels); the map records how much the true-class softmax probability
drops when that region is hidden. Overlapping patches are averaged.
Positive map values mark regions the model relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError


@dataclass(frozen=True)
class OcclusionConfig:
    window: tuple[int, int] = (8, 8)
    stride: tuple[int, int] = (4, 4)
    fill_value: float = 0.0
    bin_group: int = 3
    eval_batch: int = 64

    def __post_init__(self):
        if min(self.window) < 1 or min(self.stride) < 1:
            raise ParameterError("occlusion window and stride must be positive")
        if self.bin_group < 1:
            raise ParameterError("bin_group must be >= 1")


def _as_input(tensor) -> np.ndarray:
    values = np.asarray(getattr(tensor, "values", tensor), dtype=np.float64)
    if values.ndim != 3:
        raise InputError("occlusion input must be channels x freq x frames")
    return values


def occlusion_map(model, tensor, true_class: int, cfg: OcclusionConfig = OcclusionConfig()) -> np.ndarray:
    """freq x frames map of true-class probability drops.

    `model` needs a `predict_proba(batch) -> (n, classes)` method. Patches
    are clipped at the borders, never wrapped.
    """
    x = _as_input(tensor)
    _, freq, frames = x.shape
    if cfg.window[0] > freq or cfg.window[1] > frames:
        raise InputError("occlusion window larger than the input")
    base = float(model.predict_proba(x[None])[0, true_class])

    positions = [
        (u, v)
        for u in range(0, freq, cfg.stride[0])
        for v in range(0, frames, cfg.stride[1])
    ]
    drops = np.empty(len(positions))
    for lo in range(0, len(positions), cfg.eval_batch):
        chunk = positions[lo : lo + cfg.eval_batch]
        batch = np.repeat(x[None], len(chunk), axis=0)
        for bi, (u, v) in enumerate(chunk):
            batch[bi, :, u : u + cfg.window[0], v : v + cfg.window[1]] = cfg.fill_value
        probs = model.predict_proba(batch)
        drops[lo : lo + len(chunk)] = base - probs[:, true_class]

    total = np.zeros((freq, frames))
    counts = np.zeros((freq, frames))
    for (u, v), drop in zip(positions, drops):
        total[u : u + cfg.window[0], v : v + cfg.window[1]] += drop
        counts[u : u + cfg.window[0], v : v + cfg.window[1]] += 1.0
    return np.divide(total, counts, out=np.zeros_like(total), where=counts > 0)


def frequency_importance(occ_map: np.ndarray, bin_group: int = 3) -> np.ndarray:
    """Signed mean influence per group of `bin_group` adjacent rows.

    A trailing partial group is averaged over its own size.
    """
    occ_map = np.asarray(occ_map, dtype=np.float64)
    if bin_group < 1:
        raise ParameterError("bin_group must be >= 1")
    groups = []
    for lo in range(0, occ_map.shape[0], bin_group):
        groups.append(float(occ_map[lo : lo + bin_group].mean()))
    return np.array(groups)


def masked_input(tensor, occ_map: np.ndarray, mode: str = "positive"):
    """Input weighted by the positive part of the map (negatives zeroed)."""
    if mode != "positive":
        raise ParameterError(f"unknown masking mode {mode!r}")
    x = _as_input(tensor)
    occ_map = np.asarray(occ_map, dtype=np.float64)
    if occ_map.shape != x.shape[1:]:
        raise InputError("map shape does not match the input's freq x frames")
    return x * np.maximum(occ_map, 0.0)[None, :, :]


def write_map_csv(path: str | Path, occ_map: np.ndarray) -> None:
    np.savetxt(str(path), np.asarray(occ_map), delimiter=",", fmt="%.10g")


def write_map_pgm(path: str | Path, occ_map: np.ndarray) -> None:
    """8-bit binary PGM, min-max scaled; the scale goes to a sidecar file."""
    occ_map = np.asarray(occ_map, dtype=np.float64)
    lo, hi = float(occ_map.min()), float(occ_map.max())
    scale = hi - lo
    if scale > 0:
        gray = np.round((occ_map - lo) / scale * 255.0).astype(np.uint8)
    else:
        gray = np.zeros(occ_map.shape, dtype=np.uint8)
    height, width = occ_map.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(gray.tobytes(order="C"))
    Path(f"{path}.scale.txt").write_text(f"min {lo:.10g}\nmax {hi:.10g}\n")
