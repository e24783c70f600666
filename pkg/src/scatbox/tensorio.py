"""Bit-exact binary formats for tensors and model checkpoints.

Tensor files (`SBXT`): magic, u8 version, u8 kind tag, u8 rank, rank
little-endian u32 dims, then row-major float32 little-endian values.

Checkpoints (`SBXM`): magic, u8 version, u32 length-prefixed JSON
architecture descriptor, then each parameter tensor in declaration
order as raw float32 little-endian values.

Both formats are deliberately trivial to parse from any language.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .cnn import ConvClassifier, ConvClassifierSpec, StackSpec
from .errors import InputError

TENSOR_MAGIC = b"SBXT"
CHECKPOINT_MAGIC = b"SBXM"
FORMAT_VERSION = 1

KIND_TAGS = {"raw": 0, "mt": 1, "gs": 2, "ms": 3}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


def write_tensor(path: str | Path, values: np.ndarray, kind: str = "raw") -> None:
    if kind not in KIND_TAGS:
        raise InputError(f"unknown tensor kind {kind!r}")
    values = np.asarray(values)
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<BBB", FORMAT_VERSION, KIND_TAGS[kind], values.ndim))
        fh.write(struct.pack(f"<{values.ndim}I", *values.shape))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_tensor(path: str | Path) -> tuple[np.ndarray, str]:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise InputError(f"{path}: not a tensor file (bad magic)")
    version, tag, rank = struct.unpack_from("<BBB", raw, 4)
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported tensor format version {version}")
    if tag not in _TAG_KINDS:
        raise InputError(f"{path}: unknown kind tag {tag}")
    dims = struct.unpack_from(f"<{rank}I", raw, 7)
    offset = 7 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    if values.size != count:
        raise InputError(f"{path}: truncated tensor payload")
    return values.reshape(dims).astype(np.float64), _TAG_KINDS[tag]


def _spec_descriptor(spec: ConvClassifierSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "stacks": [
            {"kernels": s.kernels, "kernel_size": s.kernel_size, "pool": s.pool}
            for s in spec.stacks
        ],
        "classes": spec.classes,
        "l2_weight": spec.l2_weight,
    }


def _spec_from_descriptor(desc: dict) -> ConvClassifierSpec:
    return ConvClassifierSpec(
        input_shape=tuple(desc["input_shape"]),
        stacks=tuple(
            StackSpec(s["kernels"], s["kernel_size"], s["pool"])
            for s in desc["stacks"]
        ),
        classes=desc["classes"],
        l2_weight=desc["l2_weight"],
    )


def write_checkpoint(path: str | Path, model: ConvClassifier) -> None:
    desc = json.dumps(_spec_descriptor(model.spec), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        for param in model.params:
            fh.write(np.ascontiguousarray(param, dtype="<f4").tobytes())


def read_checkpoint(path: str | Path) -> ConvClassifier:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise InputError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<B", raw, 4)
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {version}")
    (desc_len,) = struct.unpack_from("<I", raw, 5)
    desc = json.loads(raw[9 : 9 + desc_len].decode("utf-8"))
    spec = _spec_from_descriptor(desc)

    shapes: list[tuple[int, ...]] = []
    c_in = spec.input_shape[0]
    for s in spec.stacks:
        shapes.append((s.kernels, c_in, s.kernel_size, s.kernel_size))
        shapes.append((s.kernels,))
        c_in = s.kernels
    shapes.append((spec.flat_features(), spec.classes))
    shapes.append((spec.classes,))

    offset = 9 + desc_len
    params = []
    for shape in shapes:
        count = int(np.prod(shape))
        values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        if values.size != count:
            raise InputError(f"{path}: truncated parameter payload")
        params.append(values.reshape(shape).astype(np.float64))
        offset += 4 * count
    return ConvClassifier(spec, params)
