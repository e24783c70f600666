"""Command-line pipeline: prepare, transform, train, occlude.

Every command is deterministic given its inputs, flags, and seed; the
only timestamps live in the `.run.json` manifest written next to each
command's primary output. Exit code is 0 iff no errors were reported.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import atloss, dataset, scattering, tensorio
from .cnn import ConvClassifier, default_spec
from .errors import ScatboxError
from .gabor import SampledSignal
from .occlusion import (
    OcclusionConfig,
    frequency_importance,
    masked_input,
    occlusion_map,
    write_map_csv,
    write_map_pgm,
)
from .trainer import ArrayDataset, TrainConfig, train, write_metrics_csv


def _write_run_manifest(primary_output: str, command: str, args: argparse.Namespace) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": command,
        "config": config,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    Path(f"{primary_output}.run.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _parse_floats(text: str, n: int, flag: str) -> tuple[float, ...]:
    parts = tuple(float(p) for p in text.split(","))
    if len(parts) != n:
        raise SystemExit(f"error: {flag} expects {n} comma-separated values")
    return parts


def _parse_ints(text: str, flag: str, n: int | None = None) -> tuple[int, ...]:
    parts = tuple(int(p) for p in text.split(","))
    if n is not None and len(parts) != n:
        raise SystemExit(f"error: {flag} expects {n} comma-separated values")
    return parts


def _tensor_relpath(ref: dataset.SegmentRef, set_name: str) -> Path:
    stem = ref.path.replace("\\", "/").replace("/", "__")
    if stem.endswith(".wav"):
        stem = stem[:-4]
    return Path(set_name) / ref.label / f"{stem}__{ref.offset}.sbxt"


def _build_config(args: argparse.Namespace) -> scattering.ScatteringConfig:
    return scattering.default_config(
        args.kind,
        sample_rate=args.sample_rate,
        segment_length=args.segment_length,
        fft_size=args.fft_size,
        hop=args.hop,
        kept_channels=args.kept_channels,
        frame_count=args.frames,
        mel_filters=args.mel_filters,
        layer2_fft=args.layer2_fft,
        atom_length=args.atom_length,
        aggregation=args.aggregation,
        aggregation_bin=args.aggregation_bin,
        log_compress=args.log_compress,
    )


def cmd_prepare(args: argparse.Namespace) -> int:
    classes = args.classes.split(",") if args.classes else None
    scan = dataset.scan_corpus(
        args.corpus,
        classes=classes,
        min_class_share=args.min_class_share,
        threshold_db=args.threshold_db,
        min_window=args.trim_window,
        expected_rate=args.sample_rate,
    )
    for problem in scan.problems:
        print(f"problem: {problem}", file=sys.stderr)
    if not scan.records:
        print("error: no usable labeled audio found", file=sys.stderr)
        return 1

    totals: dict[str, int] = {}
    for rec in scan.records:
        totals[rec.label] = totals.get(rec.label, 0) + rec.duration
    strides = dataset.balance_strides(totals, args.segment_length, args.target_segments)
    spec = dataset.SegmentSpec(args.segment_length, strides, args.tukey)
    ratios = _parse_floats(args.ratios, 3, "--ratios")
    result = dataset.split(scan.records, spec, ratios, args.seed)
    dataset.write_manifest(args.out, result)

    print(f"classes: {', '.join(sorted(totals))}")
    if scan.excluded_classes:
        print(f"excluded (under {args.min_class_share:.0%} share): "
              f"{', '.join(scan.excluded_classes)}")
    shortfalls = dataset.stride_shortfalls(
        totals, args.segment_length, args.target_segments, strides
    )
    for set_name, refs in result.subsets():
        counts: dict[str, int] = {}
        for ref in refs:
            counts[ref.label] = counts.get(ref.label, 0) + 1
        listing = ", ".join(f"{c}={counts.get(c, 0)}" for c in sorted(totals))
        print(f"{set_name}: {listing}")
    for cls in sorted(totals):
        note = f" (short by {shortfalls[cls]})" if cls in shortfalls else ""
        print(f"stride[{cls}] = {strides[cls]}{note}")
    _write_run_manifest(args.out, "prepare", args)
    print(f"wrote {args.out}")
    return 1 if scan.problems else 0


def cmd_transform(args: argparse.Namespace) -> int:
    rows = dataset.read_manifest(args.manifest)
    cfg = _build_config(args)
    spec = dataset.SegmentSpec(args.segment_length, {}, args.tukey)
    out_dir = Path(args.out)
    errors: list[str] = []

    by_path: dict[str, list[tuple[dataset.SegmentRef, str]]] = {}
    for ref, set_name in rows:
        by_path.setdefault(ref.path, []).append((ref, set_name))

    written = 0
    for path in sorted(by_path):
        try:
            signal = dataset.load_wav(Path(args.corpus) / path, args.sample_rate)
            trimmed = dataset.trim_silence(signal, args.threshold_db, args.trim_window)
        except ScatboxError as exc:
            errors.append(str(exc))
            continue
        for ref, set_name in by_path[path]:
            try:
                seg = dataset.extract_segment(trimmed, ref.offset, spec)
                tensor = scattering.assemble(
                    SampledSignal(seg, trimmed.sample_rate), cfg, args.kind
                )
                target = out_dir / _tensor_relpath(ref, set_name)
                target.parent.mkdir(parents=True, exist_ok=True)
                tensorio.write_tensor(target, tensor.values, args.kind)
                written += 1
            except ScatboxError as exc:
                errors.append(f"{path} @ {ref.offset}: {exc}")
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    print(f"wrote {written} tensor files under {out_dir}")
    _write_run_manifest(str(out_dir / "transform"), "transform", args)
    return 1 if errors else 0


def _class_order(labels: set[str]) -> list[str]:
    if labels == set(atloss.CLASS_ORDER):
        return list(atloss.CLASS_ORDER)
    return sorted(labels)


def cmd_train(args: argparse.Namespace) -> int:
    rows = dataset.read_manifest(args.manifest)
    tensors_dir = Path(args.tensors)
    missing = [
        str(_tensor_relpath(ref, set_name))
        for ref, set_name in rows
        if not (tensors_dir / _tensor_relpath(ref, set_name)).exists()
    ]
    if missing:
        print(f"error: {len(missing)} tensor file(s) missing, e.g.:", file=sys.stderr)
        for path in missing[:20]:
            print(f"  {path}", file=sys.stderr)
        return 1

    classes = _class_order({ref.label for ref, _ in rows})
    class_index = {c: i for i, c in enumerate(classes)}
    buckets: dict[str, tuple[list[np.ndarray], list[int]]] = {
        name: ([], []) for name in dataset.SET_NAMES
    }
    for ref, set_name in rows:
        values, _ = tensorio.read_tensor(tensors_dir / _tensor_relpath(ref, set_name))
        buckets[set_name][0].append(values)
        buckets[set_name][1].append(class_index[ref.label])
    arrays = {
        name: (np.stack(xs), np.array(ys, dtype=np.int64))
        for name, (xs, ys) in buckets.items()
    }
    data = ArrayDataset(
        train_x=arrays["train"][0], train_y=arrays["train"][1],
        val_x=arrays["val"][0], val_y=arrays["val"][1],
        test_x=arrays["test"][0], test_y=arrays["test"][1],
    )

    if args.loss == "at":
        bank = (
            atloss.load_transform_bank(args.bank)
            if args.bank
            else atloss.default_transforms()
        )
        if args.at_lambda is not None:
            bank = tuple(
                atloss.TargetTransform(t.name, t.vector, args.at_lambda) for t in bank
            )
        at = atloss.ATConfig(transforms=bank)
        at.matrices(len(classes))  # fail fast on class-count mismatch
    else:
        at = atloss.CE_ONLY

    input_shape = data.train_x.shape[1:]
    spec = default_spec(
        input_shape,
        kernels=_parse_ints(args.kernels, "--kernels"),
        fourth_kernels=None if args.fourth_kernels == "auto" else int(args.fourth_kernels),
        classes=len(classes),
        l2_weight=args.l2,
    )
    model = ConvClassifier.initialize(spec, args.seed)
    cfg = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        max_weight_updates=args.max_updates,
        eval_every=args.eval_every,
        at=at,
        seed=args.seed,
    )
    print(f"classes: {', '.join(classes)}")
    print(f"input shape: {tuple(input_shape)}, parameters: {model.parameter_count}")
    result = train(model, data, cfg)
    tensorio.write_checkpoint(args.out_checkpoint, result.model)
    write_metrics_csv(args.out_metrics, result.history)
    _write_run_manifest(args.out_checkpoint, "train", args)
    print(
        f"best val acc {result.best_val_accuracy:.4f} @ update {result.best_update}; "
        f"test acc {result.test_accuracy:.4f}"
    )
    print(f"wrote {args.out_checkpoint} and {args.out_metrics}")
    return 0


def cmd_occlude(args: argparse.Namespace) -> int:
    model = tensorio.read_checkpoint(args.checkpoint)
    values, kind = tensorio.read_tensor(args.tensor)
    if values.shape != model.spec.input_shape:
        print(
            f"error: tensor shape {values.shape} does not match "
            f"checkpoint input {model.spec.input_shape}",
            file=sys.stderr,
        )
        return 1
    try:
        true_class = int(args.true_class)
    except ValueError:
        if args.true_class not in atloss.CLASS_ORDER:
            print(f"error: unknown class name {args.true_class!r}", file=sys.stderr)
            return 1
        true_class = atloss.CLASS_ORDER.index(args.true_class)

    cfg = OcclusionConfig(
        window=_parse_ints(args.window, "--window", 2),
        stride=_parse_ints(args.stride, "--stride", 2),
        fill_value=args.fill,
        bin_group=args.bin_group,
    )
    occ = occlusion_map(model, values, true_class, cfg)
    prefix = args.out_prefix
    write_map_csv(f"{prefix}_map.csv", occ)
    write_map_pgm(f"{prefix}_map.pgm", occ)
    tensorio.write_tensor(f"{prefix}_masked.sbxt", masked_input(values, occ), kind)
    importance = frequency_importance(occ, cfg.bin_group)
    lines = []
    for gi, score in enumerate(importance):
        lo = gi * cfg.bin_group
        hi = min(occ.shape[0], lo + cfg.bin_group) - 1
        lines.append(f"bins {lo}-{hi}\t{score:+.8g}")
    Path(f"{prefix}_importance.txt").write_text("\n".join(lines) + "\n")
    _write_run_manifest(f"{prefix}_map.csv", "occlude", args)
    print(f"wrote {prefix}_map.csv, {prefix}_map.pgm, "
          f"{prefix}_masked.sbxt, {prefix}_importance.txt")
    return 0


def _add_trim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold-db", type=float, default=dataset.DEFAULT_TRIM_THRESHOLD_DB,
                   help="silence threshold relative to peak (dB, negative)")
    p.add_argument("--trim-window", type=int, default=dataset.DEFAULT_TRIM_WINDOW,
                   help="RMS window for silence trimming (samples)")
    p.add_argument("--sample-rate", type=int, default=44_100,
                   help="required input sample rate (Hz)")
    p.add_argument("--segment-length", type=int, default=dataset.DEFAULT_SEGMENT_LENGTH,
                   help="segment length in samples")
    p.add_argument("--tukey", type=float, default=dataset.DEFAULT_TUKEY_PARAM,
                   help="Tukey taper fraction applied to each segment")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatbox",
        description="Audio representations, augmented-target training, and occlusion analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="scan a corpus and write a split manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="manifest output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", default=None, help="comma-separated allow-list of labels")
    p.add_argument("--target-segments", type=int, default=500,
                   help="per-class segment target used to balance strides")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,val,test file ratios")
    p.add_argument("--min-class-share", type=float, default=dataset.DEFAULT_MIN_CLASS_SHARE,
                   help="exclude classes below this share of corpus material")
    _add_trim_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("transform", help="compute feature tensors for every manifest segment")
    p.add_argument("--corpus", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", required=True, choices=scattering.KINDS)
    p.add_argument("--out", required=True, help="output directory for .sbxt files")
    p.add_argument("--fft-size", type=int, default=scattering.DEFAULT_FFT_SIZE)
    p.add_argument("--hop", type=int, default=scattering.DEFAULT_HOP)
    p.add_argument("--kept-channels", type=int, default=scattering.DEFAULT_KEPT_CHANNELS)
    p.add_argument("--frames", type=int, default=None,
                   help="frame count (default: segment_length / hop, rounded)")
    p.add_argument("--mel-filters", type=int, default=scattering.DEFAULT_MEL_FILTERS)
    p.add_argument("--layer2-fft", type=int, default=scattering.DEFAULT_LAYER2_FFT)
    p.add_argument("--atom-length", type=int, default=scattering.DEFAULT_ATOM_LENGTH)
    p.add_argument("--aggregation", choices=scattering.AGGREGATIONS, default="sum")
    p.add_argument("--aggregation-bin", type=int, default=1)
    p.add_argument("--log-compress", action="store_true")
    _add_trim_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train", help="train the classifier on transformed tensors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tensors", required=True, help="directory written by `transform`")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-metrics", required=True)
    p.add_argument("--loss", choices=("cc", "at"), default="cc")
    p.add_argument("--bank", default=None, help="transform bank file for --loss at")
    p.add_argument("--at-lambda", type=float, default=None,
                   help="override every transform weight")
    p.add_argument("--max-updates", type=int, default=11_000)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernels", default="64,64,64",
                   help="kernel counts of the leading conv stacks")
    p.add_argument("--fourth-kernels", default="auto",
                   help="kernel count of the last stack, or 'auto'")
    p.add_argument("--l2", type=float, default=0.001)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("occlude", help="occlusion map and frequency importance")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tensor", required=True)
    p.add_argument("--true-class", required=True, help="class index or canonical name")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--window", default="8,8")
    p.add_argument("--stride", default="4,4")
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--bin-group", type=int, default=3)
    p.set_defaults(func=cmd_occlude)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScatboxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
