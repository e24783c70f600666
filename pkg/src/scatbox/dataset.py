"""Corpus ingestion: WAV loading, silence trimming, segmentation, splits.

Files are assigned to train/validation/test as whole files, so no audio
segment can leak across sets; validation and test are then equalized to
identical per-class segment counts by seeded down-sampling. Per-class
strides let under-represented classes contribute overlapping segments.

All randomness comes from named SplitMix64 streams keyed by the run
seed and the class name, which makes every split manifest byte-stable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigurationError, InputError, ParameterError
from .gabor import SampledSignal
from .prng import SplitMix64
from .windows import WindowSpec, make_window

log = logging.getLogger(__name__)

SET_NAMES = ("train", "val", "test")
DEFAULT_SEGMENT_LENGTH = 44_100
DEFAULT_TUKEY_PARAM = 0.1
DEFAULT_TRIM_THRESHOLD_DB = -50.0
DEFAULT_TRIM_WINDOW = 1024
DEFAULT_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_MIN_CLASS_SHARE = 0.10


@dataclass(frozen=True)
class AudioFileRecord:
    """One labeled audio file; `duration` is its trimmed sample count."""

    path: str
    label: str
    duration: int


@dataclass
class SegmentSpec:
    segment_length: int = DEFAULT_SEGMENT_LENGTH
    stride_per_class: dict[str, int] = field(default_factory=dict)
    tukey_param: float = DEFAULT_TUKEY_PARAM

    def __post_init__(self):
        if self.segment_length < 1:
            raise ParameterError("segment_length must be >= 1")
        if not 0.0 <= self.tukey_param <= 1.0:
            raise ParameterError("tukey_param must lie in [0, 1]")
        for cls, stride in self.stride_per_class.items():
            if not 1 <= stride <= self.segment_length:
                raise ParameterError(
                    f"stride for class {cls!r} must lie in [1, segment_length]"
                )

    def stride_for(self, label: str) -> int:
        return self.stride_per_class.get(label, self.segment_length)

    def window(self) -> np.ndarray:
        return make_window(
            WindowSpec("tukey", self.segment_length, self.tukey_param)
        )


@dataclass(frozen=True)
class SegmentRef:
    path: str
    label: str
    offset: int


@dataclass
class DatasetSplit:
    train: list[SegmentRef]
    validation: list[SegmentRef]
    test: list[SegmentRef]
    seed: int

    def subsets(self):
        return zip(SET_NAMES, (self.train, self.validation, self.test))


def load_wav(path: str | Path, expected_rate: int | None = 44_100) -> SampledSignal:
    """Read 16-bit PCM WAV; stereo is averaged down to mono.

    Non-matching sample rates are rejected (resampling is out of scope);
    pass expected_rate=None to accept any rate.
    """
    try:
        rate, data = wavfile.read(str(path))
    except Exception as exc:
        raise InputError(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype != np.int16:
        raise InputError(f"{path}: only 16-bit signed PCM is supported, got {data.dtype}")
    if expected_rate is not None and rate != expected_rate:
        raise InputError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz "
            "(resample the corpus before ingestion)"
        )
    samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return SampledSignal(samples / 32768.0, rate)


def write_wav(path: str | Path, signal: SampledSignal) -> None:
    """16-bit PCM writer used by fixtures and corpus tooling."""
    clipped = np.clip(signal.samples, -1.0, 1.0)
    wavfile.write(str(path), signal.sample_rate, (clipped * 32767.0).astype(np.int16))


def trim_silence(
    signal: SampledSignal,
    threshold_db: float = DEFAULT_TRIM_THRESHOLD_DB,
    min_window: int = DEFAULT_TRIM_WINDOW,
) -> SampledSignal:
    """Drop leading/trailing audio whose local RMS stays under threshold.

    The RMS is measured in a centered sliding window of `min_window`
    samples, so boundaries land within about half a window of the true
    onset/offset. The threshold is relative to the peak amplitude. A
    fully silent signal trims to zero samples; callers detect that by
    length rather than by an error.
    """
    if threshold_db >= 0:
        raise ParameterError("threshold_db must be negative (relative to peak)")
    if min_window < 1:
        raise ParameterError("min_window must be >= 1")
    x = signal.samples
    n = x.size
    if n == 0:
        return SampledSignal(x.copy(), signal.sample_rate)
    peak = np.abs(x).max()
    if peak == 0.0:
        return SampledSignal(np.empty(0), signal.sample_rate)
    threshold = peak * 10.0 ** (threshold_db / 20.0)

    # centered moving RMS via a cumulative sum of squared samples
    half = min_window // 2
    sq = np.concatenate([[0.0], np.cumsum(x * x)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + (min_window - half), 0, n)
    rms = np.sqrt((sq[hi] - sq[lo]) / np.maximum(1, hi - lo))

    loud = np.flatnonzero(rms >= threshold)
    if loud.size == 0:
        return SampledSignal(np.empty(0), signal.sample_rate)
    return SampledSignal(x[loud[0] : loud[-1] + 1].copy(), signal.sample_rate)


def balance_strides(
    per_class_sample_counts: dict[str, int],
    segment_length: int,
    target_segments: int,
) -> dict[str, int]:
    """Per-class strides that oversample scarce classes via overlap.

    stride = clamp(available / target_segments, 1, segment_length), so
    classes with less material overlap more. Infeasible targets (stride
    1 still too few) are logged; use `stride_shortfalls` for a report.
    """
    if target_segments < 1:
        raise ParameterError("target_segments must be >= 1")
    strides: dict[str, int] = {}
    for cls, available in per_class_sample_counts.items():
        if available < segment_length:
            raise ParameterError(
                f"class {cls!r} has {available} samples, "
                f"fewer than one segment of {segment_length}"
            )
        strides[cls] = int(np.clip(available // target_segments, 1, segment_length))
    for cls, deficit in stride_shortfalls(
        per_class_sample_counts, segment_length, target_segments, strides
    ).items():
        log.warning(
            "class %s falls %d segments short of the target even at stride %d",
            cls, deficit, strides[cls],
        )
    return strides


def stride_shortfalls(
    per_class_sample_counts: dict[str, int],
    segment_length: int,
    target_segments: int,
    strides: dict[str, int],
) -> dict[str, int]:
    """How many segments each class misses the target by (0 omitted)."""
    out: dict[str, int] = {}
    for cls, available in per_class_sample_counts.items():
        count = (available - segment_length) // strides[cls] + 1
        if count < target_segments:
            out[cls] = target_segments - count
    return out


def segment_offsets(num_samples: int, segment_length: int, stride: int) -> list[int]:
    if num_samples < segment_length:
        return []
    return list(range(0, num_samples - segment_length + 1, stride))


def extract_segment(signal: SampledSignal, offset: int, spec: SegmentSpec) -> np.ndarray:
    """One Tukey-windowed segment starting at `offset`."""
    end = offset + spec.segment_length
    if offset < 0 or end > len(signal):
        raise InputError(f"segment [{offset}, {end}) outside the signal")
    return signal.samples[offset:end] * spec.window()


def segment(signal: SampledSignal, spec: SegmentSpec, label: str) -> list[np.ndarray]:
    """All windowed segments of one signal at the class stride."""
    offsets = segment_offsets(len(signal), spec.segment_length, spec.stride_for(label))
    if not offsets:
        log.info("signal of %d samples too short for one segment", len(signal))
        return []
    window = spec.window()
    return [signal.samples[o : o + spec.segment_length] * window for o in offsets]


def _split_counts(n_files: int, ratios) -> tuple[int, int, int]:
    n_val = max(1, round(n_files * ratios[1]))
    n_test = max(1, round(n_files * ratios[2]))
    while n_files - n_val - n_test < 1:
        if n_val >= n_test and n_val > 1:
            n_val -= 1
        elif n_test > 1:
            n_test -= 1
        else:
            break
    n_train = n_files - n_val - n_test
    return n_train, n_val, n_test


def split(
    files: list[AudioFileRecord],
    spec: SegmentSpec,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> DatasetSplit:
    """File-level split with exactly equal val/test class counts.

    Whole files go to one set each. Validation and test segment lists
    are down-sampled per class to the smallest class count inside the
    respective set, so both end up exactly class-balanced.
    """
    if min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError("ratios must be positive and sum to 1")
    by_class: dict[str, list[AudioFileRecord]] = {}
    for rec in files:
        by_class.setdefault(rec.label, []).append(rec)

    root_rng = SplitMix64(seed)
    sets: dict[str, list[SegmentRef]] = {name: [] for name in SET_NAMES}
    for cls in sorted(by_class):
        recs = sorted(by_class[cls], key=lambda r: r.path)
        if len(recs) < 3:
            raise ConfigurationError(
                f"class {cls!r} has only {len(recs)} file(s); "
                "need at least 3 to populate train/val/test"
            )
        root_rng.derive(f"split:{cls}").shuffle(recs)
        n_train, n_val, n_test = _split_counts(len(recs), ratios)
        groups = {
            "train": recs[:n_train],
            "val": recs[n_train : n_train + n_val],
            "test": recs[n_train + n_val :],
        }
        stride = spec.stride_for(cls)
        for set_name, group in groups.items():
            for rec in group:
                sets[set_name] += [
                    SegmentRef(rec.path, cls, off)
                    for off in segment_offsets(rec.duration, spec.segment_length, stride)
                ]

    for set_name in ("val", "test"):
        refs = sets[set_name]
        per_class: dict[str, list[SegmentRef]] = {}
        for ref in refs:
            per_class.setdefault(ref.label, []).append(ref)
        floor = min(len(v) for v in per_class.values())
        equalized: list[SegmentRef] = []
        for cls in sorted(per_class):
            group = per_class[cls]
            keep = root_rng.derive(f"balance:{set_name}:{cls}").subsample(
                len(group), floor
            )
            equalized += [group[i] for i in keep]
        sets[set_name] = equalized

    return DatasetSplit(
        train=sets["train"], validation=sets["val"], test=sets["test"], seed=seed
    )


def write_manifest(path: str | Path, split_result: DatasetSplit) -> None:
    """One record per line: path<TAB>label<TAB>offset<TAB>set."""
    lines = []
    for set_name, refs in split_result.subsets():
        lines += [f"{r.path}\t{r.label}\t{r.offset}\t{set_name}" for r in refs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> list[tuple[SegmentRef, str]]:
    """(segment, set-name) pairs in file order."""
    out = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 4 or parts[3] not in SET_NAMES:
            raise InputError(f"{path}:{ln}: malformed manifest record")
        out.append((SegmentRef(parts[0], parts[1], int(parts[2])), parts[3]))
    return out


@dataclass
class CorpusScan:
    records: list[AudioFileRecord]
    problems: list[str]
    excluded_classes: list[str]


def scan_corpus(
    root: str | Path,
    classes: list[str] | None = None,
    min_class_share: float = DEFAULT_MIN_CLASS_SHARE,
    threshold_db: float = DEFAULT_TRIM_THRESHOLD_DB,
    min_window: int = DEFAULT_TRIM_WINDOW,
    expected_rate: int | None = 44_100,
) -> CorpusScan:
    """Walk `<root>/<label>/*.wav`, trim, and collect labeled records.

    Classes whose trimmed material is below `min_class_share` of the
    corpus total are excluded, mirroring the representation floor used
    when assembling the original experiments.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"corpus directory {root} does not exist")
    records: list[AudioFileRecord] = []
    problems: list[str] = []
    for wav_path in sorted(root.rglob("*.wav")):
        rel = wav_path.relative_to(root)
        if len(rel.parts) < 2:
            problems.append(f"{rel}: not inside a class directory")
            continue
        label = rel.parts[0]
        if classes is not None and label not in classes:
            problems.append(f"{rel}: unknown label {label!r}")
            continue
        try:
            signal = load_wav(wav_path, expected_rate)
        except InputError as exc:
            problems.append(str(exc))
            continue
        trimmed = trim_silence(signal, threshold_db, min_window)
        if len(trimmed) == 0:
            problems.append(f"{rel}: fully silent after trimming")
            continue
        records.append(AudioFileRecord(str(rel), label, len(trimmed)))

    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.label] = totals.get(rec.label, 0) + rec.duration
    corpus_total = sum(totals.values())
    excluded = sorted(
        cls for cls, total in totals.items()
        if corpus_total and total / corpus_total < min_class_share
    )
    if excluded:
        log.info("excluding under-represented classes: %s", ", ".join(excluded))
        records = [r for r in records if r.label not in excluded]
    return CorpusScan(records=records, problems=problems, excluded_classes=excluded)
