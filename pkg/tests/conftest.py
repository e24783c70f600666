import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scatbox.dataset import AudioFileRecord, write_wav
from scatbox.gabor import SampledSignal

RATE = 44_100
FIXTURE_CLASSES = ("clarinet", "flute", "trumpet", "violin", "saxophone", "cello")


def tone(freq, seconds, rate=RATE, amp=0.5, phase=0.0):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t + phase)


@pytest.fixture(scope="session")
def record_fixture():
    """Synthetic per-class file records (no audio, for split logic)."""
    rng = np.random.default_rng(7)
    records = []
    for ci, cls in enumerate(FIXTURE_CLASSES):
        for fi in range(10):
            duration = RATE + int(rng.integers(0, RATE))
            records.append(AudioFileRecord(f"{cls}/take{fi:02d}.wav", cls, duration))
    return records


@pytest.fixture(scope="session")
def wav_corpus(tmp_path_factory):
    """A small on-disk corpus: 6 classes x 3 files of 1.2 s tones."""
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(11)
    freqs = (262.0, 392.0, 523.0, 698.0, 880.0, 1175.0)
    for cls, freq in zip(FIXTURE_CLASSES, freqs):
        (root / cls).mkdir()
        for fi in range(3):
            x = tone(freq * (1 + 0.01 * fi), 1.2) + 0.002 * rng.standard_normal(int(1.2 * RATE))
            write_wav(root / cls / f"take{fi}.wav", SampledSignal(x, RATE))
    return root
