"""Synthetic ECG-like material: labeled segments and full fake record triplets.

Each rhythm class gets a distinct template (beat rate, per-beat pulse
morphology, superimposed wave) so a classifier can actually separate them;
the shapes are caricatures, not physiology.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .wfdb_io import (Annotation, EcgRecord, RecordHeader, RhythmClass, RhythmInterval,
                      SignalSpec, encode_annotations, encode_format212, rhythm_intervals,
                      NORMAL, RHYTHM)

SEGMENT_LEN = 500
RATE = 128.0


@dataclass
class ClassTemplate:
    beat_rate_hz: float
    rate_jitter: float  # fractional jitter of inter-beat intervals
    pulses: tuple[tuple[float, float, float], ...]  # per beat: (offset s, width s, amp)
    amp_pattern: tuple[float, ...] = (1.0,)  # cycles over successive beats
    width_pattern: tuple[float, ...] = (1.0,)  # widths cycle the same way
    wave_hz: float = 0.0
    wave_amp: float = 0.0
    wave_kind: str = "none"  # "sine", "saw", or "none"


TEMPLATES: dict[RhythmClass, ClassTemplate] = {
    # irregular beats under a fast fibrillatory ripple
    RhythmClass.AFIB: ClassTemplate(2.1, 0.45, ((0.0, 0.025, 1.0),),
                                    wave_hz=6.5, wave_amp=0.25, wave_kind="sine"),
    # strong sawtooth flutter waves between slow beats
    RhythmClass.AFL: ClassTemplate(1.1, 0.03, ((0.0, 0.028, 1.0),),
                                   wave_hz=4.2, wave_amp=0.55, wave_kind="saw"),
    # each normal beat trailed by a wide premature complex
    RhythmClass.B: ClassTemplate(0.9, 0.03, ((0.0, 0.022, 1.0), (0.30, 0.085, 0.85))),
    # clean regular beats, nothing between them
    RhythmClass.N: ClassTemplate(1.3, 0.03, ((0.0, 0.024, 1.0),)),
    # slow rhythm led by a sharp pacing spike fused to a wide complex
    RhythmClass.P: ClassTemplate(0.85, 0.02, ((-0.045, 0.014, 1.3), (0.0, 0.06, 0.9))),
    # slurred upstroke running into each beat
    RhythmClass.PREX: ClassTemplate(1.55, 0.03, ((-0.06, 0.10, 0.5), (0.0, 0.05, 1.0))),
    # fast, regular, narrow, nothing else
    RhythmClass.SVTA: ClassTemplate(2.9, 0.04, ((0.0, 0.022, 1.0),)),
    # tight bursts of three wide bumps with a long gap between bursts
    RhythmClass.T: ClassTemplate(0.66, 0.03, ((0.0, 0.05, 1.0), (0.22, 0.05, 0.95),
                                              (0.44, 0.05, 0.9))),
    # wide complexes riding a fast near-sinusoid
    RhythmClass.VT: ClassTemplate(3.5, 0.02, ((0.0, 0.11, 1.0),),
                                  wave_hz=3.5, wave_amp=0.8, wave_kind="sine"),
}


def _render(template: ClassTemplate, n: int, fs: float, rng: np.random.Generator,
            noise: float) -> np.ndarray:
    t = np.arange(n) / fs
    x = np.zeros(n)

    if template.wave_kind == "sine":
        phase = rng.uniform(0, 2 * np.pi)
        x += template.wave_amp * np.sin(2 * np.pi * template.wave_hz * t + phase)
    elif template.wave_kind == "saw":
        phase = rng.uniform(0, 1)
        frac = (template.wave_hz * t + phase) % 1.0
        x += template.wave_amp * (2 * frac - 1)

    period = 1.0 / template.beat_rate_hz
    center = rng.uniform(0, period)
    beat = 0
    while center < n / fs + period:
        amp = template.amp_pattern[beat % len(template.amp_pattern)]
        amp *= rng.uniform(0.92, 1.08)
        widen = template.width_pattern[beat % len(template.width_pattern)]
        for offset, width, pulse_amp in template.pulses:
            width = width * widen
            x += amp * pulse_amp * np.exp(-0.5 * ((t - center - offset) / width) ** 2)
        center += period * (1.0 + rng.uniform(-template.rate_jitter, template.rate_jitter))
        beat += 1

    x += rng.normal(0.0, noise, size=n)
    lo, hi = x.min(), x.max()
    if hi > lo:
        x = 2 * (x - lo) / (hi - lo) - 1
    return x


def make_segments(n_per_class: int, seed: int = 0,
                  noise: float = 0.03) -> tuple[np.ndarray, np.ndarray]:
    """n_per_class segments for each of the 9 classes, normalized to [-1, 1]."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for cls in RhythmClass:
        template = TEMPLATES[cls]
        for _ in range(n_per_class):
            xs.append(_render(template, SEGMENT_LEN, RATE, rng, noise))
            ys.append(int(cls))
    return np.array(xs, dtype=np.float32), np.array(ys, dtype=np.uint8)


def make_train_test(n_train_per_class: int, n_test_per_class: int, seed: int = 0,
                    noise: float = 0.03):
    """Stratified synthetic split: (x_train, y_train, x_test, y_test)."""
    x, y = make_segments(n_train_per_class + n_test_per_class, seed=seed, noise=noise)
    train_idx, test_idx = [], []
    for cls in range(len(RhythmClass)):
        idx = np.flatnonzero(y == cls)
        train_idx.extend(idx[:n_train_per_class])
        test_idx.extend(idx[n_train_per_class:])
    train_idx, test_idx = np.array(train_idx), np.array(test_idx)
    return x[train_idx], y[train_idx], x[test_idx], y[test_idx]


def make_record(name: str, classes: list[RhythmClass], seconds_per_class: float = 30.0,
                fs: float = 360.0, seed: int = 0, noise: float = 0.04,
                wander_mv: float = 0.35) -> EcgRecord:
    """A fake two-lead record cycling through ``classes``, with baseline wander."""
    rng = np.random.default_rng(seed)
    n_per = int(seconds_per_class * fs)
    pieces, intervals = [], []
    for k, cls in enumerate(classes):
        pieces.append(_render(TEMPLATES[cls], n_per, fs, rng, noise))
        intervals.append(RhythmInterval(k * n_per, (k + 1) * n_per, cls, cls.aux))
    signal = np.concatenate(pieces)
    n = signal.size
    t = np.arange(n) / fs
    signal = signal + wander_mv * np.sin(2 * np.pi * 0.25 * t + rng.uniform(0, 2 * np.pi))
    lead2 = 0.7 * signal + rng.normal(0, noise, size=n)

    header = RecordHeader(name, 2, fs, n, [
        SignalSpec(212, 200.0, 1024, "MLII"),
        SignalSpec(212, 200.0, 1024, "V1"),
    ])
    return EcgRecord(header, np.stack([signal, lead2]), intervals)


def write_record_files(record: EcgRecord, directory: str | Path) -> Path:
    """Encode a record as an on-disk .hea/.dat/.atr triplet; returns the prefix."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = record.header
    name = header.record_name

    lines = [f"{name} {header.n_signals} {header.sampling_rate:g} {header.n_samples}"]
    for spec in header.signals:
        lines.append(f"{name}.dat {spec.storage_format} {spec.gain:g} 12 "
                     f"{spec.baseline} 0 0 0 {spec.description}")
    (directory / f"{name}.hea").write_text("\n".join(lines) + "\n")

    raw = np.empty((header.n_samples, header.n_signals), dtype=np.int64)
    for i, spec in enumerate(header.signals):
        adu = np.rint(record.channels[i] * spec.gain + spec.baseline)
        raw[:, i] = np.clip(adu, -2048, 2047)
    (directory / f"{name}.dat").write_bytes(encode_format212(raw.ravel()))

    anns = []
    for iv in record.rhythms:
        anns.append(Annotation(iv.onset, RHYTHM, iv.aux or (iv.label.aux if iv.label else "(?")))
        anns.append(Annotation(iv.onset + 1, NORMAL))
    (directory / f"{name}.atr").write_bytes(encode_annotations(anns))
    return directory / name
