"""Cut cleaned records into labeled 500-sample segments; cap, weight, and split them."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wfdb_io import (CLASS_NAMES, N_CLASSES, EcgRecord, RecordHeader, RhythmClass,
                      RhythmInterval, SignalSpec)

WINDOW = 500
DEFAULT_STRIDE = 128  # 1 s at 128 Hz; the source publication leaves the stride open
DEFAULT_CAP = 10000
DEFAULT_TRAIN_FRACTION = 0.85

DATASET_VERSION = "ecglite-ds-v1"
MANIFEST_NAME = "manifest.txt"
SEGMENTS_NAME = "segments.f32"
LABELS_NAME = "labels.u8"
SPLIT_NAME = "split.u8"
SOURCES_NAME = "sources.csv"

RECORD_VERSION = "ecglite-rec-v1"
RECORD_SIGNAL_NAME = "signal.f32"
RECORD_INTERVALS_NAME = "intervals.csv"


@dataclass
class Segment:
    samples: np.ndarray  # [WINDOW] float32 in [-1, 1]
    label: RhythmClass
    source: tuple[str, int]  # (record name, onset sample)


@dataclass
class SegmentSet:
    """Segment matrix with labels, per-class weights, and a train/test split."""

    samples: np.ndarray  # [N, WINDOW] float32
    labels: np.ndarray  # [N] uint8
    sources: list[tuple[str, int]]
    train_mask: np.ndarray  # [N] bool, True = train
    seed: int
    stride: int = DEFAULT_STRIDE
    cap: int = DEFAULT_CAP
    train_fraction: float = DEFAULT_TRAIN_FRACTION

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CLASSES).astype(np.int64)

    @property
    def weights(self) -> np.ndarray:
        return class_weights(self.class_counts)

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.samples[self.train_mask], self.labels[self.train_mask]

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.samples[~self.train_mask], self.labels[~self.train_mask]


def segment_record(record: EcgRecord, lead: int, window: int = WINDOW,
                   stride: int = DEFAULT_STRIDE) -> list[Segment]:
    """Overlapping windows inside each labeled rhythm interval.

    Windows start at interval onset and advance by ``stride``; none crosses a
    rhythm boundary. Intervals without one of the nine labels contribute
    nothing, as do intervals shorter than the window.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if not 0 <= lead < record.channels.shape[0]:
        raise ValueError(f"lead {lead} out of range for {record.channels.shape[0]} channel(s)")
    channel = record.channels[lead]
    name = record.header.record_name
    segments = []
    for iv in record.rhythms:
        if iv.label is None:
            continue
        for s in range(iv.onset, iv.end - window + 1, stride):
            segments.append(Segment(channel[s:s + window].astype(np.float32), iv.label, (name, s)))
    return segments


def _cap_with_rng(segments: list[Segment], rhythm_class: RhythmClass, cap: int,
                  rng: np.random.Generator) -> list[Segment]:
    idx = [i for i, seg in enumerate(segments) if seg.label == rhythm_class]
    if len(idx) <= cap:
        return segments
    keep = set(rng.choice(len(idx), size=cap, replace=False).tolist())
    drop = {idx[i] for i in range(len(idx)) if i not in keep}
    return [seg for i, seg in enumerate(segments) if i not in drop]


def cap_class(segments: list[Segment], rhythm_class: RhythmClass, cap: int,
              seed: int) -> list[Segment]:
    """Uniformly subsample one class down to ``cap`` segments (order preserved)."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    return _cap_with_rng(segments, rhythm_class, cap, np.random.default_rng(seed))


def class_weights(class_counts: np.ndarray) -> np.ndarray:
    """Inverse-frequency weights w_c = N_total / (K * N_c); zero for empty classes."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.shape != (N_CLASSES,):
        raise ValueError(f"expected {N_CLASSES} class counts, got shape {counts.shape}")
    total = counts.sum()
    if total == 0:
        raise ValueError("all class counts are zero")
    weights = np.zeros(N_CLASSES)
    active = counts > 0
    weights[active] = total / (N_CLASSES * counts[active])
    return weights


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random permutation; the first round(fraction*n) indices train."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    if n < 2:
        raise ValueError(f"need at least 2 segments to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = round(train_fraction * n)
    return perm[:n_train], perm[n_train:]


def split(segments: list[Segment], train_fraction: float,
          seed: int) -> tuple[list[Segment], list[Segment]]:
    train_idx, test_idx = split_indices(len(segments), train_fraction, seed)
    return [segments[i] for i in train_idx], [segments[i] for i in test_idx]


def one_hot(label: RhythmClass) -> np.ndarray:
    """9-element indicator vector in canonical class order."""
    if not isinstance(label, RhythmClass):
        raise ValueError(f"label must be one of the {N_CLASSES} rhythm classes, got {label!r}")
    vec = np.zeros(N_CLASSES, dtype=np.float32)
    vec[int(label)] = 1.0
    return vec


def build_dataset(records: list[EcgRecord], lead: int = 0, stride: int = DEFAULT_STRIDE,
                  cap: int = DEFAULT_CAP, train_fraction: float = DEFAULT_TRAIN_FRACTION,
                  seed: int = 0) -> SegmentSet:
    """Segment cleaned records, cap every class, and assign the train/test split.

    One generator seeded with ``seed`` drives the per-class cap draws (in
    canonical class order) and then the split permutation, so the result is
    reproducible from the seed alone.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    segments: list[Segment] = []
    for record in records:
        segments.extend(segment_record(record, lead, WINDOW, stride))
    if len(segments) < 2:
        raise ValueError(f"only {len(segments)} usable segment(s) produced")

    rng = np.random.default_rng(seed)
    for rhythm_class in RhythmClass:
        segments = _cap_with_rng(segments, rhythm_class, cap, rng)

    n = len(segments)
    if not 0 < train_fraction < 1:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    perm = rng.permutation(n)
    n_train = round(train_fraction * n)
    train_mask = np.zeros(n, dtype=bool)
    train_mask[perm[:n_train]] = True

    samples = np.stack([seg.samples for seg in segments]).astype(np.float32)
    labels = np.array([int(seg.label) for seg in segments], dtype=np.uint8)
    sources = [seg.source for seg in segments]
    return SegmentSet(samples, labels, sources, train_mask, seed=seed, stride=stride,
                      cap=cap, train_fraction=train_fraction)


def save_dataset(ds: SegmentSet, directory: str | Path) -> None:
    """Write the on-disk container: manifest plus raw little-endian arrays."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    counts = ",".join(str(int(c)) for c in ds.class_counts)
    manifest = "\n".join([
        f"version={DATASET_VERSION}",
        f"seed={ds.seed}",
        f"stride={ds.stride}",
        f"cap={ds.cap}",
        f"window={WINDOW}",
        f"train_fraction={ds.train_fraction:g}",
        f"class_order={','.join(CLASS_NAMES)}",
        f"counts={counts}",
        f"n_segments={len(ds)}",
    ]) + "\n"
    (out / MANIFEST_NAME).write_text(manifest)
    (out / SEGMENTS_NAME).write_bytes(np.ascontiguousarray(ds.samples, dtype="<f4").tobytes())
    (out / LABELS_NAME).write_bytes(ds.labels.astype(np.uint8).tobytes())
    (out / SPLIT_NAME).write_bytes(ds.train_mask.astype(np.uint8).tobytes())
    lines = ["record,onset"] + [f"{name},{onset}" for name, onset in ds.sources]
    (out / SOURCES_NAME).write_text("\n".join(lines) + "\n")


def save_clean_record(record: EcgRecord, directory: str | Path) -> None:
    """Persist a cleaned 128 Hz record: manifest, raw float32 signal, intervals."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    header = record.header
    manifest = "\n".join([
        f"version={RECORD_VERSION}",
        f"name={header.record_name}",
        f"sampling_rate={header.sampling_rate:g}",
        f"n_samples={header.n_samples}",
        f"n_signals={header.n_signals}",
        f"descriptions={','.join(s.description for s in header.signals)}",
    ]) + "\n"
    (out / MANIFEST_NAME).write_text(manifest)
    (out / RECORD_SIGNAL_NAME).write_bytes(
        np.ascontiguousarray(record.channels, dtype="<f4").tobytes())
    lines = ["onset,end,label"]
    for iv in record.rhythms:
        label = iv.label.name if iv.label is not None else iv.aux
        lines.append(f"{iv.onset},{iv.end},{label}")
    (out / RECORD_INTERVALS_NAME).write_text("\n".join(lines) + "\n")


def load_clean_record(directory: str | Path) -> EcgRecord:
    root = Path(directory)
    manifest = _parse_manifest((root / MANIFEST_NAME).read_text())
    version = manifest.get("version")
    if version != RECORD_VERSION:
        raise ValueError(f"unsupported record version {version!r}, expected {RECORD_VERSION!r}")
    n_samples = int(manifest["n_samples"])
    n_signals = int(manifest["n_signals"])
    signal = np.frombuffer((root / RECORD_SIGNAL_NAME).read_bytes(), dtype="<f4")
    if signal.size != n_signals * n_samples:
        raise ValueError(f"signal file holds {signal.size} floats, "
                         f"expected {n_signals * n_samples}")
    channels = signal.reshape(n_signals, n_samples).astype(np.float64)

    rhythms = []
    by_name = {c.name: c for c in RhythmClass}
    for line in (root / RECORD_INTERVALS_NAME).read_text().splitlines()[1:]:
        onset, end, label = line.split(",", 2)
        rhythms.append(RhythmInterval(int(onset), int(end), by_name.get(label), label))

    descriptions = manifest.get("descriptions", "").split(",")
    specs = [SignalSpec(16, 1.0, 0, descriptions[i] if i < len(descriptions) else "")
             for i in range(n_signals)]
    header = RecordHeader(manifest["name"], n_signals,
                          float(manifest["sampling_rate"]), n_samples, specs)
    return EcgRecord(header, channels, rhythms)


def _parse_manifest(text: str) -> dict[str, str]:
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad manifest line: {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def load_dataset(directory: str | Path) -> SegmentSet:
    """Read a container written by :func:`save_dataset`, validating the manifest."""
    root = Path(directory)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    manifest = _parse_manifest(manifest_path.read_text())

    version = manifest.get("version")
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version!r}, expected {DATASET_VERSION!r}")
    if manifest.get("class_order") != ",".join(CLASS_NAMES):
        raise ValueError(f"unexpected class order {manifest.get('class_order')!r}")
    n = int(manifest["n_segments"])
    window = int(manifest.get("window", WINDOW))
    if window != WINDOW:
        raise ValueError(f"unsupported window {window}, expected {WINDOW}")

    samples = np.frombuffer((root / SEGMENTS_NAME).read_bytes(), dtype="<f4")
    if samples.size != n * WINDOW:
        raise ValueError(f"segment file holds {samples.size} floats, expected {n * WINDOW}")
    samples = samples.reshape(n, WINDOW).astype(np.float32)

    labels = np.frombuffer((root / LABELS_NAME).read_bytes(), dtype=np.uint8)
    if labels.size != n:
        raise ValueError(f"label file holds {labels.size} bytes, expected {n}")
    if labels.size and labels.max() >= N_CLASSES:
        raise ValueError(f"label {labels.max()} out of range")

    train_mask = np.frombuffer((root / SPLIT_NAME).read_bytes(), dtype=np.uint8)
    if train_mask.size != n:
        raise ValueError(f"split file holds {train_mask.size} bytes, expected {n}")

    declared = np.array([int(c) for c in manifest["counts"].split(",")], dtype=np.int64)
    actual = np.bincount(labels, minlength=N_CLASSES)
    if not np.array_equal(declared, actual):
        raise ValueError("manifest counts disagree with the label file")

    sources = []
    sources_path = root / SOURCES_NAME
    if sources_path.is_file():
        for line in sources_path.read_text().splitlines()[1:]:
            name, onset = line.rsplit(",", 1)
            sources.append((name, int(onset)))
    else:
        sources = [("", 0)] * n

    return SegmentSet(
        samples=samples,
        labels=labels.copy(),
        sources=sources,
        train_mask=train_mask.astype(bool),
        seed=int(manifest.get("seed", 0)),
        stride=int(manifest.get("stride", DEFAULT_STRIDE)),
        cap=int(manifest.get("cap", DEFAULT_CAP)),
        train_fraction=float(manifest.get("train_fraction", DEFAULT_TRAIN_FRACTION)),
    )
