"""Readers for PhysioNet-style record triplets (.hea text, .dat signal, .atr annotations)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# annotation type codes (MIT convention)
NORMAL = 1
RHYTHM = 28
SKIP = 59
NUM = 60
SUBTYP = 61
CHAN = 62
AUX = 63

DEFAULT_GAIN = 200.0  # adu per mV when the header omits or zeroes the gain

SUPPORTED_FORMATS = (212, 16)


class WfdbError(Exception):
    """Base error for malformed record files."""


class HeaderError(WfdbError):
    def __init__(self, message: str, line: int):
        super().__init__(f"header line {line}: {message}")
        self.line = line


class UnsupportedFormatError(WfdbError):
    pass


class SignalError(WfdbError):
    pass


class AnnotationError(WfdbError):
    pass


class RhythmClass(enum.IntEnum):
    """The nine rhythm classes, in canonical (report) order."""

    AFIB = 0
    AFL = 1
    B = 2
    N = 3
    P = 4
    PREX = 5
    SVTA = 6
    T = 7
    VT = 8

    @property
    def aux(self) -> str:
        return "(" + self.name


RHYTHM_BY_AUX = {c.aux: c for c in RhythmClass}
CLASS_NAMES = [c.name for c in RhythmClass]
N_CLASSES = len(RhythmClass)


@dataclass
class SignalSpec:
    storage_format: int
    gain: float = DEFAULT_GAIN
    baseline: int = 0
    description: str = ""


@dataclass
class RecordHeader:
    record_name: str
    n_signals: int
    sampling_rate: float
    n_samples: int
    signals: list[SignalSpec]


@dataclass
class Annotation:
    time: int
    type_code: int
    aux: str | None = None


@dataclass
class RhythmInterval:
    """Half-open sample interval [onset, end) with a constant rhythm.

    ``label`` is None for aux strings outside the nine known classes; such
    intervals are kept for reporting but excluded from segmentation.
    """

    onset: int
    end: int
    label: RhythmClass | None
    aux: str = ""


@dataclass
class EcgRecord:
    header: RecordHeader
    channels: np.ndarray  # [n_signals, n_samples], millivolts
    rhythms: list[RhythmInterval]


def _parse_number(token: str, kind, what: str, line: int):
    try:
        return kind(token)
    except ValueError:
        raise HeaderError(f"cannot parse {what} from {token!r}", line) from None


def parse_header(text: str) -> RecordHeader:
    """Parse the contents of a .hea file.

    First non-comment line: record name, signal count, sampling rate, sample
    count. One line per signal follows: file name, storage format, gain
    (optionally decorated ``gain(baseline)/units``), adc resolution, adc zero,
    then optional fields with a trailing description.
    """
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    content = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not content:
        raise HeaderError("empty header", 1)

    no, first = content[0]
    tokens = first.split()
    if len(tokens) < 4:
        raise HeaderError("need record name, signal count, sampling rate, sample count", no)
    record_name = tokens[0].split("/")[0]
    n_signals = _parse_number(tokens[1], int, "signal count", no)
    sampling_rate = _parse_number(tokens[2].split("/")[0], float, "sampling rate", no)
    n_samples = _parse_number(tokens[3], int, "sample count", no)
    if n_signals < 1:
        raise HeaderError(f"signal count must be >= 1, got {n_signals}", no)
    if sampling_rate <= 0:
        raise HeaderError(f"sampling rate must be > 0, got {sampling_rate}", no)
    if n_samples < 0:
        raise HeaderError(f"sample count must be >= 0, got {n_samples}", no)

    signal_lines = content[1:]
    if len(signal_lines) < n_signals:
        raise HeaderError(
            f"header declares {n_signals} signals but has {len(signal_lines)} signal lines",
            no,
        )

    signals = []
    for no, line in signal_lines[:n_signals]:
        tokens = line.split()
        if len(tokens) < 2:
            raise HeaderError("signal line needs at least file name and format", no)
        fmt = _parse_number(tokens[1].split("x")[0].split(":")[0].split("+")[0], int,
                            "storage format", no)
        if fmt not in SUPPORTED_FORMATS:
            raise UnsupportedFormatError(f"unsupported format {fmt}")

        gain = DEFAULT_GAIN
        baseline = None
        if len(tokens) >= 3:
            gain_token = tokens[2]
            if "(" in gain_token:  # gain(baseline) decoration carries the baseline
                gain_part, rest = gain_token.split("(", 1)
                baseline = _parse_number(rest.split(")")[0], int, "baseline", no)
                gain_token = gain_part
            gain = _parse_number(gain_token.split("/")[0], float, "gain", no)
            if gain <= 0:
                gain = DEFAULT_GAIN
        if baseline is None:
            baseline = _parse_number(tokens[4], int, "adc zero", no) if len(tokens) >= 5 else 0
        description = " ".join(tokens[8:]) if len(tokens) > 8 else ""
        signals.append(SignalSpec(fmt, gain, baseline, description))

    return RecordHeader(record_name, n_signals, sampling_rate, n_samples, signals)


def _expected_bytes_212(n_values: int) -> int:
    # two 12-bit samples per 3 bytes; a trailing lone sample takes 2 bytes
    return (n_values // 2) * 3 + (2 if n_values % 2 else 0)


def decode_format212(data: bytes, n_values: int) -> np.ndarray:
    """Unpack ``n_values`` 12-bit two's-complement samples from 3-byte groups.

    Group layout: s1 = byte0 | (low nibble of byte1) << 8,
    s2 = byte2 | (high nibble of byte1) << 4.
    """
    expected = _expected_bytes_212(n_values)
    if len(data) < expected:
        raise SignalError(f"format 212: expected {expected} bytes, got {len(data)}")
    if len(data) > expected + 1:  # tolerate a single pad byte
        raise SignalError(f"format 212: expected {expected} bytes, got {len(data)}")
    buf = np.frombuffer(data[:expected], dtype=np.uint8)
    pad = (-len(buf)) % 3
    if pad:
        buf = np.concatenate([buf, np.zeros(pad, dtype=np.uint8)])
    triples = buf.reshape(-1, 3).astype(np.int32)
    s1 = triples[:, 0] | ((triples[:, 1] & 0x0F) << 8)
    s2 = triples[:, 2] | ((triples[:, 1] & 0xF0) << 4)
    values = np.empty(triples.shape[0] * 2, dtype=np.int32)
    values[0::2] = s1
    values[1::2] = s2
    values = values[:n_values]
    values[values > 2047] -= 4096
    return values


def encode_format212(values: np.ndarray) -> bytes:
    """Inverse of :func:`decode_format212`; used for fixtures and demos."""
    values = np.asarray(values, dtype=np.int64).ravel()
    if values.size and (values.min() < -2048 or values.max() > 2047):
        raise SignalError("format 212 values must lie in [-2048, 2047]")
    raw = np.where(values < 0, values + 4096, values).astype(np.uint16)
    if raw.size % 2:
        raw = np.concatenate([raw, np.zeros(1, dtype=np.uint16)])
    s1, s2 = raw[0::2], raw[1::2]
    out = np.empty((s1.size, 3), dtype=np.uint8)
    out[:, 0] = s1 & 0xFF
    out[:, 1] = ((s1 >> 8) & 0x0F) | (((s2 >> 8) & 0x0F) << 4)
    out[:, 2] = s2 & 0xFF
    data = out.tobytes()
    if values.size % 2:
        data = data[:-1]  # lone trailing sample occupies only 2 bytes
    return data


def encode_format16(values: np.ndarray) -> bytes:
    return np.asarray(values, dtype="<i2").ravel().tobytes()


def read_signal(header: RecordHeader, data: bytes) -> np.ndarray:
    """Decode a .dat payload to physical units, [n_signals, n_samples] in mV."""
    formats = {s.storage_format for s in header.signals}
    if len(formats) > 1:
        raise UnsupportedFormatError(f"mixed signal formats {sorted(formats)} not supported")
    fmt = header.signals[0].storage_format
    n_values = header.n_signals * header.n_samples

    if fmt == 212:
        values = decode_format212(data, n_values)
    elif fmt == 16:
        expected = n_values * 2
        if len(data) != expected:
            raise SignalError(f"format 16: expected {expected} bytes, got {len(data)}")
        values = np.frombuffer(data, dtype="<i2").astype(np.int32)
    else:
        raise UnsupportedFormatError(f"unsupported format {fmt}")

    # samples are channel-interleaved: ch0[t], ch1[t], ...
    raw = values.reshape(header.n_samples, header.n_signals).T
    channels = np.empty(raw.shape, dtype=np.float64)
    for i, spec in enumerate(header.signals):
        channels[i] = (raw[i] - spec.baseline) / spec.gain
    return channels


def read_annotations(data: bytes, n_samples: int) -> list[Annotation]:
    """Decode an .atr byte stream.

    Little-endian 16-bit words; type = word >> 10, data = word & 0x3FF. The
    data field of ordinary annotations is a sample delta from the previous
    annotation. SKIP carries a 4-byte offset (high word first, each word
    little-endian), AUX carries `data` text bytes padded to even length,
    NUM/SUBTYP/CHAN are consumed and ignored, a zero word terminates.
    """
    anns: list[Annotation] = []
    t = 0
    i = 0
    while True:
        if i + 2 > len(data):
            raise AnnotationError("annotation stream ended without terminator word")
        word = data[i] | (data[i + 1] << 8)
        i += 2
        if word == 0:
            break
        code = word >> 10
        dat = word & 0x3FF
        if code == SKIP:
            if i + 4 > len(data):
                raise AnnotationError("truncated SKIP offset")
            hi = data[i] | (data[i + 1] << 8)
            lo = data[i + 2] | (data[i + 3] << 8)
            i += 4
            offset = (hi << 16) | lo
            if offset >= 1 << 31:
                offset -= 1 << 32
            t += offset
        elif code in (NUM, SUBTYP, CHAN):
            pass
        elif code == AUX:
            total = dat + (dat & 1)
            if i + total > len(data):
                raise AnnotationError(
                    f"dangling aux bytes: need {total}, have {len(data) - i}")
            if not anns:
                raise AnnotationError("aux field before any annotation")
            anns[-1].aux = data[i:i + dat].decode("latin-1").rstrip("\x00")
            i += total
        else:
            t += dat
            if t > n_samples:
                raise AnnotationError(
                    f"annotation time {t} exceeds record length {n_samples}")
            anns.append(Annotation(time=t, type_code=code))
    return anns


def encode_annotations(annotations: list[Annotation]) -> bytes:
    """Inverse of :func:`read_annotations`; used for fixtures and demos."""
    out = bytearray()
    prev = 0
    for ann in annotations:
        dt = ann.time - prev
        if dt < 0:
            raise AnnotationError("annotations must be sorted by time")
        prev = ann.time
        if dt > 0x3FF:  # delta too wide for one word: SKIP carries it
            out += int(SKIP << 10).to_bytes(2, "little")
            out += ((dt >> 16) & 0xFFFF).to_bytes(2, "little")
            out += (dt & 0xFFFF).to_bytes(2, "little")
            dt = 0
        out += ((ann.type_code << 10) | dt).to_bytes(2, "little")
        if ann.aux is not None:
            raw = ann.aux.encode("latin-1")
            out += ((AUX << 10) | len(raw)).to_bytes(2, "little")
            out += raw
            if len(raw) % 2:
                out += b"\x00"
    out += b"\x00\x00"
    return bytes(out)


def rhythm_intervals(annotations: list[Annotation], n_samples: int) -> list[RhythmInterval]:
    """Turn rhythm-change annotations into a partition of [first onset, n_samples).

    Each rhythm annotation (type 28, aux starting "(") opens an interval that
    the next one closes. Unknown aux strings get label None (reported, never
    silently dropped).
    """
    events = [(a.time, a.aux) for a in annotations
              if a.type_code == RHYTHM and a.aux and a.aux.startswith("(")]
    times = [t for t, _ in events]
    if times != sorted(times):
        raise AnnotationError("rhythm annotations out of order")
    intervals = []
    for k, (onset, aux) in enumerate(events):
        end = events[k + 1][0] if k + 1 < len(events) else n_samples
        if onset >= end:  # superseded at the same sample
            continue
        intervals.append(RhythmInterval(onset, end, RHYTHM_BY_AUX.get(aux), aux))
    return intervals


def read_record(path_prefix: str | Path) -> EcgRecord:
    """Read the .hea/.dat/.atr triplet sharing ``path_prefix``."""
    prefix = Path(path_prefix)
    header = parse_header(prefix.with_suffix(".hea").read_text())
    channels = read_signal(header, prefix.with_suffix(".dat").read_bytes())
    anns = read_annotations(prefix.with_suffix(".atr").read_bytes(), header.n_samples)
    rhythms = rhythm_intervals(anns, header.n_samples)
    return EcgRecord(header, channels, rhythms)


def parse_summary(record: EcgRecord) -> str:
    """Per-record text report: classes found and samples covered by each."""
    by_class = {name: 0 for name in CLASS_NAMES}
    other: dict[str, int] = {}
    for iv in record.rhythms:
        if iv.label is not None:
            by_class[iv.label.name] += iv.end - iv.onset
        else:
            other[iv.aux] = other.get(iv.aux, 0) + (iv.end - iv.onset)
    lines = [
        f"record {record.header.record_name}: "
        f"{record.header.n_samples} samples at {record.header.sampling_rate:g} Hz, "
        f"{record.header.n_signals} signal(s)",
    ]
    for name in CLASS_NAMES:
        if by_class[name]:
            lines.append(f"  {name:<5} {by_class[name]} samples")
    for aux in sorted(other):
        lines.append(f"  other rhythm {aux!r}: {other[aux]} samples (excluded)")
    if not record.rhythms:
        lines.append("  no rhythm annotations")
    return "\n".join(lines)
