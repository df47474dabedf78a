"""Baseline-wander removal, resampling to 128 Hz, and amplitude normalization."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .wfdb_io import EcgRecord, RecordHeader, RhythmInterval

TARGET_RATE = 128.0
BASELINE_WIDTHS_MS = (200.0, 600.0)

# anti-aliasing FIR used before downsampling
FIR_TAPS = 127
FIR_CUTOFF_FACTOR = 0.45


def median_window_samples(width_ms: float, fs: float) -> int:
    """Window width in samples, rounded to the nearest odd integer (ties up)."""
    width = width_ms * fs / 1000.0
    return 2 * int(width // 2) + 1


def median_filter(x: np.ndarray, window: int) -> np.ndarray:
    """Centered running median with replicate edge padding, exact semantics."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    x = np.asarray(x, dtype=np.float64)
    if window == 1:
        return x.copy()
    # pad explicitly so the filtered span is never shorter than the window
    half = window // 2
    padded = np.pad(x, half, mode="edge")
    return ndimage.median_filter(padded, size=window, mode="nearest")[half:-half]


def remove_baseline(x: np.ndarray, fs: float) -> np.ndarray:
    """Subtract the two-pass (200 ms then 600 ms) median-filter baseline."""
    if fs <= 0:
        raise ValueError(f"sampling rate must be > 0, got {fs}")
    x = np.asarray(x, dtype=np.float64)
    baseline = x
    for width_ms in BASELINE_WIDTHS_MS:
        baseline = median_filter(baseline, median_window_samples(width_ms, fs))
    return x - baseline


def _lowpass_taps(cutoff_hz: float, fs: float, n_taps: int = FIR_TAPS) -> np.ndarray:
    # windowed sinc, Hamming, normalized to unit DC gain
    m = (n_taps - 1) // 2
    k = np.arange(n_taps) - m
    h = 2.0 * cutoff_hz / fs * np.sinc(2.0 * cutoff_hz / fs * k)
    h *= np.hamming(n_taps)
    return h / h.sum()


def resample(x: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Resample to fs_out; output length is floor(n * fs_out / fs_in).

    Downsampling low-passes at 0.45*fs_out first (zero-phase via a symmetric
    FIR with replicate edge padding), then linearly interpolates onto the
    grid t_k = k * fs_in / fs_out. Upsampling interpolates directly.
    """
    if fs_in <= 0 or fs_out <= 0:
        raise ValueError(f"sampling rates must be > 0, got {fs_in}, {fs_out}")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    if fs_out == fs_in:
        return x.copy()

    filtered = x
    if fs_out < fs_in:
        taps = _lowpass_taps(FIR_CUTOFF_FACTOR * fs_out, fs_in)
        m = (taps.size - 1) // 2
        padded = np.pad(x, m, mode="edge")
        filtered = np.convolve(padded, taps, mode="valid")

    n_out = int(np.floor(x.size * fs_out / fs_in))
    t = np.arange(n_out) * (fs_in / fs_out)
    return np.interp(t, np.arange(x.size), filtered)


def normalize(x: np.ndarray) -> np.ndarray:
    """Min-max scale to [-1, +1]; a constant signal maps to all zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalize an empty signal")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def clean_channel(x: np.ndarray, fs: float) -> np.ndarray:
    """Full per-channel pipeline: baseline removal, resample to 128 Hz, normalize."""
    y = remove_baseline(x, fs)
    y = resample(y, fs, TARGET_RATE)
    return normalize(y)


def clean_record(record: EcgRecord) -> EcgRecord:
    """Clean every channel and rescale rhythm intervals to the 128 Hz timeline."""
    fs = record.header.sampling_rate
    channels = np.stack([clean_channel(ch, fs) for ch in record.channels])
    n_out = channels.shape[1]

    ratio = TARGET_RATE / fs
    rhythms = []
    for iv in record.rhythms:
        onset = min(int(np.floor(iv.onset * ratio)), n_out)
        end = min(int(np.floor(iv.end * ratio)), n_out)
        if onset < end:
            rhythms.append(RhythmInterval(onset, end, iv.label, iv.aux))

    header = RecordHeader(
        record_name=record.header.record_name,
        n_signals=record.header.n_signals,
        sampling_rate=TARGET_RATE,
        n_samples=n_out,
        signals=list(record.header.signals),
    )
    return EcgRecord(header, channels, rhythms)
