"""Confusion matrix, per-class accuracy/sensitivity/specificity, ROC/AUC, reports."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wfdb_io import CLASS_NAMES, N_CLASSES


class ConfusionMatrix:
    """K x K counts, entry [i][j] = true class i predicted as class j."""

    def __init__(self, counts: np.ndarray):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        self.counts = counts

    @classmethod
    def from_labels(cls, truth, predicted, k: int = N_CLASSES) -> "ConfusionMatrix":
        truth = np.asarray(truth, dtype=np.int64)
        predicted = np.asarray(predicted, dtype=np.int64)
        if truth.shape != predicted.shape:
            raise ValueError("truth and prediction lengths differ")
        for name, arr in (("true", truth), ("predicted", predicted)):
            if arr.size and (arr.min() < 0 or arr.max() >= k):
                raise ValueError(f"{name} label out of range [0, {k})")
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (truth, predicted), 1)
        return cls(counts)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, c: int) -> int:
        return int(self.counts[c, c])

    def fn(self, c: int) -> int:
        return int(self.counts[c].sum() - self.counts[c, c])

    def fp(self, c: int) -> int:
        return int(self.counts[:, c].sum() - self.counts[c, c])

    def tn(self, c: int) -> int:
        return self.total - self.tp(c) - self.fn(c) - self.fp(c)


def _rate(numerator: int, denominator: int) -> float | None:
    # None marks an undefined rate (zero denominator); callers must not fold it to 0
    if denominator == 0:
        return None
    return 100.0 * numerator / denominator


def accuracy(cm: ConfusionMatrix) -> float | None:
    """Overall accuracy in percent: trace over total."""
    return _rate(int(np.trace(cm.counts)), cm.total)


def class_accuracy(cm: ConfusionMatrix, c: int) -> float | None:
    return _rate(cm.tp(c) + cm.tn(c), cm.total)


def sensitivity(cm: ConfusionMatrix, c: int) -> float | None:
    return _rate(cm.tp(c), cm.tp(c) + cm.fn(c))


def specificity(cm: ConfusionMatrix, c: int) -> float | None:
    return _rate(cm.tn(c), cm.tn(c) + cm.fp(c))


def roc_curve(scores, truth) -> tuple[np.ndarray, np.ndarray]:
    """ROC points swept over the distinct scores, tied samples processed together.

    Returns (fpr, tpr) starting at (0, 0) and ending at (1, 1), sorted by FPR.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    if scores.shape != truth.shape:
        raise ValueError("scores and truth lengths differ")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate ROC: need at least one positive and one negative")

    order = np.argsort(-scores, kind="stable")
    sorted_truth = truth[order]
    sorted_scores = scores[order]
    group_ends = np.flatnonzero(np.diff(sorted_scores))  # last index of each tie group
    idx = np.concatenate([group_ends, [scores.size - 1]])
    tp = np.cumsum(sorted_truth)[idx]
    fp = np.cumsum(~sorted_truth)[idx]
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    return fpr, tpr


def auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Trapezoidal area under the ROC points."""
    return float(np.trapezoid(tpr, fpr))


@dataclass
class ClassMetrics:
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    auc: float | None


@dataclass
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    n_iterations: int


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    per_class: list[ClassMetrics]
    overall_accuracy: float | None
    macro: ClassMetrics
    roc_points: list[tuple[np.ndarray, np.ndarray] | None]
    latency: LatencyStats | None = None
    model_bytes: int | None = None


def _macro(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def evaluate(probabilities: np.ndarray, truth: np.ndarray,
             latency: LatencyStats | None = None,
             model_bytes: int | None = None) -> EvalReport:
    """Full report from class probabilities [N, K] and true labels [N]."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    predicted = probabilities.argmax(axis=1)
    cm = ConfusionMatrix.from_labels(truth, predicted, k=probabilities.shape[1])

    per_class: list[ClassMetrics] = []
    roc_points: list[tuple[np.ndarray, np.ndarray] | None] = []
    for c in range(cm.k):
        try:
            fpr, tpr = roc_curve(probabilities[:, c], truth == c)
            class_auc = auc(fpr, tpr)
            roc_points.append((fpr, tpr))
        except ValueError:
            class_auc = None
            roc_points.append(None)
        per_class.append(ClassMetrics(class_accuracy(cm, c), sensitivity(cm, c),
                                      specificity(cm, c), class_auc))

    macro = ClassMetrics(
        _macro([m.accuracy for m in per_class]),
        _macro([m.sensitivity for m in per_class]),
        _macro([m.specificity for m in per_class]),
        _macro([m.auc for m in per_class]),
    )
    return EvalReport(cm, per_class, accuracy(cm), macro, roc_points,
                      latency=latency, model_bytes=model_bytes)


def measure_latency(model, n_iterations: int = 100, warmup: int = 10,
                    seed: int = 0) -> LatencyStats:
    """Wall time of single-segment forward passes after a warmup."""
    if n_iterations < 1:
        raise ValueError(f"need at least 1 iteration, got {n_iterations}")
    rng = np.random.default_rng(seed)
    segment = rng.uniform(-1, 1, size=(1, model.input_length)).astype(np.float32)
    for _ in range(warmup):
        model.predict(segment)
    times = np.empty(n_iterations)
    for i in range(n_iterations):
        start = time.perf_counter()
        model.predict(segment)
        times[i] = time.perf_counter() - start
    times *= 1000.0
    return LatencyStats(float(times.mean()), float(np.percentile(times, 50)),
                        float(np.percentile(times, 95)), n_iterations)


def _fmt(value: float | None, places: int = 4) -> str:
    return "NA" if value is None else f"{value:.{places}f}"


def emit_report(report: EvalReport, directory: str | Path) -> list[Path]:
    """Write confusion.csv, metrics.csv, roc_<class>.csv, and SVG figures."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = CLASS_NAMES if report.confusion.k == N_CLASSES else [
        f"class{i}" for i in range(report.confusion.k)]
    written = []

    path = out / "confusion.csv"
    lines = ["true/predicted," + ",".join(names)]
    for i, row in enumerate(report.confusion.counts):
        lines.append(names[i] + "," + ",".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    path = out / "metrics.csv"
    lines = ["class,accuracy,sensitivity,specificity,auc"]
    for name, m in zip(names, report.per_class):
        lines.append(f"{name},{_fmt(m.accuracy)},{_fmt(m.sensitivity)},"
                     f"{_fmt(m.specificity)},{_fmt(m.auc)}")
    m = report.macro
    lines.append(f"macro,{_fmt(m.accuracy)},{_fmt(m.sensitivity)},"
                 f"{_fmt(m.specificity)},{_fmt(m.auc)}")
    lines.append(f"overall,{_fmt(report.overall_accuracy)},NA,NA,NA")
    if report.latency is not None:
        lines.append(f"# latency_ms mean={report.latency.mean_ms:.4f} "
                     f"p50={report.latency.p50_ms:.4f} p95={report.latency.p95_ms:.4f}")
    if report.model_bytes is not None:
        lines.append(f"# model_bytes {report.model_bytes}")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    for name, points in zip(names, report.roc_points):
        if points is None:
            continue
        fpr, tpr = points
        path = out / f"roc_{name}.csv"
        lines = ["fpr,tpr"] + [f"{f:.4f},{t:.4f}" for f, t in zip(fpr, tpr)]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    path = out / "confusion.svg"
    path.write_text(_confusion_svg(report.confusion, names))
    written.append(path)
    path = out / "roc.svg"
    path.write_text(_roc_svg(report.roc_points, names))
    written.append(path)
    return written


def _confusion_svg(cm: ConfusionMatrix, names: list[str]) -> str:
    k = cm.k
    cell, margin = 44, 70
    size = margin + k * cell + 10
    peak = max(1, int(cm.counts.max()))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'font-family="monospace" font-size="11">']
    for i in range(k):
        parts.append(f'<text x="{margin - 6}" y="{margin + i * cell + cell / 2 + 4}" '
                     f'text-anchor="end">{names[i]}</text>')
        parts.append(f'<text x="{margin + i * cell + cell / 2}" y="{margin - 8}" '
                     f'text-anchor="middle">{names[i]}</text>')
        for j in range(k):
            v = int(cm.counts[i, j])
            shade = 255 - int(205 * v / peak)
            x, y = margin + j * cell, margin + i * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="rgb({shade},{shade},255)" stroke="gray"/>')
            color = "black" if shade > 120 else "white"
            parts.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" '
                         f'text-anchor="middle" fill="{color}">{v}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _roc_svg(roc_points, names: list[str]) -> str:
    w, h, margin = 460, 460, 50
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 130}" height="{h}" '
             f'font-family="monospace" font-size="11">']
    x0, y0 = margin, h - margin
    x1, y1 = w - margin, margin
    parts.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                 f'fill="none" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" '
                 f'stroke="lightgray" stroke-dasharray="4"/>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{h - 12}" text-anchor="middle">'
                 f'false positive rate</text>')
    parts.append(f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {(y0 + y1) / 2})">true positive rate</text>')
    row = 0
    for idx, points in enumerate(roc_points):
        if points is None:
            continue
        fpr, tpr = points
        color = palette[idx % len(palette)]
        coords = " ".join(f"{x0 + f * (x1 - x0):.1f},{y0 - t * (y0 - y1):.1f}"
                          for f, t in zip(fpr, tpr))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        ly = y1 + 14 + row * 16
        parts.append(f'<line x1="{w + 8}" y1="{ly - 4}" x2="{w + 28}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{w + 34}" y="{ly}">{names[idx]}</text>')
        row += 1
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
