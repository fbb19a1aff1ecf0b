"""Strong-scaling measurement: timings over worker counts, speedup, efficiency, Amdahl fit."""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import SlicParams
from .image import NDImage
from .pipeline import segment

CSV_COLUMNS = ("p", "time_s", "speedup", "efficiency", "connectivity")


def relative_speedup(t1: float, tp: float) -> float:
    if t1 <= 0 or tp <= 0:
        raise ValueError("timings must be positive")
    return t1 / tp


def relative_efficiency(speedup: float, p: int) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return speedup / p


def amdahl_bound(alpha: float, p: int) -> float:
    """Upper bound on relative speedup for serial fraction ``alpha``."""
    _check_amdahl(alpha, p)
    return 1.0 / (alpha + (1.0 - alpha) / p)


def amdahl_efficiency_bound(alpha: float, p: int) -> float:
    _check_amdahl(alpha, p)
    return 1.0 / (1.0 + alpha * (p - 1))


def _check_amdahl(alpha, p):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if p < 1:
        raise ValueError("p must be >= 1")


@dataclass(frozen=True)
class TimingRecord:
    workers: int
    time_seconds: float
    with_connectivity: bool = False
    repetitions: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.time_seconds > 0:
            raise ValueError("time must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def fit_alpha(records: Iterable[TimingRecord]) -> float:
    """Least-squares serial fraction of ``T(p) = T(1) * (alpha + (1 - alpha) / p)``.

    ``T(1)`` is taken as measured, which leaves a model linear in alpha.
    The estimate is clamped to [0, 1].
    """
    records = list(records)
    by_p = {r.workers: r.time_seconds for r in records}
    if len(by_p) != len(records):
        raise ValueError("duplicate worker counts")
    if 1 not in by_p or len(by_p) < 2:
        raise ValueError("need at least two distinct worker counts including p=1")
    t1 = by_p[1]
    p = np.array([q for q in by_p if q != 1], dtype=np.float64)
    t = np.array([by_p[q] for q in by_p if q != 1], dtype=np.float64)
    a = t1 * (1.0 - 1.0 / p)
    b = t - t1 / p
    alpha = float(np.dot(a, b) / np.dot(a, a))
    return min(1.0, max(0.0, alpha))


@dataclass
class ScalingReport:
    records: list[TimingRecord] = field(default_factory=list)

    def series(self, with_connectivity: bool) -> list[TimingRecord]:
        return sorted((r for r in self.records if r.with_connectivity == with_connectivity), key=lambda r: r.workers)

    @property
    def modes(self) -> list[bool]:
        return sorted({r.with_connectivity for r in self.records})

    def baseline(self, with_connectivity: bool) -> float:
        for r in self.records:
            if r.with_connectivity == with_connectivity and r.workers == 1:
                return r.time_seconds
        raise ValueError("report has no p=1 record for this series")

    def speedup(self, record: TimingRecord) -> float:
        return relative_speedup(self.baseline(record.with_connectivity), record.time_seconds)

    def efficiency(self, record: TimingRecord) -> float:
        return relative_efficiency(self.speedup(record), record.workers)

    def speedups(self, with_connectivity: bool = False) -> dict[int, float]:
        return {r.workers: self.speedup(r) for r in self.series(with_connectivity)}

    def efficiencies(self, with_connectivity: bool = False) -> dict[int, float]:
        return {r.workers: self.efficiency(r) for r in self.series(with_connectivity)}

    def alpha(self, with_connectivity: bool = False) -> float | None:
        series = self.series(with_connectivity)
        if len(series) < 2:
            return None
        return fit_alpha(series)

    def rows(self):
        for mode in self.modes:
            for r in self.series(mode):
                yield r.workers, r.time_seconds, self.speedup(r), self.efficiency(r), mode

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p, t, s, e, conn in self.rows():
            w.writerow([p, f"{t:.6f}", f"{s:.6f}", f"{e:.6f}", int(conn)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScalingReport":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
        records = [
            TimingRecord(int(row["p"]), float(row["time_s"]), bool(int(row["connectivity"])))
            for row in reader
        ]
        return cls(records)

    def to_markdown(self) -> str:
        lines = []
        for mode in self.modes:
            title = "With Connectivity" if mode else "Without Connectivity"
            lines += [
                f"### {title}",
                "",
                "| Number of Threads | Time (sec) | Efficiency | Speedup |",
                "|---:|---:|---:|---:|",
            ]
            for r in self.series(mode):
                lines.append(f"| {r.workers} | {r.time_seconds:.6f} | {self.efficiency(r):.3f} | {self.speedup(r):.3f} |")
            alpha = self.alpha(mode)
            lines.append("")
            lines.append(f"Fitted serial fraction (Amdahl): alpha = {alpha:.4f}" if alpha is not None
                         else "Fitted serial fraction (Amdahl): n/a (single worker count)")
            lines.append("")
        return "\n".join(lines)

    def __eq__(self, other):
        if not isinstance(other, ScalingReport):
            return NotImplemented
        key = lambda r: (r.with_connectivity, r.workers)
        return [dataclasses.astuple(r)[:3] for r in sorted(self.records, key=key)] == [
            dataclasses.astuple(r)[:3] for r in sorted(other.records, key=key)
        ]


def time_segmentation(img: NDImage, params: SlicParams, workers: int, repetitions: int, connectivity: bool) -> float:
    """Minimum wall time over ``repetitions`` runs, rounded to microseconds."""
    best = float("inf")
    for _ in range(repetitions):
        start = time.perf_counter()
        run_params = dataclasses.replace(params, enforce_connectivity=connectivity)
        segment(img, run_params, workers)
        best = min(best, time.perf_counter() - start)
    return max(round(best, 6), 1e-6)


def run_scaling_study(
    img: NDImage,
    params: SlicParams,
    worker_list: Sequence[int],
    repetitions: int = 5,
    measure_connectivity: bool = False,
    warmup: bool = True,
) -> ScalingReport:
    """Time the pipeline for every worker count.

    With ``measure_connectivity`` both series (with and without the
    connectivity step) are recorded, otherwise a single series following
    ``params.enforce_connectivity``.
    """
    worker_list = list(dict.fromkeys(int(p) for p in worker_list))
    if 1 not in worker_list:
        raise ValueError("worker list must contain 1")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    modes = [False, True] if measure_connectivity else [params.enforce_connectivity]
    if warmup:
        segment(img, dataclasses.replace(params, enforce_connectivity=True), 1)
    records = []
    for mode in modes:
        for p in worker_list:
            t = time_segmentation(img, params, p, repetitions, mode)
            records.append(TimingRecord(p, t, mode, repetitions))
    return ScalingReport(records)
