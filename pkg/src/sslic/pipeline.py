from __future__ import annotations

from dataclasses import dataclass, field

from .connectivity import enforce_connectivity
from .core import ClusterTable, SlicParams, run_slic
from .image import LabelMap, NDImage


@dataclass
class Segmentation:
    labels: LabelMap
    table: ClusterTable
    residuals: list[float] = field(default_factory=list)
    raw_labels: LabelMap | None = None


def segment(img: NDImage, params: SlicParams, workers: int = 1) -> Segmentation:
    """Full pipeline: clustering followed by connectivity enforcement when enabled."""
    labels, table, residuals = run_slic(img, params, workers)
    if not params.enforce_connectivity:
        return Segmentation(labels, table, residuals, labels)
    return Segmentation(enforce_connectivity(labels, table, params, workers), table, residuals, labels)
