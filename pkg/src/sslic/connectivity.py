"""Connectivity enforcement: make every final label a single face-connected region.

Three steps run in order:

1. ``finalize_cluster_components`` - for each cluster, flood the component of
   its label at (or near) the center; components larger than ``min_size`` are
   marked final. Runs concurrently over clusters: the components of two
   clusters carry different labels and are therefore disjoint.
2. ``sweep_relabel`` - single-threaded raster scan over the non-final
   components. Large ones get a fresh label, small ones take the label of an
   already final face neighbour that precedes them in raster order.
3. Small components with no such neighbour (only possible when the scan
   starts inside one) are merged into an adjacent final label once the scan
   is done.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import ClusterTable, SlicParams, _chunks
from .image import LabelMap, linear_index, padded_dims
from .parallel import parallel_for


class SeedError(ValueError):
    pass


def new_markers(labels: LabelMap) -> np.ndarray:
    """All-false marker map (one flag per pixel, 1 = label is final)."""
    return np.zeros(labels.labels.size, dtype=np.uint8)


def flood_fill(labels: LabelMap, seed, label: int) -> np.ndarray:
    """Flat offsets of the face-connected component of ``label`` containing ``seed``, ascending."""
    off = linear_index(seed, labels.dims)
    if labels.labels[off] != label:
        raise SeedError(f"seed {tuple(seed)} holds label {labels.labels[off]}, not {label}")
    npix = labels.labels.size
    visited = np.zeros(npix, dtype=np.int64)
    buf = np.empty(npix, dtype=np.int64)
    markers = np.zeros(npix, dtype=np.uint8)
    cnt = _kernels.flood(
        labels.labels, padded_dims(labels.dims), len(labels.dims), off, label, markers, False, visited, 1, buf
    )
    return np.sort(buf[:cnt])


def finalize_cluster_components(
    labels: LabelMap, table: ClusterTable, params: SlicParams, markers: np.ndarray, workers: int = 1
) -> np.ndarray:
    dims = padded_dims(labels.dims)
    grid = np.array(params.grid + (1,) * (4 - len(params.grid)), dtype=np.float64)
    visited = np.zeros(labels.labels.size, dtype=np.int64)
    chunks = _chunks(table.k, workers)

    def body(i):
        k0, k1 = chunks[i]
        _kernels.finalize_range(
            labels.labels, dims, len(labels.dims), table.centers, table.channels, grid,
            params.min_size, k0, k1, markers, visited,
        )

    if table.k:
        parallel_for(len(chunks), workers, body)
    return markers


def sweep_relabel(labels: LabelMap, markers: np.ndarray, min_size: int, k_start: int) -> int:
    """Relabel all non-final components in place; returns the next unused label."""
    return int(
        _kernels.sweep(labels.labels, padded_dims(labels.dims), len(labels.dims), markers, int(min_size), int(k_start))
    )


def enforce_connectivity(
    labels: LabelMap, table: ClusterTable, params: SlicParams, workers: int = 1
) -> LabelMap:
    if not labels.complete:
        raise ValueError("connectivity enforcement needs a complete label map")
    out = labels.copy()
    markers = finalize_cluster_components(out, table, params, new_markers(out), workers)
    sweep_relabel(out, markers, params.min_size, table.k)
    return out


def label_count(labels: LabelMap) -> int:
    return int(np.unique(labels.labels).size)
