"""The SLIC clustering engine: initialization, distance, label update, map-reduce center update."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .image import (
    UNDEFINED,
    DistanceMap,
    ImageRegion,
    LabelMap,
    NDImage,
    clamp_region,
    padded_box,
    padded_dims,
)
from .parallel import checked_map_phase, decompose, parallel_for, parallel_for_slabs


class PreconditionError(ValueError):
    """Input violates an algorithm precondition (bad grid, undefined labels, ...)."""


@dataclass
class SlicParams:
    """Supergrid size per axis (pixels), spatial weight and termination settings.

    ``max_iterations=None`` resolves to 10 for images of rank <= 2 and 5
    otherwise. ``residual_threshold`` enables early stopping when the center
    displacement drops below it; off by default.
    """

    grid: tuple[int, ...]
    weight_m: float = 10.0
    max_iterations: int | None = None
    enforce_connectivity: bool = True
    residual_threshold: float | None = None

    def __post_init__(self):
        self.grid = tuple(int(s) for s in self.grid)
        if any(s < 1 for s in self.grid):
            raise PreconditionError(f"grid sizes must be >= 1, got {self.grid}")
        if not self.weight_m > 0:
            raise PreconditionError("weight_m must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise PreconditionError("max_iterations must be positive")

    def iterations_for(self, ndim: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 10 if ndim <= 2 else 5

    def validate(self, dims: Sequence[int]) -> None:
        if len(self.grid) != len(dims):
            raise PreconditionError(f"grid rank {len(self.grid)} does not match image rank {len(dims)}")
        for s, d in zip(self.grid, dims):
            if s > d:
                raise PreconditionError(f"grid size {s} exceeds image extent {d}")

    @property
    def min_size(self) -> int:
        """Connectivity threshold: a component must be strictly larger than this."""
        return math.prod(self.grid) // 4


@dataclass
class ClusterTable:
    """k cluster centers stored as rows ``[c intensities | n index coordinates]``."""

    channels: int
    ndim: int
    centers: np.ndarray

    def __post_init__(self):
        self.centers = np.ascontiguousarray(np.asarray(self.centers, dtype=np.float64))
        if self.centers.ndim != 2 or self.centers.shape[1] != self.stride:
            raise ValueError("centers must have shape (k, channels + ndim)")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def stride(self) -> int:
        return self.channels + self.ndim

    @property
    def flat(self) -> np.ndarray:
        return self.centers.ravel()

    @property
    def intensities(self) -> np.ndarray:
        return self.centers[:, : self.channels]

    @property
    def coords(self) -> np.ndarray:
        return self.centers[:, self.channels :]

    def copy(self) -> "ClusterTable":
        return ClusterTable(self.channels, self.ndim, self.centers.copy())

    def __eq__(self, other):
        if not isinstance(other, ClusterTable):
            return NotImplemented
        return (
            self.channels == other.channels
            and self.ndim == other.ndim
            and np.array_equal(self.centers, other.centers)
        )


@dataclass
class ClusterAccumulator:
    sums: np.ndarray
    count: int = 0

    def merge(self, other: "ClusterAccumulator") -> "ClusterAccumulator":
        return ClusterAccumulator(self.sums + other.sums, self.count + other.count)

    def __eq__(self, other):
        if not isinstance(other, ClusterAccumulator):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.sums, other.sums)


def _check_image(img: NDImage, params: SlicParams) -> None:
    params.validate(img.dims)


def init_centers(img: NDImage, params: SlicParams) -> ClusterTable:
    """Regular supergrid sampling: one center per cell, at offset floor(S/2), clamped."""
    _check_image(img, params)
    axes = []
    for d, s in zip(img.dims, params.grid):
        cells = math.ceil(d / s)
        axes.append(np.minimum(np.arange(cells) * s + s // 2, d - 1))
    # first axis varies fastest in cluster id order
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel(order="F") for m in mesh], axis=1).astype(np.int64)
    offsets = np.zeros(len(coords), dtype=np.int64)
    stride = 1
    for i, d in enumerate(img.dims):
        offsets += coords[:, i] * stride
        stride *= d
    values = img.pixels[offsets].astype(np.float64)
    return ClusterTable(img.channels, img.ndim, np.hstack([values, coords.astype(np.float64)]))


def perturb_centers(img: NDImage, table: ClusterTable, workers: int = 1) -> ClusterTable:
    """Move every center to the lowest-gradient pixel of its 3^n neighborhood.

    Ties go to the first minimum in row-major scan order, so on a flat image a
    center shifts to its neighborhood's first pixel.
    """
    src = table.centers.copy()
    src[:, table.channels :] = np.floor(src[:, table.channels :] + 0.5)
    out = src.copy()
    dims = padded_dims(img.dims)
    pix = img.pixels
    chunks = _chunks(table.k, workers)

    def body(i):
        k0, k1 = chunks[i]
        _kernels.perturb_range(pix, dims, img.ndim, src, out, k0, k1)

    parallel_for(len(chunks), workers, body)
    return ClusterTable(table.channels, table.ndim, out)


def _chunks(k: int, workers: int) -> list[tuple[int, int]]:
    count = max(1, min(k, 4 * workers))
    edges = np.linspace(0, k, count + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def squared_distance(center, pixel_val, pixel_coord, params: SlicParams) -> float:
    """``d_c^2 + m^2 * sum_i (d_i / S_i)^2`` without any square root.

    The spatial sum is accumulated from the last axis to the first, the same
    order the compiled label update uses.
    """
    center = np.asarray(center, dtype=np.float64)
    c = len(pixel_val)
    n = len(pixel_coord)
    if center.size != c + n or len(params.grid) != n:
        raise ValueError("inconsistent center / pixel dimensions")
    dc2 = 0.0
    for ch in range(c):
        diff = float(np.float64(pixel_val[ch])) - float(center[ch])
        dc2 += diff * diff
    s = 0.0
    for i in reversed(range(n)):
        q = (float(pixel_coord[i]) - float(center[c + i])) / float(params.grid[i])
        s += q * q
    m = float(params.weight_m)
    return dc2 + (m * m) * s


def cluster_window(center_coords: Sequence[float], grid: Sequence[int], dims: Sequence[int]) -> ImageRegion:
    """Pixels within S_i of the center along every axis, clamped to the image."""
    lo = [math.ceil(c - s) for c, s in zip(center_coords, grid)]
    hi = [math.floor(c + s) + 1 for c, s in zip(center_coords, grid)]
    return clamp_region(ImageRegion(lo, [h - l for l, h in zip(lo, hi)]), dims)


def assign_labels(
    img: NDImage,
    table: ClusterTable,
    params: SlicParams,
    labels: LabelMap,
    dists: DistanceMap,
    region: ImageRegion | None = None,
) -> None:
    """Update ``labels``/``dists`` in place, touching only pixels inside ``region``."""
    if region is None:
        region = ImageRegion((0,) * img.ndim, img.dims)
    region = clamp_region(region, img.dims)
    if region.is_empty():
        return
    lo, hi = padded_box(region)
    grid = np.array(params.grid + (1,) * (4 - img.ndim), dtype=np.float64)
    m2 = float(params.weight_m) * float(params.weight_m)
    _kernels.assign_region(
        img.pixels, padded_dims(img.dims), img.ndim, table.centers, grid, m2,
        labels.labels, dists.values, lo, hi,
    )


def _accumulate_dense(img: NDImage, labels: np.ndarray, k: int, region: ImageRegion):
    sums = np.zeros((k, img.channels + img.ndim), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    region = clamp_region(region, img.dims)
    if region.is_empty():
        return sums, counts
    lo, hi = padded_box(region)
    bad = _kernels.accumulate_box(img.pixels, padded_dims(img.dims), img.ndim, labels, sums, counts, lo, hi)
    if bad >= 0:
        raise PreconditionError(f"pixel {bad} has label {labels[bad]} outside [0, {k})")
    return sums, counts


def accumulate_region(img: NDImage, labels: LabelMap, region: ImageRegion) -> dict[int, ClusterAccumulator]:
    """Map step: per-label sums of ``[intensity | coordinates]`` and counts over ``region``."""
    region = clamp_region(region, img.dims)
    if region.is_empty():
        return {}
    lo, hi = region.index, region.upper
    view = labels.as_array()[tuple(slice(a, b) for a, b in zip(reversed(lo), reversed(hi)))]
    if (view == UNDEFINED).any():
        raise PreconditionError("accumulate_region: region contains UNDEFINED labels")
    k = int(view.max()) + 1
    sums, counts = _accumulate_dense(img, labels.labels, k, region)
    return {int(lab): ClusterAccumulator(sums[lab], int(counts[lab])) for lab in np.flatnonzero(counts)}


def _reduce_dense(table: ClusterTable, partials) -> tuple[ClusterTable, float]:
    sums = np.zeros_like(table.centers)
    counts = np.zeros(table.k, dtype=np.int64)
    for part_sums, part_counts in partials:
        sums = sums + part_sums
        counts = counts + part_counts
    new = table.centers.copy()
    hit = counts > 0
    new[hit] = sums[hit] / counts[hit, None]
    residual = float(np.sqrt(np.sum((new - table.centers) ** 2)))
    return ClusterTable(table.channels, table.ndim, new), residual


def reduce_and_update(
    table: ClusterTable, partials: Sequence[dict[int, ClusterAccumulator]]
) -> tuple[ClusterTable, float]:
    """Reduce step: merge partial maps in the given order and move each center to its mean.

    Clusters that received no pixels keep their previous center. The residual
    is the L2 norm of all center displacements in joint space.
    """
    dense = []
    for part in partials:
        sums = np.zeros_like(table.centers)
        counts = np.zeros(table.k, dtype=np.int64)
        for lab, acc in part.items():
            if not 0 <= lab < table.k:
                raise PreconditionError(f"label {lab} has no cluster center")
            sums[lab] = acc.sums
            counts[lab] = acc.count
        dense.append((sums, counts))
    return _reduce_dense(table, dense)


def run_slic(
    img: NDImage, params: SlicParams, workers: int = 1, check_ownership: bool = False
) -> tuple[LabelMap, ClusterTable, list[float]]:
    """Clustering stages 1-2: init, perturb, then the fixed number of update rounds.

    Output is bitwise identical for every ``workers`` value. Returns labels
    before connectivity enforcement, the final centers and the residual of
    every round. ``check_ownership`` runs the label update under the slab
    write-ownership checker (slow, for debugging).
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _check_image(img, params)
    table = perturb_centers(img, init_centers(img, params), workers)
    labels = LabelMap(img.dims)
    dists = DistanceMap(img.dims)
    decomp = decompose(img.dims, params.grid)
    pix = img.pixels
    dims = padded_dims(img.dims)
    n = img.ndim
    grid = np.array(params.grid + (1,) * (4 - n), dtype=np.float64)
    m2 = float(params.weight_m) * float(params.weight_m)
    boxes = [padded_box(s) for s in decomp.slabs]
    residuals: list[float] = []

    for it in range(params.iterations_for(n)):
        centers = table.centers

        if check_ownership:
            def assign_checked(i, region, arrays):
                lo, hi = boxes[i]
                _kernels.assign_region(pix, dims, n, centers, grid, m2, arrays[0], arrays[1], lo, hi)

            checked_map_phase(decomp, workers, [labels.labels, dists.values], assign_checked)
        else:
            def assign(i, region):
                lo, hi = boxes[i]
                _kernels.assign_region(pix, dims, n, centers, grid, m2, labels.labels, dists.values, lo, hi)

            parallel_for_slabs(decomp, workers, assign)

        if it == 0 and not labels.complete:
            raise AssertionError("pixels left unlabeled after the first update")

        def accumulate(i, region):
            return _accumulate_dense(img, labels.labels, table.k, region)

        partials = parallel_for_slabs(decomp, workers, accumulate)
        table, residual = _reduce_dense(table, partials)
        residuals.append(residual)
        if params.residual_threshold is not None and residual < params.residual_threshold:
            break
    return labels, table, residuals
