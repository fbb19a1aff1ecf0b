"""N-dimensional multi-channel image containers and region arithmetic.

Layout convention (frozen, the I/O format depends on it): pixels are stored
row-major with the *first* dimension varying fastest, and channels are
interleaved per pixel. A 2D image with ``dims=(W, H)`` therefore maps onto a
numpy array of shape ``(H, W, c)`` in C order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

MAX_DIMS = 4

#: sentinel for a pixel that has not been assigned a cluster yet
UNDEFINED = np.iinfo(np.int64).max


def _as_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not 1 <= len(dims) <= MAX_DIMS:
        raise ValueError(f"image dimension must be in [1, {MAX_DIMS}], got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValueError(f"image extents must be positive, got {dims}")
    return dims


def pixel_count(dims: Sequence[int]) -> int:
    return int(np.prod(dims, dtype=np.int64))


@dataclass(eq=False)
class NDImage:
    """A c-channel scalar field over an n-dimensional rectilinear grid.

    ``data`` is the flat channel-interleaved payload (float32 storage).
    ``spacing`` is carried through I/O and ignored by the algorithm.
    """

    dims: tuple[int, ...]
    channels: int
    data: np.ndarray
    spacing: tuple[float, ...] | None = None

    def __post_init__(self):
        self.dims = _as_dims(self.dims)
        self.channels = int(self.channels)
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32).ravel())
        if data.size != self.channels * pixel_count(self.dims):
            raise ValueError(
                f"data length {data.size} != channels x pixels "
                f"({self.channels} x {pixel_count(self.dims)})"
            )
        if not np.isfinite(data).all():
            raise ValueError("image values must be finite")
        self.data = data
        if self.spacing is not None:
            self.spacing = tuple(float(s) for s in self.spacing)
            if len(self.spacing) != len(self.dims):
                raise ValueError("spacing must have one entry per dimension")

    @classmethod
    def from_array(cls, arr, channels: int | None = None, spacing=None) -> "NDImage":
        """Wrap a numpy array indexed ``[..., y, x]`` or ``[..., y, x, c]``.

        With ``channels=None`` a trailing axis of length 3 on an array of
        rank >= 3 is taken as the channel axis, anything else is scalar.
        """
        arr = np.asarray(arr)
        if channels is None:
            channels = arr.shape[-1] if (arr.ndim >= 3 and arr.shape[-1] == 3) else 1
        spatial = arr.shape[:-1] if channels > 1 else arr.shape
        return cls(tuple(reversed(spatial)), channels, arr.ravel(), spacing)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def npix(self) -> int:
        return pixel_count(self.dims)

    @property
    def pixels(self) -> np.ndarray:
        """View of the payload as ``(npix, channels)``."""
        return self.data.reshape(self.npix, self.channels)

    def as_array(self) -> np.ndarray:
        """View indexed ``[..., y, x, c]`` (reversed dims plus channel axis)."""
        return self.data.reshape(tuple(reversed(self.dims)) + (self.channels,))

    def value(self, coord: Sequence[int]) -> np.ndarray:
        return self.pixels[linear_index(coord, self.dims)]

    def copy(self) -> "NDImage":
        return NDImage(self.dims, self.channels, self.data.copy(), self.spacing)

    def __eq__(self, other):
        if not isinstance(other, NDImage):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.channels == other.channels
            and np.array_equal(self.data, other.data)
        )


@dataclass(eq=False)
class LabelMap:
    dims: tuple[int, ...]
    labels: np.ndarray = None

    def __post_init__(self):
        self.dims = _as_dims(self.dims)
        if self.labels is None:
            self.labels = np.full(pixel_count(self.dims), UNDEFINED, dtype=np.int64)
        else:
            self.labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64).ravel())
        if self.labels.size != pixel_count(self.dims):
            raise ValueError("label count does not match dims")
        if (self.labels < 0).any():
            raise ValueError("labels must be non-negative")

    @property
    def complete(self) -> bool:
        return not (self.labels == UNDEFINED).any()

    def as_array(self) -> np.ndarray:
        return self.labels.reshape(tuple(reversed(self.dims)))

    def copy(self) -> "LabelMap":
        return LabelMap(self.dims, self.labels.copy())

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.labels, other.labels)


@dataclass(eq=False)
class DistanceMap:
    """Best squared distance per pixel; +inf exactly where the label is UNDEFINED."""

    dims: tuple[int, ...]
    values: np.ndarray = None

    def __post_init__(self):
        self.dims = _as_dims(self.dims)
        if self.values is None:
            self.values = np.full(pixel_count(self.dims), np.inf, dtype=np.float64)
        else:
            self.values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if self.values.size != pixel_count(self.dims):
            raise ValueError("distance count does not match dims")


@dataclass(frozen=True)
class ImageRegion:
    index: tuple[int, ...]
    size: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))
        object.__setattr__(self, "size", tuple(int(s) for s in self.size))
        if len(self.index) != len(self.size):
            raise ValueError("index and size must have the same length")
        if any(s < 0 for s in self.size):
            raise ValueError("region size must be non-negative")

    @property
    def npix(self) -> int:
        return pixel_count(self.size) if self.size else 0

    @property
    def upper(self) -> tuple[int, ...]:
        return tuple(i + s for i, s in zip(self.index, self.size))

    def is_empty(self) -> bool:
        return any(s == 0 for s in self.size)


def linear_index(coord: Sequence[int], dims: Sequence[int]) -> int:
    """Flat offset of ``coord``; the first dimension varies fastest."""
    if len(coord) != len(dims):
        raise ValueError("coordinate rank does not match dims")
    offset = 0
    stride = 1
    for c, d in zip(coord, dims):
        c = int(c)
        if not 0 <= c < d:
            raise IndexError(f"coordinate {tuple(coord)} out of bounds for {tuple(dims)}")
        offset += c * stride
        stride *= int(d)
    return offset


def coordinate(offset: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    offset = int(offset)
    if not 0 <= offset < pixel_count(dims):
        raise IndexError(f"offset {offset} out of bounds for {tuple(dims)}")
    out = []
    for d in dims:
        offset, r = divmod(offset, int(d))
        out.append(r)
    return tuple(out)


def strides(dims: Sequence[int]) -> tuple[int, ...]:
    out, s = [], 1
    for d in dims:
        out.append(s)
        s *= int(d)
    return tuple(out)


def padded_dims(dims: Sequence[int]) -> np.ndarray:
    """``dims`` extended with trailing 1s to :data:`MAX_DIMS` axes (kernel calling convention)."""
    out = np.ones(MAX_DIMS, dtype=np.int64)
    out[: len(dims)] = dims
    return out


def padded_box(region: ImageRegion) -> tuple[np.ndarray, np.ndarray]:
    lo = np.zeros(MAX_DIMS, dtype=np.int64)
    hi = np.ones(MAX_DIMS, dtype=np.int64)
    lo[: len(region.index)] = region.index
    hi[: len(region.index)] = region.upper
    return lo, hi


def clamp_region(region: ImageRegion, dims: Sequence[int]) -> ImageRegion:
    """Intersection of ``region`` with ``[0, dims)``; disjoint gives zero size."""
    if len(region.index) != len(dims):
        raise ValueError("region rank does not match dims")
    lo = [max(i, 0) for i in region.index]
    hi = [min(i + s, int(d)) for i, s, d in zip(region.index, region.size, dims)]
    if any(h <= l for l, h in zip(lo, hi)):
        start = tuple(min(max(i, 0), int(d)) for i, d in zip(region.index, dims))
        return ImageRegion(start, (0,) * len(dims))
    return ImageRegion(tuple(lo), tuple(h - l for l, h in zip(lo, hi)))


def region_pixels(region: ImageRegion) -> Iterator[tuple[int, ...]]:
    """Coordinates of ``region`` in row-major order (first axis fastest)."""
    if region.is_empty() or not region.size:
        return
    n = len(region.index)
    cur = list(region.index)
    upper = region.upper
    while True:
        yield tuple(cur)
        axis = 0
        while axis < n:
            cur[axis] += 1
            if cur[axis] < upper[axis]:
                break
            cur[axis] = region.index[axis]
            axis += 1
        if axis == n:
            return
