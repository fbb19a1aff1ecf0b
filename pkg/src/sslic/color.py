"""sRGB to CIE-Lab conversion and the gradient used to perturb cluster centers."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .image import NDImage, linear_index, padded_dims

# linear sRGB -> XYZ, D65
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# reference white as the image of RGB (1, 1, 1) so that grays map to a = b = 0
D65_WHITE = SRGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


class LabTriple(NamedTuple):
    L: float
    a: float
    b: float


def _linearize(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)


def srgb_to_lab_array(rgb8) -> np.ndarray:
    """Vectorised conversion of ``(..., 3)`` 8-bit sRGB values to Lab (float64)."""
    rgb = np.asarray(rgb8, dtype=np.float64) / 255.0
    xyz = _linearize(rgb) @ SRGB_TO_XYZ.T
    fx, fy, fz = np.moveaxis(_f(xyz / D65_WHITE), -1, 0)
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def srgb_to_cielab(rgb8: Sequence[float]) -> LabTriple:
    if len(rgb8) != 3:
        raise ValueError("expected an (r, g, b) triple")
    if any(not 0 <= v <= 255 for v in rgb8):
        raise ValueError("sRGB components must lie in [0, 255]")
    L, a, b = srgb_to_lab_array(np.asarray(rgb8, dtype=np.float64))
    return LabTriple(float(L), float(a), float(b))


def convert_image_to_lab(img: NDImage) -> NDImage:
    if img.channels != 3:
        raise ValueError(f"Lab conversion needs 3 channels, got {img.channels}")
    if img.data.size and (img.data.min() < 0 or img.data.max() > 255):
        raise ValueError("sRGB values must lie in [0, 255]")
    lab = srgb_to_lab_array(img.pixels)
    return NDImage(img.dims, 3, lab.ravel(), img.spacing)


def gradient_magnitude_sq(img: NDImage, coord: Sequence[int]) -> float:
    """Squared Frobenius norm of the central-difference Jacobian at ``coord``.

    One-sided differences are used on the image border; axes of extent 1
    contribute nothing. For a single channel this is the squared gradient norm.
    """
    linear_index(coord, img.dims)  # bounds check
    cur = np.zeros(4, dtype=np.int64)
    cur[: img.ndim] = coord
    return float(_kernels.grad_sq(img.pixels, padded_dims(img.dims), img.ndim, cur))
