from __future__ import annotations

import numpy as np

from . import _kernels
from .image import LabelMap, NDImage, padded_dims


def boundary_mask(labels: LabelMap) -> np.ndarray:
    """1 where a pixel has a face neighbour with a different label."""
    return _kernels.contour_mask(labels.labels, padded_dims(labels.dims), len(labels.dims)).astype(bool)


def mask_label_contour(img: NDImage, labels: LabelMap) -> NDImage:
    """Black out (all channels) every label-boundary pixel of ``img``."""
    if img.dims != labels.dims:
        raise ValueError(f"image dims {img.dims} do not match label dims {labels.dims}")
    out = img.pixels.copy()
    out[boundary_mask(labels)] = 0
    return NDImage(img.dims, img.channels, out.ravel(), img.spacing)
