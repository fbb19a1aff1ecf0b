"""Scalable n-dimensional, multi-channel SLIC superpixels."""

from .color import convert_image_to_lab, gradient_magnitude_sq, srgb_to_cielab
from .connectivity import enforce_connectivity
from .core import ClusterTable, PreconditionError, SlicParams, run_slic
from .image import UNDEFINED, DistanceMap, ImageRegion, LabelMap, NDImage
from .pipeline import Segmentation, segment

__all__ = [
    "UNDEFINED",
    "ClusterTable",
    "DistanceMap",
    "ImageRegion",
    "LabelMap",
    "NDImage",
    "PreconditionError",
    "Segmentation",
    "SlicParams",
    "convert_image_to_lab",
    "enforce_connectivity",
    "gradient_magnitude_sq",
    "run_slic",
    "segment",
    "srgb_to_cielab",
]
