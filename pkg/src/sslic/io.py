"""Volume and label file I/O.

Detached-header raw format: a small text header of ``key: value`` lines
(``#`` starts a comment) next to a raw payload file::

    dimension: 3
    sizes: 64 48 10
    channels: 1
    type: float32
    endian: little
    spacing: 0.3 0.3 1.0
    data file: volume.raw

The payload holds ``channels * prod(sizes)`` little-endian elements, first
dimension fastest, channels interleaved per pixel. ``spacing`` is optional.
The data file path is relative to the header's directory. 2D images can also
be read from 8-bit gray or RGB PNG files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import MAX_DIMS, LabelMap, NDImage, pixel_count


class VolumeIOError(Exception):
    pass


class HeaderError(VolumeIOError):
    """Header is malformed or misses a required key."""


class SizeMismatchError(VolumeIOError):
    """Payload byte length disagrees with the header."""


class UnsupportedTypeError(VolumeIOError):
    """Element type, endianness or image mode is not supported."""


DTYPES = {
    "uint8": np.dtype("<u1"),
    "float32": np.dtype("<f4"),
    "uint32": np.dtype("<u4"),
}

_REQUIRED = ("dimension", "sizes", "channels", "type", "endian", "data file")


@dataclass
class VolumeHeader:
    dims: tuple[int, ...]
    channels: int
    type: str
    data_file: str
    endian: str = "little"
    spacing: tuple[float, ...] | None = None
    comments: tuple[str, ...] = ()

    @property
    def payload_bytes(self) -> int:
        return pixel_count(self.dims) * self.channels * DTYPES[self.type].itemsize

    def render(self) -> str:
        lines = [f"# {c}" for c in self.comments]
        lines += [
            f"dimension: {len(self.dims)}",
            "sizes: " + " ".join(str(d) for d in self.dims),
            f"channels: {self.channels}",
            f"type: {self.type}",
            f"endian: {self.endian}",
        ]
        if self.spacing is not None:
            lines.append("spacing: " + " ".join(repr(float(s)) for s in self.spacing))
        lines.append(f"data file: {self.data_file}")
        return "\n".join(lines) + "\n"


def parse_header(text: str) -> VolumeHeader:
    fields: dict[str, str] = {}
    comments = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if ":" not in line:
            raise HeaderError(f"not a key: value line: {raw!r}")
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise HeaderError(f"missing header keys: {', '.join(missing)}")
    try:
        ndim = int(fields["dimension"])
        dims = tuple(int(v) for v in fields["sizes"].split())
        channels = int(fields["channels"])
        spacing = tuple(float(v) for v in fields["spacing"].split()) if "spacing" in fields else None
    except ValueError as exc:
        raise HeaderError(f"bad numeric field: {exc}") from None
    if not 1 <= ndim <= MAX_DIMS or len(dims) != ndim or any(d < 1 for d in dims) or channels < 1:
        raise HeaderError(f"inconsistent dimension/sizes/channels: {ndim}, {dims}, {channels}")
    if spacing is not None and len(spacing) != ndim:
        raise HeaderError("spacing needs one value per dimension")
    if fields["type"] not in DTYPES:
        raise UnsupportedTypeError(f"unsupported element type {fields['type']!r}")
    if fields["endian"] != "little":
        raise UnsupportedTypeError(f"unsupported endianness {fields['endian']!r}")
    return VolumeHeader(dims, channels, fields["type"], fields["data file"], "little", spacing, tuple(comments))


def _data_path(header_path: Path, header: VolumeHeader) -> Path:
    p = Path(header.data_file)
    return p if p.is_absolute() else header_path.parent / p


def read_raw(path) -> tuple[VolumeHeader, np.ndarray]:
    path = Path(path)
    header = parse_header(path.read_text())
    payload = _data_path(path, header).read_bytes()
    if len(payload) != header.payload_bytes:
        raise SizeMismatchError(f"payload has {len(payload)} bytes, header implies {header.payload_bytes}")
    return header, np.frombuffer(payload, dtype=DTYPES[header.type])


def _write_raw(path, header: VolumeHeader, values: np.ndarray) -> None:
    path = Path(path)
    Path(_data_path(path, header)).write_bytes(np.ascontiguousarray(values, dtype=DTYPES[header.type]).tobytes())
    path.write_text(header.render())


def _default_data_file(path: Path) -> str:
    return path.with_suffix(".raw").name if path.suffix != ".raw" else path.name + ".data"


def read_png(path) -> NDImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            raise UnsupportedTypeError(f"PNG mode {im.mode!r} is not 8-bit gray or RGB")
        arr = np.asarray(im)
    return NDImage.from_array(arr, channels=3 if arr.ndim == 3 else 1)


def write_png(img: NDImage, path) -> None:
    from PIL import Image

    if img.ndim != 2 or img.channels not in (1, 3):
        raise UnsupportedTypeError("PNG output needs a 2D gray or RGB image")
    arr = img.as_array()
    if arr.min() < 0 or arr.max() > 255 or not np.array_equal(arr, np.round(arr)):
        raise UnsupportedTypeError("PNG output needs integer values in [0, 255]")
    arr = arr.astype(np.uint8)
    Image.fromarray(arr[..., 0] if img.channels == 1 else arr).save(path, format="PNG")


def read_volume(path) -> NDImage:
    """Read a detached-header volume, or a PNG (by ``.png`` suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        return read_png(path)
    header, values = read_raw(path)
    return NDImage(header.dims, header.channels, values.astype(np.float32), header.spacing)


def write_volume(img: NDImage, path, type: str = "float32") -> None:
    """Write ``img`` as a detached-header volume (or PNG by suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        write_png(img, path)
        return
    if type not in ("float32", "uint8"):
        raise UnsupportedTypeError(f"unsupported volume type {type!r}")
    values = img.data
    if type == "uint8" and (values.min() < 0 or values.max() > 255 or not np.array_equal(values, np.round(values))):
        raise UnsupportedTypeError("values do not fit uint8")
    header = VolumeHeader(img.dims, img.channels, type, _default_data_file(path), spacing=img.spacing)
    _write_raw(path, header, values)


def write_labels(labels: LabelMap, path) -> None:
    """Write a complete label map as uint32; the header comment records the label count."""
    path = Path(path)
    if not labels.complete:
        raise ValueError("label map still holds UNDEFINED pixels")
    top = int(labels.labels.max()) if labels.labels.size else -1
    if top > np.iinfo(np.uint32).max:
        raise UnsupportedTypeError("labels exceed the uint32 range")
    header = VolumeHeader(
        labels.dims, 1, "uint32", _default_data_file(path), comments=(f"labels: {top + 1}",)
    )
    _write_raw(path, header, labels.labels.astype(np.uint32))


def read_labels(path) -> LabelMap:
    header, values = read_raw(path)
    if header.channels != 1:
        raise HeaderError("a label file must have one channel")
    if header.type == "float32":
        raise UnsupportedTypeError("label files must hold integer types")
    return LabelMap(header.dims, values.astype(np.int64))


def header_label_count(path) -> int | None:
    for c in parse_header(Path(path).read_text()).comments:
        key, _, value = c.partition(":")
        if key.strip() == "labels":
            return int(value)
    return None


def is_png(path) -> bool:
    return os.fspath(path).lower().endswith(".png")
