"""Multi-band raster values with a validity mask, plus file I/O.

Layout conventions (shared with the service and the studio): top-left
origin, row-major scan, band-sequential storage. Invalid pixels are
canonicalized to NaN in every band, so the validity mask and the NaN
sentinel never disagree.

Formats:
  * PNG, 8-bit gray / RGB / RGBA (alpha=0 means nodata). Samples are
    scaled to [0, 1] on load and rescaled by 255 on save.
  * BND1, a minimal float32 container: magic "BND1", then width,
    height, bands as little-endian u32, then width*height*bands
    float32 samples, band-sequential, row-major within band.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError
from .labelmap import LabelMap

_BND_MAGIC = b"BND1"
_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# Total-sample ceiling; larger rasters are out of scope.
_MAX_SAMPLES = 2**31


@dataclass
class Raster:
    """Immutable multi-band float32 grid with a per-pixel validity mask."""

    width: int
    height: int
    bands: int
    data: np.ndarray  # float32, shape (bands, height, width)
    mask: np.ndarray  # bool, shape (height, width); True = valid

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.bands <= 0:
            raise ValueError("width, height and bands must all be >= 1")
        if self.width * self.height * self.bands > _MAX_SAMPLES:
            raise ValueError("raster exceeds the 2^31 total-sample limit")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data is self.data:
            data = data.copy()  # own the storage; callers keep theirs mutable
        if data.shape != (self.bands, self.height, self.width):
            raise ValueError(
                f"data shape {data.shape} != (bands, height, width) = "
                f"({self.bands}, {self.height}, {self.width})"
            )
        if self.mask is None:
            mask = np.isfinite(data).all(axis=0)
        else:
            mask = np.ascontiguousarray(self.mask, dtype=bool)
            if mask is self.mask:
                mask = mask.copy()
            if mask.shape != (self.height, self.width):
                raise ValueError(f"mask shape {mask.shape} != (height, width)")
        if not np.isfinite(data[:, mask]).all():
            raise ValueError("valid pixels must hold finite samples")
        # Canonical form: every band of an invalid pixel is NaN.
        if not mask.all():
            data[:, ~mask] = np.nan
        data.flags.writeable = False
        mask.flags.writeable = False
        self.data = data
        self.mask = mask

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.bands, self.height, self.width)

    def band(self, i: int) -> np.ndarray:
        return self.data[i]

    def valid_count(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.data, other.data, equal_nan=True)
        )


@dataclass
class PaletteEntry:
    label: int
    color: tuple[int, int, int]
    name: str
    background: bool = False


@dataclass
class Palette:
    """Ordered label -> (color, name) table for rendering label maps."""

    entries: list[PaletteEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.label for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("palette label ids must be unique")
        if sum(1 for e in self.entries if e.background) > 1:
            raise ValueError("at most one palette entry may be flagged background")

    def color_of(self, label: int) -> tuple[int, int, int]:
        for e in self.entries:
            if e.label == label:
                return e.color
        raise KeyError(label)

    def background_color(self) -> tuple[int, int, int]:
        for e in self.entries:
            if e.background:
                return e.color
        return (0, 0, 0)


def _read_ihdr(path) -> tuple[int, int]:
    """Return (bit_depth, color_type) from the PNG header."""
    with open(path, "rb") as fh:
        head = fh.read(8 + 8 + 13)
    if len(head) < 29 or head[:8] != _PNG_SIGNATURE:
        raise DataError(f"{path}: not a PNG file")
    length, ctype = struct.unpack(">I4s", head[8:16])
    if ctype != b"IHDR" or length != 13:
        raise DataError(f"{path}: malformed PNG header")
    bit_depth, color_type = head[24], head[25]
    return bit_depth, color_type


def load_png(path) -> Raster:
    """Load an 8-bit gray/RGB/RGBA PNG; alpha=0 pixels become nodata."""
    bit_depth, color_type = _read_ihdr(path)
    if bit_depth != 8:
        raise DataError(f"{path}: unsupported PNG bit depth {bit_depth} (only 8-bit)")
    if color_type not in (0, 2, 6):
        raise DataError(
            f"{path}: unsupported PNG color type {color_type} "
            "(only grayscale, RGB, RGBA)"
        )
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except Exception as exc:  # PIL raises a zoo of types for broken files
        raise DataError(f"{path}: unreadable PNG ({exc})") from exc

    if color_type == 0:
        planes = arr[np.newaxis, :, :]
        mask = None
    elif color_type == 2:
        planes = np.moveaxis(arr, 2, 0)
        mask = None
    else:  # RGBA
        planes = np.moveaxis(arr[:, :, :3], 2, 0)
        mask = arr[:, :, 3] != 0
    data = planes.astype(np.float32) / np.float32(255.0)
    h, w = data.shape[1], data.shape[2]
    return Raster(w, h, data.shape[0], data, mask)


def save_png(raster: Raster, path) -> None:
    """Write a 1- or 3-band raster with samples in [0, 1] as an 8-bit PNG.

    Invalid pixels get alpha 0 (RGBA / LA output); fully-valid rasters
    are written without an alpha channel.
    """
    if raster.bands not in (1, 3):
        raise ValueError("save_png requires a 1- or 3-band raster")
    quantized = np.clip(np.nan_to_num(raster.data, nan=0.0), 0.0, 1.0)
    quantized = np.rint(quantized * 255.0).astype(np.uint8)
    planes = np.moveaxis(quantized, 0, 2)
    all_valid = bool(raster.mask.all())
    if raster.bands == 1:
        img = Image.fromarray(planes[:, :, 0], mode="L")
        if not all_valid:
            alpha = (raster.mask * np.uint8(255)).astype(np.uint8)
            img.putalpha(Image.fromarray(alpha, mode="L"))
    else:
        if all_valid:
            img = Image.fromarray(planes, mode="RGB")
        else:
            alpha = (raster.mask * np.uint8(255)).astype(np.uint8)
            rgba = np.dstack([planes, alpha])
            img = Image.fromarray(rgba, mode="RGBA")
    img.save(path, format="PNG")


def load_bnd(path) -> Raster:
    """Load a BND1 container; NaN samples mark invalid pixels."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise DataError(f"{path}: truncated BND1 header")
    if blob[:4] != _BND_MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {_BND_MAGIC!r}")
    width, height, bands = struct.unpack("<III", blob[4:16])
    if width == 0 or height == 0 or bands == 0:
        raise DataError(f"{path}: zero width/height/bands in header")
    if width * height * bands > _MAX_SAMPLES:
        raise DataError(f"{path}: raster exceeds the 2^31 total-sample limit")
    expected = 16 + width * height * bands * 4
    if len(blob) < expected:
        raise DataError(
            f"{path}: truncated payload ({len(blob)} bytes, expected {expected})"
        )
    samples = np.frombuffer(blob[16:expected], dtype="<f4")
    data = samples.reshape(bands, height, width)
    return Raster(int(width), int(height), int(bands), data, None)


def save_bnd(raster: Raster, path) -> None:
    """Write a BND1 container; load_bnd(save_bnd(r)) == r bit-exactly."""
    header = _BND_MAGIC + struct.pack(
        "<III", raster.width, raster.height, raster.bands
    )
    payload = np.ascontiguousarray(raster.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def bnd_bytes(raster: Raster) -> bytes:
    """The exact byte sequence save_bnd would write."""
    return (
        _BND_MAGIC
        + struct.pack("<III", raster.width, raster.height, raster.bands)
        + np.ascontiguousarray(raster.data, dtype="<f4").tobytes()
    )


def render_labels(labels: LabelMap, palette: Palette) -> Raster:
    """Paint a label map through a palette into an RGB raster.

    Sentinel pixels (noise / never clustered) take the background
    entry's color, or black when no entry is flagged background.
    """
    present = labels.present_labels()
    table_ids = {e.label for e in palette.entries}
    missing = [l for l in present if l not in table_ids]
    if missing:
        raise ValueError(f"palette is missing entries for labels {missing}")

    lut_size = max([e.label for e in palette.entries], default=0) + 1
    lut = np.zeros((lut_size + 1, 3), dtype=np.float32)
    lut[-1] = np.asarray(palette.background_color(), dtype=np.float32)
    for e in palette.entries:
        lut[e.label] = np.asarray(e.color, dtype=np.float32)

    idx = labels.labels.copy()
    idx[idx < 0] = lut_size  # sentinel slot
    rgb = lut[idx]  # (h, w, 3) in 0..255
    data = np.moveaxis(rgb, 2, 0) / np.float32(255.0)
    return Raster(labels.width, labels.height, 3, data, None)


def png_bytes(raster: Raster) -> bytes:
    """Deterministic in-memory PNG encoding of a rendered raster."""
    buf = io.BytesIO()
    save_png(raster, buf)
    return buf.getvalue()
