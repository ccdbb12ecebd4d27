"""Grayscale rasters, sub-image tiling, and dense square-window extraction.

Images are row-major 8-bit arrays. Sub-image boundaries use rounded
proportional splitting, so remainder pixels are distributed over the grid
cells instead of being dropped. Windows are always extracted per region and
never straddle region boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from .errors import DimensionError, InputFormatError

# ITU-R BT.601 luma weights for RGB -> gray conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit image.

    ``pixels`` is a ``(height, width)`` uint8 array; ``n_bits`` is the pixel
    bit depth (always 8 here, kept explicit because the homogeneity measure
    normalizes by ``2**n_bits``). Instances are treated as immutable.
    """

    pixels: np.ndarray
    n_bits: int = 8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise InputFormatError(f"expected a 2-d pixel array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise InputFormatError(f"expected uint8 pixels, got dtype {px.dtype}")
        if self.n_bits != 8:
            raise InputFormatError("only 8-bit images are supported")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class SubImageGrid:
    """Tiling of an image into ``rows x cols`` non-overlapping cells."""

    rows: int = 1
    cols: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DimensionError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    def __str__(self):
        return f"{self.rows}x{self.cols}"

    @classmethod
    def parse(cls, text: str) -> "SubImageGrid":
        """Parse strings like ``"3x3"`` (also accepts ``,`` as separator)."""
        parts = text.lower().replace(",", "x").split("x")
        if len(parts) != 2:
            raise ValueError(f"cannot parse grid {text!r}, expected ROWSxCOLS")
        return cls(int(parts[0]), int(parts[1]))


@dataclass(frozen=True)
class Window:
    """Square pixel block at origin ``(row, col)`` of its parent region."""

    row: int
    col: int
    data: np.ndarray

    @property
    def side(self) -> int:
        return self.data.shape[0]


def to_grayscale(raster: np.ndarray) -> GrayImage:
    """Convert a 1- or 3-channel 8-bit raster to a GrayImage.

    3-channel input is reduced with the fixed luma weights 0.299/0.587/0.114
    and rounded to the nearest integer. 1-channel input is passed through
    unchanged. Anything else raises InputFormatError.
    """
    arr = np.asarray(raster)
    if arr.dtype != np.uint8:
        raise InputFormatError(f"expected 8-bit input, got dtype {arr.dtype}")
    if arr.ndim == 2:
        return GrayImage(arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        return GrayImage(arr[:, :, 0])
    if arr.ndim == 3 and arr.shape[2] == 3:
        luma = arr.astype(np.float64) @ np.asarray(LUMA_WEIGHTS)
        return GrayImage(np.floor(luma + 0.5).astype(np.uint8))
    raise InputFormatError(f"unsupported channel layout for shape {arr.shape}")


def load_image(path) -> GrayImage:
    """Load a PNG, JPEG, or PGM file as a GrayImage.

    Palette images are decoded to RGB before conversion; images with an
    alpha channel or more than 8 bits per sample are rejected.
    """
    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode == "L":
            return GrayImage(np.asarray(im, dtype=np.uint8))
        if im.mode == "RGB":
            return to_grayscale(np.asarray(im, dtype=np.uint8))
        raise InputFormatError(f"unsupported image mode {im.mode!r} in {path}")


def save_image(img: GrayImage, path) -> None:
    """Write a GrayImage to disk; the format follows the file extension."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img.pixels, mode="L").save(path)


def resize_bilinear(img: GrayImage, height: int, width: int) -> GrayImage:
    """Bilinearly resize to ``height x width`` pixels."""
    out = Image.fromarray(img.pixels, mode="L").resize((width, height), Image.BILINEAR)
    return GrayImage(np.asarray(out, dtype=np.uint8))


def _split_bounds(total: int, parts: int) -> np.ndarray:
    """Cell boundaries 0 = b[0] <= ... <= b[parts] = total, rounded to nearest."""
    return np.floor(np.arange(parts + 1) * total / parts + 0.5).astype(int)


def split_subimages(img: GrayImage, grid: SubImageGrid) -> list[GrayImage]:
    """Tile ``img`` into ``grid.rows x grid.cols`` cells, returned row-major.

    Cell (i, j) spans rows [round(i*H/rows), round((i+1)*H/rows)) and the
    analogous columns; the cells reassemble the image exactly.
    """
    if grid.rows > img.height or grid.cols > img.width:
        raise DimensionError(
            f"grid {grid} does not fit a {img.height}x{img.width} image"
        )
    rb = _split_bounds(img.height, grid.rows)
    cb = _split_bounds(img.width, grid.cols)
    return [
        GrayImage(img.pixels[rb[i]:rb[i + 1], cb[j]:cb[j + 1]])
        for i in range(grid.rows)
        for j in range(grid.cols)
    ]


def cell_shapes(height: int, width: int, grid: SubImageGrid) -> list[tuple[int, int]]:
    """(height, width) of every grid cell, row-major, without materializing them."""
    rb = _split_bounds(height, grid.rows)
    cb = _split_bounds(width, grid.cols)
    return [
        (int(rb[i + 1] - rb[i]), int(cb[j + 1] - cb[j]))
        for i in range(grid.rows)
        for j in range(grid.cols)
    ]


def window_count(height: int, width: int, side: int, stride: int = 1) -> int:
    """Closed-form number of stride-aligned ``side x side`` windows."""
    if side > height or side > width:
        return 0
    return ((height - side) // stride + 1) * ((width - side) // stride + 1)


def extract_windows(img: GrayImage, side: int, stride: int = 1) -> list[Window]:
    """Dense square windows at origins (r, c) with r, c multiples of stride.

    Windows are returned in row-major origin order; the count matches
    :func:`window_count`. ``side`` larger than either image dimension raises
    DimensionError.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if side > img.height or side > img.width:
        raise DimensionError(
            f"window side {side} exceeds image dimensions {img.height}x{img.width}"
        )
    return [
        Window(r, c, img.pixels[r:r + side, c:c + side])
        for r in range(0, img.height - side + 1, stride)
        for c in range(0, img.width - side + 1, stride)
    ]


def window_stack(pixels: np.ndarray, side: int, stride: int = 1):
    """Vectorized window extraction for the dense descriptor path.

    Returns ``(mat, n_rows, n_cols)`` where ``mat`` is a float64 array of
    shape ``(n_rows * n_cols, side * side)`` holding flattened windows in
    row-major origin order, identical to :func:`extract_windows` output.
    """
    view = sliding_window_view(pixels, (side, side))[::stride, ::stride]
    n_rows, n_cols = view.shape[:2]
    mat = view.reshape(n_rows * n_cols, side * side).astype(np.float64)
    return mat, n_rows, n_cols
