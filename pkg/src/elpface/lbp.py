"""Uniform rotation-invariant local binary patterns on circular neighborhoods.

Sample ``k`` of a ``(points, radius)`` neighborhood sits at angle
``2*pi*k/points`` with offset ``(-radius*sin, +radius*cos)`` in (row, col)
terms, i.e. sample 0 is to the right of the center and the sequence walks
counter-clockwise on screen. Off-center samples are read with bilinear
interpolation; coordinates within 1e-9 of a pixel center read that pixel
directly. A sample greater than or equal to the center contributes a 1 bit.

Patterns with at most two circular 0/1 transitions ("uniform") are labeled
by their count of 1 bits; every other pattern shares the single label
``points + 1``, giving ``points + 2`` labels total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elp import Descriptor
from .errors import BoundaryError, DimensionError
from .imaging import GrayImage, SubImageGrid, split_subimages

_SNAP = 1e-9


@dataclass(frozen=True)
class LbpParams:
    """Circular neighborhood geometry: ``points`` samples at ``radius``."""

    points: int = 8
    radius: int = 1

    def __post_init__(self):
        if self.points < 4:
            raise ValueError(f"points must be >= 4, got {self.points}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    @property
    def n_labels(self) -> int:
        return self.points + 2

    def to_dict(self) -> dict:
        return {"points": self.points, "radius": self.radius}

    @classmethod
    def from_dict(cls, d: dict) -> "LbpParams":
        return cls(points=int(d["points"]), radius=int(d["radius"]))


def sample_offsets(params: LbpParams) -> np.ndarray:
    """(row, col) offsets of the circle samples, shape (points, 2)."""
    k = np.arange(params.points)
    theta = 2.0 * np.pi * k / params.points
    return np.stack([-params.radius * np.sin(theta), params.radius * np.cos(theta)], axis=1)


def riu2_label(pattern, points: int) -> int:
    """Map a circular bit pattern to its uniform rotation-invariant label.

    ``pattern`` is either an integer whose ``points`` low bits are the
    samples (bit k = sample k) or a sequence of 0/1 values. Uniform
    patterns (at most two circular transitions) map to their number of set
    bits; all others map to ``points + 1``.
    """
    if isinstance(pattern, (int, np.integer)):
        bits = (int(pattern) >> np.arange(points)) & 1
    else:
        bits = np.asarray(pattern, dtype=int)
        if bits.size != points:
            raise ValueError(f"pattern has {bits.size} bits, expected {points}")
    transitions = int(np.count_nonzero(bits != np.roll(bits, 1)))
    return int(bits.sum()) if transitions <= 2 else points + 1


def _interp_axis(coord: float):
    """Split one coordinate into (base index, fraction), snapping fractions
    within 1e-9 of a pixel center."""
    base = math.floor(coord)
    frac = coord - base
    if frac < _SNAP:
        frac = 0.0
    elif frac > 1.0 - _SNAP:
        base += 1
        frac = 0.0
    return base, frac


def lbp_code(img: GrayImage, center: tuple, params: LbpParams) -> int:
    """riu2 label of one pixel; the full sampling circle must lie inside."""
    row, col = center
    r = params.radius
    if not (r <= row <= img.height - 1 - r and r <= col <= img.width - 1 - r):
        raise BoundaryError(
            f"center {center} with radius {r} exceeds a {img.height}x{img.width} image"
        )
    pix = img.pixels.astype(np.float64)
    threshold = pix[row, col]
    bits = np.zeros(params.points, dtype=int)
    for k, (dr, dc) in enumerate(sample_offsets(params)):
        r0, tr = _interp_axis(row + dr)
        c0, tc = _interp_axis(col + dc)
        if tr == 0.0 and tc == 0.0:
            value = pix[r0, c0]
        else:
            value = (
                pix[r0, c0] * (1 - tr) * (1 - tc)
                + pix[r0, c0 + 1] * (1 - tr) * tc
                + pix[r0 + 1, c0] * tr * (1 - tc)
                + pix[r0 + 1, c0 + 1] * tr * tc
            )
        bits[k] = value >= threshold
    return riu2_label(bits, params.points)


def _region_labels(pixels: np.ndarray, params: LbpParams) -> np.ndarray:
    """riu2 labels of every valid center of one region, vectorized."""
    h, w = pixels.shape
    r = params.radius
    if h < 2 * r + 1 or w < 2 * r + 1:
        raise DimensionError(
            f"region {h}x{w} holds no full radius-{r} sampling circle"
        )
    pix = pixels.astype(np.float64)
    rows = np.arange(r, h - r)
    cols = np.arange(r, w - r)
    centers = pix[r:h - r, r:w - r]

    n = rows.size * cols.size
    bits = np.zeros((n, params.points), dtype=bool)
    for k, (dr, dc) in enumerate(sample_offsets(params)):
        r0, tr = _interp_axis(dr)
        c0, tc = _interp_axis(dc)
        rr = rows + r0
        cc = cols + c0
        if tr == 0.0 and tc == 0.0:
            sample = pix[np.ix_(rr, cc)]
        else:
            sample = (
                pix[np.ix_(rr, cc)] * (1 - tr) * (1 - tc)
                + pix[np.ix_(rr, cc + 1)] * (1 - tr) * tc
                + pix[np.ix_(rr + 1, cc)] * tr * (1 - tc)
                + pix[np.ix_(rr + 1, cc + 1)] * tr * tc
            )
        bits[:, k] = (sample >= centers).ravel()

    transitions = (bits != np.roll(bits, 1, axis=1)).sum(axis=1)
    ones = bits.sum(axis=1)
    return np.where(transitions <= 2, ones, params.points + 1)


def lbp_histogram(region: GrayImage, params: LbpParams, normalize: bool = True) -> np.ndarray:
    """Label histogram of one region (``points + 2`` bins, L1-normalized)."""
    labels = _region_labels(region.pixels, params)
    hist = np.bincount(labels, minlength=params.n_labels).astype(np.float64)
    if normalize and hist.sum() > 0:
        hist /= hist.sum()
    return hist


def lbp_descriptor(img: GrayImage, grid: SubImageGrid, params: LbpParams) -> Descriptor:
    """Concatenated per-sub-image label histograms, row-major over the grid."""
    cells = split_subimages(img, grid)
    need = 2 * params.radius + 1
    for i, cell in enumerate(cells):
        if cell.height < need or cell.width < need:
            r, c = divmod(i, grid.cols)
            raise DimensionError(
                f"grid cell ({r},{c}) is {cell.height}x{cell.width}, too small for "
                f"radius {params.radius}"
            )
    parts = [lbp_histogram(cell, params) for cell in cells]
    return Descriptor(np.concatenate(parts), "lbp", params.to_dict(), grid)
