"""Discrete Radon projections over square windows, with homogeneity gating
and anchor-angle selection.

A projection at angle ``theta`` sums pixel intensities along parallel lines:
every pixel center, taken relative to the window center, is assigned to the
line bin nearest ``rho = x*cos(theta) + y*sin(theta)`` (unit bin spacing,
``x`` across columns, ``y`` down rows). The variable-length bin vector is
then redistributed onto exactly ``side`` equal-width bins by linear
(mass-conserving) rebinning. At 0 degrees this reduces exactly to column
sums and at 90 degrees to row sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .imaging import Window

ANCHOR_MODES = ("max_amplitude", "gradient_integral")


@dataclass(frozen=True)
class Projection:
    """Line-integral sums for one angle over one window, resampled to the
    window side length."""

    angle_deg: float
    values: np.ndarray


@dataclass(frozen=True)
class AngleSet:
    """Anchor candidate angles and the adjunct offsets applied to the winner.

    All angles are taken modulo 180. The offsets must include 0 so the
    anchor projection itself is part of the output set. The default offsets
    use the asymmetric +125 spacing; pass ``(0, 45, 90, 135)`` for the
    equidistant variant.
    """

    anchor_candidates: tuple = (0.0, 45.0, 90.0, 135.0)
    adjunct_offsets: tuple = (0.0, 45.0, 90.0, 125.0)

    def __post_init__(self):
        cands = tuple(sorted(float(a) % 180.0 for a in self.anchor_candidates))
        offs = tuple(float(a) % 180.0 for a in self.adjunct_offsets)
        if not cands:
            raise ValueError("at least one anchor candidate is required")
        if 0.0 not in offs:
            raise ValueError("adjunct offsets must include 0 (the anchor itself)")
        object.__setattr__(self, "anchor_candidates", cands)
        object.__setattr__(self, "adjunct_offsets", offs)


@lru_cache(maxsize=None)
def projection_matrix(side: int, angle_deg: float) -> np.ndarray:
    """Linear operator mapping a flattened ``side x side`` window to its
    length-``side`` projection at ``angle_deg``.

    The matrix composes nearest-bin accumulation with mass-conserving
    rebinning, so ``projection_matrix(s, a) @ win.ravel()`` is the whole
    discrete transform. Cached per (side, angle).
    """
    theta = math.radians(angle_deg % 180.0)
    center = (side - 1) / 2.0
    x = np.arange(side) - center
    y = np.arange(side) - center
    rho = x[None, :] * math.cos(theta) + y[:, None] * math.sin(theta)
    k = np.floor(rho + 0.5).astype(int).ravel()
    k -= k.min()
    n_bins = k.max() + 1
    binning = np.zeros((n_bins, side * side))
    binning[k, np.arange(side * side)] = 1.0
    return _rebin_matrix(n_bins, side) @ binning


def _rebin_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Redistribute ``n_src`` unit bins onto ``n_dst`` equal bins, conserving
    total mass. The identity when the counts match."""
    if n_src == n_dst:
        return np.eye(n_src)
    edges = np.arange(n_dst + 1) * n_src / n_dst
    src = np.arange(n_src)
    overlap = np.minimum(edges[1:, None], src + 1) - np.maximum(edges[:-1, None], src)
    return np.clip(overlap, 0.0, 1.0)


def _window_pixels(win) -> np.ndarray:
    data = win.data if isinstance(win, Window) else np.asarray(win)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ValueError(f"expected a square window, got shape {data.shape}")
    return data.astype(np.float64)


def radon_projection(win, angle_deg: float) -> Projection:
    """Project one window at ``angle_deg`` (degrees in [0, 180))."""
    data = _window_pixels(win)
    angle = float(angle_deg) % 180.0
    values = projection_matrix(data.shape[0], angle) @ data.ravel()
    return Projection(angle, values)


def homogeneity(win, n_bits: int = 8) -> float:
    """Window flatness score: 1 minus the root of the summed squared
    deviations from the window median, scaled by ``2**n_bits``.

    1.0 for constant windows; can go negative for very heterogeneous large
    windows (intentionally not clamped). The median of an even pixel count
    is the mean of the two central order statistics.
    """
    data = _window_pixels(win)
    dev = data - np.median(data)
    return 1.0 - math.sqrt(float(np.sum(dev * dev))) / (2.0 ** n_bits)


def anchor_angle(projections: Sequence[Projection], mode: str = "max_amplitude") -> float:
    """Pick the anchor angle among candidate projections.

    ``max_amplitude`` selects the angle whose projection holds the largest
    single value; ``gradient_integral`` selects the angle maximizing the sum
    of forward differences of the projection. Score ties go to the smallest
    angle.
    """
    if not projections:
        raise ValueError("at least one candidate projection is required")
    if mode not in ANCHOR_MODES:
        raise ValueError(f"unknown anchor mode {mode!r}")
    best_angle = None
    best_score = -math.inf
    for proj in sorted(projections, key=lambda p: p.angle_deg):
        if mode == "max_amplitude":
            score = float(np.max(proj.values))
        else:
            score = float(np.sum(np.diff(proj.values)))
        if score > best_score:
            best_score = score
            best_angle = proj.angle_deg
    return best_angle


def projection_set(win, angles: AngleSet | None = None, mode: str = "max_amplitude"):
    """Anchor selection plus adjunct projections for one window.

    Returns ``(anchor_deg, projections)`` where the projections sit at
    ``(anchor + offset) mod 180`` for each adjunct offset, in offset order.
    """
    angles = angles or AngleSet()
    candidates = [radon_projection(win, a) for a in angles.anchor_candidates]
    anchor = anchor_angle(candidates, mode)
    by_angle = {p.angle_deg: p for p in candidates}
    projs = []
    for off in angles.adjunct_offsets:
        target = (anchor + off) % 180.0
        projs.append(by_angle.get(target) or radon_projection(win, target))
    return anchor, projs
