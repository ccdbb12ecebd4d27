"""Encoded Local Projections descriptor.

A sliding square window is gated by its homogeneity score, projected at an
anchor angle plus three adjunct offsets, and each projection's gradient is
binarized into a ``(side - 2)``-bit code by comparing consecutive gradient
values. Codes are accumulated into per-region histograms (one shared
histogram in "merged" mode, one per projection slot in "detached" mode),
and region histograms are concatenated across the sub-image grid.

The dense scan is vectorized: all projections a region can need are a
single matrix product of the window stack with precomputed projection
operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError
from .imaging import GrayImage, SubImageGrid, split_subimages, window_stack
from .radon import ANCHOR_MODES, AngleSet, Projection, projection_matrix

HISTOGRAM_MODES = ("merged", "detached")


@dataclass(frozen=True)
class ElpParams:
    """Dense-scan parameters for the projection-code descriptor.

    ``homogeneity_threshold`` gates the scan: windows whose homogeneity is
    at or above the threshold are skipped entirely. Values above 1 disable
    the gate; 0 gates everything whose score is non-negative.
    """

    window_side: int = 10
    stride: int = 1
    homogeneity_threshold: float = 0.95
    angle_set: AngleSet = field(default_factory=AngleSet)
    histogram_mode: str = "detached"
    anchor_mode: str = "max_amplitude"

    def __post_init__(self):
        if self.window_side < 4:
            raise ValueError(f"window_side must be >= 4, got {self.window_side}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        tau = self.homogeneity_threshold
        if not np.isfinite(tau) or tau < 0.0:
            raise ValueError(f"homogeneity_threshold must be finite and >= 0, got {tau}")
        if self.histogram_mode not in HISTOGRAM_MODES:
            raise ValueError(f"histogram_mode must be one of {HISTOGRAM_MODES}")
        if self.anchor_mode not in ANCHOR_MODES:
            raise ValueError(f"anchor_mode must be one of {ANCHOR_MODES}")

    @property
    def code_bits(self) -> int:
        return self.window_side - 2

    @property
    def n_codes(self) -> int:
        return 1 << self.code_bits

    @property
    def n_projections(self) -> int:
        return len(self.angle_set.adjunct_offsets)

    def to_dict(self) -> dict:
        return {
            "window_side": self.window_side,
            "stride": self.stride,
            "homogeneity_threshold": self.homogeneity_threshold,
            "anchor_candidates": list(self.angle_set.anchor_candidates),
            "adjunct_offsets": list(self.angle_set.adjunct_offsets),
            "histogram_mode": self.histogram_mode,
            "anchor_mode": self.anchor_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElpParams":
        return cls(
            window_side=int(d["window_side"]),
            stride=int(d["stride"]),
            homogeneity_threshold=float(d["homogeneity_threshold"]),
            angle_set=AngleSet(
                tuple(d["anchor_candidates"]), tuple(d["adjunct_offsets"])
            ),
            histogram_mode=d["histogram_mode"],
            anchor_mode=d["anchor_mode"],
        )


@dataclass(frozen=True)
class Descriptor:
    """Histogram vector plus the provenance needed to interpret it."""

    values: np.ndarray
    method: str
    params: dict
    grid: SubImageGrid

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


def encode_projection(proj) -> int:
    """Binarize a projection's gradient into an unsigned integer code.

    The forward-difference gradient has length ``n - 1``; bit ``i`` (most
    significant first) is 1 iff the gradient rises from position ``i`` to
    ``i + 1``, ties and falls give 0. Projections shorter than 4 carry no
    codable gradient pair and are rejected.
    """
    values = proj.values if isinstance(proj, Projection) else np.asarray(proj, dtype=np.float64)
    if values.size < 4:
        raise ValueError(f"projection too short to encode: length {values.size} < 4")
    grad = np.diff(values)
    bits = grad[1:] > grad[:-1]
    return int(bits @ (1 << np.arange(bits.size - 1, -1, -1, dtype=np.int64)))


@lru_cache(maxsize=None)
def _angle_plan(side, candidates, offsets):
    """Precomputed operators for the dense scan.

    Returns the union of all angles reachable as candidate + offset (mod
    180), the stacked projection operator for that union, the candidate
    positions within the union, and a lookup from candidate index to the
    union positions of its adjunct angles.
    """
    union = sorted({(c + o) % 180.0 for c in candidates for o in offsets} | set(candidates))
    index = {a: i for i, a in enumerate(union)}
    stack = np.vstack([projection_matrix(side, a) for a in union])
    cand_idx = np.array([index[c] for c in candidates])
    adjunct = np.array([[index[(c + o) % 180.0] for o in offsets] for c in candidates])
    return tuple(union), stack, cand_idx, adjunct


def _scan_region(pixels: np.ndarray, params: ElpParams):
    """Code every sufficiently heterogeneous window of one region.

    Returns ``(keep, codes, n_rows, n_cols)``: a boolean mask over the
    row-major window origins and, for the kept windows only, an integer
    array of shape ``(n_kept, n_projections)`` holding one code per adjunct
    slot.
    """
    side = params.window_side
    wins, n_rows, n_cols = window_stack(pixels, side, params.stride)

    med = np.median(wins, axis=1)
    dev = wins - med[:, None]
    # 256 = 2**n_bits; GrayImage pins n_bits to 8.
    score = 1.0 - np.sqrt(np.einsum("ij,ij->i", dev, dev)) / 256.0
    keep = score < params.homogeneity_threshold

    _, stack, cand_idx, adjunct = _angle_plan(
        side, params.angle_set.anchor_candidates, params.angle_set.adjunct_offsets
    )
    kept = wins[keep]
    proj = (kept @ stack.T).reshape(kept.shape[0], -1, side)

    cand = proj[:, cand_idx, :]
    if params.anchor_mode == "max_amplitude":
        scores = cand.max(axis=2)
    else:
        scores = np.diff(cand, axis=2).sum(axis=2)
    winner = scores.argmax(axis=1)

    chosen = proj[np.arange(kept.shape[0])[:, None], adjunct[winner], :]
    grad = np.diff(chosen, axis=2)
    bits = grad[:, :, 1:] > grad[:, :, :-1]
    weights = 1 << np.arange(params.code_bits - 1, -1, -1, dtype=np.int64)
    codes = bits @ weights
    return keep, codes, n_rows, n_cols


def _region_histogram(pixels: np.ndarray, params: ElpParams, normalize: bool) -> np.ndarray:
    _, codes, _, _ = _scan_region(pixels, params)
    if params.histogram_mode == "merged":
        hist = np.bincount(codes.ravel(), minlength=params.n_codes).astype(np.float64)
    else:
        hist = np.concatenate([
            np.bincount(codes[:, k], minlength=params.n_codes)
            for k in range(params.n_projections)
        ]).astype(np.float64)
    if normalize:
        total = hist.sum()
        if total > 0:
            hist /= total
    return hist


def elp_histogram(region: GrayImage, params: ElpParams, normalize: bool = True) -> Descriptor:
    """Code histogram of a single region.

    Merged mode yields ``2**(side-2)`` bins shared by all four projections;
    detached mode yields one such block per projection slot, concatenated.
    The histogram is L1-normalized unless it is all zero (every window
    gated), in which case it is left as zeros. Pass ``normalize=False`` for
    raw counts.
    """
    if region.height < params.window_side or region.width < params.window_side:
        raise DimensionError(
            f"region {region.height}x{region.width} is smaller than the "
            f"{params.window_side}-pixel window"
        )
    hist = _region_histogram(region.pixels, params, normalize)
    return Descriptor(hist, "elp", params.to_dict(), SubImageGrid(1, 1))


def elp_descriptor(img: GrayImage, grid: SubImageGrid, params: ElpParams) -> Descriptor:
    """Concatenated per-sub-image code histograms, row-major over the grid."""
    cells = split_subimages(img, grid)
    side = params.window_side
    for i, cell in enumerate(cells):
        if cell.height < side or cell.width < side:
            r, c = divmod(i, grid.cols)
            raise DimensionError(
                f"grid cell ({r},{c}) is {cell.height}x{cell.width}, smaller than "
                f"the {side}-pixel window"
            )
    parts = [_region_histogram(cell.pixels, params, normalize=True) for cell in cells]
    return Descriptor(np.concatenate(parts), "elp", params.to_dict(), grid)


def elp_code_image(img: GrayImage, params: ElpParams, offset_index: int = 0) -> GrayImage:
    """Render the code of one adjunct slot at every window origin.

    Output dimensions equal the window-origin counts; codes are rescaled
    linearly onto [0, 255] and gated windows render as 0.
    """
    if not 0 <= offset_index < params.n_projections:
        raise ValueError(
            f"offset_index must be in [0, {params.n_projections}), got {offset_index}"
        )
    if img.height < params.window_side or img.width < params.window_side:
        raise DimensionError(
            f"image {img.height}x{img.width} is smaller than the "
            f"{params.window_side}-pixel window"
        )
    keep, codes, n_rows, n_cols = _scan_region(img.pixels, params)
    flat = np.zeros(n_rows * n_cols, dtype=np.float64)
    flat[keep] = codes[:, offset_index]
    scaled = np.floor(flat * (255.0 / (params.n_codes - 1)) + 0.5)
    return GrayImage(scaled.reshape(n_rows, n_cols).astype(np.uint8))


def length_of(method: str, params, grid: SubImageGrid) -> int:
    """Closed-form descriptor length for a (method, params, grid) triple."""
    cells = grid.rows * grid.cols
    if method == "elp":
        block = params.n_codes
        if params.histogram_mode == "detached":
            block *= params.n_projections
        return cells * block
    if method == "lbp":
        return cells * (params.points + 2)
    raise ValueError(f"unknown method {method!r}")
