"""LBP, shift-LBP and multi-radius shift-LBP texture histograms.

Neighbours are sampled on a circle of radius ``r`` around each centre
pixel. Neighbour ``p`` of ``Q`` sits at angle ``2*pi*p/Q`` counterclockwise
from the +x axis, with image rows growing downward, so its offset is
``(r*cos(theta), -r*sin(theta))`` in (column, row) coordinates. Off-grid
positions are read with bilinear interpolation; offsets within ``1e-6`` of
an integer read the pixel directly.

Only centres at least ``ceil(r)`` pixels from every border are scored.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .imgio import GrayImage

SNAP_TOLERANCE = 1e-6
MAX_NEIGHBORS = 24


@dataclass(frozen=True)
class DescriptorConfig:
    """Parameters shared by the LBP family.

    Attributes
    ----------
    neighbors : int
        Number of circular sample points (``Q``).
    radii : tuple of int or float
        Strictly increasing sampling radii, one histogram per radius.
    shift_bound : int
        Shifts ``k`` run over ``-shift_bound..shift_bound``.
    """

    neighbors: int = 8
    radii: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    shift_bound: int = 3

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(self.radii))
        _check_neighbors(self.neighbors)
        if not self.radii:
            raise ValueError("at least one radius is required")
        for r in self.radii:
            _check_radius(r)
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError(f"radii must be strictly increasing, got {self.radii}")
        _check_shift(self.shift_bound)

    @property
    def shift_count(self) -> int:
        return 2 * self.shift_bound + 1

    @property
    def bins(self) -> int:
        return 1 << self.neighbors

    @property
    def feature_length(self) -> int:
        return len(self.radii) * self.bins


@dataclass(frozen=True, eq=False)
class Histogram:
    """Pattern histogram with ``2**Q`` real-valued bins."""

    bins: np.ndarray
    valid_positions: int

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.valid_positions == other.valid_positions and np.array_equal(self.bins, other.bins)


def _check_neighbors(q):
    if int(q) != q or q < 4 or q > MAX_NEIGHBORS:
        raise ValueError(f"neighbor count must be an integer in [4, {MAX_NEIGHBORS}], got {q}")


def _check_radius(r):
    if not r >= 1 or not math.isfinite(r):
        raise ValueError(f"radius must be >= 1, got {r}")


def _check_shift(l):
    if int(l) != l or l < 0:
        raise ValueError(f"shift bound must be a non-negative integer, got {l}")


def _pixels(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.pixels
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


def _snap(v: float) -> float:
    nearest = round(v)
    return float(nearest) if abs(v - nearest) < SNAP_TOLERANCE else v


def neighbor_offsets(neighbors: int, radius: float) -> list[tuple[float, float]]:
    """(dx, dy) offsets of the ``neighbors`` circular sample points."""
    out = []
    for p in range(neighbors):
        theta = 2.0 * math.pi * p / neighbors
        out.append((_snap(radius * math.cos(theta)), _snap(-radius * math.sin(theta))))
    return out


def _margin(radius: float) -> int:
    return int(math.ceil(radius - SNAP_TOLERANCE))


def _lerp_sample(get, dx: float, dy: float):
    """Bilinear read at fractional offset; ``get(dy, dx)`` fetches integer offsets."""
    x0 = math.floor(dx)
    y0 = math.floor(dy)
    fx = dx - x0
    fy = dy - y0
    a = get(y0, x0)
    top = a if fx == 0.0 else a + fx * (get(y0, x0 + 1) - a)
    if fy == 0.0:
        return top
    c = get(y0 + 1, x0)
    bottom = c if fx == 0.0 else c + fx * (get(y0 + 1, x0 + 1) - c)
    return top + fy * (bottom - top)


def _check_position(pix, x, y, radius):
    m = _margin(radius)
    h, w = pix.shape
    if not (m <= x < w - m and m <= y < h - m):
        raise ValueError(f"position ({x}, {y}) is closer than {m} pixels to the border of a {w}x{h} image")


def sample_neighbor(img, x: int, y: int, p: int, neighbors: int = 8, radius: float = 1) -> float:
    """Intensity of circular neighbour ``p`` around column ``x``, row ``y``."""
    pix = _pixels(img)
    _check_neighbors(neighbors)
    _check_radius(radius)
    if not 0 <= p < neighbors:
        raise ValueError(f"neighbor index {p} outside [0, {neighbors})")
    _check_position(pix, x, y, radius)
    dx, dy = neighbor_offsets(neighbors, radius)[p]
    return float(_lerp_sample(lambda oy, ox: float(pix[y + oy, x + ox]), dx, dy))


def _differences(pix, x, y, neighbors, radius) -> list[float]:
    _check_neighbors(neighbors)
    _check_radius(radius)
    _check_position(pix, x, y, radius)
    center = float(pix[y, x])
    return [
        _lerp_sample(lambda oy, ox: float(pix[y + oy, x + ox]), dx, dy) - center
        for dx, dy in neighbor_offsets(neighbors, radius)
    ]


def pattern_code(neighbor_values: Sequence[float], center: float, shift: int = 0) -> int:
    """Binary pattern of sampled neighbours: bit ``p`` is set iff ``g_p - g_c - shift >= 0``."""
    return sum(1 << p for p, g in enumerate(neighbor_values) if (g - center) - shift >= 0)


def lbp_code(img, x: int, y: int, neighbors: int = 8, radius: float = 1) -> int:
    """LBP code at one position: bit ``p`` is set iff ``g_p >= g_c``."""
    diffs = _differences(_pixels(img), x, y, neighbors, radius)
    return pattern_code(diffs, 0.0)


def slbp_codes(img, x: int, y: int, neighbors: int = 8, radius: float = 1, shift_bound: int = 3) -> list[int]:
    """Shifted LBP codes for ``k = -shift_bound..shift_bound`` in ascending order."""
    _check_shift(shift_bound)
    diffs = _differences(_pixels(img), x, y, neighbors, radius)
    return [pattern_code(diffs, 0.0, k) for k in range(-shift_bound, shift_bound + 1)]


def neighbor_differences(img, neighbors: int = 8, radius: float = 1) -> np.ndarray:
    """``g_p - g_c`` for every valid centre, shape ``(Q, H - 2m, W - 2m)``.

    ``m = ceil(radius)``. Uses the same arithmetic as :func:`sample_neighbor`
    so per-pixel and whole-image results agree exactly.
    """
    pix = _pixels(img)
    _check_neighbors(neighbors)
    _check_radius(radius)
    m = _margin(radius)
    h, w = pix.shape
    if h - 2 * m < 1 or w - 2 * m < 1:
        raise ValueError(f"image {w}x{h} too small for radius {radius}")
    src = pix.astype(np.float64)
    center = src[m : h - m, m : w - m]

    def get(oy, ox):
        return src[m + oy : h - m + oy, m + ox : w - m + ox]

    out = np.empty((neighbors,) + center.shape)
    for p, (dx, dy) in enumerate(neighbor_offsets(neighbors, radius)):
        out[p] = _lerp_sample(get, dx, dy) - center
    return out


def _codes(diffs: np.ndarray, shift: int) -> np.ndarray:
    codes = np.zeros(diffs.shape[1:], dtype=np.int64)
    for p in range(diffs.shape[0]):
        codes |= (diffs[p] - shift >= 0).astype(np.int64) << p
    return codes


def lbp_histogram(img, neighbors: int = 8, radius: float = 1) -> Histogram:
    """Count of each LBP code over the valid region."""
    diffs = neighbor_differences(img, neighbors, radius)
    codes = _codes(diffs, 0)
    bins = np.bincount(codes.ravel(), minlength=1 << neighbors).astype(np.float64)
    return Histogram(bins, codes.size)


def slbp_histogram(img, neighbors: int = 8, radius: float = 1, shift_bound: int = 3) -> Histogram:
    """Shift-LBP histogram.

    Every valid position contributes one code per shift; the accumulated
    counts are divided by ``2*shift_bound + 1`` so that the bins sum to the
    number of scored positions.
    """
    _check_shift(shift_bound)
    diffs = neighbor_differences(img, neighbors, radius)
    counts = np.zeros(1 << neighbors, dtype=np.int64)
    for k in range(-shift_bound, shift_bound + 1):
        counts += np.bincount(_codes(diffs, k).ravel(), minlength=1 << neighbors)
    return Histogram(counts / (2 * shift_bound + 1), diffs[0].size)


def mslbp_feature(img, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Concatenated shift-LBP histograms, one block of ``2**Q`` per radius."""
    pix = _pixels(img)
    m = _margin(config.radii[-1])
    if pix.shape[0] - 2 * m < 1 or pix.shape[1] - 2 * m < 1:
        raise ValueError(
            f"image {pix.shape[1]}x{pix.shape[0]} too small for radius {config.radii[-1]}"
        )
    return np.concatenate(
        [slbp_histogram(pix, config.neighbors, r, config.shift_bound).bins for r in config.radii]
    )


DESCRIPTORS = ("lbp", "slbp", "mslbp")


def extract(img, descriptor: str, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Feature vector for one of ``lbp``, ``slbp`` or ``mslbp``.

    The single-radius descriptors use the first configured radius.
    """
    if descriptor == "lbp":
        return lbp_histogram(img, config.neighbors, config.radii[0]).bins
    if descriptor == "slbp":
        return slbp_histogram(img, config.neighbors, config.radii[0], config.shift_bound).bins
    if descriptor == "mslbp":
        return mslbp_feature(img, config)
    raise ValueError(f"unknown descriptor {descriptor!r}; expected one of {DESCRIPTORS}")


# ----------------------------------------------------------------------------
# Feature matrix CSV
# ----------------------------------------------------------------------------

def format_features(subjects: Sequence[int], spectra: Sequence[str], features: Iterable) -> str:
    """One CSV row per sample: subject, spectrum, then values to 12 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for subject, spectrum, row in zip(subjects, spectra, features):
        writer.writerow([int(subject), spectrum] + [f"{v:.12g}" for v in np.asarray(row, dtype=float)])
    return buf.getvalue()


def parse_features(text: str) -> tuple[list[int], list[str], np.ndarray]:
    subjects, spectra, rows = [], [], []
    for rec in csv.reader(io.StringIO(text)):
        if not rec:
            continue
        subjects.append(int(rec[0]))
        spectra.append(rec[1])
        rows.append([float(v) for v in rec[2:]])
    if len({len(r) for r in rows}) > 1:
        raise ValueError("feature rows have inconsistent lengths")
    return subjects, spectra, np.array(rows, dtype=np.float64)
