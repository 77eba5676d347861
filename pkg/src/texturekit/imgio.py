"""Grayscale image I/O, dataset indexing and synthetic texture corpora.

Images are 8-bit single-channel rasters read from and written to binary
(P5) or plain (P2) PGM files. Datasets are directory trees whose file
names encode a subject id and a sample number, one subdirectory per
spectrum.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

SPECTRA = ("blue", "green", "red", "nir", "synthetic")
DEFAULT_LAYOUT = "{spectrum}/{subject}_{session}_{index}.pgm"

_SYNTH_NOISE = 16
_SYNTH_AMPLITUDE = 8.0
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ImageFormatError(ValueError):
    """Raised when a file is not a well-formed 8-bit PGM image."""


class DatasetError(ValueError):
    """Raised when a dataset tree cannot be indexed."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale raster.

    ``pixels`` is a read-only ``(height, width)`` uint8 array in row-major
    order.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 3:
            raise ValueError(f"image must be at least 3x3, got {arr.shape[1]}x{arr.shape[0]}")
        if arr.dtype != np.uint8:
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            if not np.array_equal(arr, np.round(arr)):
                raise ValueError("intensities must be integers")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


# ----------------------------------------------------------------------------
# PGM
# ----------------------------------------------------------------------------

def _read_header(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the last token.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise ImageFormatError("truncated PGM header")
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def parse_pgm(data: bytes) -> GrayImage:
    """Decode PGM bytes (P2 or P5, maxval 255) into a :class:`GrayImage`."""
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"bad magic {magic!r}: only P2/P5 grayscale PGM is supported")
    tokens, pos = _read_header(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"malformed PGM header {tokens!r}") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"maxval must be 255, got {maxval}")
    expected = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        payload = data[pos + 1 :]
        if len(payload) != expected:
            raise ImageFormatError(
                f"dimension mismatch: header declares {width}x{height} "
                f"({expected} bytes), payload has {len(payload)}"
            )
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    else:
        body = re.sub(rb"#[^\r\n]*", b" ", data[pos:])
        values = body.split()
        if len(values) != expected:
            raise ImageFormatError(
                f"dimension mismatch: header declares {width}x{height} "
                f"({expected} values), payload has {len(values)}"
            )
        try:
            ints = np.array([int(v) for v in values], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-integer sample in P2 payload") from None
        if ints.min() < 0 or ints.max() > 255:
            raise ImageFormatError("sample outside [0, 255] in P2 payload")
        pixels = ints.astype(np.uint8).reshape(height, width)
    return GrayImage(pixels)


def load_grayscale(path) -> GrayImage:
    """Load an 8-bit PGM file exactly as stored (no rescaling)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    return parse_pgm(path.read_bytes())


def format_pgm(img: GrayImage, binary: bool = True) -> bytes:
    """Encode ``img`` as P5 (``binary=True``) or P2 PGM bytes."""
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode("ascii")
    if binary:
        return header + img.pixels.tobytes()
    lines = []
    for row in img.pixels:
        # keep lines under the 70 character limit of plain PGM
        vals = [str(v) for v in row]
        for i in range(0, len(vals), 16):
            lines.append(" ".join(vals[i : i + 16]))
    return header + ("\n".join(lines) + "\n").encode("ascii")


def save_pgm(img: GrayImage, path, binary: bool = True) -> None:
    Path(path).write_bytes(format_pgm(img, binary=binary))


# ----------------------------------------------------------------------------
# Dataset indexing
# ----------------------------------------------------------------------------

Locator = Union[Path, GrayImage]


@dataclass(frozen=True)
class SampleRecord:
    """One image of one subject under one spectrum.

    ``locator`` is either a file path or an in-memory :class:`GrayImage`.
    """

    locator: Locator
    subject: int
    spectrum: str
    sample_index: int

    def load(self) -> GrayImage:
        if isinstance(self.locator, GrayImage):
            return self.locator
        return load_grayscale(self.locator)


@dataclass(frozen=True)
class DatasetIndex:
    samples: tuple[SampleRecord, ...]
    subject_count: int
    spectra: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "spectra", frozenset(self.spectra))
        _check_rectangular(self.samples, self.subject_count)

    def __len__(self):
        return len(self.samples)

    def samples_per_subject(self, spectrum: str) -> int:
        return sum(1 for s in self.samples if s.spectrum == spectrum and s.subject == 0)

    def select(self, spectrum: str) -> list[SampleRecord]:
        """Records of one spectrum, ordered by subject then sample index."""
        if spectrum not in self.spectra:
            raise DatasetError(f"spectrum {spectrum!r} not in dataset (have {sorted(self.spectra)})")
        return [s for s in self.samples if s.spectrum == spectrum]


def _check_rectangular(samples, subject_count):
    counts: dict[tuple[str, int], set] = {}
    for s in samples:
        if not 0 <= s.subject < subject_count:
            raise DatasetError(f"subject id {s.subject} outside [0, {subject_count})")
        seen = counts.setdefault((s.spectrum, s.subject), set())
        if s.sample_index in seen:
            raise DatasetError(
                f"duplicate sample_index {s.sample_index} for subject {s.subject}, spectrum {s.spectrum}"
            )
        seen.add(s.sample_index)
    spectra = {sp for sp, _ in counts}
    sizes = {}
    for sp in spectra:
        for subj in range(subject_count):
            sizes[(sp, subj)] = len(counts.get((sp, subj), ()))
    if len(set(sizes.values())) > 1:
        expected = max(sizes.values())
        bad = sorted(k for k, v in sizes.items() if v != expected)
        sp, subj = bad[0]
        raise DatasetError(
            f"non-rectangular dataset: subject {subj} has {sizes[(sp, subj)]} {sp} samples, "
            f"expected {expected}"
        )


def _layout_regex(layout: str) -> re.Pattern:
    fields = {
        "spectrum": r"(?P<spectrum>[^/]+)",
        "subject": r"(?P<subject>\d+)",
        "session": r"(?P<session>\d+)",
        "index": r"(?P<index>\d+)",
    }
    parts = re.split(r"(\{[a-z]+\})", layout)
    out = []
    used = set()
    for part in parts:
        m = re.fullmatch(r"\{([a-z]+)\}", part)
        if m:
            name = m.group(1)
            if name not in fields:
                raise ValueError(f"unknown layout field {part!r}; allowed: {sorted(fields)}")
            if name in used:
                raise ValueError(f"layout field {part!r} appears twice")
            used.add(name)
            out.append(fields[name])
        else:
            out.append(re.escape(part))
    for required in ("spectrum", "subject", "index"):
        if required not in used:
            raise ValueError(f"layout {layout!r} lacks the {{{required}}} field")
    return re.compile("".join(out))


def index_dataset(root, layout: str = DEFAULT_LAYOUT) -> DatasetIndex:
    """Index a directory tree of PGM images.

    Parameters
    ----------
    root : path
        Dataset root directory.
    layout : str
        Pattern relative to ``root`` built from the fields ``{spectrum}``,
        ``{subject}``, ``{index}`` and optionally ``{session}``. Spectrum
        directory names are matched case-insensitively.

    Returns
    -------
    DatasetIndex
        Subjects are renumbered ``0..n-1`` in ascending order of their
        file-name ids; within a subject, samples are ranked by
        ``(session, index)`` to give ``sample_index`` ``0..m-1``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    pattern = _layout_regex(layout)
    files = sorted(
        p for p in root.rglob("*")
        if p.is_file() and not any(part.startswith(".") for part in p.relative_to(root).parts)
    )
    if not files:
        raise DatasetError(f"dataset root {root} contains no files")

    parsed = []
    for path in files:
        rel = path.relative_to(root).as_posix()
        m = pattern.fullmatch(rel)
        if m is None:
            raise DatasetError(f"cannot parse file name {rel!r} with layout {layout!r}")
        spectrum = m.group("spectrum").lower()
        if spectrum not in SPECTRA:
            raise DatasetError(f"unknown spectrum {m.group('spectrum')!r} in {rel!r}")
        session = int(m.group("session")) if "session" in m.groupdict() else 0
        parsed.append((spectrum, int(m.group("subject")), session, int(m.group("index")), path))

    subject_ids = sorted({p[1] for p in parsed})
    renumber = {sid: i for i, sid in enumerate(subject_ids)}
    groups: dict[tuple[str, int], list] = {}
    for spectrum, sid, session, idx, path in parsed:
        groups.setdefault((spectrum, renumber[sid]), []).append((session, idx, path))

    samples = []
    for (spectrum, subject), entries in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        entries.sort(key=lambda e: (e[0], e[1]))
        keys = [(e[0], e[1]) for e in entries]
        if len(set(keys)) != len(keys):
            raise DatasetError(f"duplicate sample number for subject {subject_ids[subject]} ({spectrum})")
        for rank, (_, _, path) in enumerate(entries):
            samples.append(SampleRecord(path, subject, spectrum, rank))
    samples.sort(key=lambda s: (s.subject, s.spectrum, s.sample_index))
    return DatasetIndex(tuple(samples), len(subject_ids), frozenset(g[0] for g in groups))


# ----------------------------------------------------------------------------
# Synthetic textures
# ----------------------------------------------------------------------------

def grating_parameters(class_id: int) -> tuple[float, float, float]:
    """Deterministic (period in pixels, orientation in radians, phase) for a class.

    Orientation and period follow low-discrepancy sequences in ``class_id``
    so that classes stay well spread for any number of classes.
    """
    if class_id < 0:
        raise ValueError("class_id must be non-negative")
    angle = math.pi * ((class_id * _GOLDEN) % 1.0)
    period = 3.0 + 13.0 * ((class_id * math.sqrt(2.0) + 0.5) % 1.0)
    phase = 2.0 * math.pi * ((class_id * math.sqrt(3.0)) % 1.0)
    return period, angle, phase


def synth_texture(class_id: int, sample_seed: int, width: int = 64, height: int = 64) -> GrayImage:
    """Oriented sinusoidal grating plus uniform noise.

    The grating depends only on ``class_id``; the noise (integers in
    ``[-16, 16]``) depends on ``(class_id, sample_seed)``.
    """
    if width < 16 or height < 16:
        raise ValueError(f"synthetic textures need at least 16x16 pixels, got {width}x{height}")
    if sample_seed < 0:
        raise ValueError("sample_seed must be non-negative")
    period, angle, phase = grating_parameters(class_id)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    along = xx * math.cos(angle) + yy * math.sin(angle)
    base = 128.0 + _SYNTH_AMPLITUDE * np.sin(2.0 * math.pi * along / period + phase)
    rng = np.random.default_rng([class_id, sample_seed])
    noise = rng.integers(-_SYNTH_NOISE, _SYNTH_NOISE + 1, size=(height, width))
    return GrayImage(np.clip(np.round(base) + noise, 0, 255).astype(np.uint8))


def synth_corpus(classes: int, samples: int, size: int = 64) -> DatasetIndex:
    """In-memory corpus of ``classes`` x ``samples`` synthetic textures."""
    records = [
        SampleRecord(synth_texture(c, s, size, size), c, "synthetic", s)
        for c in range(classes)
        for s in range(samples)
    ]
    return DatasetIndex(tuple(records), classes, frozenset({"synthetic"}))


def write_synth_corpus(out_dir, classes: int, samples: int, size: int = 64, binary: bool = True) -> list[Path]:
    """Write a synthetic corpus under ``out_dir`` in the default layout."""
    out_dir = Path(out_dir)
    target = out_dir / "synthetic"
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for c in range(classes):
        for s in range(samples):
            path = target / f"{c:04d}_1_{s:03d}.pgm"
            save_pgm(synth_texture(c, s, size, size), path, binary=binary)
            paths.append(path)
    return paths
