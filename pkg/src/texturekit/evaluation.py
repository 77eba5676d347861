"""Closed-set identification experiments with seeded train/test splits.

Training samples are drawn per subject with a SplitMix64 stream, so every
reported number is reproducible from ``(dataset, spectrum, seed)``.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from .classify import LdaModel, lda_fit, lda_predict_many
from .descriptors import DescriptorConfig, extract
from .imgio import DatasetError, DatasetIndex, SampleRecord
from .reduction import PcaModel, RetentionPolicy, pca_fit

MASK64 = (1 << 64) - 1
THREADS_ENV = "TEXTUREKIT_THREADS"


class InsufficientSamplesError(DatasetError):
    """A protocol asks for more samples than each subject has."""


class SplitMix64:
    """SplitMix64 generator (Steele, Lea and Flood, 2014)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next()
            if r < limit:
                return r % n


def subject_stream(seed: int, subject: int) -> SplitMix64:
    """Independent stream for one subject: first output of ``seed`` xor subject id."""
    return SplitMix64(SplitMix64(seed).next() ^ (subject & MASK64))


@dataclass(frozen=True)
class SplitProtocol:
    train_per_subject: int
    test_per_subject: int
    seed: int = 42

    def __post_init__(self):
        if self.train_per_subject < 1 or self.test_per_subject < 1:
            raise ValueError("protocol needs at least one training and one test sample per subject")

    @property
    def name(self) -> str:
        return f"{self.train_per_subject}/{self.test_per_subject}"

    @classmethod
    def parse(cls, text: str, seed: int = 42) -> "SplitProtocol":
        parts = text.split("/")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ValueError(f"malformed protocol {text!r}; expected TRAIN/TEST, e.g. 6/6")
        return cls(int(parts[0]), int(parts[1]), seed)


def make_split(
    index: DatasetIndex, spectrum: str, protocol: SplitProtocol
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Per-subject random training selection; the remaining samples test.

    For each subject, ``train_per_subject`` sample positions are chosen by a
    partial Fisher-Yates shuffle driven by :func:`subject_stream`. The first
    ``test_per_subject`` of the unchosen samples, in sample order, form the
    test set.
    """
    records = index.select(spectrum)
    by_subject: dict[int, list[SampleRecord]] = {}
    for rec in records:
        by_subject.setdefault(rec.subject, []).append(rec)
    train, test = [], []
    for subject in sorted(by_subject):
        recs = sorted(by_subject[subject], key=lambda r: r.sample_index)
        m = len(recs)
        need = protocol.train_per_subject + protocol.test_per_subject
        if need > m:
            raise InsufficientSamplesError(
                f"protocol {protocol.name} needs {need} samples per subject, "
                f"subject {subject} has {m} ({spectrum})"
            )
        rng = subject_stream(protocol.seed, subject)
        order = list(range(m))
        for i in range(protocol.train_per_subject):
            j = i + rng.below(m - i)
            order[i], order[j] = order[j], order[i]
        chosen = sorted(order[: protocol.train_per_subject])
        chosen_set = set(chosen)
        rest = [i for i in range(m) if i not in chosen_set]
        train.extend(recs[i] for i in chosen)
        test.extend(recs[i] for i in rest[: protocol.test_per_subject])
    return train, test


def accuracy(predictions: Sequence, truth: Sequence) -> float:
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(truth)} labels")
    if not len(truth):
        raise ValueError("accuracy of an empty prediction set is undefined")
    correct = sum(1 for p, t in zip(predictions, truth) if p == t)
    return correct / len(truth)


# ----------------------------------------------------------------------------
# Feature extraction with caching
# ----------------------------------------------------------------------------

def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError("thread count must be non-negative")
    return threads or (os.cpu_count() or 1)


class FeatureCache:
    """Memoises features by ``(locator, descriptor, config)``.

    Each entry keeps the cold extraction time so that reports stay
    comparable whether or not a feature was cached.
    """

    def __init__(self):
        self._store: dict = {}

    def __len__(self):
        return len(self._store)

    def get(self, record: SampleRecord, descriptor: str, config: DescriptorConfig):
        key = (record.locator, descriptor, config)
        hit = self._store.get(key)
        if hit is None:
            hit = _extract_one(record, descriptor, config)
            self._store[key] = hit
        return hit


def _extract_one(record, descriptor, config):
    t0 = time.perf_counter()
    img = record.load()
    vec = extract(img, descriptor, config)
    return vec, time.perf_counter() - t0, (img.width, img.height)


def extract_features(
    records: Sequence[SampleRecord],
    descriptor: str,
    config: DescriptorConfig = DescriptorConfig(),
    cache: Optional[FeatureCache] = None,
    threads: Optional[int] = None,
) -> tuple[np.ndarray, float, set]:
    """Feature matrix for ``records`` in order.

    Returns the matrix, the summed cold extraction time in seconds and the
    set of image sizes seen.
    """
    cache = FeatureCache() if cache is None else cache
    workers = resolve_threads(threads)
    fetch = lambda rec: cache.get(rec, descriptor, config)  # noqa: E731
    if workers > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fetch, records))
    else:
        results = [fetch(rec) for rec in records]
    matrix = np.vstack([r[0] for r in results])
    return matrix, float(sum(r[1] for r in results)), {r[2] for r in results}


# ----------------------------------------------------------------------------
# Pipeline
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitOutcome:
    predictions: list
    pca: PcaModel
    lda: LdaModel
    train_time: float
    test_time: float


def evaluate_split(
    train_X,
    train_y: Sequence,
    test_X,
    policy: RetentionPolicy = RetentionPolicy(),
    whiten: bool = False,
) -> SplitOutcome:
    """Fit PCA then LDA on the training rows only, then label every test row.

    The PCA dimension is capped at ``N - C - 1`` (at least 1) so that the
    within-class scatter handed to LDA stays nonsingular.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    n_classes = len(set(train_y))
    t0 = time.perf_counter()
    pca = pca_fit(train_X, policy.with_cap(max(1, len(train_X) - n_classes - 1)))
    lda = lda_fit(pca.transform(train_X), train_y, whiten=whiten)
    t1 = time.perf_counter()
    predictions = lda_predict_many(lda, pca.transform(np.asarray(test_X, dtype=np.float64)))
    t2 = time.perf_counter()
    return SplitOutcome(predictions, pca, lda, t1 - t0, t2 - t1)


@dataclass(frozen=True)
class ReportRow:
    """One line of an evaluation report.

    ``seed`` is ``"mean"`` on rows aggregating several seeds; their
    dimension and time fields are means over the seeds.
    """

    spectrum: str
    descriptor: str
    accuracy: float
    n_correct: int
    n_test: int
    extract_time: float
    train_time: float
    test_time: float
    pca_dim: Union[int, float]
    lda_dim: Union[int, float]
    image_size: str
    seed: Union[int, str]
    protocol: str


REPORT_COLUMNS = tuple(f.name for f in fields(ReportRow))


def _size_label(sizes: set) -> str:
    if len(sizes) == 1:
        w, h = next(iter(sizes))
        return f"{w}x{h}"
    return "mixed"


def run_experiment(
    index: DatasetIndex,
    spectrum: str,
    descriptor: str,
    config: DescriptorConfig = DescriptorConfig(),
    protocol: SplitProtocol = SplitProtocol(6, 6),
    policy: RetentionPolicy = RetentionPolicy(),
    cache: Optional[FeatureCache] = None,
    threads: Optional[int] = None,
    timing: bool = True,
    whiten: bool = False,
) -> ReportRow:
    """Split, extract, fit and score one (spectrum, descriptor, protocol, seed)."""
    if index.subject_count < 2:
        raise DatasetError("identification needs at least two subjects")
    train, test = make_split(index, spectrum, protocol)
    cache = FeatureCache() if cache is None else cache
    train_X, t_train, sizes_a = extract_features(train, descriptor, config, cache, threads)
    test_X, t_test, sizes_b = extract_features(test, descriptor, config, cache, threads)
    train_y = [r.subject for r in train]
    truth = [r.subject for r in test]
    outcome = evaluate_split(train_X, train_y, test_X, policy, whiten)
    n_correct = sum(1 for p, t in zip(outcome.predictions, truth) if p == t)
    times = (t_train + t_test, outcome.train_time, outcome.test_time) if timing else (0.0, 0.0, 0.0)
    return ReportRow(
        spectrum=spectrum,
        descriptor=descriptor,
        accuracy=accuracy(outcome.predictions, truth),
        n_correct=n_correct,
        n_test=len(truth),
        extract_time=times[0],
        train_time=times[1],
        test_time=times[2],
        pca_dim=outcome.pca.retained_dim,
        lda_dim=outcome.lda.output_dim,
        image_size=_size_label(sizes_a | sizes_b),
        seed=protocol.seed,
        protocol=protocol.name,
    )


def mean_row(rows: Sequence[ReportRow]) -> ReportRow:
    """Aggregate per-seed rows of one (spectrum, descriptor, protocol)."""
    if not rows:
        raise ValueError("no rows to aggregate")
    first = rows[0]
    if any((r.spectrum, r.descriptor, r.protocol) != (first.spectrum, first.descriptor, first.protocol) for r in rows):
        raise ValueError("mean_row expects rows of a single spectrum/descriptor/protocol")
    n_correct = sum(r.n_correct for r in rows)
    n_test = sum(r.n_test for r in rows)

    def avg(name):
        vals = [getattr(r, name) for r in rows]
        m = sum(vals) / len(vals)
        return int(m) if m == int(m) and all(isinstance(v, int) for v in vals) else m

    return ReportRow(
        spectrum=first.spectrum,
        descriptor=first.descriptor,
        accuracy=n_correct / n_test,
        n_correct=n_correct,
        n_test=n_test,
        extract_time=avg("extract_time"),
        train_time=avg("train_time"),
        test_time=avg("test_time"),
        pca_dim=avg("pca_dim"),
        lda_dim=avg("lda_dim"),
        image_size=first.image_size if len({r.image_size for r in rows}) == 1 else "mixed",
        seed="mean",
        protocol=first.protocol,
    )


def run_seeds(
    index: DatasetIndex,
    spectrum: str,
    descriptor: str,
    config: DescriptorConfig,
    train_per_subject: int,
    test_per_subject: int,
    seeds: Sequence[int],
    policy: RetentionPolicy = RetentionPolicy(),
    cache: Optional[FeatureCache] = None,
    threads: Optional[int] = None,
    timing: bool = True,
) -> list[ReportRow]:
    """Per-seed rows followed by their mean row."""
    cache = FeatureCache() if cache is None else cache
    rows = [
        run_experiment(
            index, spectrum, descriptor, config,
            SplitProtocol(train_per_subject, test_per_subject, seed),
            policy, cache, threads, timing,
        )
        for seed in seeds
    ]
    return rows + [mean_row(rows)]


# ----------------------------------------------------------------------------
# Report CSV
# ----------------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(rows: Sequence[ReportRow]) -> str:
    if not rows:
        raise ValueError("a report needs at least one row")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_report(text: str) -> list[ReportRow]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        d = dict(zip(header, rec))
        rows.append(
            ReportRow(
                spectrum=d["spectrum"],
                descriptor=d["descriptor"],
                accuracy=float(d["accuracy"]),
                n_correct=int(d["n_correct"]),
                n_test=int(d["n_test"]),
                extract_time=float(d["extract_time"]),
                train_time=float(d["train_time"]),
                test_time=float(d["test_time"]),
                pca_dim=_number(d["pca_dim"]),
                lda_dim=_number(d["lda_dim"]),
                image_size=d["image_size"],
                seed=d["seed"] if d["seed"] == "mean" else int(d["seed"]),
                protocol=d["protocol"],
            )
        )
    return rows
