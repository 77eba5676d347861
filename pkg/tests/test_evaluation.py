import warnings
from pathlib import Path

import numpy as np
import pytest

from texturekit.descriptors import DescriptorConfig
from texturekit.evaluation import (
    REPORT_COLUMNS,
    FeatureCache,
    InsufficientSamplesError,
    ReportRow,
    SplitMix64,
    SplitProtocol,
    accuracy,
    emit_report,
    evaluate_split,
    extract_features,
    make_split,
    mean_row,
    parse_report,
    run_experiment,
    run_seeds,
)
from texturekit.imgio import DatasetIndex, GrayImage, SampleRecord, synth_corpus, synth_texture

SMALL = DescriptorConfig(radii=(1, 2, 3))


def placeholder_index(subjects, samples, spectra=("blue",)):
    records = [
        SampleRecord(Path(f"{sp}/{s}_{i}.pgm"), s, sp, i)
        for s in range(subjects)
        for sp in spectra
        for i in range(samples)
    ]
    return DatasetIndex(tuple(records), subjects, frozenset(spectra))


def test_splitmix_reference_values():
    # published SplitMix64 outputs for seed 1234567
    rng = SplitMix64(1234567)
    assert [rng.next() for _ in range(3)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
    ]


def test_bounded_draws_are_in_range():
    rng = SplitMix64(0)
    draws = [rng.below(7) for _ in range(2000)]
    assert set(draws) == set(range(7))


class TestSplit:
    @pytest.mark.parametrize("train,test,n_train,n_test", [(3, 9, 1500, 4500), (6, 6, 3000, 3000)])
    def test_polyu_counts(self, train, test, n_train, n_test):
        index = placeholder_index(500, 12)
        tr, te = make_split(index, "blue", SplitProtocol(train, test, 1))
        assert (len(tr), len(te)) == (n_train, n_test)
        assert not set(tr) & set(te)
        for subject in (0, 250, 499):
            assert sum(r.subject == subject for r in tr) == train

    def test_deterministic(self):
        index = placeholder_index(20, 12)
        a = make_split(index, "blue", SplitProtocol(3, 9, 5))
        assert a == make_split(index, "blue", SplitProtocol(3, 9, 5))

    def test_seeds_differ(self):
        index = placeholder_index(20, 12)
        splits = {tuple(make_split(index, "blue", SplitProtocol(3, 9, seed))[0]) for seed in range(20)}
        assert len(splits) == 20

    def test_test_set_truncated(self):
        tr, te = make_split(placeholder_index(4, 12), "blue", SplitProtocol(2, 3, 0))
        assert len(te) == 12
        for s in range(4):
            chosen = {r.sample_index for r in tr if r.subject == s}
            rest = [i for i in range(12) if i not in chosen][:3]
            assert [r.sample_index for r in te if r.subject == s] == rest

    def test_insufficient(self):
        with pytest.raises(InsufficientSamplesError):
            make_split(placeholder_index(2, 12), "blue", SplitProtocol(9, 9, 0))

    def test_protocol_parse(self):
        assert SplitProtocol.parse("3/9") == SplitProtocol(3, 9)
        for bad in ("3-9", "3/", "a/b", "0/3"):
            with pytest.raises(ValueError):
                SplitProtocol.parse(bad)


class TestAccuracy:
    def test_values(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
        assert accuracy([1, 2], [2, 1]) == 0.0
        assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])
        with pytest.raises(ValueError):
            accuracy([], [])


@pytest.fixture(scope="module")
def corpus():
    return synth_corpus(10, 12, 64)


@pytest.fixture(scope="module")
def cache():
    return FeatureCache()


class TestRunExperiment:
    def test_mslbp_separates_synthetic_classes(self, corpus, cache):
        row = run_experiment(corpus, "synthetic", "mslbp", DescriptorConfig(), SplitProtocol(6, 6, 1), cache=cache)
        assert row.accuracy >= 0.95
        assert row.accuracy == row.n_correct / row.n_test
        assert row.n_test == 60
        assert row.image_size == "64x64"
        assert row.lda_dim == 9
        assert 1 <= row.pca_dim <= 60 - 10 - 1
        assert min(row.extract_time, row.train_time, row.test_time) >= 0

    def test_mslbp_not_worse_than_lbp(self, corpus, cache):
        for seed in (1, 2):
            p = SplitProtocol(3, 9, seed)
            m = run_experiment(corpus, "synthetic", "mslbp", DescriptorConfig(), p, cache=cache).accuracy
            lb = run_experiment(corpus, "synthetic", "lbp", DescriptorConfig(), p, cache=cache).accuracy
            assert m >= lb

    def test_identical_classes_give_chance(self):
        img = synth_texture(0, 0, 24, 24)
        records = [SampleRecord(img, s, "synthetic", i) for s in range(2) for i in range(12)]
        index = DatasetIndex(tuple(records), 2, frozenset({"synthetic"}))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            row = run_experiment(index, "synthetic", "lbp", SMALL, SplitProtocol(6, 6, 3))
        assert row.accuracy == 0.5
        assert row.pca_dim == 0

    def test_no_timing_zeroes_times(self, corpus, cache):
        row = run_experiment(corpus, "synthetic", "lbp", SMALL, SplitProtocol(3, 9, 1), cache=cache, timing=False)
        assert (row.extract_time, row.train_time, row.test_time) == (0.0, 0.0, 0.0)

    def test_cache_reuses_features(self, corpus):
        cache = FeatureCache()
        run_experiment(corpus, "synthetic", "lbp", SMALL, SplitProtocol(3, 9, 1), cache=cache)
        assert len(cache) == 120
        run_experiment(corpus, "synthetic", "lbp", SMALL, SplitProtocol(3, 9, 2), cache=cache)
        assert len(cache) == 120

    def test_parallel_extraction_matches_sequential(self, corpus):
        recs = corpus.samples[:20]
        a, _, _ = extract_features(recs, "mslbp", SMALL, threads=1)
        b, _, _ = extract_features(recs, "mslbp", SMALL, threads=4)
        np.testing.assert_array_equal(a, b)

    def test_thread_env(self, corpus, monkeypatch):
        monkeypatch.setenv("TEXTUREKIT_THREADS", "2")
        X, _, sizes = extract_features(corpus.samples[:4], "lbp", SMALL)
        assert X.shape == (4, 256) and sizes == {(64, 64)}

    def test_needs_two_subjects(self):
        index = DatasetIndex((SampleRecord(synth_texture(0, i, 16, 16), 0, "synthetic", i) for i in range(4)), 1, {"synthetic"})
        with pytest.raises(ValueError):
            run_experiment(index, "synthetic", "lbp", SMALL, SplitProtocol(2, 2, 0))


def test_no_test_leakage(corpus):
    rng = np.random.default_rng(0)
    train, test = make_split(corpus, "synthetic", SplitProtocol(6, 6, 4))
    cache = FeatureCache()
    train_X, _, _ = extract_features(train, "mslbp", SMALL, cache)
    test_X, _, _ = extract_features(test, "mslbp", SMALL, cache)
    y = [r.subject for r in train]
    base = evaluate_split(train_X, y, test_X)
    permuted = evaluate_split(train_X, y, test_X[rng.permutation(len(test_X))])
    replaced = evaluate_split(train_X, y, rng.random(test_X.shape) * 1000)
    for other in (permuted, replaced):
        assert other.pca == base.pca
        assert other.lda == base.lda


def make_row(**overrides):
    row = dict(
        spectrum="blue", descriptor="mslbp", accuracy=0.75, n_correct=3, n_test=4,
        extract_time=1.5, train_time=0.25, test_time=0.125, pca_dim=40, lda_dim=9,
        image_size="128x128", seed=42, protocol="6/6",
    )
    row.update(overrides)
    return ReportRow(**row)


class TestReport:
    def test_single_row(self):
        text = emit_report([make_row()])
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert REPORT_COLUMNS[:3] == ("spectrum", "descriptor", "accuracy")
        assert REPORT_COLUMNS[-2:] == ("seed", "protocol")

    def test_table_grid(self):
        rows = [make_row(spectrum=s, descriptor=d) for s in ("blue", "green", "red", "nir") for d in ("lbp", "slbp", "mslbp")]
        assert len(emit_report(rows).splitlines()) == 13

    def test_round_trip(self):
        rows = [make_row(), make_row(accuracy=1 / 3, n_correct=1, n_test=3, extract_time=0.1 + 0.2), make_row(seed="mean", pca_dim=40.5)]
        assert parse_report(emit_report(rows)) == rows

    def test_empty(self):
        with pytest.raises(ValueError):
            emit_report([])

    def test_mean_row(self):
        rows = [make_row(seed=1, n_correct=3, accuracy=0.75), make_row(seed=2, n_correct=4, accuracy=1.0)]
        m = mean_row(rows)
        assert m.seed == "mean" and m.accuracy == 7 / 8 and m.pca_dim == 40 and m.n_test == 8


def test_run_seeds_appends_mean(corpus, cache):
    rows = run_seeds(corpus, "synthetic", "lbp", SMALL, 3, 9, [1, 2, 3], cache=cache, timing=False)
    assert [r.seed for r in rows] == [1, 2, 3, "mean"]
    assert rows[-1].n_correct == sum(r.n_correct for r in rows[:3])


def test_in_memory_records_load():
    img = GrayImage(np.zeros((4, 4), np.uint8))
    assert SampleRecord(img, 0, "synthetic", 0).load() is img
