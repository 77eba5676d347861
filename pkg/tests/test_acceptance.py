"""Exit criteria for the toolkit, one test (or group) per criterion.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL/SKIP line per
criterion in the terminal summary. Criterion 9 needs the PolyU
multispectral ROI set; point ``TEXTUREKIT_POLYU_ROOT`` at it (and
``TEXTUREKIT_POLYU_LAYOUT`` if it does not use the default layout).
"""

import os
import time

import numpy as np
import pytest

from oracles import charpoly_eigenvalues, naive_histograms
from test_classify import gaussian_clusters
from texturekit.classify import lda_fit, lda_predict_many
from texturekit.cli import main
from texturekit.descriptors import DescriptorConfig, lbp_histogram, mslbp_feature, slbp_histogram
from texturekit.evaluation import FeatureCache, SplitProtocol, run_experiment
from texturekit.imgio import DEFAULT_LAYOUT, index_dataset, synth_corpus, synth_texture, write_synth_corpus
from texturekit.reduction import RetentionPolicy, pca_fit

criterion = pytest.mark.criterion


def random_images(count, seed, max_side=16, min_side=5):
    rng = np.random.default_rng(seed)
    return [
        rng.integers(0, 256, size=(int(rng.integers(min_side, max_side + 1)), int(rng.integers(min_side, max_side + 1))), dtype=np.uint8)
        for _ in range(count)
    ]


@criterion(1, "descriptor oracle equivalence (50 images, r in {1,2}, l in 0..3)")
def test_descriptor_oracle_equivalence():
    images = random_images(50, seed=2024)
    shift_bounds = [0, 1, 2, 3]
    impl_time = 0.0
    t_start = time.perf_counter()
    for img in images:
        pix = img.tolist()
        for r in (1, 2):
            expected = naive_histograms(pix, 8, r, shift_bounds)
            t0 = time.perf_counter()
            lbp = lbp_histogram(img, 8, r)
            slbp = {l: slbp_histogram(img, 8, r, l) for l in shift_bounds}
            impl_time += time.perf_counter() - t0
            counts0, valid = expected[0]
            assert lbp.valid_positions == valid
            np.testing.assert_array_equal(lbp.bins, counts0)
            for l in shift_bounds:
                counts, _ = expected[l]
                np.testing.assert_allclose(slbp[l].bins, np.array(counts) / (2 * l + 1), rtol=1e-9, atol=0)
    total = time.perf_counter() - t_start
    print(f"implementation {impl_time:.3f} s, with oracle {total:.2f} s")
    assert total < 10.0


@criterion(2, "reduction identities (l=0 equals LBP; MSLBP blocks equal per-radius SLBP)")
def test_reduction_identities():
    t0 = time.perf_counter()
    for img in random_images(20, seed=7, max_side=24, min_side=9):
        for r in (1, 2, 3):
            a, b = slbp_histogram(img, 8, r, 0), lbp_histogram(img, 8, r)
            assert a.valid_positions == b.valid_positions
            assert np.array_equal(a.bins, b.bins)
    cfg = DescriptorConfig(radii=(1, 2, 4, 6), shift_bound=3)
    for c in range(5):
        img = synth_texture(c, 1, 32, 32)
        feat = mslbp_feature(img, cfg)
        for i, r in enumerate(cfg.radii):
            assert np.array_equal(feat[256 * i : 256 * (i + 1)], slbp_histogram(img, 8, r, 3).bins)
    assert time.perf_counter() - t0 < 5.0


@criterion(3, "histogram mass equals valid positions (100 random triples)")
def test_histogram_mass():
    rng = np.random.default_rng(99)
    for _ in range(100):
        h, w = rng.integers(7, 40, size=2)
        img = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        r = int(rng.integers(1, 4))
        l = int(rng.integers(0, 5))
        valid = (h - 2 * r) * (w - 2 * r)
        lbp = lbp_histogram(img, 8, r)
        assert lbp.valid_positions == valid and lbp.bins.sum() == valid
        s = slbp_histogram(img, 8, r, l).bins.sum()
        assert abs(s - valid) <= 1e-9 * valid


@criterion(4, "default feature length is 8 x 256 = 2048")
def test_feature_shape():
    assert DescriptorConfig().feature_length == 2048
    assert mslbp_feature(synth_texture(0, 0, 128, 128)).shape == (8 * 256,)


@criterion(5, "PCA orthonormality, trace identity and characteristic-polynomial oracle")
def test_pca_checks():
    rng = np.random.default_rng(5)
    for shape in [(40, 12), (15, 2048), (60, 60)]:
        X = rng.normal(size=shape) * rng.uniform(0.1, 5, size=shape[1])
        model = pca_fit(X, RetentionPolicy(components=shape[1]))
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(model.retained_dim)).max() < 1e-8
        trace = np.trace(np.cov(X, rowvar=False))
        assert abs(model.eigenvalues.sum() - trace) <= 1e-8 * trace
    for _ in range(40):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(d + 1, 7))
        X = rng.normal(size=(n, d)) * rng.uniform(0.5, 4, size=d)
        model = pca_fit(X, RetentionPolicy(components=d))
        expected = charpoly_eigenvalues(np.cov(X, rowvar=False).reshape(d, d))
        assert np.abs(model.eigenvalues - expected).max() < 1e-8 * max(1.0, expected[0])


@criterion(6, "LDA resubstitution on separable Gaussians and argmax invariances")
@pytest.mark.parametrize("n_classes", [2, 5, 10])
def test_lda_resubstitution(n_classes):
    X, y = gaussian_clusters(n_classes, 15, 8, gap=10.0, std=1.0, seed=n_classes)
    model = lda_fit(X, y)
    assert lda_predict_many(model, X) == list(y)


@criterion(6, "LDA resubstitution on separable Gaussians and argmax invariances")
def test_lda_invariances():
    rng = np.random.default_rng(31)
    for trial in range(20):
        X, y = gaussian_clusters(5, 8, 6, gap=1.5, seed=500 + trial)
        queries = rng.normal(size=(25, 6)) * 2
        base = lda_predict_many(lda_fit(X, y), queries)
        shift = rng.normal(size=6) * 100
        assert lda_predict_many(lda_fit(X + shift, y), queries + shift) == base
        s = float(rng.uniform(0.01, 100))
        assert lda_predict_many(lda_fit(X * s, y), queries * s) == base


@criterion(7, "synthetic protocol results (ordering, training benefit, MSLBP 6/6 >= 0.95)")
def test_synthetic_tables():
    t0 = time.perf_counter()
    corpus = synth_corpus(10, 12, 64)
    cache = FeatureCache()
    cfg = DescriptorConfig()
    acc = {}
    for train, test in ((3, 9), (6, 6)):
        for seed in range(1, 6):
            for name in ("lbp", "slbp", "mslbp"):
                row = run_experiment(corpus, "synthetic", name, cfg, SplitProtocol(train, test, seed), cache=cache)
                acc[(train, seed, name)] = row.accuracy
    for train in (3, 6):
        print(
            f"{train}/{12 - train}: "
            + ", ".join(f"{n} {np.mean([acc[(train, s, n)] for s in range(1, 6)]):.3f}" for n in ("lbp", "slbp", "mslbp"))
        )
    for (train, seed, name), value in acc.items():
        if name == "mslbp":
            assert value >= acc[(train, seed, "lbp")], (train, seed)
            assert value >= acc[(train, seed, "slbp")], (train, seed)
    for name in ("lbp", "slbp", "mslbp"):
        mean6 = np.mean([acc[(6, s, name)] for s in range(1, 6)])
        mean3 = np.mean([acc[(3, s, name)] for s in range(1, 6)])
        assert mean6 >= mean3, name
    assert np.mean([acc[(6, s, "mslbp")] for s in range(1, 6)]) >= 0.95
    assert time.perf_counter() - t0 < 300


@criterion(8, "identical runs with --no-timing give byte-identical reports")
def test_determinism(tmp_path):
    write_synth_corpus(tmp_path / "corpus", 6, 12, 48)
    outputs = []
    for i in range(2):
        out = tmp_path / f"report{i}.csv"
        code = main([
            "evaluate", "--dataset", str(tmp_path / "corpus"), "--descriptor", "all",
            "--protocol", "3/9", "--seed", "11", "--no-timing", "--output", str(out),
        ])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert len(outputs[0].splitlines()) == 4


@criterion(9, "PolyU blue spectrum, MSLBP 6/6 >= 99.0% (skipped without the dataset)")
def test_polyu_blue():
    root = os.environ.get("TEXTUREKIT_POLYU_ROOT")
    if not root:
        pytest.skip("TEXTUREKIT_POLYU_ROOT not set; PolyU multispectral ROI set unavailable")
    index = index_dataset(root, os.environ.get("TEXTUREKIT_POLYU_LAYOUT", DEFAULT_LAYOUT))
    assert index.subject_count == 500 and index.samples_per_subject("blue") == 12
    row = run_experiment(index, "blue", "mslbp", DescriptorConfig(), SplitProtocol(6, 6, 42))
    print(f"PolyU blue MSLBP 6/6 accuracy {row.accuracy:.4f} (pca_dim {row.pca_dim})")
    assert row.accuracy >= 0.990
