"""Texture-descriptor identification: LBP, shift-LBP and multi-radius
shift-LBP histograms, PCA reduction and Fisher LDA matching."""

from .classify import LdaModel, Prediction, lda_fit, lda_predict, lda_predict_many, lda_transform
from .descriptors import (
    DescriptorConfig,
    Histogram,
    extract,
    lbp_code,
    lbp_histogram,
    mslbp_feature,
    pattern_code,
    sample_neighbor,
    slbp_codes,
    slbp_histogram,
)
from .evaluation import (
    FeatureCache,
    ReportRow,
    SplitProtocol,
    accuracy,
    emit_report,
    make_split,
    parse_report,
    run_experiment,
    run_seeds,
)
from .imgio import (
    DatasetIndex,
    GrayImage,
    SampleRecord,
    index_dataset,
    load_grayscale,
    save_pgm,
    synth_corpus,
    synth_texture,
)
from .reduction import PcaModel, RetentionPolicy, pca_fit, pca_project

__version__ = "0.1.0"
