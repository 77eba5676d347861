"""
LBP, shift-LBP and multi-radius shift-LBP on one texture
=========================================================

Builds a synthetic grating, looks at the codes of a single pixel, and
compares the three histogram features.
"""

import numpy as np

from texturekit import (
    DescriptorConfig,
    lbp_code,
    lbp_histogram,
    mslbp_feature,
    sample_neighbor,
    slbp_codes,
    slbp_histogram,
    synth_texture,
)

img = synth_texture(class_id=3, sample_seed=0, width=64, height=64)
print(img, "mean intensity", img.pixels.mean().round(1))

# The eight neighbours of pixel (20, 20) at radius 2; diagonals are interpolated.
x, y = 20, 20
print("centre", img.pixels[y, x])
print("neighbours", [round(sample_neighbor(img, x, y, p, 8, 2), 2) for p in range(8)])

# Plain LBP gives one code; shift-LBP gives one code per threshold shift.
print("LBP code", lbp_code(img, x, y, 8, 2))
print("SLBP codes for k=-3..3", slbp_codes(img, x, y, 8, 2, 3))

# Histograms: LBP counts sum to the number of scored pixels, and so do the
# shift-normalised SLBP bins.
h_lbp = lbp_histogram(img, 8, 2)
h_slbp = slbp_histogram(img, 8, 2, 3)
print("LBP mass", h_lbp.bins.sum(), "SLBP mass", round(h_slbp.bins.sum(), 9), "positions", h_lbp.valid_positions)

# SLBP spreads mass over more bins than LBP on the same image.
print("occupied bins: LBP", np.count_nonzero(h_lbp.bins), "SLBP", np.count_nonzero(h_slbp.bins))

# The multi-radius feature concatenates one SLBP histogram per radius.
feature = mslbp_feature(img, DescriptorConfig())
print("MSLBP feature length", feature.shape[0])
for i, r in enumerate(DescriptorConfig().radii):
    block = feature[256 * i : 256 * (i + 1)]
    print(f"  r={r}: {np.count_nonzero(block):3d} occupied bins, mass {block.sum():.1f}")
