from .bow import (Dictionary, assign_words, bow_pyramid, bow_pyramid_batch, build_dictionary,
                  histogram_intersection)
from .hog import HOG_DIM, HogFeature, compute_hog, hog_batch
from .sift import SiftField, alignment_energies, alignment_energy, dense_sift, dense_sift_batch
from .whitening import WhiteningStats, estimate_whitening_stats, whiten_hog

__all__ = [
    "Dictionary", "assign_words", "bow_pyramid", "bow_pyramid_batch", "build_dictionary",
    "histogram_intersection", "HOG_DIM", "HogFeature", "compute_hog", "hog_batch", "SiftField",
    "alignment_energies", "alignment_energy", "dense_sift", "dense_sift_batch", "WhiteningStats",
    "estimate_whitening_stats", "whiten_hog",
]
