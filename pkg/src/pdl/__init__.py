"""Pooling-invariant dictionary learning.

Learn an over-complete patch dictionary with spherical K-means, encode
and spatially pool threshold activations, then shrink the dictionary by
running affinity propagation on the pooled-activation covariance and
rescale the surviving features with the induced subset transform.
"""

__version__ = "0.1.0"

from pdl.classifier import LinearModel, evaluate, train_ovr_svm
from pdl.datasets import LabeledDataset, load_cifar10, load_stl10
from pdl.dictionary import Dictionary, kmeans_spherical, random_dictionary
from pdl.encoder import EncoderConfig, encode_and_pool, sample_pooled_regions
from pdl.modelfile import ModelFile
from pdl.nystrom import (NystromTransform, PcaTransform, fit_pca,
                         fit_transform_matrix, nystrom_reconstruct)
from pdl.patches import ZcaWhitener, contrast_normalize, extract_dense, fit_zca
from pdl.selection import (ExemplarSet, affinity_propagation,
                           build_similarity, estimate_covariance,
                           select_k_exemplars)

__all__ = [
    "LinearModel", "evaluate", "train_ovr_svm",
    "LabeledDataset", "load_cifar10", "load_stl10",
    "Dictionary", "kmeans_spherical", "random_dictionary",
    "EncoderConfig", "encode_and_pool", "sample_pooled_regions",
    "ModelFile",
    "NystromTransform", "PcaTransform", "fit_pca", "fit_transform_matrix",
    "nystrom_reconstruct",
    "ZcaWhitener", "contrast_normalize", "extract_dense", "fit_zca",
    "ExemplarSet", "affinity_propagation", "build_similarity",
    "estimate_covariance", "select_k_exemplars",
]
