"""Clustering compound extremes into asymptotically independent blocks."""

__version__ = "0.1.0"

from .data import Dataset, GroupLayout, RankMatrix, block_maxima, load_dataset, rank_matrix
from .tail import (
    SecoMatrix,
    ext_coeff_eks,
    ext_coeff_mad,
    ext_corr,
    madogram,
    seco_matrix,
    seco_pair,
    seco_partition,
)
from .models import NestedModelSpec, sample_ai_blocks, sample_logistic, sample_nested_logistic
from .clustering import Partition, caice, choose_k, hclust, kmedoids, select_tau, silhouette
from .validation import ari

__all__ = [
    "Dataset",
    "GroupLayout",
    "NestedModelSpec",
    "Partition",
    "RankMatrix",
    "SecoMatrix",
    "ari",
    "block_maxima",
    "caice",
    "choose_k",
    "ext_coeff_eks",
    "ext_coeff_mad",
    "ext_corr",
    "hclust",
    "kmedoids",
    "load_dataset",
    "madogram",
    "rank_matrix",
    "sample_ai_blocks",
    "sample_logistic",
    "sample_nested_logistic",
    "seco_matrix",
    "seco_pair",
    "seco_partition",
    "select_tau",
    "silhouette",
]
