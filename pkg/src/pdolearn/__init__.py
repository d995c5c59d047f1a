"""Learning elliptic pseudo-differential operators in periodic biorthogonal wavelet coordinates."""

from .compression import CompressionParams, SupportMask, build_mask, build_mask_new, sparsity_stats
from .estimator import EstimatorConfig, LearnedOperator, error_report, estimate, rho, select_parameters
from .fields import Dataset, GRFSpec, OperatorSpec, generate_dataset
from .galerkin import BlockMatrix, assemble_matrix, weighted_opnorm
from .wavelets import CoefVector, WaveletBasis, WaveletParams

__all__ = [
    "BlockMatrix",
    "CoefVector",
    "CompressionParams",
    "Dataset",
    "EstimatorConfig",
    "GRFSpec",
    "LearnedOperator",
    "OperatorSpec",
    "SupportMask",
    "WaveletBasis",
    "WaveletParams",
    "assemble_matrix",
    "build_mask",
    "build_mask_new",
    "error_report",
    "estimate",
    "generate_dataset",
    "rho",
    "select_parameters",
    "sparsity_stats",
    "weighted_opnorm",
]
