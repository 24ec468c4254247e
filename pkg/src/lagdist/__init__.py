"""Lag distributions of genomic words: counting, gamma-plus-peak decomposition,
PCA features, k-means clustering and the simulation study used to validate it."""

__version__ = "0.1.0"

from .cluster import (Partition, ValidityReport, c_index, ch_index, kmeans, lloyd,
                      silhouette_index, silhouette_values, sweep_nc)
from .decompose import (BaselineFit, Decomposition, GammaParams, PeakFunction, decompose,
                        decompose_all, extract_peaks, fit_baseline_lts, gamma_density,
                        lts_objective, poisson_quantile, poisson_quantiles)
from .errors import (DataError, DegenerateInputError, EmptyInputError, FitError, InvalidCaseError,
                     LagdistError, NumericalError, UndefinedIndexError)
from .evaluate import StabilityReport, adjusted_rand, bootstrap_stability, jaccard
from .features import ScoreMatrix, assemble_features, cdf_rows, decomposition_features, pca_reduce, to_cdf
from .genomescan import (LagHistogram, LagScanner, SequenceSegment, count_lags, count_lags_file,
                         parse_sequences, read_histograms, write_histograms)
from .simgen import SimCase, StudySettings, all_cases, generate_dataset, run_study

__all__ = [name for name in dir() if not name.startswith("_")]
