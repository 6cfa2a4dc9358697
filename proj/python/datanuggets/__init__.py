"""Data nugget reduction and weighted analytics.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (  # noqa: F401
    NuggetSet,
    NumericError,
    ValidationError,
    aggregate_unique_rows,
    best_permutation_accuracy,
    choose_k,
    create,
    decompose_covariance,
    density_grid,
    estimate_quantiles,
    gen_binary_patients,
    gen_gaussian4,
    gen_largep,
    gen_smile,
    per_cluster_accuracy,
    refine,
    weighted_kmeans,
    weighted_mean_cov,
    wpca,
    wwcss,
)

__version__ = "0.1.0"
