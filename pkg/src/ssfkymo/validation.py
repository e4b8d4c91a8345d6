"""Input checks shared by the estimators."""
import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import PartitionError, SymmetryError

SYMMETRY_TOL = 1e-9


def check_distance_matrix(D, tol=SYMMETRY_TOL):
    """Validate a square, finite, symmetric, non-negative matrix; zero its diagonal."""
    D = check_array(D, dtype=np.float64, ensure_min_samples=2, ensure_min_features=2)
    if D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if np.max(np.abs(D - D.T)) > tol:
        raise SymmetryError(f"distance matrix asymmetric by {np.max(np.abs(D - D.T)):.3g}")
    if np.any(D < 0):
        raise ValueError("distances must be non-negative")
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def check_labels(labels, n):
    labels = list(labels)
    if len(labels) != n:
        raise PartitionError(f"{len(labels)} labels for {n} items")
    if n == 0:
        raise PartitionError("no items")
    return labels
