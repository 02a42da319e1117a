"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def check_feature_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={X.ndim}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} has no samples")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"y has shape {y.shape}, expected ({n_samples},)")
    values = np.unique(y)
    if not np.all(np.isin(values, (0, 1))):
        raise ValueError("labels must be binary (0/1)")
    return y.astype(np.int64)


def check_group_sizes(group, n_samples: int) -> np.ndarray:
    group = np.asarray(group, dtype=np.int64)
    if group.ndim != 1 or group.shape[0] == 0:
        raise ValueError("group must be a non-empty 1-d array of sizes")
    if np.any(group < 1):
        raise ValueError("group sizes must be positive")
    if int(group.sum()) != n_samples:
        raise ValueError(
            f"group sizes sum to {int(group.sum())}, expected {n_samples}"
        )
    return group
