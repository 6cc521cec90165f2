"""Input checks shared by the estimator and the public entry points."""

from __future__ import annotations

import numpy as np

from .spectral import Grid, GridMismatchError

__all__ = ["check_field", "check_state_array"]


def check_field(f, grid: Grid | None = None, name: str = "field", *, allow_nonfinite=False) -> np.ndarray:
    """Return ``f`` as a float array after checking its shape and values.

    Parameters
    ----------
    f : array_like
        Samples of a scalar field, shape ``grid.shape`` when ``grid`` is given.
    grid : Grid, optional
        Grid the field must live on.
    name : str
        Used in error messages.
    allow_nonfinite : bool
        Skip the finiteness check.
    """
    arr = np.asarray(f, dtype=float)
    if grid is not None and arr.shape != grid.shape:
        raise GridMismatchError(f"{name} has shape {arr.shape}, grid expects {grid.shape}")
    if grid is None and arr.ndim not in (2, 3):
        raise ValueError(f"{name} must be a 2D or 3D array, got {arr.ndim} dimensions")
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_state_array(X, *, dims: int | None = None) -> np.ndarray:
    """Validate a stacked ``(phi, u)`` array of shape ``(2, [nz,] ny, nx)``.

    Every spatial extent must be even and at least 4, matching :class:`Grid`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim not in (3, 4) or X.shape[0] != 2:
        raise ValueError(f"expected an array of shape (2, [nz,] ny, nx), got {X.shape}")
    if dims is not None and X.ndim - 1 != dims:
        raise ValueError(f"expected {dims} spatial dimensions, got {X.ndim - 1}")
    for extent in X.shape[1:]:
        if extent < 4 or extent % 2:
            raise ValueError(f"spatial extents must be even and >= 4, got {X.shape[1:]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("state array contains NaN or infinite values")
    return X
