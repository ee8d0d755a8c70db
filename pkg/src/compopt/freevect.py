"""Pushforward and pullback along finite-set functions.

For ``phi: [n] -> [m]`` the pushforward sums the entries of ``x in R^n`` that
land on the same target, and the pullback copies entries of ``y in R^m`` back
to every source that maps to them.  The two are adjoint.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

from .finset import FinFunction

__all__ = [
    "pushforward_apply",
    "pullback_apply",
    "pushforward_matrix",
    "pullback_matrix",
    "pushforward_sparse",
]


def _as_vector(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"{what}: expected a vector of length {n}, got shape {x.shape}")
    return x


def pushforward_apply(phi: FinFunction, x) -> np.ndarray:
    x = _as_vector(x, phi.dom_size, "pushforward")
    return np.bincount(phi.map, weights=x, minlength=phi.codom_size)


def pullback_apply(phi: FinFunction, y) -> np.ndarray:
    y = _as_vector(y, phi.codom_size, "pullback")
    return y[phi.map]


def pushforward_matrix(phi: FinFunction) -> np.ndarray:
    M = np.zeros((phi.codom_size, phi.dom_size))
    M[phi.map, np.arange(phi.dom_size)] = 1.0
    return M


def pullback_matrix(phi: FinFunction) -> np.ndarray:
    return pushforward_matrix(phi).T.copy()


def pushforward_sparse(phi: FinFunction) -> sparse.csr_array:
    n = phi.dom_size
    return sparse.csr_array(
        (np.ones(n), (phi.map, np.arange(n))), shape=(phi.codom_size, n)
    )
