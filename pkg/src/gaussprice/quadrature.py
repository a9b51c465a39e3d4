"""Gauss rules from the Golub-Welsch eigenproblem.

The nodes of an n-point Gauss rule are the eigenvalues of the symmetric
tridiagonal Jacobi matrix of the orthogonal polynomial recurrence; the
weights are ``mu0 * v[0]**2`` with ``v`` the normalized eigenvectors.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidParameter

MAX_ORDER = 200


def _golub_welsch(off_diag: np.ndarray, mu0: float) -> tuple[np.ndarray, np.ndarray]:
    diag = np.zeros(off_diag.size + 1)
    nodes = eigh_tridiagonal(diag, off_diag, eigvals_only=True)
    # v[0]**2 underflows for the outermost nodes; use the equivalent
    # Christoffel form 1 / sum_k p_k(x)**2 with orthonormal p_k instead
    p_prev, p = np.zeros_like(nodes), np.ones_like(nodes)
    norm = np.ones_like(nodes)
    for k, b in enumerate(off_diag):
        b_prev = off_diag[k - 1] if k else 0.0
        p_prev, p = p, (nodes * p - b_prev * p_prev) / b
        norm += p * p
    weights = mu0 / norm
    # both weight functions here are even: enforce exact mirror symmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise InvalidParameter(f"quadrature order must be in [1, {MAX_ORDER}], got {order}")


@lru_cache(maxsize=None)
def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite rule: sum(w * f(x)) ~ E[f(Z)], Z ~ N(0, 1).

    Weights sum to one.
    """
    _check_order(order)
    if order == 1:
        return np.zeros(1), np.ones(1)
    k = np.arange(1, order, dtype=float)
    nodes, weights = _golub_welsch(np.sqrt(k), 1.0)
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [-1, 1]."""
    _check_order(order)
    if order == 1:
        return np.zeros(1), np.full(1, 2.0)
    k = np.arange(1, order, dtype=float)
    nodes, weights = _golub_welsch(k / np.sqrt(4.0 * k * k - 1.0), 2.0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def legendre_on_cells(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over consecutive cells ``edges``."""
    t, w = gauss_legendre(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = (lo + hi) * 0.5 + half * t
    return x.ravel(), (half * w).ravel()


def tensor_grid(nodes: np.ndarray, weights: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Full tensor product of a 1-d rule; returns points (N, dim) and weights (N,)."""
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([weights] * dim), indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return pts, w
