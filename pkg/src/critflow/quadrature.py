"""Composite Gauss-Legendre rules used for time integrals."""

from __future__ import annotations

import numpy as np


def geometric_edges(t_lo: float, t_hi: float, ratio: float = 2.0) -> np.ndarray:
    """Panel edges from ``t_lo`` to ``t_hi`` with consecutive ratio at most ``ratio``."""
    if not 0 < t_lo < t_hi:
        raise ValueError("need 0 < t_lo < t_hi")
    count = max(1, int(np.ceil(np.log(t_hi / t_lo) / np.log(ratio))))
    return np.geomspace(t_lo, t_hi, count + 1)


def composite_gauss(edges: np.ndarray, points: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of ``points``-point Gauss-Legendre on every panel."""
    x, w = np.polynomial.legendre.leggauss(points)
    a, b = np.asarray(edges[:-1]), np.asarray(edges[1:])
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def near_zero_rule(T: float, t_min: float, ratio: float = 2.0, points: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Rule on ``[0, T]``: one panel ``[0, t_min]`` then geometric panels up to ``T``."""
    if T <= t_min:
        return composite_gauss(np.array([0.0, T]), points)
    edges = np.concatenate([[0.0], geometric_edges(t_min, T, ratio)])
    return composite_gauss(edges, points)
