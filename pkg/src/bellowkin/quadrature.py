"""Deterministic composite Gauss-Legendre quadrature on fixed panels.

All integrals in this package run on the same fixed node layout so that
quantities differentiated under the integral sign (Jacobians) stay exactly
consistent with the integrals they derive from.
"""

import numpy as np

# 5-point Gauss-Legendre rule on [-1, 1]; exact for polynomials up to degree 9.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def panel_nodes(a: float, b: float, n_panels: int):
    """Nodes and weights of the composite 5-point rule on [a, b].

    Returns (nodes, weights) as flat arrays of length 5*n_panels.
    """
    if n_panels < 1:
        raise ValueError("n_panels must be >= 1")
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def integrate(fn, a: float, b: float, n_panels: int):
    """Integral of a (vectorized) scalar or vector-valued fn over [a, b]."""
    nodes, weights = panel_nodes(a, b, n_panels)
    vals = np.asarray(fn(nodes))
    return vals @ weights if vals.ndim == 1 else np.tensordot(vals, weights, axes=([-1], [0]))


def cumulative_stations(theta_fn, stations):
    """Planar positions at the given arc stations from a tangent-angle field.

    Integrates (cos theta, sin theta) with one 5-point panel per interval
    between consecutive stations, accumulating from the first station, which
    is taken as the origin.  Returns an array of shape (len(stations), 2).
    """
    stations = np.asarray(stations, dtype=float)
    if stations.size < 1:
        raise ValueError("need at least one station")
    pos = np.zeros((stations.size, 2))
    if stations.size == 1:
        return pos
    a = stations[:-1]
    b = stations[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    th = theta_fn(nodes.ravel()).reshape(nodes.shape)
    wx = (np.cos(th) * _GL_W[None, :]).sum(axis=1) * half
    wz = (np.sin(th) * _GL_W[None, :]).sum(axis=1) * half
    pos[1:, 0] = np.cumsum(wx)
    pos[1:, 1] = np.cumsum(wz)
    return pos
