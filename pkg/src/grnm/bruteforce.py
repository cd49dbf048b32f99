"""Slow reference minimizers for cross-checking the inner solver.

Two independent routes: long-run plain (non-accelerated) proximal descent,
and, in one or two dimensions, a zooming grid search over the model value.
Both are deliberately naive; they exist only to certify the fast paths.
"""

import math

import numpy as np

from . import kernels
from .subproblem import model_value


def model_value_batch(instance, points):
    """Model value at each row of ``points``; vectorized for grid scans."""
    points = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(points, axis=1)
    quad = 0.5 * np.einsum("ij,ij->i", points @ instance.H, points)
    return (
        points @ instance.g
        + quad
        + (instance.mu / instance.p) * norms**instance.p
        + instance.rho * np.abs(points).sum(axis=1)
    )


def search_radius(instance):
    """Radius certainly containing the minimizer, with 10% headroom.

    The optimality identity forces mu ||d||^(p-1) <= ||g|| + sqrt(n) rho.
    """
    top = float(np.linalg.norm(instance.g)) + math.sqrt(instance.n) * instance.rho
    return 1.1 * (top / instance.mu) ** (1.0 / (instance.p - 1.0))


def prox_descent_reference(instance, max_iter=1_000_000):
    """Plain proximal descent from 0 until a bitwise fixed point (or budget)."""
    d, _ = kernels.plain_prox_min(
        instance.g,
        instance.H,
        instance.mu,
        instance.p,
        instance.rho,
        np.zeros(instance.n),
        int(max_iter),
    )
    return d


def grid_reference(instance, points_per_axis=41, rounds=20):
    """Zooming grid search; only sensible for n <= 2.

    Each round evaluates a full grid in a box, then recenters on the best
    point with the half-width cut to 2.5 grid spacings.  An odd point count
    keeps 0 (the l1 kink) on the initial grid.
    """
    n = instance.n
    if n > 2:
        raise ValueError("grid search is limited to n <= 2")
    center = np.zeros(n)
    half = search_radius(instance)
    floor = 1e-9 * max(1.0, half)
    best = center.copy()
    for _ in range(rounds):
        axes = [np.linspace(center[i] - half, center[i] + half, points_per_axis) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        values = model_value_batch(instance, grid)
        best = grid[int(np.argmin(values))]
        center = best
        spacing = 2.0 * half / (points_per_axis - 1)
        half = 2.5 * spacing
        if half < floor:
            break
    return best


def reference_minimizer(instance, max_iter=1_000_000):
    """Best of the available slow routes, by model value."""
    candidates = [prox_descent_reference(instance, max_iter)]
    if instance.n <= 2:
        candidates.append(grid_reference(instance))
    values = [model_value(instance, d) for d in candidates]
    return candidates[int(np.argmin(values))]
