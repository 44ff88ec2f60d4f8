import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def l1_ball_grid(steps=201, radius=1.0):
    """Dense grid of the 2-d l1 ball."""
    ticks = np.linspace(-radius, radius, steps)
    xx, yy = np.meshgrid(ticks, ticks)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[np.abs(pts).sum(axis=1) <= radius + 1e-12]


def simplex_grid(steps=2001):
    """Dense grid of the 2-d unit simplex."""
    p = np.linspace(0.0, 1.0, steps)
    return np.column_stack([p, 1.0 - p])


def ball_grid(steps=201, radius=1.0, dim=2):
    ticks = np.linspace(-radius, radius, steps)
    grids = np.meshgrid(*([ticks] * dim))
    pts = np.column_stack([g.ravel() for g in grids])
    return pts[np.linalg.norm(pts, axis=1) <= radius + 1e-12]


def grid_argmin_distance(grid, v):
    """Brute-force nearest grid point to v."""
    d2 = np.sum((grid - np.asarray(v)) ** 2, axis=1)
    return grid[np.argmin(d2)]
