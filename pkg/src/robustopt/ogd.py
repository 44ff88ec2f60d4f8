"""Online stochastic subgradient ascent on a convex set, with regret
measurement against the best fixed comparator.

The engine maximizes a sequence of concave reward functions h_t given a
noisy gradient oracle whose output g satisfies E[g] = lambda_t * grad h_t
with |lambda_t - 1| <= nu and E||g||^2 <= eff_G2^2.  Steps follow the
canonical 1-indexed schedule eta_t = D / ((1 - nu) * eff_G2 * sqrt(t)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bounds, ParameterError, compute_step_size

__all__ = [
    "OgdTrace",
    "OsgdAbort",
    "run_osgd",
    "measure_regret",
    "ball_linear_maximizer",
]


class OsgdAbort(RuntimeError):
    """The gradient oracle returned non-finite values."""


@dataclass(eq=False)
class OgdTrace:
    """Per-step record of one ascent run."""

    iterates: np.ndarray      # T x d
    values: np.ndarray        # realized h_t(u_t)
    gradients: np.ndarray     # T x d oracle outputs
    step_sizes: np.ndarray    # T


def run_osgd(oracle, losses, u0, projector, bounds, eff_G2, T, rng):
    """Run T projected ascent steps from u0.

    oracle(t, u, rng) returns the stochastic gradient for step t (1-indexed);
    losses(t, u) the realized reward.  projector maps points back onto the
    feasible set.
    """
    if T < 1:
        raise ParameterError("T must be at least 1")
    u = np.asarray(u0, dtype=float).copy()
    dim = u.size
    iterates = np.empty((T, dim))
    values = np.empty(T)
    gradients = np.empty((T, dim))
    steps = np.empty(T)
    for t in range(1, T + 1):
        iterates[t - 1] = u
        values[t - 1] = losses(t, u)
        g = np.asarray(oracle(t, u, rng), dtype=float)
        if not np.all(np.isfinite(g)):
            raise OsgdAbort(f"non-finite gradient at step {t}")
        gradients[t - 1] = g
        eta = compute_step_size(t - 1, bounds, eff_G2)
        steps[t - 1] = eta
        u = projector(u + eta * g)
    return OgdTrace(iterates, values, gradients, steps)


def _comparator_point(comparator):
    if callable(comparator):
        return np.asarray(comparator(), dtype=float), None
    arr = np.asarray(comparator, dtype=float)
    if arr.ndim == 1:
        return arr, None
    return None, arr  # grid of candidate points, one per row


def measure_regret(trace, losses, comparator):
    """Average regret against the best fixed point:
    max_u (1/T) sum_t h_t(u) - (1/T) sum_t h_t(u_t).

    comparator is the maximizing point itself, a callable producing it, or
    a grid of candidate points (rows) over which the max is taken.
    """
    T = trace.values.size
    point, grid = _comparator_point(comparator)
    if point is not None:
        best = np.mean([losses(t, point) for t in range(1, T + 1)])
    else:
        best = max(np.mean([losses(t, row) for t in range(1, T + 1)])
                   for row in grid)
    return float(best - trace.values.mean())


def ball_linear_maximizer(alphas, center=None, radius=1.0):
    """Closed-form maximizer of (1/T) sum_t alpha_t . u over the ball:
    center + radius * S/||S|| with S the summed coefficients."""
    S = np.sum(np.asarray(alphas, dtype=float), axis=0)
    if center is None:
        center = np.zeros(S.size)
    center = np.asarray(center, dtype=float)
    norm = np.linalg.norm(S)
    if norm == 0.0:
        return center.copy()
    return center + radius * S / norm
