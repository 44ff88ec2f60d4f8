"""Built-in property suites behind `robustopt validate`.

These re-run the library's statistical and geometric contracts at reduced
scale (the full-scale versions live in the test suite) and print one
PASS/FAIL line per check.
"""

from __future__ import annotations

import math

import numpy as np

from . import applications as apps
from .core import Bounds, QueryLedger, compute_horizon, compute_step_size, effective_G2sq
from .projections import SetDescriptor
from .sampling import (
    PerturbationModel,
    QueryCostModel,
    assemble_stochastic_gradient,
    build_l1_distribution,
    draw_samples,
    estimate_l1_norm,
)


def _check_projection_kind(descriptor, rng, n_points, tol=1e-9):
    dim = descriptor.dim
    pool = np.array([descriptor.random_member(rng) for _ in range(50)])
    for _ in range(n_points):
        v = 3.0 * rng.standard_normal(dim)
        p = descriptor.project(v)
        if not descriptor.contains(p, tol):
            return False
        if np.linalg.norm(descriptor.project(p) - p) > tol:
            return False
        if np.max((pool - p) @ (v - p)) > tol:
            return False
        w = 3.0 * rng.standard_normal(dim)
        q = descriptor.project(w)
        if np.linalg.norm(p - q) > np.linalg.norm(v - w) + tol:
            return False
    return True


def _projections_ok(rng, n_points):
    kinds = [
        SetDescriptor.ball(np.zeros(4), 1.0),
        SetDescriptor.simplex(4),
        SetDescriptor.l1_ball(4),
        SetDescriptor.box(-np.ones(4), np.ones(4)),
        SetDescriptor.psd_ball(3, 1.0),
        SetDescriptor.psd_ball_corner(3, 2.0, 1.0),
    ]
    return all(_check_projection_kind(k, rng, n_points) for k in kinds)


def _sampling_moments_ok(rng, n_draws):
    instance = apps.random_feasible_lp(m=3, n=4, d=5, seed=7)
    problem = apps.lp_problem(instance)
    bounds = apps.lp_constants(instance)
    x = instance.domain.project(rng.standard_normal(4))
    noise = rng.standard_normal((3, 5))
    noise /= np.maximum(1.0, np.linalg.norm(noise, axis=1))[:, None]
    ledger = QueryLedger()
    dist = build_l1_distribution(problem, x, noise, ledger)
    true = problem.subgradient_matrix(x, noise)
    cost = QueryCostModel()
    model = PerturbationModel("exact")
    s = 4
    acc = np.zeros((n_draws, 3, 5))
    for k in range(n_draws):
        draw = draw_samples(dist, s, 0.01, rng, ledger, cost)
        est = estimate_l1_norm(dist, 0.25, 0.01, model, rng, ledger, cost)
        acc[k] = assemble_stochastic_gradient(draw.pairs, dist, est.gamma, s,
                                              ledger).dense(3, 5)
    mean = acc.mean(axis=0)
    se = acc.std(axis=0) / math.sqrt(n_draws) + 1e-12
    if np.any(np.abs(mean - true) > 6.0 * se):
        return False
    sq = np.sum(acc**2, axis=2)
    bound = effective_G2sq(bounds, s)
    for i in range(3):
        se_i = sq[:, i].std() / math.sqrt(n_draws)
        if sq[:, i].mean() > bound + 4.0 * se_i:
            return False
    return True


def _formulas_ok():
    bounds = Bounds(D=2.0, F=1.0, G2=1.0, G1=1.0, Ginf=1.0, nu=0.25)
    if compute_horizon(bounds, 1.0, 10, 0.1, 0.1) != 3600:
        return False
    if abs(compute_step_size(3, bounds, 1.0) - 4.0 / 3.0) > 1e-12:
        return False
    b2 = Bounds(D=1.0, F=1.0, G2=1.0, G1=4.0, Ginf=2.0)
    return abs(effective_G2sq(b2, 1) - 8.0) < 1e-12


def _bounds_dominate_ok(rng, n_points):
    instance = apps.random_feasible_lp(m=4, n=5, d=3, seed=11)
    problem = apps.lp_problem(instance)
    bounds = apps.lp_constants(instance)
    for _ in range(n_points):
        x = instance.domain.project(rng.standard_normal(5))
        grads = problem.subgradient_matrix(x, np.zeros((4, 3)))
        norms1 = np.abs(grads).sum(axis=1)
        if np.linalg.norm(grads, axis=1).max() > bounds.G2 + 1e-9:
            return False
        if norms1.sum() > bounds.G1 + 1e-9 or norms1.max() > bounds.Ginf + 1e-9:
            return False
    return True


def run_validation(verbose=True, quick=False):
    rng = np.random.default_rng(2024)
    n_points = 50 if quick else 300
    n_draws = 1000 if quick else 5000
    checks = [
        ("projection properties", lambda: _projections_ok(rng, n_points)),
        ("sampling moments", lambda: _sampling_moments_ok(rng, n_draws)),
        ("horizon/step formulas", _formulas_ok),
        ("gradient bounds dominate", lambda: _bounds_dominate_ok(rng, n_points)),
    ]
    all_ok = True
    for name, check in checks:
        ok = bool(check())
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all_ok
