"""The robust-feasibility meta-algorithms.

Each iteration queries the (stochastic) subgradient oracle at the current
decision point, takes a projected ascent step on every touched noise
vector, and calls the fixed-noise optimization oracle; an infeasibility
declaration by that oracle is final and is returned together with the
witnessing noise assignment.  Otherwise the average of the oracle's
iterates is returned after T iterations, where T comes from the horizon
formula.

The sampling-based variant touches at most min(m, s) noise vectors per
iteration and uses the second-moment bound
G2^2 + (G1*Ginf - G2^2)/s inside its step sizes, with the horizon
inflated by (1 + nu)^2 at nu = 1/4 (yielding the 225/16 constant).

A bisection wrapper turns feasibility into optimization by probing
level-set problems, splitting the failure budget evenly over the probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import (
    Bounds,
    NoiseMemory,
    ParameterError,
    QueryLedger,
    RobustProblem,
    RunOutcome,
    compute_horizon,
    compute_step_size,
    effective_G2sq,
)
from .sampling import (
    PerturbationModel,
    QueryCostModel,
    SampledSubgradientOracle,
)

__all__ = [
    "MetaIterationError",
    "BracketError",
    "BisectionResult",
    "solve_robust",
    "solve_robust_sampled",
    "optimize_via_bisection",
]


class MetaIterationError(RuntimeError):
    """An oracle failed inside the meta-loop; carries the iteration index."""

    def __init__(self, iteration, message):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class BracketError(ValueError):
    """The initial bisection bracket is not (infeasible, feasible)."""


def _run_meta(problem, bounds, g_oracle, opt_oracle, T, rng, ledger, x0=None):
    noise = NoiseMemory.initial(problem.m, problem.uncertainty)
    x = np.asarray(x0 if x0 is not None
                   else problem.domain.canonical_member(), dtype=float)
    x_sum = np.zeros_like(x)
    for t in range(T):
        try:
            sample = g_oracle.sample(x, noise, rng, ledger)
        except Exception as exc:
            raise MetaIterationError(t, f"gradient oracle failed: {exc}") from exc
        eta = compute_step_size(t, bounds, g_oracle.eff_G2)
        for i in sample.touched:
            noise.set_row_projected(i, noise.entries[i] + eta * sample.vectors[i],
                                    problem.uncertainty, ledger)
        ledger.opt_calls += 1
        try:
            result = opt_oracle(noise.entries, x_init=x)
        except Exception as exc:
            raise MetaIterationError(t, f"optimization oracle failed: {exc}") from exc
        if result.status == "infeasible":
            return RunOutcome("infeasible", ledger, iterations_used=t + 1,
                              witness=noise.snapshot())
        x = np.asarray(result.x, dtype=float)
        x_sum += x
    return RunOutcome("solution", ledger, iterations_used=T, x_bar=x_sum / T)


def solve_robust(problem, bounds, g_oracle, opt_oracle, eps, delta, rng,
                 x0=None):
    """Run the meta-algorithm with a pluggable gradient oracle.

    The oracle must expose `nu` (its norm-estimation tolerance), `eff_G2`
    (the square root of its second-moment bound, used in the step sizes),
    `eff_G2sq_horizon` (the squared bound entering the horizon), and a
    `sample(x, noise, rng, ledger)` method.
    """
    run_bounds = replace(bounds, nu=g_oracle.nu)
    T = compute_horizon(run_bounds, g_oracle.eff_G2sq_horizon, problem.m,
                        eps, delta)
    ledger = QueryLedger()
    return _run_meta(problem, run_bounds, g_oracle, opt_oracle, T, rng,
                     ledger, x0)


def solve_robust_sampled(problem, bounds, s, opt_oracle, eps, delta, rng,
                         cost=None, mode="exact", inject_failures=False,
                         x0=None):
    """Run the sampling-based meta-algorithm with s draws per iteration.

    The per-iteration failure budget is delta / (3T): one third of the
    budget each for state preparation, norm estimation, and the
    concentration argument over iterations (the horizon keeps the full
    delta inside its logarithm).
    """
    if s < 1:
        raise ParameterError("sample count s must be at least 1")
    nu = SampledSubgradientOracle.NU
    run_bounds = replace(bounds, nu=nu)
    base = effective_G2sq(bounds, s)
    T = compute_horizon(run_bounds, (1.0 + nu) ** 2 * base, problem.m, eps,
                        delta)
    delta_iter = delta / (3.0 * T)
    model = mode if isinstance(mode, PerturbationModel) else PerturbationModel(mode)
    oracle = SampledSubgradientOracle(
        problem, bounds, s,
        cost=cost if cost is not None else QueryCostModel(),
        model=model, delta_iter=delta_iter, inject_failures=inject_failures)
    ledger = QueryLedger()
    return _run_meta(problem, run_bounds, oracle, opt_oracle, T, rng,
                     ledger, x0)


@dataclass(eq=False)
class BisectionResult:
    z: float                 # midpoint of the final bracket
    x: Optional[np.ndarray]  # witness from the last feasible probe
    z_lo: float
    z_hi: float
    probes: list             # (z, status) per probe, endpoints included


def optimize_via_bisection(solve_probe, z_lo, z_hi, eps, delta):
    """Bisect the level z of the shifted objective until the bracket is
    narrower than eps.

    solve_probe(z, delta_probe, probe_index) runs one feasibility solve of
    the level-set problem at z and returns a RunOutcome.  The bracket must
    start infeasible at z_lo and feasible at z_hi; each probe receives an
    equal share delta / ceil(log2((z_hi - z_lo)/eps)) of the failure
    budget.
    """
    if z_lo > z_hi:
        raise BracketError("z_lo must not exceed z_hi")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    span = z_hi - z_lo
    n_probes = max(1, math.ceil(math.log2(max(span / eps, 1.0))))
    delta_probe = delta / n_probes
    probes = []

    outcome = solve_probe(z_lo, delta_probe, 0)
    probes.append((z_lo, outcome.status))
    if outcome.status != "infeasible":
        raise BracketError(f"level problem already feasible at z_lo={z_lo}")
    outcome = solve_probe(z_hi, delta_probe, 1)
    probes.append((z_hi, outcome.status))
    if outcome.status != "solution":
        raise BracketError(f"level problem infeasible at z_hi={z_hi}")
    witness = outcome.x_bar

    index = 2
    while z_hi - z_lo > eps:
        mid = 0.5 * (z_lo + z_hi)
        outcome = solve_probe(mid, delta_probe, index)
        probes.append((mid, outcome.status))
        if outcome.status == "solution":
            z_hi = mid
            witness = outcome.x_bar
        else:
            z_lo = mid
        index += 1
    return BisectionResult(z=0.5 * (z_lo + z_hi), x=witness,
                           z_lo=z_lo, z_hi=z_hi, probes=probes)
