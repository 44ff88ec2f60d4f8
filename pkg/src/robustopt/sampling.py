"""Stochastic subgradient oracles: the l1-sampling estimator and the exact
dense baseline.

The sampling oracle draws index pairs (i, j) with probability proportional
to |(grad_u f_i)_j|, estimates the total l1-mass Gamma of the concatenated
subgradient up to a relative error nu, and returns the sparse estimator

    (g_i)_j = count(i, j) / s * sign((grad_u f_i)_j) * Gamma,

which is unbiased up to the factor lambda = Gamma / total and has second
moment at most G2^2 + (G1*Ginf - G2^2)/s.

The classical simulation necessarily evaluates every subgradient entry to
build the exact sampling distribution; that work is recorded in
``wall_grad_evals``.  The ledger's ``grad_queries`` instead charges the
modeled costs of the multi-sampling and norm-estimation subroutines:

    sampling:   ceil(c_sample * sqrt(s*m*d) * ln(1/delta_iter))
    norm:       ceil(c_norm * (1/nu) * sqrt(m*d*M/total) * ln(1/delta_iter))
    assembly:   s  (one entry lookup per sampled pair)

with M the largest entry magnitude.  All acceptance-level query-count
claims read the charged counters, never the wall counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import NoiseMemory, ParameterError, QueryLedger, RobustProblem, effective_G2sq

__all__ = [
    "QueryCostModel",
    "PerturbationModel",
    "L1Distribution",
    "NormEstimate",
    "SampleDraw",
    "SampledGradient",
    "build_l1_distribution",
    "l1_distribution_from_matrix",
    "draw_samples",
    "estimate_l1_norm",
    "assemble_stochastic_gradient",
    "exact_gradient_oracle",
    "ExactSubgradientOracle",
    "SampledSubgradientOracle",
]


@dataclass(frozen=True)
class QueryCostModel:
    """Constant factors of the charged cost formulas.  M, when set,
    overrides the entrywise bound read from the realized distribution."""

    c_sample: float = 1.0
    c_norm: float = 1.0
    M: Optional[float] = None

    def __post_init__(self):
        if self.c_sample < 1.0 or self.c_norm < 1.0:
            raise ParameterError("cost constants must be >= 1")


class PerturbationModel:
    """How the norm estimate deviates from the truth.

    exact:        lambda = 1
    uniform:      lambda ~ Uniform[1 - nu, 1 + nu]
    adversarial:  lambda alternates between 1 - nu and 1 + nu
    """

    MODES = ("exact", "uniform", "adversarial")

    def __init__(self, mode="exact"):
        if mode not in self.MODES:
            raise ParameterError(f"unknown perturbation mode {mode!r}")
        self.mode = mode
        self._calls = 0

    def draw_lambda(self, nu, rng):
        self._calls += 1
        if self.mode == "exact":
            return 1.0
        if self.mode == "uniform":
            return 1.0 + nu * (2.0 * rng.random() - 1.0)
        return 1.0 - nu if self._calls % 2 == 1 else 1.0 + nu


@dataclass(eq=False)
class L1Distribution:
    """Exact sampling distribution over the m*d subgradient entries.

    p(i, j) = |entry| / total, stored flat (row-major) together with the
    cumulative sums used for inverse-CDF sampling.  `degenerate` marks the
    all-zero gradient (total == 0), in which case there is nothing to
    sample from.
    """

    m: int
    d: int
    abs_values: np.ndarray
    signs: np.ndarray
    total: float
    cumulative: np.ndarray
    degenerate: bool
    max_entry: float

    @property
    def probabilities(self):
        if self.degenerate:
            return np.zeros_like(self.abs_values)
        return self.abs_values / self.total


def l1_distribution_from_matrix(gradients):
    """Build the l1 sampling distribution from an m x d subgradient matrix."""
    G = np.asarray(gradients, dtype=float)
    if G.ndim != 2:
        raise ParameterError("gradient matrix must be m x d")
    m, d = G.shape
    flat = G.ravel()
    abs_values = np.abs(flat)
    total = float(abs_values.sum())
    signs = np.sign(flat)
    if total == 0.0:
        return L1Distribution(m, d, abs_values, signs, 0.0,
                              np.zeros_like(abs_values), True, 0.0)
    cumulative = np.cumsum(abs_values / total)
    cumulative[-1] = 1.0
    return L1Distribution(m, d, abs_values, signs, total, cumulative, False,
                          float(abs_values.max()))


def _noise_entries(noise):
    if isinstance(noise, NoiseMemory):
        return noise.entries
    return np.asarray(noise, dtype=float)


def build_l1_distribution(problem, x, noise, ledger):
    """Evaluate every subgradient entry at (x, u_1..u_m) and build the
    exact sampling distribution.  Pays m*d wall evaluations; the charged
    sampling cost is added by draw_samples, not here."""
    entries = _noise_entries(noise)
    G = problem.subgradient_matrix(x, entries)
    ledger.wall_grad_evals += problem.m * problem.d
    return l1_distribution_from_matrix(G)


@dataclass(eq=False)
class SampleDraw:
    """Outcome of one multi-sampling attempt: flat pair list plus a failure
    flag (set only under failure injection)."""

    pairs: np.ndarray  # shape (k, 2) of (i, j) index pairs
    failed: bool = False


def draw_samples(dist, s, delta_iter, rng, ledger, cost, inject_failures=False):
    """Draw s index pairs from the distribution via inverse-CDF binary
    search, charging the modeled multi-sampling cost.

    A degenerate distribution returns an empty draw free of charge.  With
    failure injection on, the whole draw fails with probability
    delta_iter (the attempt is still charged).
    """
    if s < 1:
        raise ParameterError("sample count s must be at least 1")
    if not 0.0 < delta_iter < 1.0:
        raise ParameterError("delta_iter must lie in (0, 1)")
    if dist.degenerate:
        return SampleDraw(np.empty((0, 2), dtype=int))
    charge = math.ceil(cost.c_sample * math.sqrt(s * dist.m * dist.d)
                       * math.log(1.0 / delta_iter))
    ledger.grad_queries += charge
    if inject_failures and rng.random() < delta_iter:
        return SampleDraw(np.empty((0, 2), dtype=int), failed=True)
    flat = np.searchsorted(dist.cumulative, rng.random(s), side="right")
    flat = np.minimum(flat, dist.m * dist.d - 1)
    pairs = np.column_stack(divmod(flat, dist.d))
    return SampleDraw(pairs)


@dataclass(eq=False)
class NormEstimate:
    """Estimate Gamma of the total l1-mass, with the realized factor
    lambda = Gamma / total recorded for testing."""

    gamma: float
    lam: float
    mode: str
    degenerate: bool = False
    failed: bool = False


def estimate_l1_norm(dist, nu, delta_iter, model, rng, ledger, cost,
                     inject_failures=False):
    """Estimate the total l1-mass with relative error nu, charging the
    modeled norm-estimation cost.

    The entrywise bound M is read from the realized distribution unless
    the cost model pins it.  On a degenerate distribution the attempt is
    still charged (with M/total at its supremum 1) and a zero estimate is
    returned.
    """
    if not 0.0 < nu <= 0.5:
        raise ParameterError("nu must lie in (0, 1/2]")
    if not 0.0 < delta_iter < 1.0:
        raise ParameterError("delta_iter must lie in (0, 1)")
    if dist.degenerate:
        ratio = 1.0
    else:
        M = cost.M if cost.M is not None else dist.max_entry
        ratio = M / dist.total
    charge = math.ceil(cost.c_norm / nu * math.sqrt(dist.m * dist.d * ratio)
                       * math.log(1.0 / delta_iter))
    ledger.grad_queries += charge
    if dist.degenerate:
        return NormEstimate(0.0, float("nan"), model.mode, degenerate=True)
    if inject_failures and rng.random() < delta_iter:
        return NormEstimate(0.0, float("nan"), model.mode, failed=True)
    lam = model.draw_lambda(nu, rng)
    if abs(lam - 1.0) > nu + 1e-12:
        raise RuntimeError("perturbation model produced lambda outside the nu band")
    return NormEstimate(lam * dist.total, lam, model.mode)


@dataclass(eq=False)
class SampledGradient:
    """Sparse per-constraint gradient estimates assembled from the sampled
    pairs; `touched` lists the distinct constraint indices hit."""

    vectors: dict
    touched: tuple
    s: int = 0
    gamma: float = 0.0

    def nonzero_count(self):
        return sum(int(np.count_nonzero(v)) for v in self.vectors.values())

    def dense(self, m, d):
        out = np.zeros((m, d))
        for i, v in self.vectors.items():
            out[i] = v
        return out


def assemble_stochastic_gradient(pairs, dist, gamma, s, ledger):
    """Assemble (g_i)_j = count(i, j)/s * sign * Gamma from the sampled
    pairs; charges one subgradient lookup per sampled pair (the sign
    reads)."""
    if s < 1:
        raise ParameterError("sample count s must be at least 1")
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    ledger.grad_queries += pairs.shape[0]
    ledger.wall_grad_evals += pairs.shape[0]
    if pairs.shape[0] == 0:
        return SampledGradient({}, (), s=s, gamma=gamma)
    flat = pairs[:, 0] * dist.d + pairs[:, 1]
    counts = np.bincount(flat, minlength=dist.m * dist.d)
    scaled = counts / float(s) * dist.signs * gamma
    vectors = {}
    for i in np.unique(pairs[:, 0]):
        vectors[int(i)] = scaled[i * dist.d:(i + 1) * dist.d].copy()
    return SampledGradient(vectors, tuple(sorted(vectors)), s=s, gamma=gamma)


def exact_gradient_oracle(problem, x, noise, ledger):
    """Dense baseline oracle: every subgradient entry computed and
    charged, m*d queries per call."""
    entries = _noise_entries(noise)
    G = problem.subgradient_matrix(x, entries)
    ledger.grad_queries += problem.m * problem.d
    ledger.wall_grad_evals += problem.m * problem.d
    return [G[i].copy() for i in range(problem.m)]


class ExactSubgradientOracle:
    """Wraps the dense oracle behind the meta-algorithm's gradient-oracle
    interface (lambda = 1, nu = 0, second moment G2^2)."""

    def __init__(self, problem, bounds):
        self.problem = problem
        self.nu = 0.0
        self.eff_G2 = bounds.G2
        self.eff_G2sq_horizon = bounds.G2**2

    def sample(self, x, noise, rng, ledger):
        grads = exact_gradient_oracle(self.problem, x, noise, ledger)
        vectors = {i: g for i, g in enumerate(grads)}
        return SampledGradient(vectors, tuple(range(self.problem.m)))


class SampledSubgradientOracle:
    """l1-sampling oracle: distribution build, s draws, norm estimate, and
    sparse assembly, charging the modeled costs.

    The meta-algorithm contract constants are fixed at nu = 1/4 (step
    coefficient 4/3, horizon factor 225/16) regardless of the realized
    perturbation mode.
    """

    NU = 0.25

    def __init__(self, problem, bounds, s, cost=None, model=None,
                 delta_iter=1e-2, inject_failures=False):
        if s < 1:
            raise ParameterError("sample count s must be at least 1")
        self.problem = problem
        self.s = int(s)
        self.cost = cost if cost is not None else QueryCostModel()
        self.model = model if model is not None else PerturbationModel("exact")
        self.delta_iter = delta_iter
        self.inject_failures = inject_failures
        self.nu = self.NU
        base = effective_G2sq(bounds, s)
        self.eff_G2 = math.sqrt(base)
        self.eff_G2sq_horizon = (1.0 + self.NU) ** 2 * base

    def sample(self, x, noise, rng, ledger):
        dist = build_l1_distribution(self.problem, x, noise, ledger)
        if dist.degenerate:
            # Flat objective this iteration: charge only the norm attempt.
            estimate_l1_norm(dist, self.NU, self.delta_iter, self.model, rng,
                             ledger, self.cost)
            return SampledGradient({}, (), s=self.s, gamma=0.0)
        draw = draw_samples(dist, self.s, self.delta_iter, rng, ledger,
                            self.cost, self.inject_failures)
        estimate = estimate_l1_norm(dist, self.NU, self.delta_iter, self.model,
                                    rng, ledger, self.cost,
                                    self.inject_failures)
        if draw.failed or estimate.failed:
            return SampledGradient({}, (), s=self.s, gamma=0.0)
        return assemble_stochastic_gradient(draw.pairs, dist, estimate.gamma,
                                            self.s, ledger)
