"""Problem model, run bookkeeping, and oracle-call accounting shared by the
robust-optimization solvers.

A robust feasibility instance consists of m constraint functions
f_i(x, u_i), convex in the decision x and concave in the noise u_i, where
each u_i ranges over a common convex uncertainty set.  The solvers drive
the noise vectors by projected subgradient ascent and repeatedly call an
optimization oracle for the fixed-noise problem; everything they need to
know about an instance is collected in :class:`RobustProblem`, and the
constants governing horizons and step sizes in :class:`Bounds`.

Charged oracle-call counts (as opposed to the raw number of arithmetic
subgradient evaluations done by the simulation) are accumulated in
:class:`QueryLedger`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .projections import SetDescriptor, project_ball

__all__ = [
    "ParameterError",
    "MEMBERSHIP_TOL",
    "UncertaintySet",
    "NoiseMemory",
    "RobustProblem",
    "Bounds",
    "QueryLedger",
    "RunOutcome",
    "compute_horizon",
    "compute_step_size",
    "effective_G2sq",
]

MEMBERSHIP_TOL = 1e-9


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


@dataclass(eq=False)
class UncertaintySet:
    """Convex set of admissible noise vectors.

    Only the Euclidean ball is implemented; `kind` is an extensible tag.
    """

    center: np.ndarray
    radius: float
    kind: str = "euclidean-ball"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius < 0:
            raise ParameterError("radius must be nonnegative")
        if self.kind != "euclidean-ball":
            raise ParameterError(f"unsupported uncertainty kind {self.kind!r}")

    @classmethod
    def unit_ball(cls, dimension):
        return cls(center=np.zeros(int(dimension)), radius=1.0)

    @property
    def dimension(self):
        return self.center.size

    def diameter(self):
        return 2.0 * self.radius

    def project(self, v):
        return project_ball(v, self.center, self.radius)

    def contains(self, u, tol=MEMBERSHIP_TOL):
        return np.linalg.norm(np.asarray(u, dtype=float) - self.center) <= self.radius + tol


@dataclass(eq=False)
class NoiseMemory:
    """Mutable store of the m noise vectors, rows kept inside the
    uncertainty set by projection-mediated updates."""

    entries: np.ndarray
    read_count: int = 0
    write_count: int = 0

    def __post_init__(self):
        self.entries = np.array(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise ParameterError("noise memory must be an m x d array")

    @classmethod
    def initial(cls, m, uncertainty):
        """All rows at the center of the uncertainty set."""
        return cls(np.tile(uncertainty.center, (int(m), 1)))

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def d(self):
        return self.entries.shape[1]

    def row(self, i):
        self.read_count += 1
        return self.entries[i].copy()

    def set_row_projected(self, i, raw, uncertainty, ledger=None):
        """Replace row i with the projection of `raw` onto the uncertainty
        set; counts one projection-oracle call."""
        projected = uncertainty.project(raw)
        if not uncertainty.contains(projected, MEMBERSHIP_TOL):
            raise RuntimeError("projected noise row left the uncertainty set")
        self.entries[i] = projected
        self.write_count += 1
        if ledger is not None:
            ledger.proj_calls += 1

    def snapshot(self):
        return self.entries.copy()


@dataclass(eq=False)
class RobustProblem:
    """Constraint evaluators and entrywise noise-subgradient access.

    `constraint_eval(i, x, u_i)` returns f_i(x, u_i); `subgrad_entry(i, j,
    x, u_i)` returns the j-th entry of a supergradient of f_i in u at
    (x, u_i).  `subgrad_full`, when provided, returns the whole m x d
    supergradient matrix in one vectorized call; it must agree entrywise
    with `subgrad_entry` and exists purely so the classical simulation
    does not pay Python-loop overhead (the charged costs are identical
    either way).

    For constraints linear in u, `alpha`/`beta` give the decomposition
    f_i(x, u) = alpha_i(x)^T u + beta_i(x).
    """

    m: int
    n: int
    d: int
    constraint_eval: Callable[[int, np.ndarray, np.ndarray], float]
    subgrad_entry: Callable[[int, int, np.ndarray, np.ndarray], float]
    domain: SetDescriptor
    uncertainty: UncertaintySet
    linear_in_u: bool = False
    alpha: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    beta: Optional[Callable[[int, np.ndarray], float]] = None
    subgrad_full: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.uncertainty.dimension != self.d:
            raise ParameterError("uncertainty dimension disagrees with d")

    def subgradient_matrix(self, x, noise_entries):
        """The m x d matrix of noise supergradients at (x, u_1..u_m)."""
        if self.subgrad_full is not None:
            return np.asarray(self.subgrad_full(x, noise_entries), dtype=float)
        out = np.empty((self.m, self.d))
        for i in range(self.m):
            for j in range(self.d):
                out[i, j] = self.subgrad_entry(i, j, x, noise_entries[i])
        return out


@dataclass(frozen=True)
class Bounds:
    """Constants governing horizons and step sizes.

    D bounds the l2-diameter of the uncertainty set; F the magnitude of
    the constraint values (or of their noise-linear part when that
    decomposition is available); G2, G1, Ginf bound respectively the
    l2-norm of a single noise subgradient, the total l1-mass of all m
    subgradients, and the largest single-constraint l1-norm.  nu is the
    relative-error tolerance of the norm-estimation subroutine.
    """

    D: float
    F: float
    G2: float
    G1: float
    Ginf: float
    per_constraint_G1: Optional[tuple] = None
    nu: float = 0.0

    def __post_init__(self):
        if self.D <= 0:
            raise ParameterError("D must be positive")
        if self.F < 0:
            raise ParameterError("F must be nonnegative")
        if min(self.G2, self.G1, self.Ginf) <= 0:
            raise ParameterError("G2, G1, Ginf must all be strictly positive")
        if self.G2 > self.Ginf * (1 + 1e-12):
            raise ParameterError("G2 must not exceed Ginf (l2 <= l1 entrywise)")
        if self.Ginf > self.G1 * (1 + 1e-12):
            raise ParameterError("Ginf must not exceed G1")
        if not 0.0 <= self.nu <= 0.5:
            raise ParameterError("nu must lie in [0, 1/2]")


@dataclass
class QueryLedger:
    """Charged oracle-call counters for one run.

    grad_queries counts charged subgradient-oracle calls, proj_calls the
    noise-projection calls, opt_calls the optimization-oracle calls.
    wall_grad_evals counts the subgradient entries the classical
    simulation actually evaluated, which for the sampling-based oracle is
    larger than the charged cost.
    """

    grad_queries: int = 0
    proj_calls: int = 0
    opt_calls: int = 0
    wall_grad_evals: int = 0

    def as_dict(self):
        return {
            "grad_queries": self.grad_queries,
            "proj_calls": self.proj_calls,
            "opt_calls": self.opt_calls,
            "wall_grad_evals": self.wall_grad_evals,
        }


@dataclass(eq=False)
class RunOutcome:
    """Result of one meta-algorithm run: either the averaged iterate or an
    infeasibility declaration with the witnessing noise assignment."""

    status: str
    ledger: QueryLedger
    iterations_used: int
    x_bar: Optional[np.ndarray] = None
    witness: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.status not in ("solution", "infeasible"):
            raise ParameterError(f"unknown status {self.status!r}")
        if self.status == "solution" and (self.x_bar is None or self.witness is not None):
            raise ParameterError("solution outcome must populate x_bar only")
        if self.status == "infeasible" and (self.witness is None or self.x_bar is not None):
            raise ParameterError("infeasible outcome must populate witness only")


def compute_horizon(bounds, eff_G2sq, m, eps, delta):
    """Iteration count T = ceil((1/eps^2) * max{4 F ln(m/delta),
    (9/4)(1+4 nu)^2 D^2 eff_G2sq}).

    eff_G2sq is the squared bound on the second moment of the gradient
    oracle's output.  Natural logarithm throughout.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if eff_G2sq <= 0:
        raise ParameterError("eff_G2sq must be positive")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    if m < 1:
        raise ParameterError("m must be at least 1")
    f_branch = 4.0 * bounds.F * math.log(m / delta)
    g_branch = 2.25 * (1.0 + 4.0 * bounds.nu) ** 2 * bounds.D**2 * eff_G2sq
    return int(math.ceil(max(f_branch, g_branch) / eps**2))


def compute_step_size(t, bounds, eff_G2):
    """Ascent step eta_t = D / ((1 - nu) * eff_G2 * sqrt(t + 1)) for the
    0-indexed iteration t."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if eff_G2 <= 0:
        raise ParameterError("eff_G2 must be positive")
    return bounds.D / ((1.0 - bounds.nu) * eff_G2 * math.sqrt(t + 1.0))


def effective_G2sq(bounds, s):
    """Second-moment bound G2^2 + (G1*Ginf - G2^2)/s for the s-sample
    l1-sampled gradient estimator."""
    if s < 1:
        raise ParameterError("sample count s must be at least 1")
    return bounds.G2**2 + (bounds.G1 * bounds.Ginf - bounds.G2**2) / float(s)
