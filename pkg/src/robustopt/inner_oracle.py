"""The fixed-noise optimization oracle: a projected-subgradient min-max
feasibility solver with a certified infeasibility test.

Given noise vectors u_1..u_m, the oracle minimizes
phi(x) = max_i f_i(x, u_i) over the domain.  It returns the first iterate
with phi <= eps, or INFEASIBLE when the certified lower bound on the
minimum of phi is strictly positive.

The engine runs a fixed budget of K iterations at the constant step
eta = Dx / (Gx * sqrt(K)), for which the classical telescoping bound gives

    min_{j<=k} phi(x_j) - phi* <= (Gx*Dx/2) * (sqrt(K)/k + 1/sqrt(K)),

an exactly computable anytime certificate that tightens to Gx*Dx/sqrt(K)
at the full budget.  INFEASIBLE is declared as soon as
phi_best - bound_k > 0, which certifies phi* > 0.  With the default
budget K = ceil((3*Gx*Dx/eps)^2) the two stopping rules are guaranteed to
separate whenever phi* <= 0 or phi* > eps; inside the gap (0, eps] either
answer is admissible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ParameterError

__all__ = [
    "OracleConfig",
    "OracleResult",
    "OracleBudgetError",
    "default_max_iter",
    "subgradient_feasibility_oracle",
    "LpFeasibilityOracle",
    "SdpFeasibilityOracle",
    "oracle_for_lp",
    "oracle_for_sdp",
]

INFEASIBLE = "infeasible"


class OracleBudgetError(RuntimeError):
    """The iteration budget ran out before either stopping rule could
    fire; the configuration (Gx, Dx, max_iter) is inadequate."""


def default_max_iter(Gx, Dx, eps):
    return int(math.ceil((3.0 * Gx * Dx / eps) ** 2))


@dataclass(frozen=True)
class OracleConfig:
    """Tolerance and instance constants of the feasibility oracle: Gx
    bounds ||grad_x max_i f_i||_2 over the domain, Dx its l2-diameter."""

    eps: float
    Gx: float
    Dx: float
    max_iter: Optional[int] = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ParameterError("eps must be positive")
        if self.Gx <= 0 or self.Dx <= 0:
            raise ParameterError("Gx and Dx must be positive")

    def budget(self):
        if self.max_iter is not None:
            return int(self.max_iter)
        return default_max_iter(self.Gx, self.Dx, self.eps)


@dataclass(eq=False)
class OracleResult:
    status: str               # 'point' | 'infeasible'
    x: Optional[np.ndarray]
    phi: float                # phi at the returned point / best seen
    lower_bound: float        # certified lower bound on phi*
    iterations: int


def subgradient_feasibility_oracle(eval_max, subgrad_at, project, config,
                                   x_init):
    """Generic engine: eval_max(x) -> (phi, active index) with ties broken
    toward the smallest index; subgrad_at(x, i) a subgradient of f_i in x;
    project the exact domain projector."""
    K = config.budget()
    eta = config.Dx / (config.Gx * math.sqrt(K))
    half_gd = 0.5 * config.Gx * config.Dx
    sqrt_K = math.sqrt(K)
    x = project(np.asarray(x_init, dtype=float))
    phi_best = math.inf
    x_best = x
    for k in range(1, K + 1):
        phi, active = eval_max(x)
        if phi < phi_best:
            phi_best = phi
            x_best = x
        if phi_best <= config.eps:
            return OracleResult("point", x_best, phi_best,
                                phi_best - half_gd * (sqrt_K / k + 1.0 / sqrt_K),
                                k)
        lower = phi_best - half_gd * (sqrt_K / k + 1.0 / sqrt_K)
        if lower > 0.0:
            return OracleResult(INFEASIBLE, None, phi_best, lower, k)
        x = project(x - eta * subgrad_at(x, active))
    lower = phi_best - config.Gx * config.Dx / sqrt_K
    if lower > 0.0:
        return OracleResult(INFEASIBLE, None, phi_best, lower, K)
    if phi_best <= config.eps:
        return OracleResult("point", x_best, phi_best, lower, K)
    raise OracleBudgetError(
        f"no stopping rule fired within max_iter={K} "
        f"(phi_best={phi_best:.6g}, certified lower bound={lower:.6g}); "
        f"increase max_iter or loosen eps")


class LpFeasibilityOracle:
    """Feasibility oracle for robust-LP instances at fixed noise:
    constraints (a_i + P_i u_i)^T x - b_i over a domain inside the unit
    l1-ball.  Gx = max_i (||a_i||_2 + ||P_i||_2), Dx = 2."""

    def __init__(self, instance, eps, max_iter=None):
        self.instance = instance
        spectral = [np.linalg.norm(P, 2) for P in instance.P]
        Gx = max(np.linalg.norm(a) + s
                 for a, s in zip(instance.a, spectral))
        self.config = OracleConfig(eps=eps, Gx=float(Gx), Dx=2.0,
                                   max_iter=max_iter)
        self.project = instance.domain.project

    def __call__(self, noise_entries, x_init=None):
        inst = self.instance
        noise = np.asarray(noise_entries, dtype=float)
        # Effective rows a_i + P_i u_i are fixed for the whole solve.
        eff = inst.a + np.einsum("mnd,md->mn", inst.P, noise)
        b = inst.b

        def eval_max(x):
            vals = eff @ x - b
            i = int(np.argmax(vals))
            return float(vals[i]), i

        def subgrad_at(x, i):
            return eff[i]

        start = x_init if x_init is not None else inst.domain.canonical_member()
        return subgradient_feasibility_oracle(eval_max, subgrad_at,
                                              self.project, self.config, start)


class SdpFeasibilityOracle:
    """Feasibility oracle for robust-SDP instances at fixed noise.

    The decision variable is the flattened symmetric matrix, optionally
    extended by a scalar coordinate z; constraints read
    (A_i + w_i * sum_j u_ij P_j) . X + c_i z - b_i.  The domain projector
    combines the PSD Frobenius ball (with pinned corner when present) and
    a box on z.
    """

    def __init__(self, instance, eps, max_iter=None):
        self.instance = instance
        inst = instance
        self.nsq = inst.n_matrix**2
        self.has_z = inst.z_coeff is not None
        sigma = math.sqrt(sum(np.linalg.norm(P, "fro") ** 2 for P in inst.P))
        z_coeff = inst.z_coeff if self.has_z else np.zeros(inst.m)
        Gx = max(
            math.sqrt((np.linalg.norm(A, "fro")
                       + abs(w) * sigma * inst.uncertainty_radius) ** 2 + c**2)
            for A, w, c in zip(inst.A, inst.noise_weight, z_coeff))
        if self.has_z:
            z_span = inst.z_interval[1] - inst.z_interval[0]
            Dx = math.sqrt((2.0 * inst.domain_radius) ** 2 + z_span**2)
        else:
            Dx = 2.0 * inst.domain_radius
        self.config = OracleConfig(eps=eps, Gx=float(Gx), Dx=float(Dx),
                                   max_iter=max_iter)
        self.domain = inst.flat_domain()

    def __call__(self, noise_entries, x_init=None):
        inst = self.instance
        noise = np.asarray(noise_entries, dtype=float)
        flat_P = inst.P.reshape(inst.d, -1)
        # Effective constraint matrices at this noise assignment.
        eff = (inst.A.reshape(inst.m, -1)
               + inst.noise_weight[:, None] * (noise @ flat_P))
        z_coeff = inst.z_coeff if self.has_z else np.zeros(inst.m)

        def eval_max(x):
            vals = eff @ x[:self.nsq] - inst.b
            if self.has_z:
                vals = vals + z_coeff * x[self.nsq]
            i = int(np.argmax(vals))
            return float(vals[i]), i

        def subgrad_at(x, i):
            g = np.zeros_like(x)
            g[:self.nsq] = eff[i]
            if self.has_z:
                g[self.nsq] = z_coeff[i]
            return g

        start = x_init if x_init is not None else self.domain.canonical_member()
        return subgradient_feasibility_oracle(eval_max, subgrad_at,
                                              self.domain.project, self.config,
                                              start)


def oracle_for_lp(instance, noise, eps, x_init=None, max_iter=None):
    """One-shot LP oracle call; builds the cached oracle and solves."""
    return LpFeasibilityOracle(instance, eps, max_iter)(noise, x_init)


def oracle_for_sdp(instance, noise, eps, x_init=None, max_iter=None):
    """One-shot SDP oracle call on the flattened (X, z) variable."""
    return SdpFeasibilityOracle(instance, eps, max_iter)(noise, x_init)
