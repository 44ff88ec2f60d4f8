"""Robust LP / SDP instance builders, bound calculators, and closed-form
worst-case violation checkers.

Instances use ellipsoidal uncertainty: each constraint's noise vector
ranges over the d-dimensional unit Euclidean ball, mapped through a shape
matrix.  Robust LPs read

    (a_i + P_i u_i)^T x - b_i <= 0,

robust SDPs

    (A_i + w_i * sum_j u_ij P_j) . X + c_i z - b_i <= 0,

where the per-constraint weight w_i switches the noise coupling on or off
(the truss design encoding has exactly one noisy constraint) and the
optional scalar z covers the compliance coordinate of the truss SDP.

The worst case over the unit ball is available in closed form: the noise
term of constraint i contributes ||P_i^T x||_2 (LP) respectively
|w_i| * ||(P_1 . X, ..., P_d . X)||_2 (SDP).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Bounds, ParameterError, RobustProblem, UncertaintySet
from .projections import SetDescriptor

__all__ = [
    "RobustLpInstance",
    "GmrpInstance",
    "RobustSdpInstance",
    "TtdInstance",
    "MatrixZDomain",
    "lp_constants",
    "worst_case_lp_violation",
    "build_gmrp",
    "sdp_constants",
    "worst_case_sdp_violation",
    "build_ttd",
    "lp_problem",
    "sdp_problem",
    "random_feasible_lp",
    "infeasible_two_constraint_lp",
    "scaling_lp_instance",
    "gmrp_two_asset",
    "ttd_three_bar",
    "instance_to_json",
    "instance_from_json",
    "save_instance",
    "load_instance",
]

SYMMETRY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Linear programs
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RobustLpInstance:
    """Robust LP data: constraint i evaluates to (a_i + P_i u_i)^T x - b_i
    with u_i in the unit ball.  The domain must sit inside the unit
    l1-ball."""

    a: np.ndarray        # m x n
    b: np.ndarray        # m
    P: np.ndarray        # m x n x d
    domain: SetDescriptor

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.a.ndim != 2 or self.P.ndim != 3:
            raise ParameterError("a must be m x n and P must be m x n x d")
        m, n = self.a.shape
        if self.b.shape != (m,) or self.P.shape[:2] != (m, n):
            raise ParameterError("inconsistent robust-LP dimensions")

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.a.shape[1]

    @property
    def d(self):
        return self.P.shape[2]

    def constraint(self, i, x, u):
        return float((self.a[i] + self.P[i] @ u) @ x - self.b[i])


def lp_constants(instance, nu=0.0):
    """Bounds for a robust LP over a domain inside the unit l1-ball:
    G2 = max_i ||P_i||_2, Ginf = max_i ||P_i||_inf (max row sum),
    G1 = sum_i ||P_i||_inf, D = 2, F = G2.

    Since ||v||_2 <= ||v||_1 for the gradient vector P_i^T x, Ginf is
    itself a valid l2 bound; G2 is clamped to min(max_i ||P_i||_2, Ginf)
    so the bound ordering G2 <= Ginf always holds.
    """
    spectral = max(np.linalg.norm(P, 2) for P in instance.P)
    row_sums = [float(np.abs(P).sum(axis=1).max()) for P in instance.P]
    Ginf = max(row_sums)
    G1 = float(sum(row_sums))
    G2 = min(float(spectral), Ginf)
    return Bounds(D=2.0, F=G2, G2=G2, G1=G1, Ginf=Ginf,
                  per_constraint_G1=tuple(row_sums), nu=nu)


def worst_case_lp_violation(instance, x):
    """Exact max over the unit ball of each constraint:
    a_i^T x + ||P_i^T x||_2 - b_i."""
    x = np.asarray(x, dtype=float)
    grads = np.einsum("mnd,n->md", instance.P, x)
    return instance.a @ x + np.linalg.norm(grads, axis=1) - instance.b


def lp_problem(instance):
    """Wrap an LP instance behind the generic problem interface."""
    a, b, P = instance.a, instance.b, instance.P
    m, n, d = instance.m, instance.n, instance.d

    def constraint_eval(i, x, u):
        return float((a[i] + P[i] @ u) @ x - b[i])

    def subgrad_entry(i, j, x, u):
        return float(P[i][:, j] @ x)

    def subgrad_full(x, noise_entries):
        return np.einsum("mnd,n->md", P, x)

    return RobustProblem(
        m=m, n=n, d=d,
        constraint_eval=constraint_eval,
        subgrad_entry=subgrad_entry,
        domain=instance.domain,
        uncertainty=UncertaintySet.unit_ball(d),
        linear_in_u=True,
        alpha=lambda i, x: P[i].T @ x,
        beta=lambda i, x: float(a[i] @ x - b[i]),
        subgrad_full=subgrad_full,
    )


@dataclass(eq=False)
class GmrpInstance:
    """Worst-case maximum-return portfolio data: m markets, n assets;
    market i's return is r_tilde_i + kappa_i * S_half_i u_i with u_i in
    the unit ball, and the portfolio must earn at least c in every
    market."""

    r_tilde: np.ndarray   # m x n estimated returns
    kappa: np.ndarray     # m positive scales
    S_half: np.ndarray    # m x n x d ellipsoid shape roots
    c: float              # minimum acceptable expected return

    def __post_init__(self):
        self.r_tilde = np.atleast_2d(np.asarray(self.r_tilde, dtype=float))
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        self.S_half = np.asarray(self.S_half, dtype=float)
        if self.S_half.ndim == 2:
            self.S_half = self.S_half[None, :, :]
        if np.any(self.kappa < 0):
            raise ParameterError("kappa must be nonnegative")

    @property
    def n(self):
        return self.r_tilde.shape[1]


def build_gmrp(g, c=None):
    """Recast the portfolio problem as a robust LP over the simplex:
    a_i = -r_tilde_i, b_i = -c, P_i = -kappa_i * S_half_i."""
    c = g.c if c is None else c
    m = g.r_tilde.shape[0]
    P = -g.kappa[:, None, None] * g.S_half
    return RobustLpInstance(
        a=-g.r_tilde,
        b=np.full(m, -c),
        P=P,
        domain=SetDescriptor.simplex(g.n),
    )


# ---------------------------------------------------------------------------
# Semidefinite programs
# ---------------------------------------------------------------------------

class MatrixZDomain:
    """Product domain: PSD Frobenius ball (optionally with pinned corner)
    for the flattened matrix block, times an interval for the trailing
    scalar coordinate."""

    def __init__(self, matrix_descriptor, z_interval):
        self.matrix = matrix_descriptor
        self.z_interval = z_interval
        self.dim = matrix_descriptor.dim + 1

    def project(self, v):
        out = np.empty(self.dim)
        out[:-1] = self.matrix.project(np.asarray(v, dtype=float)[:-1])
        lo, hi = self.z_interval
        out[-1] = min(max(v[-1], lo), hi)
        return out

    def canonical_member(self):
        lo, hi = self.z_interval
        return np.append(self.matrix.canonical_member(), 0.5 * (lo + hi))

    def contains(self, v, tol=1e-9):
        lo, hi = self.z_interval
        return (self.matrix.contains(np.asarray(v, dtype=float)[:-1], tol)
                and lo - tol <= v[-1] <= hi + tol)


def _check_symmetric(name, mats):
    for k, M in enumerate(mats):
        if np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
            raise ParameterError(f"{name}[{k}] is not symmetric")


@dataclass(eq=False)
class RobustSdpInstance:
    """Robust SDP data; see the module docstring for the constraint form.

    The domain is {X PSD : ||X||_F <= domain_radius}, optionally
    intersected with {X_11 = corner}, and crossed with `z_interval` when
    the scalar coordinate is present (z_coeff set).
    """

    A: np.ndarray                 # m x n x n symmetric
    b: np.ndarray                 # m
    P: np.ndarray                 # d x n x n symmetric, shared across constraints
    noise_weight: np.ndarray | None = None   # m; defaults to all ones
    z_coeff: np.ndarray | None = None        # m; None -> no z coordinate
    z_interval: tuple | None = None
    domain_radius: float = 1.0
    corner: float | None = None
    uncertainty_radius: float = 1.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.A.ndim != 3 or self.P.ndim != 3:
            raise ParameterError("A must be m x n x n and P must be d x n x n")
        _check_symmetric("A", self.A)
        _check_symmetric("P", self.P)
        if self.noise_weight is None:
            self.noise_weight = np.ones(self.m)
        else:
            self.noise_weight = np.asarray(self.noise_weight, dtype=float)
        if self.z_coeff is not None:
            self.z_coeff = np.asarray(self.z_coeff, dtype=float)
            if self.z_interval is None:
                raise ParameterError("z_coeff requires z_interval")
        if self.domain_radius <= 0:
            raise ParameterError("domain radius must be positive")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n_matrix(self):
        return self.A.shape[1]

    @property
    def d(self):
        return self.P.shape[0]

    def matrix_domain(self):
        if self.corner is not None:
            return SetDescriptor.psd_ball_corner(self.n_matrix,
                                                 self.domain_radius,
                                                 self.corner)
        return SetDescriptor.psd_ball(self.n_matrix, self.domain_radius)

    def flat_domain(self):
        if self.z_coeff is None:
            return self.matrix_domain()
        return MatrixZDomain(self.matrix_domain(), self.z_interval)

    def flat_canonical(self):
        return self.flat_domain().canonical_member()

    def split(self, x_flat):
        """(X matrix, z or None) from the flat decision vector."""
        nsq = self.n_matrix**2
        X = np.asarray(x_flat, dtype=float)[:nsq].reshape(self.n_matrix,
                                                          self.n_matrix)
        z = float(x_flat[nsq]) if self.z_coeff is not None else None
        return X, z

    def constraint(self, i, x_flat, u):
        X, z = self.split(x_flat)
        noise_mat = np.tensordot(u, self.P, axes=1)
        val = float(np.sum((self.A[i] + self.noise_weight[i] * noise_mat) * X)
                    - self.b[i])
        if z is not None:
            val += float(self.z_coeff[i]) * z
        return val


def sdp_constants(instance, nu=0.0):
    """Bounds for a robust SDP: with sigma^2 = sum_j ||P_j||_F^2 and
    Sigma = sum_j ||P_j||_F, scaled by the domain's Frobenius radius R and
    the per-constraint noise weights,

        G2 = wmax * sigma * R,  Ginf = wmax * Sigma * R,
        G1 = (sum_i |w_i|) * Sigma * R,  F = G2,  D = 2.
    """
    R = instance.domain_radius
    fro = [float(np.linalg.norm(P, "fro")) for P in instance.P]
    sigma = math.sqrt(sum(f**2 for f in fro))
    Sigma = float(sum(fro))
    w_abs = np.abs(instance.noise_weight)
    wmax = float(w_abs.max())
    wsum = float(w_abs.sum())
    if wmax == 0.0 or sigma == 0.0:
        raise ParameterError("instance has no noise coupling; bounds degenerate")
    per = tuple(float(w) * Sigma * R for w in w_abs)
    return Bounds(D=2.0, F=wmax * sigma * R, G2=wmax * sigma * R,
                  G1=wsum * Sigma * R, Ginf=wmax * Sigma * R,
                  per_constraint_G1=per, nu=nu)


def worst_case_sdp_violation(instance, x_flat, z=None):
    """Exact max over the unit noise ball of each constraint:
    A_i . X + |w_i| * ||(P_j . X)_j||_2 + c_i z - b_i."""
    if z is not None:
        x_flat = np.append(np.asarray(x_flat, dtype=float).ravel(), z)
    X, z_val = instance.split(np.asarray(x_flat, dtype=float).ravel())
    pdots = np.array([float(np.sum(P * X)) for P in instance.P])
    noise_term = np.abs(instance.noise_weight) * np.linalg.norm(pdots)
    base = np.array([float(np.sum(A * X)) for A in instance.A]) - instance.b
    vals = base + noise_term
    if z_val is not None:
        vals = vals + instance.z_coeff * z_val
    return vals


def sdp_problem(instance):
    """Wrap an SDP instance behind the generic problem interface; the
    decision variable is the flattened matrix, plus z when present."""
    inst = instance
    nsq = inst.n_matrix**2
    n_flat = nsq + (1 if inst.z_coeff is not None else 0)
    flat_A = inst.A.reshape(inst.m, -1)
    flat_P = inst.P.reshape(inst.d, -1)
    w = inst.noise_weight

    def constraint_eval(i, x, u):
        val = float(flat_A[i] @ x[:nsq]
                    + w[i] * (u @ (flat_P @ x[:nsq])) - inst.b[i])
        if inst.z_coeff is not None:
            val += float(inst.z_coeff[i]) * float(x[nsq])
        return val

    def subgrad_entry(i, j, x, u):
        return float(w[i] * (flat_P[j] @ x[:nsq]))

    def subgrad_full(x, noise_entries):
        pdots = flat_P @ x[:nsq]
        return np.outer(w, pdots)

    def alpha(i, x):
        return w[i] * (flat_P @ x[:nsq])

    def beta(i, x):
        val = float(flat_A[i] @ x[:nsq] - inst.b[i])
        if inst.z_coeff is not None:
            val += float(inst.z_coeff[i]) * float(x[nsq])
        return val

    return RobustProblem(
        m=inst.m, n=n_flat, d=inst.d,
        constraint_eval=constraint_eval,
        subgrad_entry=subgrad_entry,
        domain=inst.flat_domain(),
        uncertainty=UncertaintySet.unit_ball(inst.d),
        linear_in_u=True,
        alpha=alpha,
        beta=beta,
        subgrad_full=subgrad_full,
    )


@dataclass(eq=False)
class TtdInstance:
    """Truss topology design data: bar direction vectors, a total volume,
    a load ellipsoid Qu (u in the unit ball), a compliance guess, and the
    Frobenius radius of the relaxed matrix domain.

    The paper-standard domain radius 1 together with the pinned corner
    X_11 = 1 collapses the feasible set to a single matrix, so the radius
    is kept configurable (default 2).
    """

    nodes: np.ndarray          # m_bars x n bar vectors
    total_volume: float
    Q: np.ndarray              # n x d load ellipsoid shape
    lam: float                 # compliance guess (bisection variable)
    nominal_load: np.ndarray | None = None
    frobenius_radius: float = 2.0

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.Q = np.asarray(self.Q, dtype=float)
        if self.total_volume <= 0:
            raise ParameterError("total volume must be positive")
        if self.nominal_load is None:
            self.nominal_load = np.zeros(self.nodes.shape[1])
        else:
            self.nominal_load = np.asarray(self.nominal_load, dtype=float)


def build_ttd(t):
    """Assemble the robust SDP for a truss instance.

    Variables are (X, z) with X an (n+1) x (n+1) PSD matrix, ||X||_F <= R,
    X_11 = 1, and z in [-1, 1].  Constraint 0 is the compliance coupling
    lam - C.X - (sum_j u_j P_j).X - V z <= 0 with C built from the nominal
    load (zero load gives the pure-ellipsoid form); constraints i >= 1 are
    the bar constraints A_i.X - z <= 0.  Only constraint 0 carries noise.
    """
    n = t.nodes.shape[1]
    m_bars = t.nodes.shape[0]
    d = t.Q.shape[1]
    side = n + 1

    C = np.zeros((side, side))
    C[0, 1:] = t.nominal_load
    C[1:, 0] = t.nominal_load

    A = np.zeros((m_bars + 1, side, side))
    A[0] = -C
    for i, v in enumerate(t.nodes):
        A[i + 1, 1:, 1:] = np.outer(v, v)

    P = np.zeros((d, side, side))
    for j in range(d):
        P[j, 0, 1:] = t.Q[:, j]
        P[j, 1:, 0] = t.Q[:, j]

    b = np.zeros(m_bars + 1)
    b[0] = -t.lam

    noise_weight = np.zeros(m_bars + 1)
    noise_weight[0] = -1.0

    z_coeff = np.full(m_bars + 1, -1.0)
    z_coeff[0] = -t.total_volume

    return RobustSdpInstance(
        A=A, b=b, P=P,
        noise_weight=noise_weight,
        z_coeff=z_coeff,
        z_interval=(-1.0, 1.0),
        domain_radius=t.frobenius_radius,
        corner=1.0,
    )


# ---------------------------------------------------------------------------
# Canned desk instances
# ---------------------------------------------------------------------------

def random_feasible_lp(m=5, n=6, d=4, margin=0.1, scale=0.25, seed=0):
    """Robust LP that is feasible by construction: a point x0 of the
    domain is drawn and every b_i is set to its worst-case constraint
    value plus `margin`."""
    rng = np.random.default_rng(seed)
    a = scale * rng.standard_normal((m, n))
    P = scale * rng.standard_normal((m, n, d)) / math.sqrt(d)
    domain = SetDescriptor.l1_ball(n)
    x0 = domain.project(rng.standard_normal(n))
    grads = np.einsum("mnd,n->md", P, x0)
    b = a @ x0 + np.linalg.norm(grads, axis=1) + margin
    return RobustLpInstance(a=a, b=b, P=P, domain=domain)


def infeasible_two_constraint_lp(noise_scale=0.1):
    """x_1 <= -1 and -x_1 <= -1 over the unit l1-ball: infeasible for
    every noise assignment (max_i f_i >= 1 - noise_scale > 0).  A small
    noise coupling on the second coordinate keeps the gradient bounds
    strictly positive; pass 0 for the noise-free variant."""
    a = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([-1.0, -1.0])
    P = np.zeros((2, 2, 1))
    P[:, 1, 0] = noise_scale
    return RobustLpInstance(a=a, b=b, P=P, domain=SetDescriptor.l1_ball(2))


def scaling_lp_instance(m, n, d, seed=0, entry=1.0, margin=0.2):
    """Feasible LP family whose G1*Ginf/G2^2 ratio stays equal to m as d
    grows: each P_i has a single nonzero entry of fixed magnitude, so
    G2 = Ginf = entry and G1 = m * entry."""
    rng = np.random.default_rng(seed)
    a = 0.2 * rng.standard_normal((m, n))
    P = np.zeros((m, n, d))
    rows = rng.integers(0, n, size=m)
    cols = rng.integers(0, d, size=m)
    for i in range(m):
        P[i, rows[i], cols[i]] = entry
    domain = SetDescriptor.l1_ball(n)
    x0 = domain.project(rng.standard_normal(n))
    grads = np.einsum("mnd,n->md", P, x0)
    b = a @ x0 + np.linalg.norm(grads, axis=1) + margin
    return RobustLpInstance(a=a, b=b, P=P, domain=domain)


def gmrp_two_asset(r_tilde=(0.1, 0.2), kappa=0.05, c=0.15):
    """Two-asset, one-market portfolio desk instance with spherical
    return uncertainty."""
    r = np.asarray(r_tilde, dtype=float)
    n = r.size
    return GmrpInstance(r_tilde=r[None, :], kappa=np.array([kappa]),
                        S_half=np.eye(n)[None, :, :], c=c)


def ttd_three_bar(lam=0.5, total_volume=1.0, q_scale=0.1, radius=2.0):
    """Three bars in the plane under an ellipsoidal load Q = q_scale * I."""
    nodes = np.array([[1.0, 0.0],
                      [0.0, 1.0],
                      [math.sqrt(0.5), math.sqrt(0.5)]])
    return TtdInstance(nodes=nodes, total_volume=total_volume,
                       Q=q_scale * np.eye(2), lam=lam,
                       frobenius_radius=radius)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _domain_to_json(domain):
    doc = {"kind": domain.kind}
    if domain.kind == "l1-ball":
        doc.update(dim=domain.dim, radius=domain.radius)
    elif domain.kind == "simplex":
        doc.update(dim=domain.dim)
    else:
        raise ParameterError(f"unsupported LP domain kind {domain.kind!r}")
    return doc


def _domain_from_json(doc):
    if doc["kind"] == "l1-ball":
        return SetDescriptor.l1_ball(doc["dim"], doc.get("radius", 1.0))
    if doc["kind"] == "simplex":
        return SetDescriptor.simplex(doc["dim"])
    raise ParameterError(f"unsupported LP domain kind {doc['kind']!r}")


def instance_to_json(instance):
    """Serialize an instance to a JSON-compatible document (dense
    row-major arrays with explicit dims)."""
    if isinstance(instance, RobustLpInstance):
        return {
            "type": "robust-lp",
            "m": instance.m, "n": instance.n, "d": instance.d,
            "a": instance.a.tolist(),
            "b": instance.b.tolist(),
            "P": instance.P.tolist(),
            "domain": _domain_to_json(instance.domain),
        }
    if isinstance(instance, RobustSdpInstance):
        return {
            "type": "robust-sdp",
            "m": instance.m, "n": instance.n_matrix, "d": instance.d,
            "A": instance.A.tolist(),
            "b": instance.b.tolist(),
            "P": instance.P.tolist(),
            "noise_weight": instance.noise_weight.tolist(),
            "z_coeff": (None if instance.z_coeff is None
                        else instance.z_coeff.tolist()),
            "z_interval": (None if instance.z_interval is None
                           else list(instance.z_interval)),
            "domain_radius": instance.domain_radius,
            "corner": instance.corner,
        }
    raise ParameterError(f"cannot serialize {type(instance).__name__}")


def instance_from_json(doc):
    if doc["type"] == "robust-lp":
        return RobustLpInstance(a=np.array(doc["a"]), b=np.array(doc["b"]),
                                P=np.array(doc["P"]),
                                domain=_domain_from_json(doc["domain"]))
    if doc["type"] == "robust-sdp":
        return RobustSdpInstance(
            A=np.array(doc["A"]), b=np.array(doc["b"]), P=np.array(doc["P"]),
            noise_weight=np.array(doc["noise_weight"]),
            z_coeff=(None if doc["z_coeff"] is None
                     else np.array(doc["z_coeff"])),
            z_interval=(None if doc["z_interval"] is None
                        else tuple(doc["z_interval"])),
            domain_radius=doc["domain_radius"],
            corner=doc["corner"],
        )
    raise ParameterError(f"unknown instance type {doc['type']!r}")


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_json(instance), fh)


def load_instance(path):
    with open(path) as fh:
        return instance_from_json(json.load(fh))
