"""Euclidean projection operators for the convex sets used by the solvers.

All projectors are pure functions returning the nearest point of the set in
the l2 (or Frobenius) sense.  Simplex and l1-ball projections use the
sort-and-threshold method of Duchi et al. (2008), which runs in
O(d log d).  Projection onto the intersection of the positive-semidefinite
cone and a Frobenius ball clips negative eigenvalues and then rescales;
both steps act on the eigenvalue vector and commute, so the sequential
form is the exact projection.  More general intersections (e.g. a PSD
Frobenius ball with a pinned corner entry) go through Dykstra's
alternating projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NumericalError",
    "project_ball",
    "project_simplex",
    "project_l1_ball",
    "project_box",
    "project_psd_frobenius",
    "dykstra_project",
    "SetDescriptor",
]

# Eigenvalues in [-PSD_EIG_FLOOR, 0] are treated as exact zeros when
# classifying a matrix as PSD.
PSD_EIG_FLOOR = 1e-12


class NumericalError(RuntimeError):
    """Raised when a numerical subroutine (eigendecomposition, Dykstra)
    fails to produce a usable result."""


def project_ball(v, center=None, radius=1.0):
    """Project v onto the Euclidean ball B(center, radius)."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    shifted = v if center is None else v - np.asarray(center, dtype=float)
    norm = np.linalg.norm(shifted)
    if norm <= radius:
        return v.copy()
    out = shifted * (radius / norm)
    return out if center is None else out + center


def _simplex_threshold(u_sorted_desc, total):
    """Threshold theta for projecting onto {x >= 0, sum x = total}, given
    the coordinates sorted in decreasing order."""
    css = np.cumsum(u_sorted_desc) - total
    idx = np.arange(1, u_sorted_desc.size + 1)
    positive = u_sorted_desc - css / idx > 0
    rho = np.nonzero(positive)[0][-1]
    return css[rho] / (rho + 1.0)


def project_simplex(v):
    """Project v onto the unit simplex {x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=float)
    theta = _simplex_threshold(np.sort(v)[::-1], 1.0)
    return np.maximum(v - theta, 0.0)


def project_l1_ball(v, radius=1.0):
    """Project v onto {x : ||x||_1 <= radius}."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    theta = _simplex_threshold(np.sort(a)[::-1], radius)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_box(v, lo, hi):
    return np.clip(np.asarray(v, dtype=float), lo, hi)


def project_psd_frobenius(M, R=1.0):
    """Project a (symmetrized) matrix onto {X PSD : ||X||_F <= R}.

    Negative eigenvalues are clipped to zero, then the result is rescaled
    into the Frobenius ball.
    """
    M = np.asarray(M, dtype=float)
    if R <= 0:
        raise ValueError("Frobenius radius must be positive")
    sym = 0.5 * (M + M.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed") from exc
    clipped = np.maximum(eigvals, 0.0)
    norm = np.sqrt(np.sum(clipped**2))
    if norm > R:
        clipped *= R / norm
    return (eigvecs * clipped) @ eigvecs.T


def dykstra_project(v, sets, max_iter=1000, tol=1e-10):
    """Dykstra's alternating projections onto the intersection of `sets`.

    Each element of `sets` is either a SetDescriptor or a bare projector
    callable.  Returns (point, converged); convergence means successive
    sweeps moved the iterate by less than `tol` in l2.
    """
    projectors = [s.project if hasattr(s, "project") else s for s in sets]
    x = np.asarray(v, dtype=float).copy()
    increments = [np.zeros_like(x) for _ in projectors]
    for _ in range(max_iter):
        x_prev = x
        for k, proj in enumerate(projectors):
            y = proj(x + increments[k])
            increments[k] = x + increments[k] - y
            x = y
        if np.linalg.norm(x - x_prev) < tol:
            return x, True
    return x, False


def _project_corner_slice(flat, n, corner):
    out = np.asarray(flat, dtype=float).copy()
    out[0] = corner
    return out


@dataclass(eq=False)
class SetDescriptor:
    """Descriptor of one convex set kind together with its exact projector.

    Matrix-valued sets (`psd-frobenius-ball`, with or without a pinned
    corner entry) operate on the flattened row-major representation of a
    symmetric n x n matrix, so every kind exposes the same vector API.
    """

    kind: str
    dim: int
    center: np.ndarray | None = None
    radius: float = 1.0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    n: int = 0
    corner: float | None = None
    dykstra_max_iter: int = 1000
    dykstra_tol: float = 1e-10

    # -- constructors -------------------------------------------------

    @classmethod
    def ball(cls, center, radius=1.0):
        center = np.asarray(center, dtype=float)
        return cls(kind="euclidean-ball", dim=center.size, center=center,
                   radius=float(radius))

    @classmethod
    def simplex(cls, dim):
        return cls(kind="simplex", dim=int(dim))

    @classmethod
    def l1_ball(cls, dim, radius=1.0):
        return cls(kind="l1-ball", dim=int(dim), radius=float(radius))

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("invalid box bounds")
        return cls(kind="box", dim=lo.size, lo=lo, hi=hi)

    @classmethod
    def psd_ball(cls, n, radius=1.0):
        return cls(kind="psd-frobenius-ball", dim=int(n) * int(n), n=int(n),
                   radius=float(radius))

    @classmethod
    def psd_ball_corner(cls, n, radius=1.0, corner=1.0):
        if corner < 0 or corner > radius:
            raise ValueError("corner value must satisfy 0 <= corner <= radius "
                             "for the set to be nonempty")
        # Tighter-than-default sweep tolerance so the composed projector is
        # idempotent to 1e-9.
        return cls(kind="psd-frobenius-ball-with-corner", dim=int(n) * int(n),
                   n=int(n), radius=float(radius), corner=float(corner),
                   dykstra_tol=1e-12)

    # -- operations ----------------------------------------------------

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean-ball":
            return project_ball(v, self.center, self.radius)
        if self.kind == "simplex":
            return project_simplex(v)
        if self.kind == "l1-ball":
            return project_l1_ball(v, self.radius)
        if self.kind == "box":
            return project_box(v, self.lo, self.hi)
        if self.kind == "psd-frobenius-ball":
            M = 0.5 * (v.reshape(self.n, self.n) + v.reshape(self.n, self.n).T)
            return project_psd_frobenius(M, self.radius).ravel()
        if self.kind == "psd-frobenius-ball-with-corner":
            M = 0.5 * (v.reshape(self.n, self.n) + v.reshape(self.n, self.n).T)
            point, converged = dykstra_project(
                M.ravel(),
                [lambda f: _project_corner_slice(f, self.n, self.corner),
                 lambda f: project_psd_frobenius(
                     f.reshape(self.n, self.n), self.radius).ravel()],
                max_iter=self.dykstra_max_iter,
                tol=self.dykstra_tol,
            )
            if not converged:
                raise NumericalError(
                    "Dykstra did not converge within "
                    f"{self.dykstra_max_iter} sweeps")
            return point
        raise ValueError(f"unknown set kind {self.kind!r}")

    def canonical_member(self):
        """A cheap deterministic point of the set (used as initialization
        and as a constructive nonemptiness witness)."""
        if self.kind == "euclidean-ball":
            return self.center.copy()
        if self.kind == "simplex":
            return np.full(self.dim, 1.0 / self.dim)
        if self.kind == "l1-ball":
            return np.zeros(self.dim)
        if self.kind == "box":
            return 0.5 * (self.lo + self.hi)
        if self.kind == "psd-frobenius-ball":
            return np.zeros(self.dim)
        if self.kind == "psd-frobenius-ball-with-corner":
            M = np.zeros((self.n, self.n))
            M[0, 0] = self.corner
            return M.ravel()
        raise ValueError(f"unknown set kind {self.kind!r}")

    def contains(self, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean-ball":
            return np.linalg.norm(v - self.center) <= self.radius + tol
        if self.kind == "simplex":
            return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)
        if self.kind == "l1-ball":
            return np.abs(v).sum() <= self.radius + tol
        if self.kind == "box":
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        if self.kind in ("psd-frobenius-ball", "psd-frobenius-ball-with-corner"):
            M = v.reshape(self.n, self.n)
            if np.max(np.abs(M - M.T)) > tol:
                return False
            if np.linalg.norm(M, "fro") > self.radius + tol:
                return False
            if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < -max(tol, PSD_EIG_FLOOR):
                return False
            if self.kind == "psd-frobenius-ball-with-corner":
                return abs(M[0, 0] - self.corner) <= tol
            return True
        raise ValueError(f"unknown set kind {self.kind!r}")

    def random_member(self, rng):
        """Sample a point of the set (not uniform; used by property tests
        and the validation suite)."""
        if self.kind == "euclidean-ball":
            direction = rng.standard_normal(self.dim)
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                return self.center.copy()
            r = self.radius * rng.random() ** (1.0 / self.dim)
            return self.center + (r / norm) * direction
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(self.dim))
        if self.kind == "l1-ball":
            signs = rng.choice([-1.0, 1.0], size=self.dim)
            mags = rng.dirichlet(np.ones(self.dim))
            return signs * mags * self.radius * rng.random()
        if self.kind == "box":
            return self.lo + rng.random(self.dim) * (self.hi - self.lo)
        if self.kind == "psd-frobenius-ball":
            A = rng.standard_normal((self.n, self.n))
            M = A @ A.T
            norm = np.linalg.norm(M, "fro")
            if norm > 0:
                M *= self.radius * rng.random() / norm
            return M.ravel()
        if self.kind == "psd-frobenius-ball-with-corner":
            A = rng.standard_normal((self.n, self.n))
            M = A @ A.T
            norm = np.linalg.norm(M, "fro")
            if norm > 0:
                M *= self.radius * rng.random() / norm
            return self.project(M.ravel())
        raise ValueError(f"unknown set kind {self.kind!r}")
