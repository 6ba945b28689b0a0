"""Linearized cones: membership, dual-cone decomposition, kernels, sampling.

The linearized cone at a base point is the polyhedron
``{d : A_eq d = 0, A_in d <= 0}`` built from active gradient rows.  Zero
rows are kept on purpose: a constraint like ``x^2 <= 0`` contributes the
zero row at the origin and the cone is then the whole space, exactly as the
definition demands.

Dual-cone membership asks for coefficients ``v = sum lambda_i row_i`` with
``lambda_i >= 0`` on inequality rows and free on equality rows.  It is
solved as a tiny bound-constrained least-squares problem: free coefficients
are split into positive and negative parts and a Lawson-Hanson style
active-set iteration handles the non-negativity.  A small ridge term makes
the returned coefficient vector the minimal-Euclidean-norm element when the
solution set is a nontrivial polytope.  All operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.random import PCG64, Generator

from .model import ActiveSet, PointData

__all__ = [
    "ConeCoefficients",
    "ConeDirectionSample",
    "LinearizedCone",
    "build_linearized_cone",
    "cone_member",
    "dual_cone_member",
    "kernel_basis",
    "nonneg_lstsq",
    "sample_cone_directions",
]

_RIDGE = 1e-12


@dataclass(frozen=True)
class LinearizedCone:
    """Rows of active gradients defining {d : eq_rows d = 0, ineq_rows d <= 0}."""

    eq_rows: np.ndarray
    ineq_rows: np.ndarray
    eq_indices: tuple[int, ...]
    ineq_indices: tuple[int, ...]
    base_point: np.ndarray

    @property
    def dimension(self) -> int:
        return self.base_point.shape[0]

    def to_dict(self) -> dict:
        return {
            "base_point": [float(v) for v in self.base_point],
            "eq_indices": list(self.eq_indices),
            "eq_rows": [[float(v) for v in row] for row in self.eq_rows],
            "ineq_indices": list(self.ineq_indices),
            "ineq_rows": [[float(v) for v in row] for row in self.ineq_rows],
        }


@dataclass(frozen=True)
class ConeCoefficients:
    """Coefficients lambda over cone rows: >= 0 on inequalities, free on equalities."""

    values: tuple[tuple[int, float], ...]  # (constraint index, lambda) sorted
    residual: float

    def as_dict(self) -> dict[int, float]:
        return dict(self.values)

    def to_dict(self) -> dict:
        return {
            "lambda": {str(i): v for i, v in self.values},
            "residual": self.residual,
        }


def build_linearized_cone(pd: PointData, aset: ActiveSet) -> LinearizedCone:
    """Copy equality rows and active inequality rows out of the Jacobian."""
    eq_idx = pd.equality_indices
    ineq_idx = tuple(sorted(aset.indices))
    n = pd.dimension
    eq_rows = (
        np.array([pd.row(i) for i in eq_idx]) if eq_idx else np.zeros((0, n))
    )
    ineq_rows = (
        np.array([pd.row(i) for i in ineq_idx]) if ineq_idx else np.zeros((0, n))
    )
    return LinearizedCone(
        eq_rows=eq_rows,
        ineq_rows=ineq_rows,
        eq_indices=eq_idx,
        ineq_indices=ineq_idx,
        base_point=np.asarray(pd.point, dtype=float),
    )


def cone_member(c: LinearizedCone, d: Sequence[float], tol: float) -> bool:
    """Membership with per-row relative scaling tol * (1 + |row| * |d|)."""
    d = np.asarray(d, dtype=float)
    if d.shape != (c.dimension,):
        raise ValueError(f"direction has shape {d.shape}, expected ({c.dimension},)")
    dn = float(np.linalg.norm(d))
    for row in c.eq_rows:
        bound = tol * (1.0 + float(np.linalg.norm(row)) * dn)
        if abs(float(row @ d)) > bound:
            return False
    for row in c.ineq_rows:
        bound = tol * (1.0 + float(np.linalg.norm(row)) * dn)
        if float(row @ d) > bound:
            return False
    return True


def nonneg_lstsq(a: np.ndarray, b: np.ndarray, max_iter: Optional[int] = None):
    """Solve min |a x - b| subject to x >= 0 (Lawson-Hanson active set).

    Parameters
    ----------
    a : (m, n) array
    b : (m,) array
    max_iter : int, optional
        Cap on active-set updates; defaults to ``30 * n``.

    Returns
    -------
    x : (n,) array with x >= 0
    rnorm : float, residual norm at the solution
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    if max_iter is None:
        max_iter = 30 * max(n, 1)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = a.T @ (b - a @ x)
    tol = (
        10.0
        * np.finfo(float).eps
        * max(m, n)
        * max(1.0, float(np.max(np.abs(w), initial=0.0)))
    )
    iters = 0
    while not passive.all() and iters < max_iter:
        candidate = np.where(~passive, w, -np.inf)
        j = int(np.argmax(candidate))
        if candidate[j] <= tol:
            break
        passive[j] = True
        while True:
            iters += 1
            cols = np.flatnonzero(passive)
            z = np.zeros(n)
            z[cols] = np.linalg.lstsq(a[:, cols], b, rcond=None)[0]
            if np.min(z[cols], initial=np.inf) > 0.0:
                x = z
                break
            if iters >= max_iter:
                x = np.where(z > 0.0, z, 0.0)
                break
            # Step toward z only as far as non-negativity allows, then
            # retire every coordinate that reached the bound.
            blocking = passive & (z <= 0.0)
            denom = x - z
            ratios = np.where(denom[blocking] > 0.0, x[blocking] / np.where(
                denom[blocking] > 0.0, denom[blocking], 1.0), 0.0)
            alpha = float(np.min(ratios))
            x = x + alpha * (z - x)
            retire = blocking & (x <= 1e-12 * max(1.0, float(np.max(x, initial=0.0))))
            if not np.any(retire):
                smallest = np.flatnonzero(blocking)[int(np.argmin(x[blocking]))]
                retire = np.zeros(n, dtype=bool)
                retire[smallest] = True
            passive &= ~retire
            x[~passive] = 0.0
        w = a.T @ (b - a @ x)
    return x, float(np.linalg.norm(b - a @ x))


def _solve_cone_coefficients(c: LinearizedCone, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimal-norm signed coefficients lambda and the residual v - rows^T lambda.

    Free (equality) coefficients are split into positive and negative parts
    so one non-negative solve covers both conventions.  The ridge term makes
    the active-set iteration land on the minimal-norm face when the rows are
    dependent; an unregularized least-squares polish on that support then
    removes the ridge bias (the SVD solve returns the exact minimal-norm
    element of the face).  The polish is kept only if it preserves the signs
    and does not worsen the residual.
    """
    k_eq = len(c.eq_indices)
    m = k_eq + len(c.ineq_indices)
    rows = np.vstack([c.eq_rows, c.ineq_rows])
    design = np.hstack([c.eq_rows.T, -c.eq_rows.T, c.ineq_rows.T])
    n_cols = design.shape[1]
    augmented = np.vstack([design, np.sqrt(_RIDGE) * np.eye(n_cols)])
    target = np.concatenate([v, np.zeros(n_cols)])
    x, _ = nonneg_lstsq(augmented, target)
    lam = np.concatenate([x[:k_eq] - x[k_eq:2 * k_eq], x[2 * k_eq:]])
    residual = float(np.linalg.norm(v - rows.T @ lam))

    scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    support = [
        i for i in range(m) if i < k_eq or abs(lam[i]) > 1e-9 * scale
    ]
    if support:
        polished = np.zeros(m)
        sol, *_ = np.linalg.lstsq(rows[support].T, v, rcond=None)
        polished[support] = sol
        ok_signs = all(
            polished[i] >= -1e-12 * scale for i in range(k_eq, m)
        )
        polished[k_eq:] = np.clip(polished[k_eq:], 0.0, None)
        polished_residual = float(np.linalg.norm(v - rows.T @ polished))
        if ok_signs and polished_residual <= residual + 1e-12 * (1.0 + float(np.linalg.norm(v))):
            return polished, v - rows.T @ polished
    return lam, v - rows.T @ lam


def dual_cone_member(
    c: LinearizedCone, v: Sequence[float], tol: float
) -> Optional[ConeCoefficients]:
    """Decompose v over the cone's rows, or return None when v is not in the dual.

    Success means ``|sum lambda_i row_i - v| <= tol * (1 + |v|)`` with the
    sign convention of :class:`ConeCoefficients`.  When the active rows are
    dependent the multiplier set is a polytope and the minimal-norm element
    is returned.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (c.dimension,):
        raise ValueError(f"vector has shape {v.shape}, expected ({c.dimension},)")
    if len(c.eq_indices) + len(c.ineq_indices) == 0:
        if float(np.linalg.norm(v)) <= tol * (1.0 + float(np.linalg.norm(v))):
            return ConeCoefficients(values=(), residual=float(np.linalg.norm(v)))
        return None
    lam, residual_vec = _solve_cone_coefficients(c, v)
    residual = float(np.linalg.norm(residual_vec))
    if residual > tol * (1.0 + float(np.linalg.norm(v))):
        return None
    indices = c.eq_indices + c.ineq_indices
    pairs = tuple(sorted((int(i), float(l)) for i, l in zip(indices, lam)))
    return ConeCoefficients(values=pairs, residual=residual)


def dual_cone_residual_direction(c: LinearizedCone, v: Sequence[float]) -> np.ndarray:
    """Least-squares residual of the dual decomposition of v.

    When v is outside the dual cone the residual r = v - sum lambda_i row_i
    satisfies <row_i, r> <= 0 on inequality rows, = 0 on equality rows, and
    <v, r> = |r|^2 > 0; r therefore lies in the cone and certifies that
    <v, d> is positive somewhere on it.
    """
    v = np.asarray(v, dtype=float)
    if len(c.eq_indices) + len(c.ineq_indices) == 0:
        return v.copy()
    _, residual_vec = _solve_cone_coefficients(c, v)
    return residual_vec


def kernel_basis(rows: np.ndarray, tol_rank: float) -> np.ndarray:
    """Orthonormal basis of the numerical null space, one vector per row.

    Returns an (n - k, n) array whose rows are the right singular vectors
    with singular value <= tol_rank * sigma_max; an empty row set yields the
    identity basis.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, n = rows.shape
    if m == 0 or not np.any(rows):
        return np.eye(n)
    _, sigma, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(sigma > tol_rank * sigma[0]))
    return vt[rank:]


@dataclass(frozen=True)
class ConeDirectionSample:
    """Seeded unit directions inside a linearized cone, with sampling notes."""

    directions: tuple[np.ndarray, ...]
    requested: int
    attempts: int
    trivial: bool               # no nonzero member was found at all
    stalled: bool               # rejection ended before `requested` directions

    def to_dict(self) -> dict:
        return {
            "directions": [[float(v) for v in d] for d in self.directions],
            "requested": self.requested,
            "attempts": self.attempts,
            "trivial": self.trivial,
            "stalled": self.stalled,
        }


def sample_cone_directions(
    c: LinearizedCone, count: int, seed: int, tol: float = 1e-8
) -> ConeDirectionSample:
    """Deterministic unit members of the cone.

    Kernel-basis vectors of the equality rows (and their negations) are
    offered first; random sphere samples projected onto the equality kernel
    follow, with a sign flip retried when the inequality rows reject a
    candidate.  Near-duplicates are dropped.  Fewer than ``count``
    directions may be returned; a cone with no nonzero member found is
    flagged trivial.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    n = c.dimension
    basis = kernel_basis(c.eq_rows if c.eq_rows.size else np.zeros((0, n)), tol)
    accepted: list[np.ndarray] = []

    def offer(d: np.ndarray) -> None:
        norm = float(np.linalg.norm(d))
        if norm <= 1e-12:
            return
        d = d / norm
        for candidate in (d, -d):
            if not cone_member(c, candidate, tol):
                continue
            if any(float(candidate @ e) > 1.0 - 1e-12 for e in accepted):
                return
            accepted.append(candidate)
            return

    for b in basis:
        offer(b.copy())
        offer(-b)
        if len(accepted) >= count:
            break

    rng = Generator(PCG64(int(seed)))
    attempts = 0
    max_attempts = 20 * count
    while len(accepted) < count and attempts < max_attempts and basis.shape[0] > 0:
        attempts += 1
        g = rng.standard_normal(n)
        offer(basis.T @ (basis @ g))

    return ConeDirectionSample(
        directions=tuple(accepted),
        requested=count,
        attempts=attempts,
        trivial=not accepted,
        stalled=len(accepted) < count,
    )
