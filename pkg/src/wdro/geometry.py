"""Ground norms and support polytopes.

Transport costs are measured in a ground norm on the sample space; only
the 1-norm and the max-norm are supported because only those keep every
downstream program linear.  Supports are polytopes ``{x : Cx <= d}``; an
empty ``C`` means the whole space.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb, inf

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySupport,
    NormUnsupported,
    TooLarge,
    UnboundedPolyhedron,
)
from .lp import LpBuilder
from .simplex import solve_lp

__all__ = [
    "GroundNorm",
    "norm_value",
    "dual_norm_value",
    "Polytope",
    "support_function",
    "nearest_point",
    "enumerate_vertices",
]


class GroundNorm(enum.Enum):
    """Norm used for transport cost.  ``dual`` is the norm appearing in the
    linearized dual constraints (1-norm and max-norm are dual to each
    other)."""

    L1 = "l1"
    LINF = "linf"

    @property
    def dual(self) -> "GroundNorm":
        return GroundNorm.LINF if self is GroundNorm.L1 else GroundNorm.L1

    @classmethod
    def parse(cls, text: str) -> "GroundNorm":
        try:
            return cls(text)
        except ValueError:
            raise NormUnsupported(
                f"ground norm {text!r} not supported; use 'l1' or 'linf'"
            ) from None


def norm_value(x: np.ndarray, norm: GroundNorm) -> float:
    x = np.asarray(x, dtype=float)
    if norm is GroundNorm.L1:
        return float(np.sum(np.abs(x)))
    return float(np.max(np.abs(x))) if x.size else 0.0


def dual_norm_value(x: np.ndarray, norm: GroundNorm) -> float:
    return norm_value(x, norm.dual)


@dataclass(frozen=True)
class Polytope:
    """Support set {x in R^dim : C x <= d}.  ``C`` may have zero rows, in
    which case the support is the whole space."""

    C: np.ndarray
    d: np.ndarray
    dim: int

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.size == 0:
            C = C.reshape(0, self.dim)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if C.shape[1] != self.dim:
            raise DimensionMismatch(
                f"support rows have {C.shape[1]} columns, expected {self.dim}"
            )
        if d.shape[0] != C.shape[0]:
            raise DimensionMismatch("support rhs length does not match row count")
        if not np.all(np.isfinite(C)) or not np.all(np.isfinite(d)):
            raise DimensionMismatch("support data must be finite")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)

    @classmethod
    def free(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("box corners must have equal length")
        dim = lo.shape[0]
        eye = np.eye(dim)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]), dim)

    @classmethod
    def halfspaces(cls, C, d) -> "Polytope":
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return cls(C, np.asarray(d, dtype=float), C.shape[1])

    @property
    def n_rows(self) -> int:
        return self.C.shape[0]

    @property
    def is_free(self) -> bool:
        return self.n_rows == 0

    def violation(self, points: np.ndarray) -> np.ndarray:
        """Largest row violation per point; nonpositive means inside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_free:
            return np.full(pts.shape[0], -inf)
        return np.max(pts @ self.C.T - self.d, axis=1)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.violation(points) <= tol

    def nonempty(self) -> bool:
        if self.is_free:
            return True
        b = LpBuilder("min")
        x = b.vars("x", self.dim)
        for i in range(self.n_rows):
            b.add_le({x[j]: self.C[i, j] for j in range(self.dim)}, self.d[i])
        return solve_lp(b.build()).status == "optimal"


def support_function(p: Polytope, z: np.ndarray) -> float:
    """sup {<z, x> : x in p}, possibly +inf.

    Computed through the dual program min {<gamma, d> : C'gamma = z,
    gamma >= 0}; its infeasibility certifies an unbounded direction
    whenever the support itself is nonempty.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != p.dim:
        raise DimensionMismatch("direction length does not match support dimension")
    if p.is_free:
        return 0.0 if np.all(z == 0.0) else inf

    b = LpBuilder("min")
    g = b.vars("gamma", p.n_rows, lb=0.0)
    b.set_objective({g[i]: p.d[i] for i in range(p.n_rows)})
    for j in range(p.dim):
        b.add_eq({g[i]: p.C[i, j] for i in range(p.n_rows)}, z[j])
    sol = solve_lp(b.build())
    if sol.status == "optimal":
        return sol.objective_value
    if not p.nonempty():
        raise EmptySupport("support polytope is empty")
    return inf


def nearest_point(p: Polytope, point: np.ndarray, norm: GroundNorm) -> tuple[float, np.ndarray]:
    """Ground-norm distance from ``point`` to the polytope and the closest
    point achieving it."""
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape[0] != p.dim:
        raise DimensionMismatch("point length does not match support dimension")
    if p.is_free:
        return 0.0, point.copy()
    b = LpBuilder("min")
    x = b.vars("x", p.dim)
    t = b.var("t", lb=0.0)
    b.set_objective({t: 1.0})
    b.add_norm_le(
        [({x[j]: 1.0}, -point[j]) for j in range(p.dim)], t, norm.value
    )
    for i in range(p.n_rows):
        b.add_le({x[j]: p.C[i, j] for j in range(p.dim)}, p.d[i])
    sol = solve_lp(b.build())
    if sol.status != "optimal":
        raise EmptySupport("support polytope is empty")
    return sol.objective_value, b.values_of(sol, x)


def _reduce_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Row-space reduction of [A | b]; returns (A_red, b_red, consistent)."""
    m = A.shape[0]
    if m == 0:
        return A, b, True
    U, s, _ = np.linalg.svd(A, full_matrices=True)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > tol * scale))
    A_red = U[:, :rank].T @ A
    b_red = U[:, :rank].T @ b
    resid = b - U[:, :rank] @ b_red
    consistent = bool(np.linalg.norm(resid) <= 1e-9 * (1.0 + np.linalg.norm(b)))
    return A_red, b_red, consistent


def enumerate_vertices(
    A_eq: np.ndarray, b_eq: np.ndarray, max_bases: int = 200_000
) -> np.ndarray:
    """All vertices of {theta >= 0 : A_eq theta = b_eq}.

    Vertices are basic feasible solutions; every size-rank column subset
    with a nonsingular square block is solved and filtered for
    nonnegativity, then near-duplicates (1e-9 in the max-norm) are merged.
    Raises UnboundedPolyhedron when the recession cone contains a nonzero
    ray and TooLarge when the subset count exceeds ``max_bases``.
    """
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).reshape(-1)
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatch("equality rhs length does not match row count")
    n = A.shape[1]

    # Nontrivial recession ray <=> max 1'theta over {A theta = 0, 0 <= theta <= 1} > 0.
    bld = LpBuilder("max")
    th = bld.vars("theta", n, lb=0.0, ub=1.0)
    bld.set_objective({v: 1.0 for v in th})
    for i in range(A.shape[0]):
        bld.add_eq({th[j]: A[i, j] for j in range(n) if A[i, j] != 0.0}, 0.0)
    rec = solve_lp(bld.build())
    if rec.status != "optimal" or rec.objective_value > 1e-9:
        raise UnboundedPolyhedron(
            "the set {theta >= 0 : A theta = b} has a nonzero recession direction"
        )

    A_red, b_red, consistent = _reduce_rows(A, b)
    if not consistent:
        return np.zeros((0, n))
    r = A_red.shape[0]
    if r == 0:
        # Only theta >= 0 with A == 0; bounded => the set is {0} or empty.
        return np.zeros((1, n)) if np.allclose(b, 0.0) else np.zeros((0, n))
    if comb(n, r) > max_bases:
        raise TooLarge(
            f"vertex enumeration needs {comb(n, r)} basis checks, cap is {max_bases}"
        )

    found: list[np.ndarray] = []
    for cols in itertools.combinations(range(n), r):
        block = A_red[:, cols]
        try:
            sol = np.linalg.solve(block, b_red)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(sol)):
            continue
        if np.linalg.norm(block @ sol - b_red) > 1e-8 * (1.0 + np.linalg.norm(b_red)):
            continue
        if np.any(sol < -1e-9):
            continue
        v = np.zeros(n)
        v[list(cols)] = np.clip(sol, 0.0, None)
        if np.max(np.abs(A @ v - b)) > 1e-7 * (1.0 + np.max(np.abs(b), initial=0.0)):
            continue
        if not any(np.max(np.abs(v - u)) <= 1e-9 for u in found):
            found.append(v)
    if not found:
        return np.zeros((0, n))
    return np.vstack(found)
