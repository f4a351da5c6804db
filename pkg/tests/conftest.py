"""Shared test oracles and instance generators.

Reference solves go through scipy's HiGHS interface so that every
cross-check pits the embedded engine against an independently developed
solver.  The brute-force routine enumerates candidate vertices directly
from active-set algebra and never touches any simplex code.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from wdro.lp import EQ, GE, LE, LinearProgram


def solve_with_scipy(lp: LinearProgram):
    """Return (status, value, x) using scipy HiGHS; status strings match
    the embedded engine ("optimal" / "infeasible" / "unbounded")."""
    c = -lp.costs if lp.sense == "max" else lp.costs
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, rel in enumerate(lp.row_relations):
        row, rhs = lp.row_coeffs[i], lp.row_rhs[i]
        if rel == LE:
            A_ub.append(row)
            b_ub.append(rhs)
        elif rel == GE:
            A_ub.append(-row)
            b_ub.append(-rhs)
        else:
            A_eq.append(row)
            b_eq.append(rhs)
    bounds = [
        (
            None if np.isneginf(lo) else lo,
            None if np.isposinf(hi) else hi,
        )
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "other")
    value = res.fun if res.status == 0 else np.nan
    if lp.sense == "max" and res.status == 0:
        value = -value
    return status, value, res.x


def brute_force_lp(lp: LinearProgram, tol: float = 1e-7):
    """Optimal value of a fully bounded LP by enumerating candidate
    vertices as intersections of n active constraints (rows tightened to
    equality and/or bounds).  Requires finite bounds on every variable so
    the feasible set is a polytope.  Returns (value, argmin) or (None,
    None) when no feasible vertex exists.
    """
    A, b = lp.row_coeffs, lp.row_rhs
    m, n = A.shape
    assert np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper))
    constraints = [(A[i], b[i]) for i in range(m)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        constraints.append((e.copy(), lp.lower[j]))
        constraints.append((e.copy(), lp.upper[j]))

    def feasible(x):
        if np.any(x < lp.lower - tol) or np.any(x > lp.upper + tol):
            return False
        r = A @ x
        for i, rel in enumerate(lp.row_relations):
            if rel == LE and r[i] > b[i] + tol:
                return False
            if rel == GE and r[i] < b[i] - tol:
                return False
            if rel == EQ and abs(r[i] - b[i]) > tol:
                return False
        return True

    best_val, best_x = None, None
    sign = 1.0 if lp.sense == "min" else -1.0
    for combo in itertools.combinations(range(len(constraints)), n):
        M = np.array([constraints[k][0] for k in combo])
        rhs = np.array([constraints[k][1] for k in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs)
        if not feasible(x):
            continue
        v = sign * float(lp.costs @ x)
        if best_val is None or v < best_val:
            best_val, best_x = v, x
    if best_val is None:
        return None, None
    return sign * best_val, best_x


def random_bounded_lp(rng: np.random.Generator, n_max: int = 4, m_max: int = 4) -> LinearProgram:
    """Random LP with finite bounds on every variable (always a polytope,
    possibly empty)."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    A = np.round(rng.uniform(-3, 3, size=(m, n)), 2)
    lo = np.round(rng.uniform(-3, 0, size=n), 2)
    hi = lo + np.round(rng.uniform(0.5, 4, size=n), 2)
    x0 = rng.uniform(lo, hi)
    rels, rhs = [], []
    for i in range(m):
        u = rng.random()
        margin = rng.uniform(-0.5, 1.5)
        if u < 0.4:
            rels.append(LE)
            rhs.append(A[i] @ x0 + margin)
        elif u < 0.8:
            rels.append(GE)
            rhs.append(A[i] @ x0 - margin)
        else:
            rels.append(EQ)
            rhs.append(A[i] @ x0)
    return LinearProgram(
        sense="min" if rng.random() < 0.5 else "max",
        costs=np.round(rng.uniform(-2, 2, size=n), 2),
        row_coeffs=A,
        row_relations=tuple(rels),
        row_rhs=np.array(rhs),
        lower=lo,
        upper=hi,
        names=(),
    )


def random_general_lp(rng: np.random.Generator, n_max: int = 5, m_max: int = 5) -> LinearProgram:
    """Random LP that may be infeasible or unbounded: free variables,
    one-sided bounds, mixed relations."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = np.round(rng.uniform(-3, 3, size=(m, n)), 2)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for j in range(n):
        u = rng.random()
        if u < 0.4:
            lo[j] = np.round(rng.uniform(-2, 0), 2)
        if u > 0.3:
            hi[j] = np.round(rng.uniform(0, 3), 2)
        if np.isfinite(lo[j]) and np.isfinite(hi[j]) and lo[j] > hi[j]:
            lo[j], hi[j] = hi[j], lo[j]
    rels = [(LE, GE, EQ)[int(rng.integers(3))] for _ in range(m)]
    rhs = np.round(rng.uniform(-2, 2, size=m), 2)
    return LinearProgram(
        sense="min" if rng.random() < 0.5 else "max",
        costs=np.round(rng.uniform(-2, 2, size=n), 2),
        row_coeffs=A,
        row_relations=tuple(rels),
        row_rhs=rhs,
        lower=lo,
        upper=hi,
        names=(),
    )
