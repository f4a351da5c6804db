"""Dense linear-program containers, a small construction helper, and the
symbolic dual transformation.

A :class:`LinearProgram` is a plain dense description

    optimize   c'x
    subject to A x  (<= | = | >=)  b     row by row
               l <= x <= u               elementwise, infinities allowed

The solver lives in :mod:`wdro.simplex`; this module only holds data and
structure-level transformations.

Dual convention.  For a minimization program the dual multiplier of a ">="
row is nonnegative, of a "<=" row nonpositive, and of an "=" row free, so
that ``c = A'y + z`` with ``z`` the reduced costs supported on active
bounds.  For a maximization program the signs flip ("<=" rows carry
nonnegative multipliers).  ``dual_of`` and the duals reported by
``solve_lp`` follow the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, MalformedProgram

__all__ = [
    "LinearProgram",
    "LpSolution",
    "SolverConfig",
    "LpBuilder",
    "Var",
    "dual_of",
    "dump_program",
]

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = (LE, EQ, GE)


@dataclass(frozen=True)
class LinearProgram:
    """Immutable dense LP data.  Rows are stored as one (m, n) matrix."""

    sense: str
    costs: np.ndarray
    row_coeffs: np.ndarray
    row_relations: tuple[str, ...]
    row_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise MalformedProgram(f"unknown sense {self.sense!r}")
        c = np.asarray(self.costs, dtype=float)
        A = np.asarray(self.row_coeffs, dtype=float)
        b = np.asarray(self.row_rhs, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if A.ndim != 2:
            raise MalformedProgram("row_coeffs must be a 2-d array")
        m, n = A.shape
        if c.shape != (n,) or lo.shape != (n,) or hi.shape != (n,):
            raise MalformedProgram("cost/bound length does not match column count")
        if b.shape != (m,) or len(self.row_relations) != m:
            raise MalformedProgram("rhs/relation length does not match row count")
        for rel in self.row_relations:
            if rel not in _RELATIONS:
                raise MalformedProgram(f"unknown relation {rel!r}")
        if not np.all(np.isfinite(c)):
            raise MalformedProgram("costs must be finite")
        if not np.all(np.isfinite(A)):
            raise MalformedProgram("row coefficients must be finite")
        if not np.all(np.isfinite(b)):
            raise MalformedProgram("right-hand sides must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise MalformedProgram("bounds may be infinite but not NaN")
        if np.any(lo > hi):
            raise MalformedProgram("lower bound exceeds upper bound")
        if self.names and len(self.names) != n:
            raise MalformedProgram("names length does not match column count")
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "row_coeffs", A)
        object.__setattr__(self, "row_rhs", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "row_relations", tuple(self.row_relations))

    @property
    def n_vars(self) -> int:
        return self.row_coeffs.shape[1]

    @property
    def n_rows(self) -> int:
        return self.row_coeffs.shape[0]


@dataclass(frozen=True)
class LpSolution:
    """Outcome of one solve.

    status is "optimal", "infeasible" or "unbounded".  On "optimal" the
    primal point, row duals and objective value are set.  On "unbounded"
    ``ray`` is an improving recession direction and ``primal`` a feasible
    point from which it emanates.  On "infeasible" ``duals`` carries the
    phase-one multipliers, a Farkas-style certificate.
    """

    status: str
    objective_value: float
    primal: np.ndarray | None
    duals: np.ndarray | None
    ray: np.ndarray | None
    iterations: int

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs for the simplex engine.

    feas_tol bounds acceptable primal residuals, opt_tol is the pricing
    (dual feasibility) cutoff, pivot_tol the smallest admissible pivot
    magnitude, gap_tol the relative primal/dual gap accepted at optimality
    and comp_tol the complementary-slackness residual.  Pricing starts with
    the largest-violation rule and falls back to Bland's least-index rule
    after ``bland_after(n_vars, n_rows)`` iterations, which guarantees
    termination on degenerate programs.
    """

    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    gap_tol: float = 1e-8
    pivot_tol: float = 1e-10
    comp_tol: float = 1e-8
    refactor_every: int = 100
    max_iterations: int = 2_000_000

    @staticmethod
    def bland_after(n_vars: int, n_rows: int) -> int:
        return 10 * (n_vars + n_rows)


class Var:
    """Handle returned by :meth:`LpBuilder.var`; indexes into the program."""

    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name

    def __repr__(self):
        return f"Var({self.index}, {self.name!r})"


class LpBuilder:
    """Incremental construction of a dense LinearProgram.

    Rows are entered as ``{var: coefficient}`` mappings; dual-norm and
    norm-epigraph rows used throughout the reformulations are provided as
    helpers so every builder encodes them identically.
    """

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._names: list[str] = []
        self._obj: dict[int, float] = {}
        self._rows: list[dict[int, float]] = []
        self._rels: list[str] = []
        self._rhs: list[float] = []

    def var(self, name: str, lb: float = -np.inf, ub: float = np.inf) -> Var:
        v = Var(len(self._names), name)
        self._names.append(name)
        self._lower.append(lb)
        self._upper.append(ub)
        return v

    def vars(self, prefix: str, count: int, lb: float = -np.inf, ub: float = np.inf) -> list[Var]:
        return [self.var(f"{prefix}[{i}]", lb, ub) for i in range(count)]

    def set_objective(self, terms: Mapping[Var, float]) -> None:
        self._obj = {v.index: float(t) for v, t in terms.items()}

    def add_objective_term(self, v: Var, coeff: float) -> None:
        self._obj[v.index] = self._obj.get(v.index, 0.0) + float(coeff)

    def add_row(self, terms: Mapping[Var, float], rel: str, rhs: float) -> None:
        row: dict[int, float] = {}
        for v, t in terms.items():
            if t != 0.0:
                row[v.index] = row.get(v.index, 0.0) + float(t)
        self._rows.append(row)
        self._rels.append(rel)
        self._rhs.append(float(rhs))

    def add_le(self, terms: Mapping[Var, float], rhs: float) -> None:
        self.add_row(terms, LE, rhs)

    def add_ge(self, terms: Mapping[Var, float], rhs: float) -> None:
        self.add_row(terms, GE, rhs)

    def add_eq(self, terms: Mapping[Var, float], rhs: float) -> None:
        self.add_row(terms, EQ, rhs)

    def add_norm_le(
        self,
        exprs: Sequence[tuple[Mapping[Var, float], float]],
        bound: Var,
        kind: str,
        tag: str = "",
    ) -> None:
        """Rows enforcing ||v||_kind <= bound for the affine vector v whose
        component j is ``exprs[j]`` (a {var: coeff} mapping plus constant).

        For the max-norm this is the row pair v_j <= bound, -v_j <= bound
        per component.  For the 1-norm one auxiliary variable per component
        carries |v_j| and a single row sums them.  Callers enforcing a
        dual-norm constraint pass the dual kind.
        """
        if kind == "linf":
            for terms, const in exprs:
                row = dict(terms)
                row[bound] = row.get(bound, 0.0) - 1.0
                self.add_le(row, -const)
                row = {v: -t for v, t in terms.items()}
                row[bound] = row.get(bound, 0.0) - 1.0
                self.add_le(row, const)
        elif kind == "l1":
            aux = self.vars(f"abs{tag}", len(exprs), lb=0.0)
            for (terms, const), u in zip(exprs, aux):
                row = dict(terms)
                row[u] = row.get(u, 0.0) - 1.0
                self.add_le(row, -const)
                row = {v: -t for v, t in terms.items()}
                row[u] = row.get(u, 0.0) - 1.0
                self.add_le(row, const)
            total = {u: 1.0 for u in aux}
            total[bound] = total.get(bound, 0.0) - 1.0
            self.add_le(total, 0.0)
        else:
            raise MalformedProgram(f"unknown norm kind {kind!r}")

    def build(self) -> LinearProgram:
        n, m = len(self._names), len(self._rows)
        c = np.zeros(n)
        for j, t in self._obj.items():
            c[j] = t
        A = np.zeros((m, n))
        for i, row in enumerate(self._rows):
            for j, t in row.items():
                A[i, j] = t
        return LinearProgram(
            sense=self.sense,
            costs=c,
            row_coeffs=A,
            row_relations=tuple(self._rels),
            row_rhs=np.array(self._rhs, dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            names=tuple(self._names),
        )

    @staticmethod
    def value_of(solution: LpSolution, v: Var) -> float:
        return float(solution.primal[v.index])

    @staticmethod
    def values_of(solution: LpSolution, vs: Iterable[Var]) -> np.ndarray:
        return np.array([solution.primal[v.index] for v in vs])


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Symbolic dual of a general-form program.

    One dual variable per row (signed per the convention in the module
    docstring) plus one per finite bound, except that the common patterns
    x >= 0 and x <= 0 are folded into inequality rows so that the textbook
    shape comes out: min c'x, Ax >= b, x >= 0 dualizes to max b'y,
    A'y <= c, y >= 0.  The dual of a maximization program is returned as a
    minimization program with the same optimal value.
    """
    flip = lp.sense == "max"
    c = -lp.costs if flip else lp.costs
    A, b = lp.row_coeffs, lp.row_rhs
    m, n = A.shape

    bld = LpBuilder(sense="max")
    ys = []
    for i, rel in enumerate(lp.row_relations):
        if rel == GE:
            ys.append(bld.var(f"y[{i}]", lb=0.0))
        elif rel == LE:
            ys.append(bld.var(f"y[{i}]", ub=0.0))
        else:
            ys.append(bld.var(f"y[{i}]"))
        bld.add_objective_term(ys[-1], b[i])

    # Structural rows: A'y (+ bound multipliers) relate to c per column.
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        terms = {ys[i]: A[i, j] for i in range(m) if A[i, j] != 0.0}
        if lo == hi:
            pi = bld.var(f"pi[{j}]")
            bld.add_objective_term(pi, lo)
            terms[pi] = terms.get(pi, 0.0) + 1.0
            bld.add_eq(terms, c[j])
            continue
        lo_f, hi_f = np.isfinite(lo), np.isfinite(hi)
        if lo_f and lo == 0.0 and not hi_f:
            bld.add_le(terms, c[j])
        elif hi_f and hi == 0.0 and not lo_f:
            bld.add_ge(terms, c[j])
        else:
            if lo_f:
                mu = bld.var(f"mu[{j}]", lb=0.0)
                bld.add_objective_term(mu, lo)
                terms[mu] = terms.get(mu, 0.0) + 1.0
            if hi_f:
                nu = bld.var(f"nu[{j}]", ub=0.0)
                bld.add_objective_term(nu, hi)
                terms[nu] = terms.get(nu, 0.0) + 1.0
            bld.add_eq(terms, c[j])

    dual = bld.build()
    if not flip:
        return dual
    return LinearProgram(
        sense="min",
        costs=-dual.costs,
        row_coeffs=dual.row_coeffs,
        row_relations=dual.row_relations,
        row_rhs=dual.row_rhs,
        lower=dual.lower,
        upper=dual.upper,
        names=dual.names,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_program(lp: LinearProgram) -> str:
    """Fixed-format text rendering, mainly for --dump-lp and debugging."""
    names = lp.names or tuple(f"x[{j}]" for j in range(lp.n_vars))

    def expr(coeffs) -> str:
        parts = []
        for j in np.flatnonzero(coeffs):
            parts.append(f"{_fmt(coeffs[j])}*{names[j]}")
        return " + ".join(parts) if parts else "0"

    lines = [f"{lp.sense} {expr(lp.costs)}", "subject to"]
    for i in range(lp.n_rows):
        lines.append(
            f"  r{i}: {expr(lp.row_coeffs[i])} {lp.row_relations[i]} {_fmt(lp.row_rhs[i])}"
        )
    lines.append("bounds")
    for j in range(lp.n_vars):
        lines.append(f"  {_fmt(lp.lower[j])} <= {names[j]} <= {_fmt(lp.upper[j])}")
    return "\n".join(lines) + "\n"
