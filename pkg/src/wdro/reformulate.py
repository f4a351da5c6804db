"""Finite linear-program reformulations of worst-case expectations over a
1-Wasserstein ball around the empirical distribution.

Supported loss families, each with its own builder:

* max of affine pieces (convex piecewise affine),
* min of affine pieces (concave piecewise affine),
* indicator losses bounding the probability of leaving an open polytope
  (worst case) or of lying in a closed polytope (best case),
* two-stage linear recourse with objective-side or right-hand-side
  uncertainty,
* stagewise-separable losses under the additive process norm.

Every builder returns a plain :class:`LinearProgram` whose optimal value
is the worst-case expectation; ``worst_case_value`` dispatches, solves
and maps an unbounded program to +inf.  At radius zero every program
collapses to the sample-average value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DualPolytopeUnbounded,
    EmptySupport,
    HypothesisViolated,
    RecourseSetUnbounded,
    SampleOutsideSupport,
    SupportNotFullSpace,
    WdroError,
)
from .geometry import GroundNorm, Polytope, dual_norm_value, nearest_point
from .lp import LinearProgram, LpBuilder, LpSolution, SolverConfig, Var
from .simplex import solve_lp

__all__ = [
    "PiecewiseAffineLoss",
    "EventIndicator",
    "TwoStageLoss",
    "SeparableLoss",
    "DroProblem",
    "build_max_affine",
    "build_min_affine",
    "build_uq_worst",
    "build_uq_best",
    "build_two_stage",
    "build_separable",
    "convex_closed_form",
    "worst_case_value",
    "solve_worst_case",
]


@dataclass(frozen=True)
class PiecewiseAffineLoss:
    """max (kind="max") or min (kind="min") over pieces <a_k, x> + b_k."""

    slopes: np.ndarray
    intercepts: np.ndarray
    kind: str = "max"

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        c = np.asarray(self.intercepts, dtype=float).reshape(-1)
        if a.shape[0] != c.shape[0]:
            raise DimensionMismatch("one intercept per piece required")
        if a.shape[0] == 0:
            raise DimensionMismatch("at least one affine piece required")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise DimensionMismatch("piece data must be finite")
        if self.kind not in ("max", "min"):
            raise DimensionMismatch(f"unknown composition kind {self.kind!r}")
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", c)

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[0]

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    def deduplicated(self) -> "PiecewiseAffineLoss":
        """Drop pieces whose (slope, intercept) replicates an earlier one."""
        keep: list[int] = []
        for k in range(self.n_pieces):
            dup = any(
                np.array_equal(self.slopes[k], self.slopes[j])
                and self.intercepts[k] == self.intercepts[j]
                for j in keep
            )
            if not dup:
                keep.append(k)
        if len(keep) == self.n_pieces:
            return self
        return PiecewiseAffineLoss(self.slopes[keep], self.intercepts[keep], self.kind)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = pts @ self.slopes.T + self.intercepts
        return vals.max(axis=1) if self.kind == "max" else vals.min(axis=1)


@dataclass(frozen=True)
class EventIndicator:
    """Probability-of-event loss for a polytopal region {x : A x <= b}.

    sense="outside": the region is read as open and the worst-case program
    bounds sup Q[x outside region] from above.  sense="inside": the region
    is closed and the program bounds sup Q[x in region].
    """

    region: Polytope
    sense: str = "outside"

    def __post_init__(self):
        if self.sense not in ("outside", "inside"):
            raise DimensionMismatch(f"unknown event sense {self.sense!r}")


@dataclass(frozen=True)
class TwoStageLoss:
    """Linear recourse loss.

    variant="objective":  loss(x) = min_y { <y, Q x> : W y >= h }
    variant="rhs":        loss(x) = min_y { <q, y> : W y >= H x + h }
    """

    variant: str
    W: np.ndarray
    h: np.ndarray
    Q: np.ndarray | None = None
    q: np.ndarray | None = None
    H: np.ndarray | None = None

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if W.shape[0] != h.shape[0]:
            raise DimensionMismatch("recourse rhs length does not match row count")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "h", h)
        if self.variant == "objective":
            if self.Q is None:
                raise DimensionMismatch("objective-uncertain recourse needs Q")
            Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
            if Q.shape[0] != W.shape[1]:
                raise DimensionMismatch("Q must have one row per recourse variable")
            object.__setattr__(self, "Q", Q)
        elif self.variant == "rhs":
            if self.q is None or self.H is None:
                raise DimensionMismatch("rhs-uncertain recourse needs q and H")
            q = np.asarray(self.q, dtype=float).reshape(-1)
            H = np.atleast_2d(np.asarray(self.H, dtype=float))
            if q.shape[0] != W.shape[1]:
                raise DimensionMismatch("q length does not match recourse variables")
            if H.shape[0] != W.shape[0]:
                raise DimensionMismatch("H must have one row per recourse constraint")
            object.__setattr__(self, "q", q)
            object.__setattr__(self, "H", H)
        else:
            raise DimensionMismatch(f"unknown recourse variant {self.variant!r}")

    @property
    def dim(self) -> int:
        return self.Q.shape[1] if self.variant == "objective" else self.H.shape[1]


@dataclass(frozen=True)
class SeparableLoss:
    """Sum over stages of per-stage max-affine losses; samples are the
    concatenated per-stage vectors and transport cost is the sum of
    per-stage ground norms."""

    stages: tuple[tuple[PiecewiseAffineLoss, Polytope], ...]

    def __post_init__(self):
        if len(self.stages) == 0:
            raise DimensionMismatch("at least one stage required")
        for loss, support in self.stages:
            if loss.kind != "max":
                raise DimensionMismatch("stage losses must be max-affine")
            if loss.dim != support.dim:
                raise DimensionMismatch("stage loss and support dimensions differ")
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def dim(self) -> int:
        return sum(loss.dim for loss, _ in self.stages)

    def stage_slices(self) -> list[slice]:
        out, start = [], 0
        for loss, _ in self.stages:
            out.append(slice(start, start + loss.dim))
            start += loss.dim
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(pts.shape[0])
        for (loss, _), sl in zip(self.stages, self.stage_slices()):
            total += loss(pts[:, sl])
        return total


Loss = PiecewiseAffineLoss | EventIndicator | TwoStageLoss | SeparableLoss


@dataclass(frozen=True)
class DroProblem:
    """Samples, support, ball radius and ground norm plus a loss.

    Samples violating the support by at most ``membership_tol`` are
    projected onto it (with a warning); larger violations raise
    SampleOutsideSupport.  For separable losses the support is the product
    of the per-stage supports and ``support`` must be the free space.
    """

    samples: np.ndarray
    support: Polytope
    radius: float
    norm: GroundNorm
    loss: Loss
    membership_tol: float = 1e-6

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if X.shape[0] == 0:
            raise DimensionMismatch("at least one sample required")
        if not np.all(np.isfinite(X)):
            raise DimensionMismatch("samples must be finite")
        if X.shape[1] != self.support.dim:
            raise DimensionMismatch("sample dimension does not match support")
        if not (np.isfinite(self.radius) and self.radius >= 0.0):
            raise DimensionMismatch("radius must be finite and nonnegative")
        loss_dim = getattr(self.loss, "dim", None)
        if isinstance(self.loss, EventIndicator):
            loss_dim = self.loss.region.dim
        if loss_dim != X.shape[1]:
            raise DimensionMismatch("loss dimension does not match samples")
        if isinstance(self.loss, SeparableLoss) and not self.support.is_free:
            raise DimensionMismatch(
                "separable losses carry per-stage supports; use a free overall support"
            )

        if isinstance(self.loss, SeparableLoss):
            X = self._enforce_membership_separable(X)
        else:
            X = self._enforce_membership(X, self.support)
        object.__setattr__(self, "samples", X)

    def _enforce_membership(self, X: np.ndarray, support: Polytope) -> np.ndarray:
        if support.is_free:
            return X
        viol = support.violation(X)
        worst = float(viol.max())
        if worst <= 1e-12:
            return X
        if worst > self.membership_tol:
            raise SampleOutsideSupport(
                f"sample violates the support by {worst:.3e}, "
                f"tolerance is {self.membership_tol:.3e}"
            )
        if not support.nonempty():
            raise EmptySupport("support polytope is empty")
        X = X.copy()
        for i in np.flatnonzero(viol > 1e-12):
            _, X[i] = nearest_point(support, X[i], self.norm)
        warnings.warn(
            f"projected {int(np.sum(viol > 1e-12))} sample(s) onto the support "
            f"(worst violation {worst:.3e})",
            stacklevel=3,
        )
        return X

    def _enforce_membership_separable(self, X: np.ndarray) -> np.ndarray:
        loss: SeparableLoss = self.loss
        X = X.copy()
        for (stage_loss, stage_support), sl in zip(loss.stages, loss.stage_slices()):
            X[:, sl] = self._enforce_membership(X[:, sl], stage_support)
        return X

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _check_support_nonempty(support: Polytope) -> None:
    if not support.is_free and not support.nonempty():
        raise EmptySupport("support polytope is empty")


def _support_terms(b: LpBuilder, support: Polytope, xi: np.ndarray, tag: str):
    """Fresh multipliers gamma >= 0 for one (sample, piece) block together
    with their epigraph-row contribution <gamma, d - C xi> and the column
    expressions of C'gamma."""
    R = support.n_rows
    g = b.vars(f"gamma{tag}", R, lb=0.0)
    slack = support.d - support.C @ xi
    epi = {g[r]: slack[r] for r in range(R)}
    cols = [{g[r]: support.C[r, j] for r in range(R) if support.C[r, j] != 0.0}
            for j in range(support.dim)]
    return epi, cols


def build_max_affine(p: DroProblem) -> LinearProgram:
    """Epigraph program for sup E[max-affine loss] over the ball.

    One row per (sample, piece) plus dual-norm rows tying the support
    multipliers to the piece slopes.  With a free support the dual-norm
    rows do not depend on the sample and are emitted once per piece.
    """
    if not isinstance(p.loss, PiecewiseAffineLoss) or p.loss.kind != "max":
        raise DimensionMismatch("build_max_affine expects a max-affine loss")
    _check_support_nonempty(p.support)
    loss = p.loss.deduplicated()
    N, m, K = p.n_samples, p.dim, loss.n_pieces
    dual = p.norm.dual.value

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N)
    obj = {lam: p.radius}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)

    for i in range(N):
        xi = p.samples[i]
        base = loss.slopes @ xi + loss.intercepts
        for k in range(K):
            if p.support.is_free:
                b.add_le({s[i]: -1.0}, -base[k])
            else:
                epi, cols = _support_terms(b, p.support, xi, f"[{i},{k}]")
                row = dict(epi)
                row[s[i]] = row.get(s[i], 0.0) - 1.0
                b.add_le(row, -base[k])
                exprs = [(cols[j], -loss.slopes[k, j]) for j in range(m)]
                b.add_norm_le(exprs, lam, dual, tag=f"[{i},{k}]")
    if p.support.is_free:
        for k in range(K):
            exprs = [({}, -loss.slopes[k, j]) for j in range(m)]
            b.add_norm_le(exprs, lam, dual, tag=f"[{k}]")
    return b.build()


def build_min_affine(p: DroProblem) -> LinearProgram:
    """Epigraph program for sup E[min-affine loss] over the ball.

    One convex-combination weight vector per sample replaces the per-piece
    rows of the max-affine case."""
    if not isinstance(p.loss, PiecewiseAffineLoss) or p.loss.kind != "min":
        raise DimensionMismatch("build_min_affine expects a min-affine loss")
    _check_support_nonempty(p.support)
    loss = p.loss.deduplicated()
    N, m, K = p.n_samples, p.dim, loss.n_pieces
    dual = p.norm.dual.value

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N)
    obj = {lam: p.radius}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)

    for i in range(N):
        xi = p.samples[i]
        th = b.vars(f"theta[{i}]", K, lb=0.0)
        b.add_eq({t: 1.0 for t in th}, 1.0)
        base = loss.slopes @ xi + loss.intercepts
        row = {th[k]: base[k] for k in range(K)}
        if p.support.is_free:
            cols = [dict() for _ in range(m)]
        else:
            epi, cols = _support_terms(b, p.support, xi, f"[{i}]")
            for g, coef in epi.items():
                row[g] = row.get(g, 0.0) + coef
        row[s[i]] = row.get(s[i], 0.0) - 1.0
        b.add_le(row, 0.0)
        exprs = []
        for j in range(m):
            terms = dict(cols[j])
            for k in range(K):
                if loss.slopes[k, j] != 0.0:
                    terms[th[k]] = terms.get(th[k], 0.0) - loss.slopes[k, j]
            exprs.append((terms, 0.0))
        b.add_norm_le(exprs, lam, dual, tag=f"[{i}]")
    return b.build()


def _halfspace_meets_support(a: np.ndarray, rhs: float, support: Polytope) -> bool:
    """Does {x : <a, x> >= rhs} intersect the support?"""
    if support.is_free:
        if np.any(a != 0.0):
            return True
        return 0.0 >= rhs
    b = LpBuilder("min")
    x = b.vars("x", support.dim)
    for i in range(support.n_rows):
        b.add_le({x[j]: support.C[i, j] for j in range(support.dim)}, support.d[i])
    b.add_ge({x[j]: a[j] for j in range(support.dim) if a[j] != 0.0}, rhs)
    return solve_lp(b.build()).status == "optimal"


def build_uq_worst(p: DroProblem) -> LinearProgram:
    """Program for sup Q[x outside the open region {A x < b}].

    Each boundary halfspace {<a_k, x> >= b_k} must meet the support, per
    the reformulation's hypothesis.  With a free support the dual-norm
    block for piece k collapses to ||a_k||_dual * theta_ik <= lam.
    """
    if not isinstance(p.loss, EventIndicator) or p.loss.sense != "outside":
        raise DimensionMismatch("build_uq_worst expects an outside-event loss")
    _check_support_nonempty(p.support)
    region = p.loss.region
    A, bv = region.C, region.d
    N, m, K = p.n_samples, p.dim, region.n_rows
    dual = p.norm.dual.value

    for k in range(K):
        if not _halfspace_meets_support(A[k], bv[k], p.support):
            raise HypothesisViolated(
                f"halfspace {k} of the region never meets the support"
            )

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N, lb=0.0)
    obj = {lam: p.radius}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)

    for i in range(N):
        xi = p.samples[i]
        margins = bv - A @ xi
        for k in range(K):
            th = b.var(f"theta[{i},{k}]", lb=0.0)
            row = {th: -margins[k], s[i]: -1.0}
            if p.support.is_free:
                b.add_row(row, "<=", -1.0)
                b.add_le({th: dual_norm_value(A[k], p.norm), lam: -1.0}, 0.0)
            else:
                epi, cols = _support_terms(b, p.support, xi, f"[{i},{k}]")
                for g, coef in epi.items():
                    row[g] = row.get(g, 0.0) + coef
                b.add_row(row, "<=", -1.0)
                exprs = []
                for j in range(m):
                    terms = {th: A[k, j]} if A[k, j] != 0.0 else {}
                    for g, coef in cols[j].items():
                        terms[g] = terms.get(g, 0.0) - coef
                    exprs.append((terms, 0.0))
                b.add_norm_le(exprs, lam, dual, tag=f"[{i},{k}]")
    return b.build()


def build_uq_best(p: DroProblem) -> LinearProgram:
    """Program for sup Q[x in the closed region {A x <= b}].

    Requires the region to meet the support."""
    if not isinstance(p.loss, EventIndicator) or p.loss.sense != "inside":
        raise DimensionMismatch("build_uq_best expects an inside-event loss")
    _check_support_nonempty(p.support)
    region = p.loss.region
    A, bv = region.C, region.d
    N, m, K = p.n_samples, p.dim, region.n_rows
    dual = p.norm.dual.value

    if p.support.is_free:
        if K and not region.nonempty():
            raise HypothesisViolated("the region is empty")
    else:
        bb = LpBuilder("min")
        x = bb.vars("x", m)
        for i in range(p.support.n_rows):
            bb.add_le({x[j]: p.support.C[i, j] for j in range(m)}, p.support.d[i])
        for k in range(K):
            bb.add_le({x[j]: A[k, j] for j in range(m)}, bv[k])
        if solve_lp(bb.build()).status != "optimal":
            raise HypothesisViolated("the region never meets the support")

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N, lb=0.0)
    obj = {lam: p.radius}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)

    for i in range(N):
        xi = p.samples[i]
        margins = bv - A @ xi
        th = b.vars(f"theta[{i}]", K, lb=0.0)
        row = {th[k]: margins[k] for k in range(K)}
        if p.support.is_free:
            cols = [dict() for _ in range(m)]
        else:
            epi, cols = _support_terms(b, p.support, xi, f"[{i}]")
            for g, coef in epi.items():
                row[g] = row.get(g, 0.0) + coef
        row[s[i]] = row.get(s[i], 0.0) - 1.0
        b.add_le(row, -1.0)
        exprs = []
        for j in range(m):
            terms = dict(cols[j])
            for k in range(K):
                if A[k, j] != 0.0:
                    terms[th[k]] = terms.get(th[k], 0.0) + A[k, j]
            exprs.append((terms, 0.0))
        b.add_norm_le(exprs, lam, dual, tag=f"[{i}]")
    return b.build()


def _recourse_bounded(W: np.ndarray, h: np.ndarray) -> None:
    """{y : Wy >= h} must be nonempty and bounded (checked by LPs in each
    +-coordinate direction)."""
    n_y = W.shape[1]

    def with_feasibility(objective_sign: float, coord: int):
        b = LpBuilder("max")
        y = b.vars("y", n_y)
        b.set_objective({y[coord]: objective_sign})
        for i in range(W.shape[0]):
            b.add_ge({y[j]: W[i, j] for j in range(n_y) if W[i, j] != 0.0}, h[i])
        return solve_lp(b.build())

    first = with_feasibility(1.0, 0)
    if first.status == "infeasible":
        raise RecourseSetUnbounded("the recourse set {y : Wy >= h} is empty")
    for coord in range(n_y):
        for sign in (1.0, -1.0):
            sol = with_feasibility(sign, coord)
            if sol.status == "unbounded":
                raise RecourseSetUnbounded(
                    f"the recourse set is unbounded in coordinate {coord}"
                )


def build_two_stage(p: DroProblem) -> LinearProgram:
    """Reformulation for linear recourse losses.

    Objective-side uncertainty keeps one recourse copy per sample inside
    the program.  Right-hand-side uncertainty enumerates the vertices of
    the dual feasible set and reduces to the max-affine builder over the
    induced pieces <H'v_k, x> + <v_k, h>.
    """
    if not isinstance(p.loss, TwoStageLoss):
        raise DimensionMismatch("build_two_stage expects a two-stage loss")
    _check_support_nonempty(p.support)
    loss = p.loss

    if loss.variant == "rhs":
        from .geometry import enumerate_vertices
        from .errors import UnboundedPolyhedron

        try:
            verts = enumerate_vertices(loss.W.T, loss.q)
        except UnboundedPolyhedron as exc:
            raise DualPolytopeUnbounded(str(exc)) from exc
        if verts.shape[0] == 0:
            raise RecourseSetUnbounded(
                "the dual feasible set {theta >= 0 : W'theta = q} is empty, "
                "so the recourse loss is not finite-valued"
            )
        pieces = PiecewiseAffineLoss(verts @ loss.H, verts @ loss.h, "max")
        flat = DroProblem(
            samples=p.samples,
            support=p.support,
            radius=p.radius,
            norm=p.norm,
            loss=pieces,
            membership_tol=p.membership_tol,
        )
        return build_max_affine(flat)

    _recourse_bounded(loss.W, loss.h)
    Q, W, h = loss.Q, loss.W, loss.h
    n_y = W.shape[1]
    N, m = p.n_samples, p.dim
    dual = p.norm.dual.value

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N)
    obj = {lam: p.radius}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)

    for i in range(N):
        xi = p.samples[i]
        y = b.vars(f"y[{i}]", n_y)
        qxi = Q @ xi
        row = {y[t]: qxi[t] for t in range(n_y)}
        if p.support.is_free:
            cols = [dict() for _ in range(m)]
        else:
            epi, cols = _support_terms(b, p.support, xi, f"[{i}]")
            for g, coef in epi.items():
                row[g] = row.get(g, 0.0) + coef
        row[s[i]] = row.get(s[i], 0.0) - 1.0
        b.add_le(row, 0.0)
        for r in range(W.shape[0]):
            b.add_ge({y[t]: W[r, t] for t in range(n_y) if W[r, t] != 0.0}, h[r])
        exprs = []
        for j in range(m):
            terms = {}
            for t in range(n_y):
                if Q[t, j] != 0.0:
                    terms[y[t]] = terms.get(y[t], 0.0) + Q[t, j]
            for g, coef in cols[j].items():
                terms[g] = terms.get(g, 0.0) - coef
            exprs.append((terms, 0.0))
        b.add_norm_le(exprs, lam, dual, tag=f"[{i}]")
    return b.build()


def build_separable(p: DroProblem) -> LinearProgram:
    """Stagewise-separable reformulation under the additive process norm:
    a single transport budget multiplier is shared across stages while
    epigraph and dual-norm rows are per (stage, sample, piece)."""
    if not isinstance(p.loss, SeparableLoss):
        raise DimensionMismatch("build_separable expects a separable loss")
    sep = p.loss
    N = p.n_samples
    dual = p.norm.dual.value

    b = LpBuilder("min")
    lam = b.var("lam", lb=0.0)
    obj = {lam: p.radius}
    slices = sep.stage_slices()
    for t, (loss, support) in enumerate(sep.stages):
        _check_support_nonempty(support)
        loss = loss.deduplicated()
        m_t, K = loss.dim, loss.n_pieces
        s = b.vars(f"s[{t}]", N)
        for si in s:
            obj[si] = 1.0 / N
        for i in range(N):
            xi = p.samples[i, slices[t]]
            base = loss.slopes @ xi + loss.intercepts
            for k in range(K):
                if support.is_free:
                    b.add_le({s[i]: -1.0}, -base[k])
                else:
                    epi, cols = _support_terms(b, support, xi, f"[{t},{i},{k}]")
                    row = dict(epi)
                    row[s[i]] = row.get(s[i], 0.0) - 1.0
                    b.add_le(row, -base[k])
                    exprs = [(cols[j], -loss.slopes[k, j]) for j in range(m_t)]
                    b.add_norm_le(exprs, lam, dual, tag=f"[{t},{i},{k}]")
        if support.is_free:
            for k in range(K):
                exprs = [({}, -loss.slopes[k, j]) for j in range(m_t)]
                b.add_norm_le(exprs, lam, dual, tag=f"[{t},{k}]")
    b.set_objective(obj)
    return b.build()


def convex_closed_form(p: DroProblem) -> float:
    """Exact worst case for a max-affine loss on unconstrained support:
    radius times the largest dual norm of a slope plus the sample average."""
    if not isinstance(p.loss, PiecewiseAffineLoss) or p.loss.kind != "max":
        raise DimensionMismatch("closed form requires a max-affine loss")
    if not p.support.is_free:
        raise SupportNotFullSpace(
            "the closed form holds only for support equal to the whole space"
        )
    kappa = max(dual_norm_value(a, p.norm) for a in p.loss.slopes)
    return float(p.radius * kappa + p.loss(p.samples).mean())


_BUILDERS = {
    ("pwa", "max"): build_max_affine,
    ("pwa", "min"): build_min_affine,
    ("event", "outside"): build_uq_worst,
    ("event", "inside"): build_uq_best,
}


def _builder_for(loss: Loss):
    if isinstance(loss, PiecewiseAffineLoss):
        return _BUILDERS[("pwa", loss.kind)]
    if isinstance(loss, EventIndicator):
        return _BUILDERS[("event", loss.sense)]
    if isinstance(loss, TwoStageLoss):
        return build_two_stage
    if isinstance(loss, SeparableLoss):
        return build_separable
    raise DimensionMismatch(f"unsupported loss type {type(loss).__name__}")


def solve_worst_case(
    p: DroProblem, config: SolverConfig | None = None
) -> tuple[float, LpSolution]:
    """Build, solve and interpret the reformulation.  An unbounded program
    means the worst-case expectation is +inf."""
    lp = _builder_for(p.loss)(p)
    sol = solve_lp(lp, config)
    if sol.status == "optimal":
        return sol.objective_value, sol
    if sol.status == "unbounded":
        return float("inf"), sol
    raise WdroError(
        "reformulation LP reported infeasible; inputs passed validation, "
        "so this indicates a numerical failure"
    )


def worst_case_value(p: DroProblem, config: SolverConfig | None = None) -> float:
    return solve_worst_case(p, config)[0]
