"""Radius selection for the Wasserstein ball.

Three routes: a concentration-style a-priori formula (a reference curve;
its constants are configuration, not estimated), holdout selection on a
candidate grid, and k-fold cross validation which averages the per-fold
holdout choices.  A variant for probability bounds picks per side the
smallest radius whose training-data bound covers the validation-data
frequency.

Data-driven selections always tie-break toward the smaller radius (less
conservatism).  The averaged k-fold radius may fall between grid points;
per-fold radii are always grid members and are recorded alongside the
shuffled partition so a run can be audited and reproduced from (seed,
grid, k) alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .errors import (
    DatasetTooSmall,
    DimensionMismatch,
    GridEmpty,
    InvalidBeta,
    NoCoveringRadius,
)
from .geometry import GroundNorm, Polytope
from .reformulate import DroProblem, EventIndicator, worst_case_value

__all__ = [
    "DEFAULT_GRID",
    "ConcentrationConfig",
    "CalibrationResult",
    "UqBound",
    "DecisionProblem",
    "radius_a_priori",
    "calibrate_holdout",
    "calibrate_kfold",
    "calibrate_uq_kfold",
]

# documented default; override via the grid argument of any calibrator
DEFAULT_GRID = tuple(float(x) for x in np.geomspace(1e-4, 1.0, 30))


class DecisionProblem(Protocol):
    """What the data-driven calibrators need from a decision problem:
    fit a decision at a given radius, and score a decision on held-out
    samples by a plain sample-average estimate (lower is better)."""

    def train(self, samples: np.ndarray, epsilon: float) -> Any: ...

    def score(self, decision: Any, samples: np.ndarray) -> float: ...


@dataclass(frozen=True)
class ConcentrationConfig:
    """Constants of the a-priori radius formula; all user-supplied."""

    c1: float
    c2: float
    a: float
    m: int

    def __post_init__(self):
        if not (np.isfinite(self.c1) and self.c1 > 0):
            raise DimensionMismatch("c1 must be finite and positive")
        if not (np.isfinite(self.c2) and self.c2 > 0):
            raise DimensionMismatch("c2 must be finite and positive")
        if not (np.isfinite(self.a) and self.a > 1):
            raise DimensionMismatch("tail exponent a must exceed 1")
        if self.m < 1:
            raise DimensionMismatch("dimension must be at least 1")


@dataclass(frozen=True)
class UqBound:
    """One side of a calibrated probability bracket."""

    side: str
    radius: float
    value: float
    fold_radii: tuple[float, ...]


@dataclass(frozen=True)
class CalibrationResult:
    radius: float
    method: str
    table: tuple[tuple[float, float], ...] = ()
    fold_radii: tuple[float, ...] = ()
    partition: tuple[tuple[int, ...], ...] = ()
    decision: Any = None
    bounds: tuple[UqBound, ...] = ()


def radius_a_priori(N: int, beta: float, cfg: ConcentrationConfig) -> float:
    """Radius for which the ball holds the unknown distribution with
    probability 1 - beta, per the finite-sample concentration bound.

    The slow branch exponent 1/max(m, 2) applies for N past
    log(c1/beta)/c2; below that the tail exponent a takes over.
    """
    if N < 1:
        raise DimensionMismatch("sample count must be at least 1")
    if not (0.0 < beta < 1.0) or not np.isfinite(beta):
        raise InvalidBeta(f"confidence level beta must lie in (0, 1), got {beta!r}")
    log_term = float(np.log(cfg.c1 / beta))
    if log_term <= 0.0:
        return 0.0
    base = log_term / (cfg.c2 * N)
    if N >= log_term / cfg.c2:
        return float(base ** (1.0 / max(cfg.m, 2)))
    return float(base ** (1.0 / cfg.a))


def _clean_grid(grid) -> tuple[float, ...]:
    if grid is None:
        return DEFAULT_GRID
    points = sorted({float(e) for e in grid})
    if not points:
        raise GridEmpty("candidate radius grid is empty")
    if points[0] < 0 or not np.isfinite(points[-1]):
        raise GridEmpty("candidate radii must be finite and nonnegative")
    return tuple(points)


def _argmin_smallest(grid, scores) -> float:
    best_eps, best_score = grid[0], scores[0]
    for eps, sc in zip(grid[1:], scores[1:]):
        if sc < best_score:
            best_eps, best_score = eps, sc
    return best_eps


def calibrate_holdout(
    data: np.ndarray,
    problem: DecisionProblem,
    grid=None,
    split: float = 0.8,
    seed: int = 0,
) -> CalibrationResult:
    """Train at every candidate radius on a shuffled training part, score
    on the rest, keep the radius with the best validation score (ties go
    to the smallest radius).  The returned decision is the one trained on
    the training part at the selected radius."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    grid = _clean_grid(grid)
    if not (0.0 < split < 1.0):
        raise DimensionMismatch("split fraction must lie strictly in (0, 1)")
    N = data.shape[0]
    if N < 2:
        raise DatasetTooSmall("holdout needs at least two samples")
    n_train = min(max(int(round(split * N)), 1), N - 1)
    perm = np.random.default_rng(seed).permutation(N)
    train_idx, val_idx = perm[:n_train], perm[n_train:]

    decisions, scores = [], []
    for eps in grid:
        dec = problem.train(data[train_idx], eps)
        decisions.append(dec)
        scores.append(float(problem.score(dec, data[val_idx])))
    best = _argmin_smallest(grid, scores)
    return CalibrationResult(
        radius=best,
        method="holdout",
        table=tuple(zip(grid, scores)),
        fold_radii=(best,),
        partition=(tuple(int(i) for i in val_idx),),
        decision=decisions[grid.index(best)],
    )


def calibrate_kfold(
    data: np.ndarray,
    problem: DecisionProblem,
    grid=None,
    k: int = 5,
    seed: int = 0,
) -> CalibrationResult:
    """Holdout selection with each of k contiguous shuffled blocks as the
    validation part in turn; the final radius is the average of the fold
    selections and the decision is retrained on all data at that radius."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    grid = _clean_grid(grid)
    if k < 2:
        raise DimensionMismatch("cross validation needs k >= 2")
    N = data.shape[0]
    if N < k:
        raise DatasetTooSmall(f"need at least k={k} samples, got {N}")
    perm = np.random.default_rng(seed).permutation(N)
    blocks = np.array_split(perm, k)

    fold_radii = []
    score_sums = np.zeros(len(grid))
    for block in blocks:
        mask = np.ones(N, dtype=bool)
        mask[block] = False
        train_data, val_data = data[mask], data[block]
        scores = []
        for eps in grid:
            dec = problem.train(train_data, eps)
            scores.append(float(problem.score(dec, val_data)))
        fold_radii.append(_argmin_smallest(grid, scores))
        score_sums += scores
    radius = float(np.mean(fold_radii))
    return CalibrationResult(
        radius=radius,
        method="kfold",
        table=tuple(zip(grid, score_sums / k)),
        fold_radii=tuple(fold_radii),
        partition=tuple(tuple(int(i) for i in b) for b in blocks),
        decision=problem.train(data, radius),
    )


def default_uq_bounds(
    safe_set: Polytope,
    support: Polytope | None = None,
    norm: GroundNorm = GroundNorm.L1,
):
    """Bound evaluators backed by the worst-case probability programs.
    The upper bound is the best-case probability of the closed region, the
    lower bound is one minus the worst-case probability of leaving the
    open region."""
    sup = support if support is not None else Polytope.free(safe_set.dim)

    def j_plus(samples: np.ndarray, eps: float) -> float:
        p = DroProblem(samples, sup, eps, norm, EventIndicator(safe_set, "inside"))
        return worst_case_value(p)

    def j_minus(samples: np.ndarray, eps: float) -> float:
        p = DroProblem(samples, sup, eps, norm, EventIndicator(safe_set, "outside"))
        return 1.0 - worst_case_value(p)

    return j_plus, j_minus


def empirical_frequency(samples: np.ndarray, region: Polytope, tol=1e-12) -> float:
    """Fraction of samples in the closed region {Gx <= g}."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if region.n_rows == 0:
        return 1.0
    inside = (samples @ region.C.T <= region.d + tol).all(axis=1)
    return float(inside.mean())


def calibrate_uq_kfold(
    data: np.ndarray,
    safe_set: Polytope,
    grid=None,
    k: int = 5,
    seed: int = 0,
    *,
    support: Polytope | None = None,
    norm: GroundNorm = GroundNorm.L1,
    side: str = "both",
    bound_fns=None,
    dominance_tol: float = 1e-12,
) -> CalibrationResult:
    """Probability-bracket calibration.

    Per fold and per side, the selected radius is the smallest grid point
    whose training-data bound covers the validation frequency of the
    region: upper bound >= frequency, lower bound <= frequency (within
    ``dominance_tol``).  Fold radii are averaged per side and the
    full-data bounds are evaluated at the averaged radii.

    ``bound_fns`` may inject faster evaluators (samples, eps) -> value
    for the two sides; by default the generic programs are used.  A
    region containing the whole support makes the lower-bound program's
    hypothesis fail, which is why ``side="upper"`` exists.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    grid = _clean_grid(grid)
    if side not in ("upper", "lower", "both"):
        raise DimensionMismatch(f"unknown side {side!r}")
    if k < 2:
        raise DimensionMismatch("cross validation needs k >= 2")
    N = data.shape[0]
    if N < k:
        raise DatasetTooSmall(f"need at least k={k} samples, got {N}")
    if bound_fns is None:
        bound_fns = default_uq_bounds(safe_set, support, norm)
    j_plus, j_minus = bound_fns
    sides = ("upper", "lower") if side == "both" else (side,)

    perm = np.random.default_rng(seed).permutation(N)
    blocks = np.array_split(perm, k)

    fold_radii = {s: [] for s in sides}
    for f, block in enumerate(blocks):
        mask = np.ones(N, dtype=bool)
        mask[block] = False
        train_data, val_data = data[mask], data[block]
        freq = empirical_frequency(val_data, safe_set)
        for s in sides:
            chosen = None
            for eps in grid:
                if s == "upper":
                    covered = j_plus(train_data, eps) >= freq - dominance_tol
                else:
                    covered = j_minus(train_data, eps) <= freq + dominance_tol
                if covered:
                    chosen = eps
                    break
            if chosen is None:
                raise NoCoveringRadius(
                    f"no candidate radius covers fold {f} on the {s} side; "
                    "extend the grid upward"
                )
            fold_radii[s].append(chosen)

    bounds = []
    for s in sides:
        radius = float(np.mean(fold_radii[s]))
        value = j_plus(data, radius) if s == "upper" else j_minus(data, radius)
        bounds.append(
            UqBound(
                side=s,
                radius=radius,
                value=float(value),
                fold_radii=tuple(fold_radii[s]),
            )
        )
    return CalibrationResult(
        radius=bounds[0].radius,
        method="uq-kfold",
        fold_radii=bounds[0].fold_radii,
        partition=tuple(tuple(int(i) for i in b) for b in blocks),
        bounds=tuple(bounds),
    )
