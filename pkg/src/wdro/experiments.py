"""Desk-scale simulation studies on a synthetic Gaussian market.

The decision problem is a mean-CVaR portfolio over the probability
simplex, written as a two-piece worst-case expectation jointly convex in
the weights and the CVaR threshold.  Out-of-sample quality is evaluated
in closed form under the market model; in-sample validation uses the
exact empirical mean-CVaR.  The probability study brackets the chance of
an outperformance event between best- and worst-case bounds, compared
against the exact Gaussian probability from a deterministic quadrature
oracle.

Every study is driven by one master seed through a splittable scheme
(one child sequence per run, then per sample-size arm), so reports and
CSV files are byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.stats import norm as _normal

from .calibrate import calibrate_holdout, calibrate_kfold
from .errors import (
    DimensionMismatch,
    EmptySupport,
    HypothesisViolated,
    SampleOutsideSupport,
    WdroError,
)
from .geometry import GroundNorm, Polytope, dual_norm_value, nearest_point
from .lp import LinearProgram, LpBuilder
from .simplex import solve_lp

__all__ = [
    "MarketModel",
    "PortfolioSpec",
    "PortfolioResult",
    "build_portfolio_dro",
    "solve_portfolio",
    "empirical_cvar",
    "portfolio_empirical_objective",
    "out_of_sample_objective",
    "PortfolioDecisionProblem",
    "gaussian_orthant_upper",
    "outperformance_region",
    "fast_uq_bounds",
    "PortfolioStudyConfig",
    "UqStudyConfig",
    "StudyReport",
    "run_portfolio_study",
    "run_uq_study",
]


@dataclass(frozen=True)
class MarketModel:
    """Synthetic market: asset i returns psi + zeta_i with one systematic
    factor psi ~ N(0, systematic 2%) shared by all assets and independent
    idiosyncratic factors zeta_i ~ N(i*3%, i*2.5%), i = 1..m.

    Percent figures are read as standard deviations by default
    (``scale_interpretation="std"``); set ``"variance"`` to read them as
    variances instead.
    """

    m: int = 10
    systematic_scale: float = 0.02
    idio_mean_step: float = 0.03
    idio_scale_step: float = 0.025
    scale_interpretation: str = "std"

    def __post_init__(self):
        if self.m < 1:
            raise DimensionMismatch("need at least one asset")
        if self.systematic_scale <= 0 or self.idio_scale_step <= 0:
            raise DimensionMismatch("scales must be positive")
        if self.scale_interpretation not in ("std", "variance"):
            raise DimensionMismatch(
                f"unknown scale interpretation {self.scale_interpretation!r}"
            )

    def _stds(self):
        idx = np.arange(1, self.m + 1, dtype=float)
        sys_sd = self.systematic_scale
        idio_sd = self.idio_scale_step * idx
        if self.scale_interpretation == "variance":
            sys_sd = float(np.sqrt(sys_sd))
            idio_sd = np.sqrt(idio_sd)
        return sys_sd, idio_sd

    def mean(self) -> np.ndarray:
        return self.idio_mean_step * np.arange(1, self.m + 1, dtype=float)

    def covariance(self) -> np.ndarray:
        sys_sd, idio_sd = self._stds()
        return sys_sd**2 * np.ones((self.m, self.m)) + np.diag(idio_sd**2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        sys_sd, idio_sd = self._stds()
        psi = rng.normal(0.0, sys_sd, size=(n, 1))
        zeta = rng.normal(self.mean(), idio_sd, size=(n, self.m))
        return psi + zeta


@dataclass(frozen=True)
class PortfolioSpec:
    """Mean-CVaR objective E[-<x, xi>] + rho * CVaR_alpha(-<x, xi>) over
    the probability simplex, written as the two affine pieces
    a1 = -1, b1 = rho and a2 = -1 - rho/alpha, b2 = rho(1 - 1/alpha)
    applied to (<x, xi>, tau).  ``support=None`` means the whole space."""

    m: int = 10
    rho: float = 10.0
    alpha: float = 0.2
    support: Polytope | None = None
    ground_norm: GroundNorm = GroundNorm.L1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DimensionMismatch("CVaR level alpha must lie in (0, 1]")
        if self.rho < 0.0:
            raise DimensionMismatch("risk aversion rho must be nonnegative")
        if self.support is not None and self.support.dim != self.m:
            raise DimensionMismatch("support dimension does not match asset count")

    def resolved_support(self) -> Polytope:
        return self.support if self.support is not None else Polytope.free(self.m)

    def pieces(self) -> tuple[np.ndarray, np.ndarray]:
        """Scalar coefficients (a_k, b_k) of the two pieces."""
        a = np.array([-1.0, -1.0 - self.rho / self.alpha])
        b = np.array([self.rho, self.rho * (1.0 - 1.0 / self.alpha)])
        return a, b


@dataclass(frozen=True)
class PortfolioResult:
    weights: np.ndarray
    tau: float
    certificate: float


def build_portfolio_dro(
    spec: PortfolioSpec, data: np.ndarray, epsilon: float
) -> LinearProgram:
    """Joint program over (x, tau, lam, s_i, multipliers): epigraph rows
    b_k tau + a_k <x, xi_i> + <gamma_ik, d - C xi_i> <= s_i with dual-norm
    rows ||C'gamma_ik - a_k x||_* <= lam and the simplex constraint on x.
    The weights occupy the first m coordinates of the optimizer."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    N, m = data.shape
    if m != spec.m:
        raise DimensionMismatch("data dimension does not match asset count")
    support = spec.resolved_support()
    worst = float(np.max(support.violation(data)))
    if worst > 1e-9:
        raise SampleOutsideSupport(
            f"a sample violates the support by {worst:.3e}"
        )
    a_coef, b_coef = spec.pieces()
    dual = spec.ground_norm.dual.value

    b = LpBuilder("min")
    x = b.vars("x", m, lb=0.0)
    tau = b.var("tau")
    lam = b.var("lam", lb=0.0)
    s = b.vars("s", N)
    obj = {lam: epsilon}
    for si in s:
        obj[si] = 1.0 / N
    b.set_objective(obj)
    b.add_eq({xj: 1.0 for xj in x}, 1.0)

    for i in range(N):
        xi = data[i]
        for k in range(2):
            row = {tau: b_coef[k], s[i]: -1.0}
            for j in range(m):
                if xi[j] != 0.0:
                    row[x[j]] = row.get(x[j], 0.0) + a_coef[k] * xi[j]
            if support.is_free:
                b.add_row(row, "<=", 0.0)
            else:
                g = b.vars(f"gamma[{i},{k}]", support.n_rows, lb=0.0)
                slack = support.d - support.C @ xi
                for r in range(support.n_rows):
                    row[g[r]] = slack[r]
                b.add_row(row, "<=", 0.0)
                exprs = []
                for j in range(m):
                    terms = {x[j]: -a_coef[k]}
                    for r in range(support.n_rows):
                        if support.C[r, j] != 0.0:
                            terms[g[r]] = terms.get(g[r], 0.0) + support.C[r, j]
                    exprs.append((terms, 0.0))
                b.add_norm_le(exprs, lam, dual, tag=f"[{i},{k}]")
    if support.is_free:
        # the dual-norm rows do not involve the sample, emit once per piece
        for k in range(2):
            exprs = [({x[j]: -a_coef[k]}, 0.0) for j in range(m)]
            b.add_norm_le(exprs, lam, dual, tag=f"[{k}]")
    return b.build()


def _solve_portfolio_free(spec, data, epsilon):
    """Free-support shortcut: the optimal multiplier is known to be
    max_k |a_k| times the dual norm of x, so the program shrinks to the
    sample mean-CVaR plus a norm-of-weights penalty.  Equivalent to the
    joint program (tested); roughly halves the row count."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    N, m = data.shape
    a_coef, _ = spec.pieces()
    kappa = float(np.max(np.abs(a_coef)))

    b = LpBuilder("min")
    x = b.vars("x", m, lb=0.0)
    tau = b.var("tau")
    t = b.var("t", lb=0.0)  # dual norm of x
    z = b.vars("z", N, lb=0.0)  # hinge (loss - tau)+
    obj = {t: epsilon * kappa, tau: spec.rho}
    for j in range(m):
        obj[x[j]] = obj.get(x[j], 0.0) - float(np.mean(data[:, j]))
    for zi in z:
        obj[zi] = spec.rho / (spec.alpha * N)
    b.set_objective(obj)
    b.add_eq({xj: 1.0 for xj in x}, 1.0)
    for i in range(N):
        row = {z[i]: -1.0, tau: -1.0}
        for j in range(m):
            if data[i, j] != 0.0:
                row[x[j]] = row.get(x[j], 0.0) - data[i, j]
        b.add_le(row, 0.0)
    # epigraph of the dual norm of x (x >= 0 keeps it one-sided)
    if spec.ground_norm is GroundNorm.L1:
        for j in range(m):
            b.add_le({x[j]: 1.0, t: -1.0}, 0.0)
    else:
        b.add_le({xj: 1.0 for xj in x} | {t: -1.0}, 0.0)
    lp = b.build()
    sol = solve_lp(lp)
    if not sol.is_optimal:
        raise WdroError(f"portfolio program ended {sol.status}")
    w = sol.primal[: m]
    return PortfolioResult(
        weights=w.copy(), tau=float(sol.primal[m]), certificate=sol.objective_value
    )


def solve_portfolio(
    spec: PortfolioSpec, data: np.ndarray, epsilon: float
) -> PortfolioResult:
    """Optimal weights, CVaR threshold and certificate at one radius."""
    if spec.resolved_support().is_free:
        return _solve_portfolio_free(spec, data, epsilon)
    lp = build_portfolio_dro(spec, data, epsilon)
    sol = solve_lp(lp)
    if not sol.is_optimal:
        raise WdroError(f"portfolio program ended {sol.status}")
    m = spec.m
    return PortfolioResult(
        weights=sol.primal[:m].copy(),
        tau=float(sol.primal[m]),
        certificate=sol.objective_value,
    )


def empirical_cvar(losses: np.ndarray, alpha: float) -> float:
    """Exact sample CVaR: the threshold functional is piecewise linear
    with breakpoints at the sample losses, so minimizing over those
    breakpoints is exact."""
    L = np.asarray(losses, dtype=float).reshape(-1)
    if L.size == 0:
        raise DimensionMismatch("need at least one loss value")
    D = np.sort(L)[::-1]
    idx = np.arange(D.size)
    prefix = np.concatenate([[0.0], np.cumsum(D)[:-1]])  # sum of strictly larger losses
    vals = D + (prefix - idx * D) / (alpha * D.size)
    return float(np.min(vals))


def portfolio_empirical_objective(
    spec: PortfolioSpec, weights: np.ndarray, samples: np.ndarray
) -> float:
    """Sample mean-CVaR objective of fixed weights."""
    L = -np.atleast_2d(samples) @ np.asarray(weights, dtype=float)
    return float(np.mean(L) + spec.rho * empirical_cvar(L, spec.alpha))


def out_of_sample_objective(
    weights: np.ndarray, spec: PortfolioSpec, market: MarketModel
) -> float:
    """Closed-form objective under the Gaussian market: the loss
    -<x, xi> is normal, and the CVaR of a normal is
    mean + sd * pdf(quantile(1-alpha)) / alpha."""
    x = np.asarray(weights, dtype=float).reshape(-1)
    mu_l = -float(x @ market.mean())
    var_l = float(x @ market.covariance() @ x)
    sd_l = float(np.sqrt(max(var_l, 0.0)))
    if spec.alpha >= 1.0:
        cvar = mu_l
    else:
        cvar = mu_l + sd_l * float(
            _normal.pdf(_normal.ppf(1.0 - spec.alpha)) / spec.alpha
        )
    return mu_l + spec.rho * cvar


class PortfolioDecisionProblem:
    """Calibration adapter: train at a radius, score by the validation
    sample mean-CVaR."""

    def __init__(self, spec: PortfolioSpec):
        self.spec = spec

    def train(self, samples, epsilon) -> PortfolioResult:
        return solve_portfolio(self.spec, samples, float(epsilon))

    def score(self, decision: PortfolioResult, samples) -> float:
        return portfolio_empirical_objective(self.spec, decision.weights, samples)


def gaussian_orthant_upper(mu, cov, tol: float = 1e-6) -> float:
    """P[Z >= 0] for Z ~ N(mu, cov) in dimension 1 to 3, by conditioning
    the last coordinate on the others and integrating the remaining
    normal density with adaptive quadrature.  Deterministic; absolute
    accuracy well under ``tol``."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = mu.size
    if cov.shape != (n, n):
        raise DimensionMismatch("covariance shape does not match mean")
    if n == 1:
        sd = float(np.sqrt(cov[0, 0]))
        return float(_normal.cdf(mu[0] / sd)) if sd > 0 else float(mu[0] >= 0.0)

    def tail(mean, sd):
        if sd < 1e-12:
            return 1.0 if mean >= 0.0 else 0.0
        return float(_normal.cdf(mean / sd))

    if n == 2:
        s1 = float(np.sqrt(cov[0, 0]))
        slope = cov[1, 0] / cov[0, 0]
        sd2 = float(np.sqrt(max(cov[1, 1] - slope * cov[1, 0], 0.0)))

        def integrand(z1):
            cond_mean = mu[1] + slope * (z1 - mu[0])
            return _normal.pdf((z1 - mu[0]) / s1) / s1 * tail(cond_mean, sd2)

        val, _ = integrate.quad(
            integrand, 0.0, np.inf, epsabs=tol * 1e-2, epsrel=1e-10, limit=200
        )
        return float(val)
    if n == 3:
        S = cov[:2, :2]
        S_inv = np.linalg.inv(S)
        det = float(np.linalg.det(S))
        w = cov[2, :2] @ S_inv
        sd3 = float(np.sqrt(max(cov[2, 2] - float(w @ cov[:2, 2]), 0.0)))
        norm_const = 1.0 / (2.0 * np.pi * np.sqrt(det))

        def integrand(z2, z1):
            d = np.array([z1 - mu[0], z2 - mu[1]])
            dens = norm_const * np.exp(-0.5 * float(d @ S_inv @ d))
            cond_mean = mu[2] + float(w @ d)
            return dens * tail(cond_mean, sd3)

        val, _ = integrate.dblquad(
            integrand,
            0.0,
            np.inf,
            0.0,
            np.inf,
            epsabs=tol * 1e-2,
            epsrel=1e-9,
        )
        return float(val)
    raise DimensionMismatch("orthant oracle supports dimensions 1 to 3")


def outperformance_region(weights: np.ndarray, assets) -> Polytope:
    """Region where the portfolio return beats every listed asset:
    rows (e_i - x)' xi <= 0."""
    x = np.asarray(weights, dtype=float).reshape(-1)
    m = x.size
    rows = []
    for i in assets:
        e = np.zeros(m)
        e[i] = 1.0
        rows.append(e - x)
    return Polytope(np.asarray(rows), np.zeros(len(rows)), m)


def fast_uq_bounds(region: Polytope, norm: GroundNorm = GroundNorm.L1):
    """Closed-form probability bound evaluators for unconstrained
    support.

    Only the ground-norm distance from each sample to the region (upper
    bound) or to its complement (lower bound) matters, and the optimal
    multiplier of the one-dimensional dual sits on a breakpoint 1/d_i.
    Distances are cached per sample set, so sweeping radii costs one
    distance pass plus a breakpoint scan per radius.  Matches the generic
    programs (equality-tested on small instances).
    """
    if region.n_rows and not region.nonempty():
        raise HypothesisViolated("the region is empty")
    dual_norms = np.array(
        [dual_norm_value(region.C[k], norm) for k in range(region.n_rows)]
    )
    cache_in: dict[bytes, np.ndarray] = {}
    cache_out: dict[bytes, np.ndarray] = {}

    def region_distances(X: np.ndarray) -> np.ndarray:
        key = X.tobytes()
        if key not in cache_in:
            d = np.zeros(X.shape[0])
            if region.n_rows:
                viol = region.violation(X)
                for i in np.flatnonzero(viol > 0.0):
                    try:
                        d[i] = nearest_point(region, X[i], norm)[0]
                    except EmptySupport:
                        raise HypothesisViolated("the region is empty") from None
            cache_in[key] = d
        return cache_in[key]

    def complement_distances(X: np.ndarray) -> np.ndarray:
        key = X.tobytes()
        if key not in cache_out:
            cols = []
            for k in range(region.n_rows):
                if dual_norms[k] == 0.0:
                    if region.d[k] <= 0.0:
                        cols.append(np.zeros(X.shape[0]))
                    continue  # empty halfspace contributes nothing
                margin = region.d[k] - X @ region.C[k]
                cols.append(np.maximum(0.0, margin) / dual_norms[k])
            if not cols:
                raise HypothesisViolated(
                    "no boundary halfspace of the region is reachable"
                )
            cache_out[key] = np.min(np.column_stack(cols), axis=1)
        return cache_out[key]

    def breakpoint_min(eps: float, d: np.ndarray) -> float:
        positive = np.unique(d[d > 0.0])
        lams = np.concatenate([[0.0], 1.0 / positive[::-1]])
        vals = lams * eps + np.maximum(0.0, 1.0 - np.outer(lams, d)).mean(axis=1)
        return float(vals.min())

    def j_plus(samples, eps) -> float:
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        return breakpoint_min(float(eps), region_distances(X))

    def j_minus(samples, eps) -> float:
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        return 1.0 - breakpoint_min(float(eps), complement_distances(X))

    return j_plus, j_minus


def _csv_write(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _versions() -> dict:
    import scipy

    from . import __version__

    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "wdro": __version__,
    }


@dataclass(frozen=True)
class StudyReport:
    """Raw per-run rows plus aggregated summaries and a replay manifest.
    ``tables`` maps a file stem to (header, rows)."""

    manifest: dict
    tables: dict

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for stem, (header, rows) in sorted(self.tables.items()):
            path = out / f"{stem}.csv"
            _csv_write(path, header, rows)
            paths[stem] = path
        manifest_path = out / "manifest.json"
        manifest_path.write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"
        )
        paths["manifest"] = manifest_path
        return paths


def _geom(lo, hi, count):
    return tuple(float(v) for v in np.geomspace(lo, hi, count))


@dataclass(frozen=True)
class PortfolioStudyConfig:
    """Defaults are desk-scale; ``full_scale`` restores the original run
    counts (hours of runtime on one core)."""

    runs: int = 100
    n_curve: tuple = (30,)
    n_calibration: tuple = (30, 300)
    epsilons: tuple = (0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0)
    calibration_grid: tuple = field(default_factory=lambda: _geom(1e-3, 1.0, 7))
    k_folds: int = 5
    holdout_split: float = 0.8
    master_seed: int = 20230517
    market: MarketModel = field(default_factory=MarketModel)
    portfolio: PortfolioSpec = field(default_factory=PortfolioSpec)

    @classmethod
    def full_scale(cls) -> "PortfolioStudyConfig":
        return cls(
            runs=200,
            n_curve=(30, 300),
            n_calibration=(30, 300, 3000),
            calibration_grid=_geom(1e-4, 1.0, 30),
        )

    def validate(self):
        if self.runs < 1:
            raise DimensionMismatch("need at least one run")
        if not self.epsilons or any(e < 0 for e in self.epsilons):
            raise DimensionMismatch("radius sweep must be nonempty and nonnegative")
        if self.market.m != self.portfolio.m:
            raise DimensionMismatch("market and portfolio dimensions differ")


@dataclass(frozen=True)
class UqStudyConfig:
    """Probability-bracket study around the cross-validation calibrated
    portfolio; the event is outperforming the ``risky_assets`` assets
    with the largest index (the riskiest ones)."""

    runs: int = 40
    n_values: tuple = (30,)
    epsilons: tuple = (0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3)
    portfolio_grid: tuple = field(default_factory=lambda: _geom(1e-3, 1.0, 7))
    uq_grid: tuple = field(default_factory=lambda: _geom(1e-4, 0.3, 8))
    k_folds: int = 5
    risky_assets: int = 3
    master_seed: int = 20230518
    market: MarketModel = field(default_factory=MarketModel)
    portfolio: PortfolioSpec = field(default_factory=PortfolioSpec)

    def validate(self):
        if self.runs < 1:
            raise DimensionMismatch("need at least one run")
        if not (1 <= self.risky_assets <= self.market.m):
            raise DimensionMismatch("risky asset count out of range")
        if self.market.m != self.portfolio.m:
            raise DimensionMismatch("market and portfolio dimensions differ")
        if self.portfolio.support is not None:
            raise DimensionMismatch(
                "the probability study uses unconstrained support"
            )


def run_portfolio_study(config: PortfolioStudyConfig) -> StudyReport:
    """Radius sweep, holdout and cross-validation calibration against the
    plain sample-average baseline, all scored in closed form out of
    sample."""
    config.validate()
    spec, market = config.portfolio, config.market
    template = PortfolioDecisionProblem(spec)
    arms = sorted(set(config.n_curve) | set(config.n_calibration))
    run_seqs = np.random.SeedSequence(config.master_seed).spawn(config.runs)

    curve_rows, cal_rows = [], []
    for r in range(config.runs):
        arm_seqs = run_seqs[r].spawn(len(arms))
        for a, N in enumerate(arms):
            data_seq, hold_seq, cv_seq = arm_seqs[a].spawn(3)
            data = market.sample(N, np.random.default_rng(data_seq))
            if N in config.n_curve:
                for eps in config.epsilons:
                    res = solve_portfolio(spec, data, eps)
                    oos = out_of_sample_objective(res.weights, spec, market)
                    curve_rows.append(
                        (r, N, float(eps), res.certificate, oos,
                         int(oos <= res.certificate))
                    )
            if N in config.n_calibration:
                hold = calibrate_holdout(
                    data, template, config.calibration_grid,
                    split=config.holdout_split, seed=hold_seq,
                )
                cv = calibrate_kfold(
                    data, template, config.calibration_grid,
                    k=config.k_folds, seed=cv_seq,
                )
                saa = template.train(data, 0.0)
                cal_rows.append(
                    (
                        r, N,
                        hold.radius,
                        cv.radius,
                        out_of_sample_objective(hold.decision.weights, spec, market),
                        out_of_sample_objective(cv.decision.weights, spec, market),
                        out_of_sample_objective(saa.weights, spec, market),
                    )
                )

    summary_rows = []
    for N in config.n_curve:
        for eps in config.epsilons:
            sel = [row for row in curve_rows if row[1] == N and row[2] == float(eps)]
            oos = np.array([row[4] for row in sel])
            cert = np.array([row[3] for row in sel])
            rel = float(np.mean([row[5] for row in sel]))
            summary_rows.append(
                (
                    N, float(eps),
                    float(oos.mean()),
                    float(np.quantile(oos, 0.2)),
                    float(np.quantile(oos, 0.8)),
                    float(cert.mean()),
                    rel,
                )
            )
    radii_rows = []
    for N in config.n_calibration:
        sel = [row for row in cal_rows if row[1] == N]
        cols = np.array([[row[2], row[3], row[4], row[5], row[6]] for row in sel])
        radii_rows.append((N, *[float(v) for v in cols.mean(axis=0)]))

    manifest = {
        "study": "portfolio",
        "master_seed": config.master_seed,
        "seed_scheme": "SeedSequence spawn: run -> arm -> (data, holdout, cv)",
        "runs": config.runs,
        "n_curve": list(config.n_curve),
        "n_calibration": list(config.n_calibration),
        "epsilons": list(map(float, config.epsilons)),
        "calibration_grid": list(map(float, config.calibration_grid)),
        "k_folds": config.k_folds,
        "holdout_split": config.holdout_split,
        "market": {
            "m": market.m,
            "systematic_scale": market.systematic_scale,
            "idio_mean_step": market.idio_mean_step,
            "idio_scale_step": market.idio_scale_step,
            "scale_interpretation": market.scale_interpretation,
        },
        "portfolio": {
            "rho": spec.rho,
            "alpha": spec.alpha,
            "ground_norm": spec.ground_norm.value,
            "support": "free" if spec.support is None else "polytope",
        },
        "quantile_estimator": "numpy linear interpolation",
        "versions": _versions(),
    }
    tables = {
        "fig4_oos": (
            ["run", "n_samples", "epsilon", "certificate", "oos_objective",
             "certificate_covers"],
            curve_rows,
        ),
        "fig5_reliability": (
            ["n_samples", "epsilon", "oos_mean", "oos_q20", "oos_q80",
             "certificate_mean", "reliability"],
            summary_rows,
        ),
        "fig6_calibration": (
            ["run", "n_samples", "holdout_radius", "cv_radius", "oos_holdout",
             "oos_cv", "oos_saa"],
            cal_rows,
        ),
        "fig9_radii": (
            ["n_samples", "mean_holdout_radius", "mean_cv_radius",
             "mean_oos_holdout", "mean_oos_cv", "mean_oos_saa"],
            radii_rows,
        ),
    }
    return StudyReport(manifest=manifest, tables=tables)


def run_uq_study(config: UqStudyConfig) -> StudyReport:
    """Bracket the probability of outperforming the riskiest assets:
    per run, calibrate the portfolio by cross validation, sweep the
    bound radii, and compare with the exact Gaussian probability."""
    config.validate()
    spec, market = config.portfolio, config.market
    template = PortfolioDecisionProblem(spec)
    assets = list(range(market.m - config.risky_assets, market.m))
    run_seqs = np.random.SeedSequence(config.master_seed).spawn(config.runs)

    from .calibrate import calibrate_uq_kfold

    curve_rows, cal_rows = [], []
    for r in range(config.runs):
        arm_seqs = run_seqs[r].spawn(len(config.n_values))
        for a, N in enumerate(config.n_values):
            data_seq, cv_seq, uq_seq = arm_seqs[a].spawn(3)
            data = market.sample(N, np.random.default_rng(data_seq))
            cv = calibrate_kfold(
                data, template, config.portfolio_grid, k=config.k_folds, seed=cv_seq
            )
            weights = cv.decision.weights
            region = outperformance_region(weights, assets)
            G, mu, cov = region.C, market.mean(), market.covariance()
            p_true = gaussian_orthant_upper(-G @ mu, G @ cov @ G.T)
            bounds = fast_uq_bounds(region, spec.ground_norm)
            j_plus, j_minus = bounds
            for eps in config.epsilons:
                hi = j_plus(data, eps)
                lo = j_minus(data, eps)
                covered = int(lo <= p_true <= hi)
                curve_rows.append(
                    (r, N, float(eps), lo, hi, p_true, covered)
                )
            cal = calibrate_uq_kfold(
                data,
                region,
                config.uq_grid,
                k=config.k_folds,
                seed=uq_seq,
                bound_fns=bounds,
            )
            by_side = {bd.side: bd for bd in cal.bounds}
            lo_b, hi_b = by_side["lower"], by_side["upper"]
            cal_rows.append(
                (
                    r, N,
                    hi_b.radius, lo_b.radius,
                    hi_b.value, lo_b.value,
                    p_true,
                    int(lo_b.value <= p_true <= hi_b.value),
                )
            )

    summary_rows = []
    for N in config.n_values:
        for eps in config.epsilons:
            sel = [row for row in curve_rows if row[1] == N and row[2] == float(eps)]
            lo = np.array([row[3] for row in sel])
            hi = np.array([row[4] for row in sel])
            gap_hi = np.array([row[4] - row[5] for row in sel])
            gap_lo = np.array([row[3] - row[5] for row in sel])
            summary_rows.append(
                (
                    N, float(eps),
                    float(lo.mean()), float(hi.mean()),
                    float(np.quantile(gap_lo, 0.2)), float(np.quantile(gap_lo, 0.8)),
                    float(np.quantile(gap_hi, 0.2)), float(np.quantile(gap_hi, 0.8)),
                    float(np.mean([row[6] for row in sel])),
                )
            )

    manifest = {
        "study": "uq",
        "master_seed": config.master_seed,
        "seed_scheme": "SeedSequence spawn: run -> arm -> (data, cv, uq)",
        "runs": config.runs,
        "n_values": list(config.n_values),
        "epsilons": list(map(float, config.epsilons)),
        "portfolio_grid": list(map(float, config.portfolio_grid)),
        "uq_grid": list(map(float, config.uq_grid)),
        "k_folds": config.k_folds,
        "risky_assets": config.risky_assets,
        "orthant_oracle_tol": 1e-6,
        "versions": _versions(),
    }
    tables = {
        "fig10_uq_curves": (
            ["run", "n_samples", "epsilon", "lower_bound", "upper_bound",
             "true_probability", "bracket_covers"],
            curve_rows,
        ),
        "fig10_summary": (
            ["n_samples", "epsilon", "lower_mean", "upper_mean",
             "lower_gap_q20", "lower_gap_q80", "upper_gap_q20", "upper_gap_q80",
             "bracket_reliability"],
            summary_rows,
        ),
        "fig11_calibrated": (
            ["run", "n_samples", "upper_radius", "lower_radius", "upper_bound",
             "lower_bound", "true_probability", "bracket_covers"],
            cal_rows,
        ),
    }
    return StudyReport(manifest=manifest, tables=tables)
