"""Two-phase primal simplex for dense bounded-variable linear programs.

The user-facing program is converted to equality form by appending one
slack column per row; relation information lives entirely in the slack
bounds ("<=" slack in [0, inf), ">=" slack in (-inf, 0], "=" slack fixed
at zero).  Free variables are handled directly by the bounded-variable
rules, never split into differences.  Phase one introduces signed
artificial columns only for rows whose residual the slack cannot absorb
and minimizes their sum; a positive phase-one optimum is an infeasibility
certificate.  The basis inverse is kept explicitly, updated by row
operations after each pivot and rebuilt every ``refactor_every`` pivots.

Pricing uses the largest-violation (Dantzig) rule with lowest-index
tie-breaks, switching to Bland's least-index rule after
10*(n_vars + n_rows) iterations so degenerate programs terminate.  All
tie-breaking is deterministic, which makes repeated solves of the same
program bit-identical.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalBreakdown
from .lp import GE, LE, LinearProgram, LpSolution, SolverConfig

__all__ = ["solve_lp"]

_AT_LOWER, _AT_UPPER, _BASIC, _FREE = 0, 1, 2, 3

_OPTIMAL, _UNBOUNDED, _ITER_LIMIT = 0, 1, 2


class _Engine:
    def __init__(self, lp: LinearProgram, cfg: SolverConfig):
        self.cfg = cfg
        self.flip = lp.sense == "max"
        m, n = lp.n_rows, lp.n_vars
        self.m, self.n_struct = m, n

        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, rel in enumerate(lp.row_relations):
            if rel == LE:
                slack_hi[i] = np.inf
            elif rel == GE:
                slack_lo[i] = -np.inf

        lo_real = np.concatenate([lp.lower, slack_lo])
        hi_real = np.concatenate([lp.upper, slack_hi])
        b = lp.row_rhs.copy()

        # Nonbasic start: finite bound nearest the origin, else the origin.
        x_real = np.zeros(n + m)
        st_real = np.full(n + m, _FREE, dtype=np.int8)
        lo_f, hi_f = np.isfinite(lo_real), np.isfinite(hi_real)
        at_lo = lo_f & (np.abs(lo_real) <= np.abs(np.where(hi_f, hi_real, np.inf)))
        at_hi = hi_f & ~at_lo
        st_real[at_lo], st_real[at_hi] = _AT_LOWER, _AT_UPPER
        x_real[at_lo], x_real[at_hi] = lo_real[at_lo], hi_real[at_hi]

        # Rows whose residual fits inside the slack bounds start with the
        # slack basic; the rest get one signed artificial column each.
        resid = b - lp.row_coeffs @ x_real[:n]
        basis = np.empty(m, dtype=np.int64)
        art_rows: list[int] = []
        art_vals: list[float] = []
        art_signs: list[float] = []
        for i in range(m):
            js = n + i
            if slack_lo[i] <= resid[i] <= slack_hi[i]:
                basis[i] = js
                x_real[js] = resid[i]
                st_real[js] = _BASIC
            else:
                x_real[js] = min(max(resid[i], slack_lo[i]), slack_hi[i])
                st_real[js] = _AT_LOWER if x_real[js] == slack_lo[i] else _AT_UPPER
                gap = resid[i] - x_real[js]
                art_rows.append(i)
                art_vals.append(abs(gap))
                art_signs.append(1.0 if gap > 0 else -1.0)

        n_art = len(art_rows)
        n_tot = n + m + n_art
        A = np.zeros((m, n_tot))
        A[:, :n] = lp.row_coeffs
        A[np.arange(m), n + np.arange(m)] = 1.0
        for k, (i, s) in enumerate(zip(art_rows, art_signs)):
            A[i, n + m + k] = s
            basis[i] = n + m + k

        self.A = A
        self.b = b
        self.lo = np.concatenate([lo_real, np.zeros(n_art)])
        self.hi = np.concatenate([hi_real, np.full(n_art, np.inf)])
        self.x = np.concatenate([x_real, np.array(art_vals)])
        self.status = np.concatenate(
            [st_real, np.full(n_art, _BASIC, dtype=np.int8)]
        )
        self.basis = basis
        self.n_tot, self.n_art = n_tot, n_art
        self.fixed = self.lo == self.hi
        self.B_inv = np.zeros((m, m))
        self.iterations = 0
        self.bland_after = SolverConfig.bland_after(n, m)
        self._refactor()

        c_int = -lp.costs if self.flip else lp.costs
        self.cost = np.concatenate([c_int, np.zeros(m + n_art)])
        self.ph1_cost = np.zeros(n_tot)
        self.ph1_cost[n + m :] = 1.0
        # Unbounded-exit scratch, set when _run returns _UNBOUNDED.
        self.ray_col = -1
        self.ray_sigma = 0.0
        self.ray_w = np.zeros(m)

    def _refactor(self) -> None:
        if self.m == 0:
            return
        try:
            self.B_inv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis during refactorization") from exc
        x_nb = self.x.copy()
        x_nb[self.basis] = 0.0
        self.x[self.basis] = self.B_inv @ (self.b - self.A @ x_nb)

    def _pivot_update(self, r: int, w: np.ndarray) -> None:
        self.B_inv[r, :] /= w[r]
        others = w.copy()
        others[r] = 0.0
        self.B_inv -= np.outer(others, self.B_inv[r, :])

    def _run(self, c: np.ndarray) -> int:
        cfg = self.cfg
        A, lo, hi = self.A, self.lo, self.hi
        m = self.m
        pivots = 0
        tiny_retries = 0
        while True:
            if self.iterations >= cfg.max_iterations:
                return _ITER_LIMIT
            self.iterations += 1
            bland = self.iterations > self.bland_after

            y = self.B_inv.T @ c[self.basis] if m else np.zeros(0)
            d = c - A.T @ y
            st = self.status
            score = np.zeros(self.n_tot)
            mask_lo = (st == _AT_LOWER) & ~self.fixed
            mask_hi = (st == _AT_UPPER) & ~self.fixed
            mask_fr = st == _FREE
            score[mask_lo] = -d[mask_lo]
            score[mask_hi] = d[mask_hi]
            score[mask_fr] = np.abs(d[mask_fr])
            eligible = score > cfg.opt_tol
            if not eligible.any():
                return _OPTIMAL
            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                j = int(np.argmax(score))
            if st[j] == _AT_LOWER:
                sigma = 1.0
            elif st[j] == _AT_UPPER:
                sigma = -1.0
            else:
                sigma = 1.0 if d[j] < 0 else -1.0

            w = self.B_inv @ A[:, j] if m else np.zeros(0)
            delta = -sigma * w

            t_rows = np.full(m, np.inf)
            if m:
                xb = self.x[self.basis]
                lob, hob = lo[self.basis], hi[self.basis]
                dec = (delta < -cfg.pivot_tol) & np.isfinite(lob)
                inc = (delta > cfg.pivot_tol) & np.isfinite(hob)
                t_rows[dec] = np.maximum(xb[dec] - lob[dec], 0.0) / -delta[dec]
                t_rows[inc] = np.maximum(hob[inc] - xb[inc], 0.0) / delta[inc]

            t_flip = hi[j] - lo[j] if np.isfinite(lo[j]) and np.isfinite(hi[j]) else np.inf
            t_row_min = t_rows.min() if m else np.inf
            t = min(t_row_min, t_flip)
            if not np.isfinite(t):
                self.ray_col, self.ray_sigma, self.ray_w = j, sigma, w
                return _UNBOUNDED

            if t_flip <= t_row_min:
                # Entering variable jumps to its other bound; basis unchanged.
                if m:
                    self.x[self.basis] += t * delta
                if st[j] == _AT_LOWER:
                    self.x[j] = hi[j]
                    self.status[j] = _AT_UPPER
                else:
                    self.x[j] = lo[j]
                    self.status[j] = _AT_LOWER
                tiny_retries = 0
                continue

            tie = t_rows <= t + 1e-12 * (1.0 + abs(t))
            cand = np.flatnonzero(tie)
            if bland:
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                mags = np.abs(delta[cand])
                best = cand[mags >= mags.max() * (1.0 - 1e-9)]
                r = int(best[np.argmin(self.basis[best])])

            if abs(w[r]) < cfg.pivot_tol:
                # Stale inverse or genuinely tiny pivot: refactorize and
                # retry, then force Bland, then give up.
                tiny_retries += 1
                self.iterations -= 1
                if tiny_retries == 1:
                    self._refactor()
                    continue
                if not bland:
                    self.bland_after = 0
                    continue
                raise NumericalBreakdown(
                    f"pivot magnitude {abs(w[r]):.3e} below tolerance"
                )
            tiny_retries = 0

            leaving = int(self.basis[r])
            self.x[self.basis] += t * delta
            self.x[j] = self.x[j] + sigma * t
            if delta[r] < 0 or not np.isfinite(hi[leaving]):
                self.x[leaving] = lo[leaving]
                self.status[leaving] = _AT_LOWER
            else:
                self.x[leaving] = hi[leaving]
                self.status[leaving] = _AT_UPPER
            self.basis[r] = j
            self.status[j] = _BASIC
            self._pivot_update(r, w)
            pivots += 1
            if pivots % self.cfg.refactor_every == 0:
                self._refactor()

    def phase_one(self) -> float:
        if self.n_art == 0:
            return 0.0
        outcome = self._run(self.ph1_cost)
        if outcome == _ITER_LIMIT:
            raise NumericalBreakdown("iteration limit reached in phase one")
        if outcome == _UNBOUNDED:
            # The phase-one objective is bounded below by zero.
            raise NumericalBreakdown("phase one reported an unbounded direction")
        return float(self.ph1_cost @ self.x)

    def drop_artificials(self) -> None:
        n_real = self.n_struct + self.m
        if self.n_art == 0:
            return
        art = np.arange(n_real, self.n_tot)
        self.lo[art] = 0.0
        self.hi[art] = 0.0
        self.fixed[art] = True
        nonbasic_art = art[self.status[art] != _BASIC]
        self.x[nonbasic_art] = 0.0
        for r in np.flatnonzero(self.basis >= n_real):
            r = int(r)
            row = self.B_inv[r, :] @ self.A[:, :n_real]
            row[self.status[:n_real] == _BASIC] = 0.0
            row[self.fixed[:n_real]] = 0.0
            jq = int(np.argmax(np.abs(row)))
            if abs(row[jq]) <= self.cfg.pivot_tol:
                continue  # redundant row; the artificial stays basic at zero
            w = self.B_inv @ self.A[:, jq]
            leaving = int(self.basis[r])
            entering_value = self.x[jq]
            self.x[leaving] = 0.0
            self.status[leaving] = _AT_LOWER
            self.basis[r] = jq
            self.status[jq] = _BASIC
            self.x[jq] = entering_value
            self._pivot_update(r, w)
        self._refactor()

    def phase_two(self) -> int:
        outcome = self._run(self.cost)
        if outcome == _ITER_LIMIT:
            raise NumericalBreakdown("iteration limit reached in phase two")
        return outcome

    def raw_duals(self, c: np.ndarray) -> np.ndarray:
        return self.B_inv.T @ c[self.basis] if self.m else np.zeros(0)

    def ray(self) -> np.ndarray:
        r = np.zeros(self.n_tot)
        if self.m:
            r[self.basis] = -self.ray_sigma * self.ray_w
        r[self.ray_col] = self.ray_sigma
        return r[: self.n_struct]


def solve_lp(lp: LinearProgram, config: SolverConfig | None = None) -> LpSolution:
    """Solve a dense LP; see the module docstring for conventions.

    Returns an optimal basic solution with row duals, an infeasibility
    verdict carrying the phase-one multipliers as a Farkas-style
    certificate, or a feasible point plus an improving ray when the
    program is unbounded.
    """
    cfg = config or SolverConfig()
    eng = _Engine(lp, cfg)

    ph1 = eng.phase_one()
    if ph1 > cfg.feas_tol:
        return LpSolution(
            status="infeasible",
            objective_value=float("nan"),
            primal=None,
            duals=eng.raw_duals(eng.ph1_cost),
            ray=None,
            iterations=eng.iterations,
        )
    eng.drop_artificials()

    outcome = eng.phase_two()
    primal = eng.x[: eng.n_struct].copy()
    if outcome == _UNBOUNDED:
        return LpSolution(
            status="unbounded",
            objective_value=float("-inf") if lp.sense == "min" else float("inf"),
            primal=primal,
            duals=None,
            ray=eng.ray(),
            iterations=eng.iterations,
        )
    y = eng.raw_duals(eng.cost)
    return LpSolution(
        status="optimal",
        objective_value=float(lp.costs @ primal),
        primal=primal,
        duals=-y if eng.flip else y,
        ray=None,
        iterations=eng.iterations,
    )
