"""Linear programming engines for the relaxations.

``BoundedSimplex`` is a dense-tableau primal simplex for bounded variables
(nonbasic variables sit at either bound) with a two-phase start, Dantzig
pricing and a switch to Bland's rule during long degenerate stretches.
``HighsEngine`` wraps :func:`scipy.optimize.linprog` and is used for cross
checks or as a drop-in replacement.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


class LpError(RuntimeError):
    pass


@dataclass
class BasisState:
    """Reusable basis: basic column ids (``< n`` structural, ``n + k`` the
    surplus of inequality row ``k``) and the nonbasic structurals at their
    upper bound.

    At the engine level the rows are the first ``n_ineq`` inequalities.  In
    model coordinates (see :func:`solve_lp`) ``k`` is a cut index and ``rows``
    lists the cuts the basis was computed with.
    """

    basic: np.ndarray
    upper: np.ndarray
    n_ineq: int
    rows: Optional[np.ndarray] = None

    def binding_rows(self, n: int) -> np.ndarray:
        """Cut rows whose surplus is nonbasic (model coordinates)."""
        basic_rows = set((self.basic[self.basic >= n] - n).tolist())
        return np.array([r for r in self._rows() if r not in basic_rows], dtype=np.int64)

    def _rows(self) -> np.ndarray:
        return np.arange(self.n_ineq) if self.rows is None else self.rows


@dataclass
class LpSolution:
    values: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    basis: Optional[BasisState] = None
    warm: bool = False
    # objective change per unit increase of each structural variable, holding
    # the other nonbasic variables at their bounds (None if unavailable)
    reduced_costs: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


class LpEngine(Protocol):
    def solve(self, c, a_eq, b_eq, a_ge, b_ge, lb, ub, x0=None, basis=None) -> LpSolution:
        """Maximise ``c @ x`` s.t. ``a_eq x = b_eq``, ``a_ge x >= b_ge``, ``lb <= x <= ub``."""


class BoundedSimplex:
    """Primal simplex on a dense tableau, with dual simplex re-solves.

    A cold solve expands the bounds of non-fixed variables by tiny random
    amounts while iterating, which removes the heavy degeneracy of
    partition-type rows; the true bounds are restored at the end and the small
    primal infeasibility left behind is repaired by bounded dual simplex
    pivots.  Bland's rule takes over during long runs of degenerate pivots
    all the same.

    Given the basis of an earlier solve of the same rows (possibly with more
    inequality rows appended or different bounds), the basis is extended by
    the new surplus columns, boxed nonbasic columns are placed at the bound
    their reduced cost prefers, and the dual simplex finishes the job.
    """

    def __init__(self, feas_tol: float = 1e-9, opt_tol: float = 1e-10, pivot_tol: float = 1e-9,
                 refactor_every: int = 100, degenerate_limit: int = 50, perturbation: float = 1e-7,
                 max_iter: Optional[int] = None, seed: int = 0):
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.degenerate_limit = degenerate_limit
        self.perturbation = perturbation
        self.max_iter = max_iter
        self.seed = seed

    def solve(self, c, a_eq, b_eq, a_ge, b_ge, lb, ub, x0=None, basis=None) -> LpSolution:
        c = np.asarray(c, dtype=float)
        n = c.size
        a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
        a_ge = np.asarray(a_ge, dtype=float).reshape(-1, n)
        b = np.concatenate([np.asarray(b_eq, float).ravel(), np.asarray(b_ge, float).ravel()])
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if np.any(lb > ub + self.feas_tol):
            return LpSolution(np.clip(np.zeros(n), lb, ub), float("nan"), INFEASIBLE)
        if basis is not None:
            self._setup(c, a_eq, a_ge, b, lb, ub, artificials=False)
            try:
                sol = self._warm(basis)
            except LpError as exc:
                log.debug("warm start abandoned: %s", exc)
                sol = None
            if sol is not None:
                return sol
        self._setup(c, a_eq, a_ge, b, lb, ub)
        return self._cold(x0)

    def _setup(self, c, a_eq, a_ge, b, lb, ub, artificials: bool = True):
        n = c.size
        m_eq, m_ge = a_eq.shape[0], a_ge.shape[0]
        m = m_eq + m_ge
        m_art = m if artificials else 0
        self._c, self._n, self._m_eq, self._m_ge = c, n, m_eq, m_ge
        self._n_tot = n + m_ge + m_art
        self._art0 = n + m_ge
        full = np.zeros((m, self._n_tot))
        full[:m_eq, :n] = a_eq
        full[m_eq:, :n] = a_ge
        full[np.arange(m_eq, m), n + np.arange(m_ge)] = -1.0
        self._full, self._b = full, b
        self._lb, self._ub = lb, ub
        self._lo0 = np.concatenate([lb, np.zeros(m_ge + m_art)])
        self._hi0 = np.concatenate([ub, np.full(m_ge, np.inf), np.zeros(m_art)])
        scale = max(1.0, float(np.max(np.abs(c)))) if n else 1.0
        self._cost = np.zeros(self._n_tot)
        self._cost[:n] = -c / scale
        self._max_iter = self.max_iter or 50 * (m + self._n_tot) + 1000

    def _cold(self, x0) -> LpSolution:
        n, m_eq, m_ge, art0, n_tot = self._n, self._m_eq, self._m_ge, self._art0, self._n_tot
        m = m_eq + m_ge
        lo, hi, lb, ub, b, full = self._lo0, self._hi0, self._lb, self._ub, self._b, self._full
        rng = np.random.default_rng(self.seed)
        shift = self.perturbation * (1.0 + rng.random((2, n_tot)))
        free = hi > lo
        free[art0:] = False
        lo_p = np.where(free, lo - shift[0], lo)
        hi_p = np.where(free, hi + shift[1], hi)

        # structural start point: hint clipped to bounds, snapped to a bound
        if x0 is None:
            at_upper = np.zeros(n, dtype=bool)
        else:
            x0 = np.clip(np.asarray(x0, dtype=float), lb, ub)
            at_upper = np.abs(x0 - ub) < np.abs(x0 - lb)
        xs = np.where(at_upper, hi_p[:n], lo_p[:n])
        resid = b - full[:, :n] @ xs
        x = np.concatenate([xs, np.zeros(m_ge + m)])
        x[n:art0] = lo_p[n:art0]
        basis = np.empty(m, dtype=np.int64)
        for i in range(m):
            if i >= m_eq and -resid[i] >= lo_p[n + i - m_eq]:
                k = n + (i - m_eq)
                basis[i] = k
                x[k] = -resid[i]
            else:
                k = art0 + i
                if i >= m_eq:
                    resid[i] += lo_p[n + i - m_eq]
                full[i, k] = 1.0 if resid[i] >= 0 else -1.0
                basis[i] = k
                x[k] = abs(resid[i])
                hi_p[k] = np.inf
        self._x = x
        self._lo, self._hi = lo_p, hi_p
        self._basis = basis
        self._is_basic = np.zeros(n_tot, dtype=bool)
        self._is_basic[basis] = True
        iters = 0
        max_iter = self._max_iter

        if np.any(x[art0:] > self.feas_tol):
            cost1 = np.zeros(n_tot)
            cost1[art0:] = 1.0
            iters += self._run(cost1, max_iter)
            art_sum = float(np.sum(self._beta[self._basis >= art0]))
            if art_sum > 1e-7:
                return LpSolution(self._values()[:n], float("nan"), INFEASIBLE, iters)
        # artificials are pinned at zero from here on
        self._hi[art0:] = 0.0
        self._x[art0:][~self._is_basic[art0:]] = 0.0
        iters += self._run(self._cost, max_iter - iters)

        # back to the true bounds, then repair primal feasibility
        nonbasic = ~self._is_basic
        upper = self._x >= 0.5 * (lo_p + np.where(np.isfinite(hi_p), hi_p, lo_p + 1.0))
        upper &= np.isfinite(hi)
        self._x[nonbasic] = np.where(upper, hi, lo)[nonbasic]
        self._lo, self._hi = lo, hi.copy()
        self._hi[art0:] = 0.0
        self._refactor(self._cost)
        done, k = self._dual_cleanup(max_iter - iters)
        iters += k
        if not done:
            return LpSolution(self._values()[:n], float("nan"), INFEASIBLE, iters)
        return self._finish(iters, warm=False)

    def _warm(self, state: BasisState) -> Optional[LpSolution]:
        n, m_ge, art0, n_tot = self._n, self._m_ge, self._art0, self._n_tot
        m = self._m_eq + m_ge
        if state.n_ineq > m_ge or state.upper.size != n:
            return None
        basis = np.concatenate([state.basic, n + np.arange(state.n_ineq, m_ge)]).astype(np.int64)
        if basis.size != m:
            return None
        lo, hi = self._lo0, self._hi0.copy()
        self._lo, self._hi = lo, hi
        x = np.zeros(n_tot)
        x[:n] = np.where(state.upper, self._ub, self._lb)
        self._x = x
        self._basis = basis
        self._is_basic = np.zeros(n_tot, dtype=bool)
        self._is_basic[basis] = True
        self._refactor(self._cost)
        # boxed nonbasic columns go to the bound their reduced cost prefers
        d = self._d
        boxed = (~self._is_basic) & np.isfinite(hi) & (hi > lo)
        x[boxed & (d < -self.opt_tol)] = hi[boxed & (d < -self.opt_tol)]
        x[boxed & (d > self.opt_tol)] = lo[boxed & (d > self.opt_tol)]
        open_up = (~self._is_basic) & ~np.isfinite(hi)
        if np.any(d[open_up] < -self.opt_tol):
            return None
        self._refactor(None, tableau=False)
        done, iters = self._dual_cleanup(self._max_iter)
        if not done:
            return LpSolution(self._values()[:n], float("nan"), INFEASIBLE, iters, warm=True)
        iters += self._run(self._cost, self._max_iter - iters, fresh=iters > self.refactor_every)
        return self._finish(iters, warm=True)

    def _finish(self, iters: int, warm: bool) -> LpSolution:
        n = self._n
        self._refactor(None, tableau=False)
        vals = self._values()
        if np.max(np.abs(self._full @ vals - self._b), initial=0.0) > 1e-7:
            raise LpError("simplex solution violates its rows")
        viol = max(np.max(self._lo - vals, initial=0.0), np.max(vals - self._hi, initial=0.0))
        if viol > 1e-7:
            raise LpError(f"simplex solution violates bounds by {viol:.3g}")
        vals = np.clip(vals[:n], self._lb, self._ub)
        basis = self._export()
        cost = np.zeros(self._n_tot)
        cost[:n] = self._c
        y = np.linalg.solve(self._full[:, self._basis].T, cost[self._basis])
        rc = self._c - y @ self._full[:, :n]
        return LpSolution(vals, float(self._c @ vals), OPTIMAL, iters, basis, warm, rc)

    def _export(self) -> Optional[BasisState]:
        """Current basis with any zero-valued artificial pivoted out, or None."""
        art0 = self._art0
        for r in np.flatnonzero(self._basis >= art0):
            row = self._t[r, :art0].copy()
            row[self._is_basic[:art0]] = 0.0
            js = np.flatnonzero(np.abs(row) > 1e-7)
            if js.size == 0 or abs(self._beta[r]) > 1e-9:
                return None
            q = int(js[np.argmax(np.abs(row[js]))])
            self._replace(int(r), q, 0.0, self._x[q], self._beta.copy())
        n = self._n
        upper = (~self._is_basic[:n]) & (self._x[:n] >= self._hi[:n] - 1e-12) & (self._hi[:n] > self._lo[:n])
        return BasisState(self._basis.copy(), upper, self._m_ge)

    # -- internals ---------------------------------------------------------

    def _refactor(self, cost, tableau: bool = True):
        full, basis = self._full, self._basis
        bmat = full[:, basis]
        nonbasic = ~self._is_basic
        rhs = self._b - full[:, nonbasic] @ self._x[nonbasic]
        try:
            if tableau:
                sol = np.linalg.solve(bmat, np.column_stack([full, rhs]))
                self._t, self._beta = sol[:, :-1], sol[:, -1]
            else:
                self._beta = np.linalg.solve(bmat, rhs)
        except np.linalg.LinAlgError as exc:
            raise LpError("singular basis") from exc
        if cost is not None:
            self._d = cost - cost[basis] @ self._t

    def _values(self):
        x = self._x.copy()
        x[self._basis] = self._beta
        return x

    def _replace(self, r: int, q: int, leaving_value: float, entering_value: float, new_beta):
        leaving = int(self._basis[r])
        self._x[leaving] = leaving_value
        new_beta[r] = entering_value
        self._beta = new_beta
        self._pivot(r, q)
        self._basis[r] = q
        self._is_basic[leaving] = False
        self._is_basic[q] = True

    def _run(self, cost, max_iter, fresh: bool = True) -> int:
        if fresh:
            self._refactor(cost)
        lo, hi = self._lo, self._hi
        tol, ptol = self.opt_tol, self.pivot_tol
        bland = False
        degenerate = 0
        since_refactor = 0
        for it in range(max_iter):
            d = self._d
            at_hi = (~self._is_basic) & (self._x >= hi - 1e-12) & (hi > lo)
            at_lo = (~self._is_basic) & (~at_hi) & (hi > lo)
            gain = np.where(at_lo & (d < -tol), -d, 0.0)
            gain = np.where(at_hi & (d > tol), d, gain)
            cand = np.flatnonzero(gain > 0)
            if cand.size == 0:
                return it
            q = int(cand[0]) if bland else int(cand[np.argmax(gain[cand])])
            delta = 1.0 if at_lo[q] else -1.0
            da = delta * self._t[:, q]
            beta = self._beta
            lo_b, hi_b = lo[self._basis], hi[self._basis]
            ratios = np.full(da.size, np.inf)
            dec = da > ptol
            inc = da < -ptol
            ratios[dec] = (beta[dec] - lo_b[dec]) / da[dec]
            with np.errstate(invalid="ignore"):
                ratios[inc] = (hi_b[inc] - beta[inc]) / (-da[inc])
            ratios = np.maximum(ratios, 0.0)
            t_row = float(np.min(ratios)) if ratios.size else np.inf
            t_flip = hi[q] - lo[q]
            if not np.isfinite(t_row) and not np.isfinite(t_flip):
                raise LpError("unbounded relaxation")
            if t_flip <= t_row:
                self._beta = beta - t_flip * da
                self._x[q] = hi[q] if delta > 0 else lo[q]
                degenerate = 0
                bland = False
                continue
            ties = np.flatnonzero(ratios <= t_row + 1e-12)
            if bland:
                r = int(ties[np.argmin(self._basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(da[ties]))])
            leaving = int(self._basis[r])
            bound = lo[leaving] if da[r] > 0 else hi[leaving]
            self._replace(r, q, bound, self._x[q] + delta * t_row, beta - t_row * da)
            if t_row < 1e-12:
                degenerate += 1
                if degenerate > self.degenerate_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                self._refactor(cost)
                since_refactor = 0
        raise LpError(f"simplex iteration limit {max_iter} reached")

    def _dual_cleanup(self, max_iter) -> tuple[bool, int]:
        """Dual simplex pivots until the basic values respect their bounds.

        Returns ``(False, k)`` when a violated row admits no entering column,
        which proves the relaxation infeasible.
        """
        lo, hi = self._lo, self._hi
        ptol = self.pivot_tol
        for it in range(max_iter):
            beta = self._beta
            lo_b, hi_b = lo[self._basis], hi[self._basis]
            viol = np.maximum(lo_b - beta, beta - hi_b)
            r = int(np.argmax(viol)) if viol.size else 0
            if not viol.size or viol[r] <= self.feas_tol:
                return True, it
            raise_row = beta[r] < lo_b[r]
            target = lo_b[r] if raise_row else hi_b[r]
            row = self._t[r]
            movable = (~self._is_basic) & (hi > lo)
            at_hi = movable & (self._x >= hi - 1e-12)
            at_lo = movable & ~at_hi
            # moving column j by delta_j changes beta_r by -row_j * delta_j
            sgn = 1.0 if raise_row else -1.0
            ok = (at_lo & (sgn * row < -ptol)) | (at_hi & (sgn * row > ptol))
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return False, it
            ratio = np.abs(self._d[cand]) / np.abs(row[cand])
            best = float(np.min(ratio))
            ties = cand[ratio <= best + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            delta = 1.0 if at_lo[q] else -1.0
            t = (beta[r] - target) / (row[q] * delta)
            self._replace(r, q, target, self._x[q] + delta * t, beta - t * delta * self._t[:, q])
        raise LpError(f"dual cleanup iteration limit {max_iter} reached")

    def _pivot(self, r: int, q: int):
        t = self._t
        prow = t[r] / t[r, q]
        col = t[:, q].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size * 2 < col.size:
            t[rows] -= col[rows, None] * prow
        else:
            t -= np.outer(col, prow)
        t[r] = prow
        self._d = self._d - self._d[q] * prow


class HighsEngine:
    """:func:`scipy.optimize.linprog` with the HiGHS backend."""

    def solve(self, c, a_eq, b_eq, a_ge, b_ge, lb, ub, x0=None, basis=None) -> LpSolution:
        from scipy.optimize import linprog

        c = np.asarray(c, dtype=float)
        a_ge = np.asarray(a_ge, dtype=float).reshape(-1, c.size)
        res = linprog(-c, A_ub=-a_ge if a_ge.size else None, b_ub=-np.asarray(b_ge) if a_ge.size else None,
                      A_eq=a_eq, b_eq=b_eq, bounds=np.column_stack([lb, ub]), method="highs")
        if res.status == 2:
            return LpSolution(np.zeros(c.size), float("nan"), INFEASIBLE, int(res.nit))
        if res.status != 0:
            raise LpError(f"HiGHS failed: {res.message}")
        rc = -(res.lower.marginals + res.upper.marginals)
        return LpSolution(res.x, float(c @ res.x), OPTIMAL, int(res.nit), reduced_costs=rc)


ENGINES = {"simplex": BoundedSimplex, "highs": HighsEngine}


def make_engine(name: str = "simplex") -> LpEngine:
    try:
        return ENGINES[name]()
    except KeyError:
        raise ValueError(f"unknown LP engine {name!r}; choose from {sorted(ENGINES)}") from None


def _to_local(basis: BasisState, cols: np.ndarray, rows: np.ndarray, n: int) -> Optional[BasisState]:
    """Engine-level basis for columns ``cols`` and cut rows ``rows``; rows the
    basis has not seen get their surplus basic.  None if a dropped row was
    binding or a basic column was dropped."""
    col_pos = np.full(n, -1, dtype=np.int64)
    col_pos[cols] = np.arange(cols.size)
    row_pos = {int(r): k for k, r in enumerate(rows)}
    seen = set(basis._rows().tolist())
    local = []
    for j in basis.basic.tolist():
        if j < n:
            if col_pos[j] < 0:
                return None
            local.append(int(col_pos[j]))
        elif j - n in row_pos:
            local.append(cols.size + row_pos[j - n])
    local.extend(cols.size + k for k, r in enumerate(rows.tolist()) if r not in seen)
    if len(local) != len(basis.basic) - basis.n_ineq + rows.size:
        return None
    return BasisState(np.array(local, dtype=np.int64), basis.upper[cols], rows.size)


def _to_global(basis: BasisState, cols: np.ndarray, rows: np.ndarray, n: int) -> BasisState:
    b = basis.basic
    k = cols.size
    glob = np.empty_like(b)
    struct = b < k
    glob[struct] = cols[b[struct]]
    glob[~struct] = n + rows[b[~struct] - k]
    upper = np.zeros(n, dtype=bool)
    upper[cols] = basis.upper
    return BasisState(glob, upper, rows.size, rows.copy())


def solve_lp(model, lb=None, ub=None, engine: Optional[LpEngine] = None, x0=None,
             basis: Optional[BasisState] = None, rows=None) -> LpSolution:
    """Relaxation of ``model`` (partition rows plus the cut rows ``rows``, all
    stored cuts by default) under bounds.

    Columns fixed at zero are dropped before the engine sees the problem,
    except those basic in ``basis``; bases are stored in model coordinates.
    """
    engine = engine or BoundedSimplex()
    n = model.n_vars
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.ones(n) if ub is None else np.asarray(ub, dtype=float)
    rows = np.arange(len(model.cuts)) if rows is None else np.asarray(rows, dtype=np.int64)
    keep = ub > 0
    if basis is not None:
        keep[basis.basic[basis.basic < n]] = True
    cols = np.flatnonzero(keep)
    local = None if basis is None else _to_local(basis, cols, rows, n)
    a_ge = model.cut_matrix()[rows][:, cols]
    sol = engine.solve(model.objective[cols], model.partition_matrix()[:, cols], np.ones(model.n_nodes),
                       a_ge, model.cut_rhs()[rows], lb[cols], ub[cols],
                       None if x0 is None else np.asarray(x0)[cols], local)
    values = np.zeros(n)
    values[cols] = sol.values
    rc = None
    if sol.reduced_costs is not None:
        rc = np.zeros(n)
        rc[cols] = sol.reduced_costs
    glob = None if sol.basis is None else _to_global(sol.basis, cols, rows, n)
    return LpSolution(values, sol.objective, sol.status, sol.iterations, glob, sol.warm, rc)
