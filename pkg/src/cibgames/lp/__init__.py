"""Dense linear-programming kernel.

Two-phase primal simplex with Bland's anti-cycling rule, used by the stage
backups, matrix games, and the sequence-form oracle.  The pivot loop has a
compiled (Cython) implementation and a pure-numpy fallback with identical
arithmetic; the compiled one is picked at import unless CIBGAMES_PURE=1.
"""
import math
import os
from dataclasses import dataclass, field

import numpy as np

if os.environ.get("CIBGAMES_PURE") == "1":
    from . import _pivot_py as _pivot
else:
    try:
        from . import _pivot_c as _pivot
    except ImportError:
        from . import _pivot_py as _pivot

KERNEL = _pivot.KERNEL

# Entering tolerance 1e-9, pivot tolerance 1e-10 (kept deliberately tight;
# all consumers are small dense problems).
ENTER_TOL = 1e-9
PIVOT_TOL = 1e-10
FEAS_TOL = 1e-7

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_MAX_ITER_CAP = 1_000_000
# pivots between tableau refactorizations
_REFACTOR_EVERY = 500


class LpError(Exception):
    """Raised when an LP cannot be solved to a usable status."""


@dataclass(frozen=True)
class LinearProgram:
    """max objective @ v  s.t.  a_ub @ v <= b_ub,  a_eq @ v = b_eq.

    nonneg[j] marks variable j as v_j >= 0; False means free.
    """

    objective: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    nonneg: np.ndarray

    def __post_init__(self):
        n = self.objective.shape[0]
        if self.a_ub.shape != (self.b_ub.shape[0], n):
            raise ValueError("inequality block dimensions inconsistent")
        if self.a_eq.shape != (self.b_eq.shape[0], n):
            raise ValueError("equality block dimensions inconsistent")
        if self.nonneg.shape != (n,):
            raise ValueError("bound kinds inconsistent with variable count")
        for arr in (self.objective, self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("non-finite entry in linear program")

    @property
    def n_vars(self):
        return self.objective.shape[0]


def make_lp(objective, a_ub=None, b_ub=None, a_eq=None, b_eq=None, nonneg=True):
    """Convenience constructor accepting lists and a scalar bound kind."""
    c = np.asarray(objective, dtype=float)
    n = c.shape[0]
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if isinstance(nonneg, bool):
        nonneg = np.full(n, nonneg)
    else:
        nonneg = np.asarray(nonneg, dtype=bool)
    return LinearProgram(c, a_ub.reshape(-1, n), b_ub, a_eq.reshape(-1, n),
                         b_eq, nonneg)


@dataclass
class LpSolution:
    """Primal/dual certificate pair for a solved LinearProgram.

    dual holds one multiplier per row, inequality rows first; signs follow
    the convention max c.v s.t. Av <= b  <->  min b.y s.t. A'y >= c, y >= 0.
    """

    status: str
    value: float = math.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    def certificates(self, lp):
        """Residuals backing the optimality claim (all ~0 when optimal)."""
        slack = lp.b_ub - lp.a_ub @ self.x
        eq_res = lp.a_eq @ self.x - lp.b_eq
        m1 = lp.b_ub.shape[0]
        y_ub, y_eq = self.dual[:m1], self.dual[m1:]
        dual_value = float(y_ub @ lp.b_ub + y_eq @ lp.b_eq)
        reduced = lp.objective - lp.a_ub.T @ y_ub - lp.a_eq.T @ y_eq
        dual_feas = np.where(lp.nonneg, np.maximum(reduced, 0.0), np.abs(reduced))
        return {
            "primal_feasibility": float(
                max(
                    np.max(-slack, initial=0.0),
                    np.max(np.abs(eq_res), initial=0.0),
                    np.max(np.where(lp.nonneg, -self.x, 0.0), initial=0.0),
                )
            ),
            "dual_feasibility": float(
                max(np.max(dual_feas, initial=0.0),
                    np.max(-y_ub, initial=0.0))
            ),
            "duality_gap": abs(dual_value - self.value),
            "complementary_slackness": float(
                max(
                    np.max(np.abs(y_ub * slack), initial=0.0),
                    np.max(np.abs(self.x * reduced), initial=0.0),
                )
            ),
        }


def _expand_columns(lp):
    """Split free variables into positive/negative parts.

    Returns (columns matrix stack helper, recovery list of (var, sign)).
    """
    col_map = []
    for j in range(lp.n_vars):
        col_map.append((j, 1.0))
        if not lp.nonneg[j]:
            col_map.append((j, -1.0))
    return col_map


def solve_lp(lp, debug=False):
    """Solve a dense LP; returns an LpSolution with primal/dual certificates."""
    m1 = lp.b_ub.shape[0]
    m2 = lp.b_eq.shape[0]
    m = m1 + m2
    col_map = _expand_columns(lp)
    ns = len(col_map)

    a_rows = np.vstack([lp.a_ub, lp.a_eq]) if m else np.zeros((0, lp.n_vars))
    body = np.empty((m, ns))
    for k, (j, s) in enumerate(col_map):
        body[:, k] = s * a_rows[:, j]
    slack = np.vstack([np.eye(m1), np.zeros((m2, m1))]) if m else np.zeros((0, m1))
    d = np.concatenate([lp.b_ub, lp.b_eq])

    sign = np.where(d < 0.0, -1.0, 1.0)
    body *= sign[:, None]
    slack *= sign[:, None]
    d = d * sign

    # artificial basis columns last; barred from entering in phase 2
    mat = np.hstack([body, slack, np.eye(m)])
    nc = mat.shape[1]
    n_art = m
    art0 = nc - n_art

    tab = np.zeros((m + 1, nc + 1))
    tab[:m, :nc] = mat
    tab[:m, nc] = d
    basis = np.arange(art0, nc, dtype=np.int64)

    try:
        max_iter = min(math.comb(nc + 1, m + 1), _MAX_ITER_CAP)
    except (ValueError, OverflowError):
        max_iter = _MAX_ITER_CAP

    allowed = np.ones(nc, dtype=np.uint8)

    def repair_basis():
        # replace dependent basis columns with artificials; the artificial
        # block is the identity, so a full basis always exists
        q = np.zeros((m, 0))
        kept = []
        for i in range(m):
            colv = mat[:, basis[i]]
            res = colv - q @ (q.T @ colv)
            nrm = np.linalg.norm(res)
            if nrm > 1e-9 * max(1.0, np.linalg.norm(colv)):
                q = np.hstack([q, (res / nrm)[:, None]])
                kept.append(i)
        slots = [i for i in range(m) if i not in set(kept)]
        for i in slots:
            resid = np.eye(m) - q @ q.T
            r = int(np.argmax(np.linalg.norm(resid, axis=0)))
            colv = resid[:, r]
            q = np.hstack([q, (colv / np.linalg.norm(colv))[:, None]])
            basis[i] = art0 + r

    def refactor(phase_c):
        # rebuild the tableau exactly from the current basis, discarding
        # roundoff accumulated by the pivot updates
        rhs = np.hstack([mat, d[:, None]])
        try:
            tab[:m] = np.linalg.solve(mat[:, basis], rhs)
        except np.linalg.LinAlgError:
            repair_basis()
            try:
                tab[:m] = np.linalg.solve(mat[:, basis], rhs)
            except np.linalg.LinAlgError:
                raise LpError("singular basis during simplex refactorization")
        cb = phase_c[basis]
        tab[m, :nc] = phase_c - cb @ tab[:m, :nc]
        tab[m, nc] = -(cb @ tab[:m, nc])

    def verified(status, phase_c):
        # re-check the pivot loop's verdict on a freshly factorized tableau
        refactor(phase_c)
        obj = tab[m, :nc]
        enter = -1
        for j in range(nc):
            if allowed[j] and obj[j] > ENTER_TOL:
                enter = j
                break
        if status == _pivot.STATUS_OPTIMAL:
            return enter < 0, _pivot.STATUS_OPTIMAL if enter < 0 else status
        if enter < 0:
            return True, _pivot.STATUS_OPTIMAL
        col = tab[:m, enter]
        if np.any(col > PIVOT_TOL):
            # the kernel will find these rows itself on the clean tableau
            return False, status
        return True, _pivot.STATUS_UNBOUNDED

    def run_phase(phase_c):
        # refactorize every chunk of pivots so elimination roundoff never
        # accumulates far enough to corrupt the ratio tests
        iters = 0
        rejected = 0
        while iters < max_iter:
            chunk = min(_REFACTOR_EVERY, max_iter - iters)
            status, it = _pivot.pivot_loop(tab, basis, allowed, ENTER_TOL,
                                           PIVOT_TOL, chunk)
            iters += it
            if status == _pivot.STATUS_ITER_LIMIT:
                refactor(phase_c)
                continue
            ok, status = verified(status, phase_c)
            if ok:
                return status, iters
            rejected += 1
            if rejected > 200:
                raise LpError(
                    "simplex failed to reach a verified terminal tableau")
        return _pivot.STATUS_ITER_LIMIT, iters

    # Phase 1: maximize -sum(artificials); basis is the identity, so the
    # reduced-cost row is just the column sums of the constraint body.
    tab[m, :art0] = tab[:m, :art0].sum(axis=0)
    tab[m, nc] = d.sum()
    allowed[art0:] = 0
    c1 = np.zeros(nc)
    c1[art0:] = -1.0
    status, it1 = run_phase(c1)
    if debug:
        print(f"[lp] phase 1: status={status} iters={it1} "
              f"residual={tab[m, nc]:.3e}")
    if status == _pivot.STATUS_ITER_LIMIT:
        return LpSolution(ITERATION_LIMIT, iterations=it1)
    if status == _pivot.STATUS_UNBOUNDED:
        # the phase-1 objective is bounded above by zero, so an unbounded
        # ray here can only mean the tableau lost numerical meaning
        raise LpError("numerical breakdown in simplex phase 1")
    if tab[m, nc] > FEAS_TOL:
        return LpSolution(INFEASIBLE, iterations=it1)

    # Drive artificials out of the basis: a basic artificial at level zero
    # would otherwise be free to grow during phase 2.  Rows with no real
    # coefficient left are redundant constraints and stay inert.
    for i in range(m):
        if basis[i] >= art0:
            row_abs = np.abs(tab[i, :art0])
            cand = np.nonzero(row_abs > 1e-7 * max(1.0, row_abs.max()))[0]
            if cand.size == 0:
                continue
            j = int(cand[0])
            tab[i] = tab[i] / tab[i, j]
            factors = tab[:, j].copy()
            factors[i] = 0.0
            tab -= np.outer(factors, tab[i])
            basis[i] = j

    # Phase 2: restore the real objective and re-reduce over the basis.
    c2 = np.zeros(nc + 1)
    for k, (j, s) in enumerate(col_map):
        c2[k] = s * lp.objective[j]
    tab[m] = c2
    for i in range(m):
        coef = tab[m, basis[i]]
        if coef != 0.0:
            tab[m] -= coef * tab[i]
    status, it2 = run_phase(c2[:nc])
    iters = it1 + it2
    if debug:
        print(f"[lp] phase 2: status={status} iters={it2} "
              f"value={-tab[m, nc]:.12g}")
    if status == _pivot.STATUS_ITER_LIMIT:
        return LpSolution(ITERATION_LIMIT, iterations=iters)
    if status == _pivot.STATUS_UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=iters)

    for i in range(m):
        # a basic artificial may survive basis repair, but only at level zero
        if basis[i] >= art0 and abs(tab[i, nc]) > FEAS_TOL:
            raise LpError("artificial variable basic at a nonzero level")

    x = np.zeros(lp.n_vars)
    for i in range(m):
        b = basis[i]
        if b < ns:
            j, s = col_map[b]
            x[j] += s * tab[i, nc]
    # dual multipliers sit (negated) under the artificial columns
    dual = -sign * tab[m, art0:nc]
    value = float(lp.objective @ x)
    return LpSolution(OPTIMAL, value=value, x=x, dual=dual, iterations=iters)


def solve_matrix_game(matrix, debug=False):
    """Value and optimal mixed strategies of min_p max_q p'Mq.

    The row player minimizes.  Returns (value, row_strategy, col_strategy).
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("matrix game requires a nonempty 2-d matrix")
    m, n = M.shape

    # row player: min v s.t. (M' p)_j <= v, p on the simplex
    c = np.zeros(m + 1)
    c[m] = -1.0
    a_ub = np.hstack([M.T, -np.ones((n, 1))])
    a_eq = np.ones((1, m + 1))
    a_eq[0, m] = 0.0
    nonneg = np.ones(m + 1, dtype=bool)
    nonneg[m] = False
    row = solve_lp(LinearProgram(c, a_ub, np.zeros(n), a_eq, np.ones(1),
                                 nonneg), debug=debug)
    if row.status != OPTIMAL:
        raise LpError(f"matrix game row LP ended with status {row.status}")

    # column player: max u s.t. u <= (M q)_i, q on the simplex
    c = np.zeros(n + 1)
    c[n] = 1.0
    a_ub = np.hstack([-M, np.ones((m, 1))])
    a_eq = np.ones((1, n + 1))
    a_eq[0, n] = 0.0
    nonneg = np.ones(n + 1, dtype=bool)
    nonneg[n] = False
    col = solve_lp(LinearProgram(c, a_ub, np.zeros(m), a_eq, np.ones(1),
                                 nonneg), debug=debug)
    if col.status != OPTIMAL:
        raise LpError(f"matrix game column LP ended with status {col.status}")

    p = _clean_simplex(row.x[:m])
    q = _clean_simplex(col.x[:n])
    return float(row.x[m]), p, q


def _clean_simplex(v):
    v = np.maximum(v, 0.0)
    return v / v.sum()
