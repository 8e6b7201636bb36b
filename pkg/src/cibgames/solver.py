"""Backward-induction solvers over the common-information belief.

Three entry points: a point-based solver for one-sided-information games
whose supporting vectors make every backed-up belief a certified lower
bound, a grid estimator bracketing the value of general games between
min-max and max-min stage solutions with interpolated continuation, and a
regression solver that compresses each stage's value into a fixed number
of supporting vectors.
"""
from dataclasses import dataclass

import numpy as np

from .belief import Belief
from .lp import LpError
from .stage import (
    AlphaSet,
    AlphaVector,
    general_stage_bounds,
    general_stage_game_T,
    one_sided_backup_maximin,
    one_sided_backup_minmax,
    pwlc_eval,
)

REACHABLE_CAP = 10_000
CELL_CAP = 200_000


@dataclass(frozen=True)
class OneSidedValueFunction:
    """Per-stage supporting-vector sets of a solved one-sided game.

    alpha_sets[t] holds the stage-t value lower bound for t = 0..horizon;
    the terminal set is exactly the zero vector.  samples[t] records the
    beliefs whose backups produced the stage-t vectors.
    """
    game: object
    alpha_sets: tuple
    samples: tuple

    def __post_init__(self):
        T = self.game.horizon
        if len(self.alpha_sets) != T + 1:
            raise ValueError("need one alpha set per stage plus terminal")
        term = self.alpha_sets[T]
        if len(term.vectors) != 1 or np.any(term.vectors[0].vec != 0.0):
            raise ValueError("terminal alpha set must be exactly {0}")

    def value_at(self, pi: Belief) -> float:
        return pwlc_eval(self.alpha_sets[pi.t], pi)


def _terminal_set(g):
    n_x = g.initial.shape[0]
    return AlphaSet(g.horizon, (AlphaVector(g.horizon, np.zeros(n_x)),))


def _backward_pass(g, sample_sets):
    """Back up every sampled belief per stage; collect distinct nu vectors."""
    T = g.horizon
    sets = [None] * (T + 1)
    sets[T] = _terminal_set(g)
    for t in reversed(range(T)):
        seen = set()
        vecs = []
        for p in sample_sets[t]:
            try:
                sol = one_sided_backup_maximin(Belief(t, p), sets[t + 1], g, t)
            except LpError as e:
                raise LpError(f"stage {t}, belief {p}: {e}") from e
            key = sol.nu.tobytes()
            if key not in seen:
                seen.add(key)
                vecs.append(AlphaVector(t, sol.nu))
        sets[t] = AlphaSet(t, tuple(vecs))
    return sets


def _forward_reachable(g, alpha_sets, cap=REACHABLE_CAP):
    """Beliefs reachable from the initial one under backed-up prescriptions.

    Stage-t prescriptions come from maximin backups against alpha_sets;
    zero-probability observations are dropped rather than renormalized.
    """
    T = g.horizon
    out = [[np.asarray(g.initial, dtype=float)]]
    for t in range(T - 1):
        trans = g.transition[t]
        obs = g.observation[t]
        n_u2, n_y2 = trans.shape[2], obs.shape[3]
        nxt = {}
        for p in out[t]:
            sol = one_sided_backup_maximin(Belief(t, p), alpha_sets[t + 1],
                                           g, t)
            for y2 in range(n_y2):
                for u2 in range(n_u2):
                    q = np.einsum("a,ab,abc,cb->c", p, sol.gamma1.gamma,
                                  trans[:, :, u2, :], obs[:, :, u2, y2])
                    mass = q.sum()
                    if mass > 1e-12:
                        b = q / mass
                        nxt.setdefault(b.tobytes(), b)
            if len(nxt) > cap:
                raise ValueError(f"reachable belief set at stage {t + 1} "
                                 f"exceeds cap {cap}")
        out.append(list(nxt.values()))
    return out


def _dedupe_rows(rows):
    seen = set()
    out = []
    for r in rows:
        key = r.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(r)
    return np.array(out)


def solve_one_sided(g, samples_per_stage=200, seed=0):
    """Point-based backward solve of a one-sided-information game.

    Per stage the belief sample set is the simplex vertices, the beliefs
    forward-reachable from the initial one under a coarse preliminary
    pass, and samples_per_stage uniform draws.  Every collected vector
    supports the true value from below, so the returned value (the
    piecewise-linear maximum at the initial belief) is a certified lower
    bound.  Fixed seed gives bit-identical results.
    """
    T = g.horizon
    n_x = g.initial.shape[0]
    vertices = np.eye(n_x)
    boot = _backward_pass(g, [vertices] * T)
    reach = _forward_reachable(g, boot)
    sample_sets = []
    for t in range(T):
        rng = np.random.default_rng([seed, t])
        rand = rng.dirichlet(np.ones(n_x), size=samples_per_stage)
        sample_sets.append(_dedupe_rows(np.vstack(
            [vertices, np.array(reach[t]).reshape(-1, n_x), rand])))
    alpha = _backward_pass(g, sample_sets)
    vf = OneSidedValueFunction(game=g, alpha_sets=tuple(alpha),
                               samples=tuple(sample_sets))
    return vf, vf.value_at(Belief(0, np.asarray(g.initial, dtype=float)))


@dataclass
class GeneralValueTables:
    """Lazily filled value tables of a general game on a regular belief grid.

    tables[t] maps integer grid coordinates (numerators over belief_k, in
    row-major joint-space order) to an (upper, lower) estimate pair; only
    cells touched by interpolation queries are present.
    """
    horizon: int
    belief_k: int
    prescription_k: int
    tables: tuple
    interpolation: str = "freudenthal-barycentric"

    def n_cells(self):
        return sum(len(d) for d in self.tables)


def freudenthal_weights(p, k):
    """Barycentric coordinates of a distribution on the 1/k simplex grid.

    Returns a list of (grid numerator tuple, weight) pairs whose convex
    combination reproduces p; the grid points are the vertices of the
    containing cell of the standard simplicial subdivision, found by
    rounding in tail-sum coordinates.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    d = p.shape[0]
    assert np.all(p >= -1e-9) and abs(p.sum() - 1.0) <= 1e-9
    # tail sums are nonincreasing from k down to k*p[-1]
    x = k * np.cumsum(p[::-1])[::-1]
    v = np.floor(x + 1e-12)
    r = np.clip(x - v, 0.0, 1.0)
    v[0], r[0] = k, 0.0
    order = np.argsort(-r[1:], kind="stable") + 1
    rs = np.concatenate([r[order], [0.0]])
    weights = np.concatenate([[1.0 - (rs[0] if d > 1 else 0.0)],
                              rs[:-1] - rs[1:]])
    out = []
    vert = v.copy()
    for i in range(d):
        # sub-1e-12 weights are roundoff from the sorted differences and
        # may sit on vertices outside the simplex; drop and renormalize
        if weights[i] > 1e-12:
            comp = np.concatenate([vert[:-1] - vert[1:], vert[-1:]])
            out.append((tuple(int(c) for c in comp), float(weights[i])))
        if i < d - 1:
            vert = vert.copy()
            vert[order[i]] += 1.0
    total = sum(w for _, w in out)
    return [(c, w / total) for c, w in out]


def _cell_value(g, t, coords, tables, belief_k, prescription_k):
    cached = tables[t].get(coords)
    if cached is not None:
        return cached
    if sum(len(d) for d in tables) >= CELL_CAP:
        raise ValueError(f"value table exceeds cap {CELL_CAP} cells")
    shape = g.kernel[t].shape[:3]
    pi = Belief(t, np.array(coords, dtype=float).reshape(shape) / belief_k)
    if t == g.horizon - 1:
        v, _, _ = general_stage_game_T(pi, g, t)
        pair = (v, v)
    else:
        up = general_stage_bounds(
            pi, _interpolator(g, t + 1, tables, belief_k, prescription_k, 0),
            g, t, prescription_k)[0]
        lo = general_stage_bounds(
            pi, _interpolator(g, t + 1, tables, belief_k, prescription_k, 1),
            g, t, prescription_k)[1]
        pair = (up, lo)
    tables[t][coords] = pair
    return pair


def _interpolator(g, t, tables, belief_k, prescription_k, side):
    def f(points):
        vals = np.empty(points.shape[0])
        for i, pt in enumerate(points):
            acc = 0.0
            for coords, w in freudenthal_weights(pt, belief_k):
                acc += w * _cell_value(g, t, coords, tables, belief_k,
                                       prescription_k)[side]
            vals[i] = acc
        return vals
    return f


def solve_general_bounds(g, belief_k=25, prescription_k=10):
    """Bracket a general game's value between grid min-max and max-min.

    Continuation values are read from per-stage tables on the 1/belief_k
    simplex grid, filled lazily at the cells the interpolation touches;
    stage problems use the exact bilinear solve at the final stage and
    1/prescription_k product grids before it.  Returns the tables and the
    (upper, lower) estimate pair at the initial belief.
    """
    T = g.horizon
    tables = tuple({} for _ in range(T))
    pi0 = Belief(0, np.asarray(g.initial, dtype=float))
    if T == 1:
        v, _, _ = general_stage_game_T(pi0, g, 0)
        upper = lower = v
    else:
        upper = general_stage_bounds(
            pi0, _interpolator(g, 1, tables, belief_k, prescription_k, 0),
            g, 0, prescription_k)[0]
        lower = general_stage_bounds(
            pi0, _interpolator(g, 1, tables, belief_k, prescription_k, 1),
            g, 0, prescription_k)[1]
    vt = GeneralValueTables(horizon=T, belief_k=belief_k,
                            prescription_k=prescription_k, tables=tables)
    return vt, (float(upper), float(lower))


class RegressionDivergence(RuntimeError):
    """Raised when the regression loss rises for 10 consecutive epochs."""

    def __init__(self, stage, history):
        super().__init__(f"regression diverged at stage {stage}: "
                         f"last losses {[f'{h:.3e}' for h in history[-10:]]}")
        self.stage = stage
        self.history = history


def _fit_max_linear(points, targets, pieces, rng, epochs, lr, restarts=5):
    """Fit targets with max over `pieces` linear functions of the points.

    Runs _descend from several noise initializations (the landscape has
    assignment-induced local minima) and keeps the best iterate.
    """
    best_a, best_mse = None, np.inf
    for _ in range(restarts):
        a, mse = _descend(points, targets, pieces, rng, epochs, lr)
        if mse < best_mse:
            best_a, best_mse = a, mse
        if best_mse <= 1e-9:
            break
    return best_a, best_mse


def _descend(points, targets, pieces, rng, epochs, lr):
    """One subgradient-descent run with periodic per-piece least-squares
    polish; initialized at the single least-squares plane plus noise scaled
    by its residual.  Returns (vectors, mse) at the best iterate.
    """
    n_pts = points.shape[0]
    base, *_ = np.linalg.lstsq(points, targets, rcond=None)
    resid0 = points @ base - targets
    mse0 = float(np.mean(resid0 ** 2))
    a = np.tile(base, (pieces, 1))
    a += 0.1 * np.sqrt(mse0) * rng.standard_normal(a.shape)
    best_a, best_mse = a.copy(), np.inf
    prev, rising = np.inf, 0
    history = []
    step = lr
    for ep in range(epochs):
        scores = a @ points.T
        assign = np.argmax(scores, axis=0)
        resid = scores[assign, np.arange(n_pts)] - targets
        mse = float(np.mean(resid ** 2))
        history.append(mse)
        if mse < best_mse:
            best_mse, best_a = mse, a.copy()
        if mse > prev:
            rising += 1
            if rising >= 10:
                raise RegressionDivergence(-1, history)
            step *= 0.5
        else:
            rising = 0
            step = min(step * 1.1, lr)
        prev = mse
        if ep % 25 == 24:
            # polish: refit each piece on its assigned points, and restart
            # pieces that win nowhere at the worst-fit point's residual
            worst = int(np.argmax(np.abs(resid)))
            for l in range(pieces):
                mask = assign == l
                if np.count_nonzero(mask) >= points.shape[1]:
                    a[l], *_ = np.linalg.lstsq(points[mask], targets[mask],
                                               rcond=None)
                elif not np.any(mask):
                    a[l] = a[assign[worst]] + (targets[worst]
                                               - scores[assign[worst], worst])
            continue
        grad = np.zeros_like(a)
        for l in range(pieces):
            mask = assign == l
            if np.any(mask):
                grad[l] = 2.0 * resid[mask] @ points[mask] / n_pts
        a = a - step * grad
    return best_a, best_mse


def solve_regression(g, pieces, samples=200, seed=0, epochs=2000, lr=0.5):
    """Compress each stage's value into at most `pieces` supporting vectors.

    Backs up sampled beliefs against the next stage's fitted set via the
    minimizer-side LP and fits the max-of-linear model per stage.  Returns
    (alpha sets including the terminal zero set, per-stage training MSE).
    """
    if pieces < 1:
        raise ValueError("pieces must be at least 1")
    T = g.horizon
    n_x = g.initial.shape[0]
    sets = [None] * (T + 1)
    sets[T] = _terminal_set(g)
    mses = [0.0] * T
    for t in reversed(range(T)):
        rng = np.random.default_rng([seed, t])
        points = np.vstack([np.eye(n_x),
                            rng.dirichlet(np.ones(n_x), size=samples)])
        targets = np.array([
            one_sided_backup_minmax(Belief(t, p), sets[t + 1], g, t)[0]
            for p in points])
        try:
            vecs, mse = _fit_max_linear(points, targets, pieces, rng,
                                        epochs, lr)
        except RegressionDivergence as e:
            raise RegressionDivergence(t, e.history) from None
        sets[t] = AlphaSet(t, tuple(AlphaVector(t, v) for v in vecs))
        mses[t] = mse
    return tuple(sets), tuple(mses)
