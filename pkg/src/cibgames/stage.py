"""Stage games of the dynamic program.

The one-sided backups operate on piecewise-linear convex value functions
stored as finite sets of supporting vectors over the state space.  Both the
maximin LP (over the maximizer's action distribution and per-observation
vector choices) and the min-max LP (over the minimizer's prescription with
epigraph variables) are provided; they agree by minimax duality.  General
games get an exact bilinear solver at the final stage and a grid estimator
before it.
"""
from dataclasses import dataclass
from itertools import product

import numpy as np

from .belief import Belief, Prescription
from .lp import LinearProgram, LpError, solve_lp, solve_matrix_game

PURE_PRESCRIPTION_CAP = 4096
GRID_PAIR_CAP = 200_000_000
_GRID_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class AlphaVector:
    """Linear support of a value function over the state space at stage t."""
    t: int
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("alpha vector entries must be finite")
        object.__setattr__(self, "vec", v)


@dataclass(frozen=True)
class AlphaSet:
    """Nonempty set of AlphaVectors; represents pi -> max_l <l, pi>."""
    t: int
    vectors: tuple

    def __post_init__(self):
        if len(self.vectors) == 0:
            raise ValueError("alpha set must be nonempty")
        if any(v.t != self.t for v in self.vectors):
            raise ValueError("alpha vectors must share the set's stage")
        object.__setattr__(self, "vectors", tuple(self.vectors))

    def matrix(self):
        return np.array([v.vec for v in self.vectors])


@dataclass
class StageSolution:
    """Saddle data of a one-sided stage backup.

    q is the maximizer's action distribution; lam[u2, y2, l] splits q(u2)
    across supporting vectors of the next stage per observation; nu is the
    supporting vector of the backed-up value at this stage.
    """
    value: float
    gamma1: Prescription
    q: np.ndarray
    lam: np.ndarray
    nu: np.ndarray


def expected_stage_cost(pi: Belief, g1: Prescription, g2: Prescription,
                        cost: np.ndarray) -> float:
    """Expected one-stage cost under a belief and both prescriptions."""
    n_x, n_p1, n_p2 = pi.dist.shape
    if (g1.gamma.shape[0] != n_p1 or g2.gamma.shape[0] != n_p2
            or cost.shape != (n_x, g1.gamma.shape[1], g2.gamma.shape[1])):
        raise ValueError("shape mismatch between belief, prescriptions, cost")
    return float(np.einsum("abc,bd,ce,ade->",
                           pi.dist, g1.gamma, g2.gamma, cost))


def pwlc_eval(a: AlphaSet, pi: Belief) -> float:
    """max_l <l, pi>; valid for sub-normalized beliefs too."""
    if a.t != pi.t:
        raise ValueError(f"stage mismatch: alpha set t={a.t}, belief t={pi.t}")
    return float(np.max(a.matrix() @ pi.dist.reshape(-1)))


def _alpha_transition(a_next: AlphaSet, g, t):
    """m[x, u1, u2, y2, l] = sum_x' l(x') P[x', y2 | x, u1, u2]."""
    trans = g.transition[t]
    obs = g.observation[t]
    al = a_next.matrix()
    # trans: (x, u1, u2, x'); obs: (x', u1, u2, y2); al: (l, x')
    return np.einsum("abcd,dbce,fd->abcef", trans, obs, al, optimize=True)


def one_sided_backup_maximin(pi: Belief, a_next: AlphaSet, g, t) -> StageSolution:
    """One-stage backup at belief pi via the compact maximizer-side LP.

    The returned nu is feasible for the same LP at every belief, so
    <nu, pi'> lower-bounds the backup value at any proper pi'.
    """
    cost = g.cost[t]
    n_x, n_u1, n_u2 = cost.shape
    n_y2 = g.observation[t].shape[3]
    n_l = len(a_next.vectors)
    m = _alpha_transition(a_next, g, t)  # (x, u1, u2, y2, l)

    # variables: q (n_u2) | lam (n_u2*n_y2*n_l) | nu (n_x, free)
    nq, nlam = n_u2, n_u2 * n_y2 * n_l
    nv = nq + nlam + n_x
    obj = np.zeros(nv)
    obj[nq + nlam:] = pi.dist

    # nu(x) - sum_u2 q(u2) c(x,u1,u2) - sum lam * m <= 0  for each (x, u1)
    a_ub = np.zeros((n_x * n_u1, nv))
    rows = a_ub.reshape(n_x, n_u1, nv)
    for x in range(n_x):
        for u1 in range(n_u1):
            rows[x, u1, :nq] = -cost[x, u1, :]
            rows[x, u1, nq:nq + nlam] = -m[x, u1].reshape(-1)
            rows[x, u1, nq + nlam + x] = 1.0
    b_ub = np.zeros(n_x * n_u1)

    # sum q = 1; sum_l lam(u2,y2,l) = q(u2) for each (u2,y2)
    a_eq = np.zeros((1 + n_u2 * n_y2, nv))
    a_eq[0, :nq] = 1.0
    b_eq = np.zeros(1 + n_u2 * n_y2)
    b_eq[0] = 1.0
    for u2 in range(n_u2):
        for y2 in range(n_y2):
            r = 1 + u2 * n_y2 + y2
            a_eq[r, u2] = -1.0
            base = nq + (u2 * n_y2 + y2) * n_l
            a_eq[r, base:base + n_l] = 1.0
    nonneg = np.ones(nv, dtype=bool)
    nonneg[nq + nlam:] = False

    sol = solve_lp(LinearProgram(obj, a_ub, b_ub, a_eq, b_eq, nonneg))
    if sol.status != "optimal":
        raise LpError(f"maximin backup LP at stage {t} returned {sol.status}")
    q = np.clip(sol.x[:nq], 0.0, None)
    q /= q.sum()
    lam = np.clip(sol.x[nq:nq + nlam], 0.0, None).reshape(n_u2, n_y2, n_l)
    nu = sol.x[nq + nlam:]
    # duals of the (x,u1) rows carry pi(x) * gamma1(x;u1)
    y = np.clip(sol.dual[:n_x * n_u1], 0.0, None).reshape(n_x, n_u1)
    gamma = np.empty((n_x, n_u1))
    for x in range(n_x):
        s = y[x].sum()
        gamma[x] = y[x] / s if s > 1e-12 else np.full(n_u1, 1.0 / n_u1)
    return StageSolution(value=float(sol.value),
                         gamma1=Prescription(t, 1, gamma),
                         q=q, lam=lam, nu=nu)


def one_sided_backup_minmax(pi: Belief, a_next: AlphaSet, g, t):
    """Minimizer-side backup: epigraph LP over the prescription polytope.

    Returns (value, gamma1*).
    """
    cost = g.cost[t]
    n_x, n_u1, n_u2 = cost.shape
    n_y2 = g.observation[t].shape[3]
    n_l = len(a_next.vectors)
    m = _alpha_transition(a_next, g, t)  # (x, u1, u2, y2, l)

    # variables: gamma (n_x*n_u1) | s (n_u2*n_y2, free) | nu (free)
    ng, ns = n_x * n_u1, n_u2 * n_y2
    nv = ng + ns + 1
    obj = np.zeros(nv)
    obj[-1] = -1.0  # maximize -nu

    n_ub = n_u2 * n_y2 * n_l + n_u2
    a_ub = np.zeros((n_ub, nv))
    b_ub = np.zeros(n_ub)
    r = 0
    # <l, Q(pi, gamma, (y2,u2))> <= s(u2, y2): coefficient on gamma(x,u1)
    # is pi(x) * m[x,u1,u2,y2,l]
    for u2 in range(n_u2):
        for y2 in range(n_y2):
            for li in range(n_l):
                a_ub[r, :ng] = (pi.dist[:, None] * m[:, :, u2, y2, li]).reshape(-1)
                a_ub[r, ng + u2 * n_y2 + y2] = -1.0
                r += 1
    # stage cost of pure u2 plus observation epigraphs <= nu
    for u2 in range(n_u2):
        a_ub[r, :ng] = (pi.dist[:, None] * cost[:, :, u2]).reshape(-1)
        a_ub[r, ng + u2 * n_y2:ng + (u2 + 1) * n_y2] = 1.0
        a_ub[r, -1] = -1.0
        r += 1

    a_eq = np.zeros((n_x, nv))
    for x in range(n_x):
        a_eq[x, x * n_u1:(x + 1) * n_u1] = 1.0
    b_eq = np.ones(n_x)
    nonneg = np.zeros(nv, dtype=bool)
    nonneg[:ng] = True

    sol = solve_lp(LinearProgram(obj, a_ub, b_ub, a_eq, b_eq, nonneg))
    if sol.status != "optimal":
        raise LpError(f"min-max backup LP at stage {t} returned {sol.status}")
    gamma = np.clip(sol.x[:ng], 0.0, None).reshape(n_x, n_u1)
    gamma /= gamma.sum(axis=1, keepdims=True)
    return float(sol.x[-1]), Prescription(t, 1, gamma)


def pure_prescriptions(n_p, n_u):
    """All deterministic maps p -> u, as (n_u**n_p, n_p, n_u) one-hot array."""
    combos = list(product(range(n_u), repeat=n_p))
    out = np.zeros((len(combos), n_p, n_u))
    for i, c in enumerate(combos):
        out[i, np.arange(n_p), c] = 1.0
    return out


def general_stage_game_T(pi: Belief, g, t):
    """Exact final-stage solve: the expected cost is bilinear in the two
    prescriptions, so mixing over deterministic prescriptions is a matrix
    game.  Returns (value, gamma1*, gamma2*) with behavioral prescriptions
    recovered from per-p marginals of the mixed strategies.
    """
    if t != g.horizon - 1:
        raise ValueError("exact stage solve applies to the final stage only")
    s = g.spaces[t]
    n1 = s.n_u1 ** s.n_p1
    n2 = s.n_u2 ** s.n_p2
    if n1 * n2 > PURE_PRESCRIPTION_CAP:
        raise ValueError(f"pure prescription count {n1}*{n2} exceeds cap "
                         f"{PURE_PRESCRIPTION_CAP}")
    d1 = pure_prescriptions(s.n_p1, s.n_u1)
    d2 = pure_prescriptions(s.n_p2, s.n_u2)
    # M[i, j] = expected cost under the i-th / j-th deterministic maps
    mat = np.einsum("abc,ibd,jce,ade->ij", pi.dist, d1, d2, g.cost[t],
                    optimize=True)
    value, p, q = solve_matrix_game(mat)
    gamma1 = np.einsum("i,ibd->bd", p, d1)
    gamma2 = np.einsum("j,jce->ce", q, d2)
    gamma1 /= gamma1.sum(axis=1, keepdims=True)
    gamma2 /= gamma2.sum(axis=1, keepdims=True)
    return value, Prescription(t, 1, gamma1), Prescription(t, 2, gamma2)


def _compositions(n, k):
    if n == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(n - 1, k - first):
            yield (first,) + rest


def simplex_grid(n, k):
    """All distributions over n points with denominator k, shape (m, n)."""
    return np.array(list(_compositions(n, k)), dtype=float) / k


def prescription_grid(n_p, n_u, k):
    """Product of per-p simplex grids: (m**n_p, n_p, n_u) array."""
    pts = simplex_grid(n_u, k)
    m = pts.shape[0]
    idx = list(product(range(m), repeat=n_p))
    out = np.empty((len(idx), n_p, n_u))
    for i, c in enumerate(idx):
        out[i] = pts[list(c)]
    return out


def general_stage_bounds(pi: Belief, next_value, g, t, k):
    """Grid estimate of the stage min-max and max-min at belief pi.

    next_value(points) maps an (N, n_x', n_p1', n_p2') batch of proper
    beliefs to (N,) continuation values; pass None at the final stage.
    Returns (minmax_estimate, maxmin_estimate) over the k-resolution product
    grids; max-min never exceeds min-max on a shared grid.
    """
    if k < 2:
        raise ValueError("grid resolution must be at least 2")
    s = g.spaces[t]
    g1s = prescription_grid(s.n_p1, s.n_u1, k)
    g2s = prescription_grid(s.n_p2, s.n_u2, k)
    m1, m2 = g1s.shape[0], g2s.shape[0]
    if m1 * m2 > GRID_PAIR_CAP:
        raise ValueError(f"prescription grid has {m1}*{m2} pairs, "
                         f"over cap {GRID_PAIR_CAP}")
    K = g.kernel[t]
    d_next = int(np.prod(K.shape[5:8]))
    n_z = K.shape[8]
    if next_value is not None:
        b = np.einsum("abc,abcdefghi->bdceifgh", pi.dist, K, optimize=True)
    # chunk the gamma1 grid so the per-chunk joint tensor stays bounded
    per_row = m2 * max(1, n_z * d_next if next_value is not None else 1)
    chunk = max(1, min(m1, _GRID_CHUNK_ENTRIES // per_row))
    minmax = np.inf
    colmin = np.full(m2, np.inf)
    for lo in range(0, m1, chunk):
        g1c = g1s[lo:lo + chunk]
        w = np.einsum("abc,ibd,jce,ade->ij", pi.dist, g1c, g2s, g.cost[t],
                      optimize=True)
        if next_value is not None:
            c1 = np.einsum("jbd,bdceifgh->jceifgh", g1c, b, optimize=True)
            joint = np.einsum("kce,jceifgh->jkifgh", g2s, c1, optimize=True)
            flat = joint.reshape(len(g1c) * m2 * n_z, -1)
            masses = flat.sum(axis=1)
            vals = np.zeros(flat.shape[0])
            live = masses > 1e-12
            if np.any(live):
                pts = flat[live] / masses[live][:, None]
                pts = pts.reshape((-1,) + joint.shape[3:])
                vals[live] = masses[live] * np.asarray(next_value(pts))
            w = w + vals.reshape(len(g1c), m2, n_z).sum(axis=2)
        minmax = min(minmax, float(np.min(np.max(w, axis=1))))
        colmin = np.minimum(colmin, w.min(axis=0))
    maxmin = float(np.max(colmin))
    return minmax, maxmin
