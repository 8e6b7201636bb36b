"""Common information beliefs and their update transformations.

The belief at stage t is a distribution over (X_t, P1_t, P2_t).  Given both
players' prescriptions and the stage kernel, the joint measure over the next
common-information increment and next (state, private infos) is trilinear in
the belief and the two prescriptions; conditioning on the realized increment
gives the next belief.  Zero-probability increments fall back to the uniform
distribution (threshold ZERO_TOL).
"""
from dataclasses import dataclass

import numpy as np

ZERO_TOL = 1e-12
MASS_TOL = 1e-12


@dataclass(frozen=True)
class Belief:
    """Dense nonnegative vector over (X_t, P1_t, P2_t) with explicit mass.

    A proper belief has mass 1.  Sub-normalized beliefs (mass < 1) appear
    only where an operation explicitly produces them.
    """
    t: int
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if np.any(d < 0):
            raise ValueError("belief entries must be nonnegative")
        if d.sum() > 1.0 + MASS_TOL:
            raise ValueError(f"belief mass {d.sum()} exceeds 1")
        object.__setattr__(self, "dist", d)

    @property
    def mass(self):
        return float(self.dist.sum())

    @property
    def proper(self):
        return abs(self.mass - 1.0) <= MASS_TOL

    def flat(self):
        """Row-major (x, p1, p2) flattening used in CLI output."""
        return self.dist.reshape(-1)


@dataclass(frozen=True)
class Prescription:
    """Row-stochastic matrix gamma[p][u] mapping a player's private
    information to a distribution over that player's actions."""
    t: int
    player: int
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2:
            raise ValueError("prescription must be a (n_p, n_u) matrix")
        if np.any(g < 0) or np.any(np.abs(g.sum(axis=1) - 1.0) > MASS_TOL):
            raise ValueError("prescription rows must be distributions")
        if self.player not in (1, 2):
            raise ValueError("player must be 1 or 2")
        object.__setattr__(self, "gamma", g)


def _check_stage(pi, g1, g2, game):
    if not (pi.t == g1.t == g2.t):
        raise ValueError(f"stage mismatch: belief t={pi.t}, "
                         f"prescriptions t={g1.t},{g2.t}")
    if not 0 <= pi.t < game.horizon:
        raise ValueError(f"stage {pi.t} outside horizon {game.horizon}")


def joint_update(pi: Belief, g1: Prescription, g2: Prescription, game):
    """Joint measure over (z, x', p1', p2') induced by a proper belief and
    both prescriptions; array with shape (n_z, n_x', n_p1', n_p2')."""
    _check_stage(pi, g1, g2, game)
    if not pi.proper:
        raise ValueError("joint_update requires a proper belief")
    K = game.kernel[pi.t]
    # K axes: x p1 p2 u1 u2 x' p1' p2' z
    joint = np.einsum("abc,bd,ce,abcdefghi->ifgh",
                      pi.dist, g1.gamma, g2.gamma, K, optimize=True)
    return joint


def marginal_z(pi, g1, g2, game):
    """Distribution of the next common-information increment."""
    return joint_update(pi, g1, g2, game).sum(axis=(1, 2, 3))


def next_belief(pi, g1, g2, z, game):
    """Proper belief at stage t+1 after observing increment z; uniform over
    the next joint space when z has probability below ZERO_TOL."""
    joint = joint_update(pi, g1, g2, game)
    slice_z = joint[z]
    mass = slice_z.sum()
    if mass > ZERO_TOL:
        return Belief(pi.t + 1, slice_z / mass)
    return Belief(pi.t + 1, np.full(slice_z.shape, 1.0 / slice_z.size))


def one_sided_next_belief(pi, g1: Prescription, z, game):
    """Belief update of the one-sided model; never reads player 2's
    prescription.

    pi is a proper Belief over X_t (dist shape (n_x,)), z indexes the
    (y2, u2) pair as y2 * n_u2 + u2, and game is an OneSidedGame.  Returns
    Q(.; x') / sum Q, with the uniform fallback below ZERO_TOL.
    """
    if pi.t != g1.t:
        raise ValueError("stage mismatch")
    trans = game.transition[pi.t]
    obs = game.observation[pi.t]
    n_u2 = trans.shape[2]
    y2, u2 = divmod(z, n_u2)
    # Q(x') = sum_{x,u1} pi(x) gamma1(x;u1) P[x'|x,u1,u2] P[y2|x',u1,u2]
    q = np.einsum("a,ab,abc,cb->c",
                  pi.dist, g1.gamma, trans[:, :, u2, :], obs[:, :, u2, y2])
    r = q.sum()
    if r > ZERO_TOL:
        return Belief(pi.t + 1, q / r)
    return Belief(pi.t + 1, np.full(q.shape, 1.0 / q.size))


def scale_belief(pi: Belief, alpha):
    """Sub-normalized belief alpha * pi; alpha in [0, 1], pi proper."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not pi.proper:
        raise ValueError("scale_belief requires a proper belief")
    return Belief(pi.t, alpha * pi.dist)
