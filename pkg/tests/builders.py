"""Random instance generators shared across test modules."""
import numpy as np

from cibgames.model import (
    GameDefinition,
    OneSidedGame,
    StageSpaces,
    StructuredDynamics,
    StructuredStage,
)


def random_stochastic(rng, shape):
    """Random tensor whose last axis is a distribution."""
    a = rng.gamma(1.0, size=shape)
    return a / a.sum(axis=-1, keepdims=True)


def random_one_sided(rng, n_x=2, n_u1=2, n_u2=2, n_y2=2, horizon=2,
                     cost_scale=1.0):
    return OneSidedGame(
        horizon=horizon,
        transition=tuple(random_stochastic(rng, (n_x, n_u1, n_u2, n_x))
                         for _ in range(horizon)),
        observation=tuple(random_stochastic(rng, (n_x, n_u1, n_u2, n_y2))
                          for _ in range(horizon)),
        cost=tuple(cost_scale * rng.normal(size=(n_x, n_u1, n_u2))
                   for _ in range(horizon)),
        initial=random_stochastic(rng, (n_x,)),
    )


def random_structured(rng, n_x=2, n_p1=2, n_p2=2, n_u1=2, n_u2=2,
                      n_y1=2, n_y2=2, n_z=3, horizon=2):
    stages = []
    for _ in range(horizon):
        stages.append(StructuredStage(
            transition=random_stochastic(rng, (n_x, n_u1, n_u2, n_x)),
            observation1=random_stochastic(rng, (n_x, n_u1, n_u2, n_y1)),
            observation2=random_stochastic(rng, (n_x, n_u1, n_u2, n_y2)),
            xi1=rng.integers(0, n_p1, size=(n_p1, n_u1, n_y1)),
            xi2=rng.integers(0, n_p2, size=(n_p2, n_u2, n_y2)),
            zeta=rng.integers(0, n_z, size=(n_p1, n_p2, n_u1, n_u2,
                                            n_y1, n_y2)),
            n_p1_next=n_p1, n_p2_next=n_p2, n_z=n_z,
        ))
    init = rng.gamma(1.0, size=(n_x, n_p1, n_p2))
    init /= init.sum()
    return StructuredDynamics(horizon=horizon, stages=tuple(stages),
                              initial=init)


def random_perfect_recall_game(rng, n_x=2, n_u1=2, n_u2=2, n_y1=2, n_y2=2,
                               n_z=2, horizon=2, cost_scale=1.0):
    """Random two-sided-private-info game whose tree realization has perfect
    recall: each player's private info accumulates its own action and
    observation, and the common increment is a function of (y1, y2)."""
    from cibgames.model import assemble_kernel
    stages = []
    n_p1, n_p2 = 1, 1
    for _ in range(horizon):
        xi1 = np.zeros((n_p1, n_u1, n_y1), dtype=int)
        for p in range(n_p1):
            for u in range(n_u1):
                xi1[p, u, :] = (p * n_u1 + u) * n_y1 + np.arange(n_y1)
        xi2 = np.zeros((n_p2, n_u2, n_y2), dtype=int)
        for p in range(n_p2):
            for u in range(n_u2):
                xi2[p, u, :] = (p * n_u2 + u) * n_y2 + np.arange(n_y2)
        zmap = rng.integers(0, n_z, size=(n_y1, n_y2))
        zeta = np.broadcast_to(
            zmap[None, None, None, None, :, :],
            (n_p1, n_p2, n_u1, n_u2, n_y1, n_y2)).copy()
        stages.append(StructuredStage(
            transition=random_stochastic(rng, (n_x, n_u1, n_u2, n_x)),
            observation1=random_stochastic(rng, (n_x, n_u1, n_u2, n_y1)),
            observation2=random_stochastic(rng, (n_x, n_u1, n_u2, n_y2)),
            xi1=xi1, xi2=xi2, zeta=zeta,
            n_p1_next=n_p1 * n_u1 * n_y1, n_p2_next=n_p2 * n_u2 * n_y2,
            n_z=n_z))
        n_p1 *= n_u1 * n_y1
        n_p2 *= n_u2 * n_y2
    init = np.zeros((n_x, 1, 1))
    init[:, 0, 0] = random_stochastic(rng, (n_x,))
    g = assemble_kernel(StructuredDynamics(horizon, tuple(stages), init))
    g.cost = tuple(cost_scale * rng.normal(size=(n_x, n_u1, n_u2))
                   for _ in range(horizon))
    return g


def random_game(rng, n_x=2, n_p1=2, n_p2=2, n_u1=2, n_u2=2, n_z=3,
                horizon=2, cost_scale=1.0):
    """Random dense GameDefinition with time-homogeneous space sizes."""
    spaces = tuple(StageSpaces(n_x, n_p1, n_p2, n_u1, n_u2, n_z)
                   for _ in range(horizon))
    kernel = tuple(
        random_stochastic(
            rng, (n_x, n_p1, n_p2, n_u1, n_u2, n_x * n_p1 * n_p2 * n_z)
        ).reshape(n_x, n_p1, n_p2, n_u1, n_u2, n_x, n_p1, n_p2, n_z)
        for _ in range(horizon))
    cost = tuple(cost_scale * rng.normal(size=(n_x, n_u1, n_u2))
                 for _ in range(horizon))
    init = rng.gamma(1.0, size=(n_x, n_p1, n_p2))
    init /= init.sum()
    return GameDefinition(horizon=horizon, spaces=spaces, kernel=kernel,
                          cost=cost, initial=init)


def revelation_game(n_x=2):
    """Static-state T=2 one-sided game: player 2 observes player 1's first
    action before guessing the state.  Value 0.5 at the uniform prior (the
    informed player hides by acting independently of the state)."""
    eye = np.eye(n_x)
    static = np.broadcast_to(eye[:, None, None, :],
                             (n_x, n_x, n_x, n_x)).copy()
    reveal = np.zeros((n_x, n_x, n_x, n_x))
    for u1 in range(n_x):
        reveal[:, u1, :, u1] = 1.0
    uninformative = np.full((n_x, n_x, n_x, n_x), 1.0 / n_x)
    guess_cost = np.zeros((n_x, n_x, n_x))
    for x in range(n_x):
        guess_cost[x, :, x] = 1.0
    return OneSidedGame(
        horizon=2,
        transition=(static, static),
        observation=(reveal, uninformative),
        cost=(np.zeros((n_x, n_x, n_x)), guess_cost),
        initial=np.full(n_x, 1.0 / n_x),
    )
