"""Game definitions, kernel assembly, and validation.

A finite-horizon two-player zero-sum stochastic game is stored as one joint
stage kernel per stage,

    K_t[x, p1, p2, u1, u2, x', p1', p2', z],

the conditional probability of the next state, both players' next private
information, and the common-information increment given the current state,
private informations, and both actions.  Player 1 minimizes the summed stage
costs c_t[x, u1, u2].
"""
import json
from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-12


@dataclass(frozen=True)
class StageSpaces:
    """Sizes of the per-stage finite spaces.  n_z counts the
    common-information increments emitted between this stage and the next."""
    n_x: int
    n_p1: int
    n_p2: int
    n_u1: int
    n_u2: int
    n_z: int


@dataclass
class GameDefinition:
    """Time-indexed joint kernels plus costs and the initial distribution.

    kernel[t] has shape (n_x, n_p1, n_p2, n_u1, n_u2, n_x', n_p1', n_p2',
    n_z) where the primed sizes belong to stage t+1.  cost[t] has shape
    (n_x, n_u1, n_u2).  initial is a distribution over (X_1, P1_1, P2_1).
    Immutable by convention after construction.
    """
    horizon: int
    spaces: tuple
    kernel: tuple
    cost: tuple
    initial: np.ndarray
    labels: dict = field(default_factory=dict)

    @property
    def terminal_spaces(self):
        """(n_x, n_p1, n_p2) after the final transition."""
        return tuple(self.kernel[-1].shape[5:8])


@dataclass
class StructuredStage:
    """Factored dynamics for one stage.

    transition: P[x' | x, u1, u2], shape (n_x, n_u1, n_u2, n_x').
    observation1/2: P[y_i' | x', u1, u2], shapes (n_x', n_u1, n_u2, n_y_i).
    xi1/xi2: deterministic private-info updates, integer tables with shapes
    (n_p1, n_u1, n_y1) and (n_p2, n_u2, n_y2).
    zeta: integer table (n_p1, n_p2, n_u1, n_u2, n_y1, n_y2) giving the
    common increment; it may ignore any of its arguments.
    n_p1_next / n_p2_next / n_z declare the output ranges.
    """
    transition: np.ndarray
    observation1: np.ndarray
    observation2: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    zeta: np.ndarray
    n_p1_next: int
    n_p2_next: int
    n_z: int


@dataclass
class StructuredDynamics:
    horizon: int
    stages: tuple
    initial: np.ndarray


@dataclass
class OneSidedGame:
    """Game where player 1 observes the state and player 2 sees only its own
    actions and observations.

    transition[t]: P[x' | x, u1, u2]; observation[t]: P[y2' | x', u1, u2];
    cost[t]: c_t[x, u1, u2]; initial: distribution over X_1.
    """
    horizon: int
    transition: tuple
    observation: tuple
    cost: tuple
    initial: np.ndarray
    labels: dict = field(default_factory=dict)


def assemble_kernel(sd: StructuredDynamics) -> GameDefinition:
    """Marginalize the observation noises of factored dynamics into joint
    stage kernels.  Costs are not part of StructuredDynamics; the returned
    game carries zero costs, which callers replace."""
    if sd.initial.ndim != 3:
        raise ValueError("initial must have shape (n_x, n_p1, n_p2)")
    kernels = []
    spaces = []
    n_x, n_p1, n_p2 = sd.initial.shape
    for t, st in enumerate(sd.stages):
        trans = np.asarray(st.transition, dtype=float)
        obs1 = np.asarray(st.observation1, dtype=float)
        obs2 = np.asarray(st.observation2, dtype=float)
        if trans.shape[0] != n_x:
            raise ValueError(f"stage {t}: transition rows {trans.shape[0]} != n_x {n_x}")
        _, n_u1, n_u2, n_xn = trans.shape
        if obs1.shape[:3] != (n_xn, n_u1, n_u2) or obs2.shape[:3] != (n_xn, n_u1, n_u2):
            raise ValueError(f"stage {t}: observation kernel shape mismatch")
        n_y1, n_y2 = obs1.shape[3], obs2.shape[3]
        xi1 = np.asarray(st.xi1, dtype=int)
        xi2 = np.asarray(st.xi2, dtype=int)
        zeta = np.asarray(st.zeta, dtype=int)
        if xi1.shape != (n_p1, n_u1, n_y1) or xi2.shape != (n_p2, n_u2, n_y2):
            raise ValueError(f"stage {t}: xi table shape mismatch")
        if zeta.shape != (n_p1, n_p2, n_u1, n_u2, n_y1, n_y2):
            raise ValueError(f"stage {t}: zeta table shape mismatch")
        if xi1.min(initial=0) < 0 or xi1.max(initial=0) >= st.n_p1_next:
            raise ValueError(f"stage {t}: xi1 output out of range")
        if xi2.min(initial=0) < 0 or xi2.max(initial=0) >= st.n_p2_next:
            raise ValueError(f"stage {t}: xi2 output out of range")
        if zeta.min(initial=0) < 0 or zeta.max(initial=0) >= st.n_z:
            raise ValueError(f"stage {t}: zeta output out of range")
        K = np.zeros((n_x, n_p1, n_p2, n_u1, n_u2,
                      n_xn, st.n_p1_next, st.n_p2_next, st.n_z))
        for p1 in range(n_p1):
            for p2 in range(n_p2):
                for u1 in range(n_u1):
                    for u2 in range(n_u2):
                        for y1 in range(n_y1):
                            for y2 in range(n_y2):
                                p1n = xi1[p1, u1, y1]
                                p2n = xi2[p2, u2, y2]
                                z = zeta[p1, p2, u1, u2, y1, y2]
                                K[:, p1, p2, u1, u2, :, p1n, p2n, z] += (
                                    trans[:, u1, u2, :]
                                    * obs1[:, u1, u2, y1]
                                    * obs2[:, u1, u2, y2]
                                )
        kernels.append(K)
        spaces.append(StageSpaces(n_x, n_p1, n_p2, n_u1, n_u2, st.n_z))
        n_x, n_p1, n_p2 = n_xn, st.n_p1_next, st.n_p2_next
        kernels[-1].flags.writeable = False
    costs = tuple(np.zeros((s.n_x, s.n_u1, s.n_u2)) for s in spaces)
    return GameDefinition(horizon=sd.horizon, spaces=tuple(spaces),
                          kernel=tuple(kernels), cost=costs,
                          initial=np.asarray(sd.initial, dtype=float))


def one_sided_structured(g: OneSidedGame, memory=False) -> StructuredDynamics:
    """Factored dynamics equivalent to a one-sided game: player 1 observes
    the new state directly (y1' = x'), player 2's private info is trivial,
    and the common increment enumerates (y2', u2) pairs as y2'*n_u2 + u2.

    With memory=True player 1's private info accumulates its full state and
    action history, p1' = (p1 * n_u1 + u1) * n_x' + x', instead of tracking
    only the current state.  The game value is unchanged but the tree
    realization then has perfect recall for player 1.
    """
    stages = []
    n_x0 = g.initial.shape[0]
    n_x, n_p1 = n_x0, n_x0
    for t in range(g.horizon):
        trans = np.asarray(g.transition[t], dtype=float)
        obs2 = np.asarray(g.observation[t], dtype=float)
        _, n_u1, n_u2, n_xn = trans.shape
        n_y2 = obs2.shape[3]
        obs1 = np.zeros((n_xn, n_u1, n_u2, n_xn))
        obs1[np.arange(n_xn), :, :, np.arange(n_xn)] = 1.0
        xi1 = np.zeros((n_p1, n_u1, n_xn), dtype=int)
        if memory:
            for p1 in range(n_p1):
                for u1 in range(n_u1):
                    xi1[p1, u1, :] = ((p1 * n_u1 + u1) * n_xn
                                      + np.arange(n_xn))
            n_p1_next = n_p1 * n_u1 * n_xn
        else:
            xi1[:, :, :] = np.arange(n_xn)[None, None, :]
            n_p1_next = n_xn
        xi2 = np.zeros((1, n_u2, n_y2), dtype=int)
        zeta = np.zeros((n_p1, 1, n_u1, n_u2, n_xn, n_y2), dtype=int)
        for u2 in range(n_u2):
            for y2 in range(n_y2):
                zeta[:, :, :, u2, :, y2] = y2 * n_u2 + u2
        stages.append(StructuredStage(
            transition=trans, observation1=obs1, observation2=obs2,
            xi1=xi1, xi2=xi2, zeta=zeta,
            n_p1_next=n_p1_next, n_p2_next=1, n_z=n_y2 * n_u2))
        n_x, n_p1 = n_xn, n_p1_next
    # private info of player 1 is the state itself
    init = np.zeros((g.initial.shape[0], g.initial.shape[0], 1))
    init[np.arange(g.initial.shape[0]), np.arange(g.initial.shape[0]), 0] = g.initial
    return StructuredDynamics(horizon=g.horizon, stages=tuple(stages),
                              initial=init)


def lower_one_sided(g: OneSidedGame) -> GameDefinition:
    """Embed a one-sided game into the joint-kernel form.  Player 1's private
    information tracks the state (the kernel ignores the incoming p1 index,
    so unreachable (x, p1) slices stay stochastic); player 2's is trivial;
    increments are z = y2'*n_u2 + u2."""
    gd = assemble_kernel(one_sided_structured(g))
    gd.cost = tuple(np.asarray(c, dtype=float) for c in g.cost)
    gd.labels = dict(g.labels)
    return gd


def lower_one_sided_memory(g: OneSidedGame) -> GameDefinition:
    """Value-equivalent lowering in which player 1 remembers its full state
    and action history; used where perfect recall of the tree realization
    matters (the extensive-form oracle)."""
    gd = assemble_kernel(one_sided_structured(g, memory=True))
    gd.cost = tuple(np.asarray(c, dtype=float) for c in g.cost)
    gd.labels = dict(g.labels)
    return gd


def validate_game(g: GameDefinition):
    """Return a list of human-readable invariant violations; empty iff the
    definition is internally consistent."""
    out = []
    if g.horizon != len(g.kernel) or g.horizon != len(g.cost):
        out.append(f"horizon {g.horizon} != kernel/cost stage counts "
                   f"{len(g.kernel)}/{len(g.cost)}")
        return out
    if len(g.spaces) != g.horizon:
        out.append(f"spaces has {len(g.spaces)} entries, expected {g.horizon}")
        return out
    for t in range(g.horizon):
        s = g.spaces[t]
        K = g.kernel[t]
        want = (s.n_x, s.n_p1, s.n_p2, s.n_u1, s.n_u2)
        if K.ndim != 9 or K.shape[:5] != want or K.shape[8] != s.n_z:
            out.append(f"kernel[{t}] shape {K.shape} inconsistent with "
                       f"spaces {want} + n_z {s.n_z}")
            continue
        if t + 1 < g.horizon:
            nxt = g.spaces[t + 1]
            if K.shape[5:8] != (nxt.n_x, nxt.n_p1, nxt.n_p2):
                out.append(f"kernel[{t}] next-stage dims {K.shape[5:8]} "
                           f"!= spaces[{t + 1}]")
        if np.any(K < 0):
            idx = np.unravel_index(int(np.argmin(K)), K.shape)
            out.append(f"kernel[{t}] negative entry {K[idx]:.3e} at {idx}")
        sums = K.sum(axis=(5, 6, 7, 8))
        bad = np.abs(sums - 1.0) > PROB_TOL
        if np.any(bad):
            idx = np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape)
            idx = tuple(int(i) for i in idx)
            out.append(f"kernel[{t}] slice (x,p1,p2,u1,u2)={idx} sums to "
                       f"{sums[idx]:.12f}")
        c = g.cost[t]
        if c.shape != (s.n_x, s.n_u1, s.n_u2):
            out.append(f"cost[{t}] shape {c.shape} != {(s.n_x, s.n_u1, s.n_u2)}")
        elif not np.all(np.isfinite(c)):
            out.append(f"cost[{t}] contains non-finite entries")
    s0 = g.spaces[0]
    if g.initial.shape != (s0.n_x, s0.n_p1, s0.n_p2):
        out.append(f"initial shape {g.initial.shape} != "
                   f"{(s0.n_x, s0.n_p1, s0.n_p2)}")
    else:
        if np.any(g.initial < 0):
            out.append("initial has negative entries")
        if abs(g.initial.sum() - 1.0) > PROB_TOL:
            out.append(f"initial sums to {g.initial.sum():.12f}")
    return out


def validate_one_sided(g: OneSidedGame):
    """Invariant check for the one-sided form before lowering."""
    out = []
    if g.horizon != len(g.transition) or g.horizon != len(g.observation) \
            or g.horizon != len(g.cost):
        out.append("stage counts inconsistent with horizon")
        return out
    n_x = g.initial.shape[0]
    for t in range(g.horizon):
        trans = g.transition[t]
        if trans.ndim != 4 or trans.shape[0] != n_x:
            out.append(f"transition[{t}] shape {trans.shape} inconsistent")
            return out
        _, n_u1, n_u2, n_xn = trans.shape
        sums = trans.sum(axis=3)
        if np.any(np.abs(sums - 1.0) > PROB_TOL) or np.any(trans < 0):
            out.append(f"transition[{t}] is not row-stochastic")
        obs = g.observation[t]
        if obs.shape[:3] != (n_xn, n_u1, n_u2):
            out.append(f"observation[{t}] shape {obs.shape} inconsistent")
            return out
        if np.any(np.abs(obs.sum(axis=3) - 1.0) > PROB_TOL) or np.any(obs < 0):
            out.append(f"observation[{t}] is not row-stochastic")
        if g.cost[t].shape != (n_x, n_u1, n_u2):
            out.append(f"cost[{t}] shape {g.cost[t].shape} inconsistent")
        n_x = n_xn
    if abs(g.initial.sum() - 1.0) > PROB_TOL or np.any(g.initial < 0):
        out.append("initial is not a distribution")
    return out


# ---------------------------------------------------------------------------
# JSON game files


def load_game(path):
    """Read a game file.  Returns a GameDefinition, or an OneSidedGame when
    the file uses the one-sided shorthand."""
    with open(path) as fh:
        doc = json.load(fh)
    return game_from_dict(doc)


def game_from_dict(doc):
    labels = doc.get("labels", {})
    horizon = int(doc["horizon"])
    if doc.get("one_sided", False):
        return OneSidedGame(
            horizon=horizon,
            transition=tuple(np.asarray(a, dtype=float)
                             for a in doc["transition"]),
            observation=tuple(np.asarray(a, dtype=float)
                              for a in doc["observation2"]),
            cost=tuple(np.asarray(a, dtype=float) for a in doc["cost"]),
            initial=np.asarray(doc["initial"], dtype=float),
            labels=labels,
        )
    initial = np.asarray(doc["initial"], dtype=float)
    stages = doc["stages"]
    if len(stages) != horizon:
        raise ValueError(f"horizon {horizon} but {len(stages)} stage entries")
    if any("structured" in st for st in stages):
        sd_stages = []
        for t, st in enumerate(stages):
            blk = st["structured"]
            sd_stages.append(StructuredStage(
                transition=np.asarray(blk["transition"], dtype=float),
                observation1=np.asarray(blk["observation1"], dtype=float),
                observation2=np.asarray(blk["observation2"], dtype=float),
                xi1=np.asarray(blk["xi1"], dtype=int),
                xi2=np.asarray(blk["xi2"], dtype=int),
                zeta=np.asarray(blk["zeta"], dtype=int),
                n_p1_next=int(blk["n_p1_next"]),
                n_p2_next=int(blk["n_p2_next"]),
                n_z=int(blk["n_z"]),
            ))
        gd = assemble_kernel(StructuredDynamics(horizon, tuple(sd_stages),
                                                initial))
        gd.cost = tuple(np.asarray(st["cost"], dtype=float) for st in stages)
        gd.labels = labels
        return gd
    spaces, kernels, costs = [], [], []
    for st in stages:
        sp = st["spaces"]
        spaces.append(StageSpaces(n_x=int(sp["x"]), n_p1=int(sp["p1"]),
                                  n_p2=int(sp["p2"]), n_u1=int(sp["u1"]),
                                  n_u2=int(sp["u2"]), n_z=int(sp["z"])))
        kernels.append(np.asarray(st["kernel"], dtype=float))
        costs.append(np.asarray(st["cost"], dtype=float))
    return GameDefinition(horizon=horizon, spaces=tuple(spaces),
                          kernel=tuple(kernels), cost=tuple(costs),
                          initial=initial, labels=labels)


def game_to_dict(g):
    if isinstance(g, OneSidedGame):
        doc = {
            "horizon": g.horizon,
            "one_sided": True,
            "transition": [a.tolist() for a in g.transition],
            "observation2": [a.tolist() for a in g.observation],
            "cost": [a.tolist() for a in g.cost],
            "initial": g.initial.tolist(),
        }
    else:
        doc = {
            "horizon": g.horizon,
            "stages": [
                {
                    "spaces": {"x": s.n_x, "p1": s.n_p1, "p2": s.n_p2,
                               "u1": s.n_u1, "u2": s.n_u2, "z": s.n_z},
                    "kernel": g.kernel[t].tolist(),
                    "cost": g.cost[t].tolist(),
                }
                for t, s in enumerate(g.spaces)
            ],
            "initial": g.initial.tolist(),
        }
    if g.labels:
        doc["labels"] = g.labels
    return doc


def save_game(g, path):
    with open(path, "w") as fh:
        json.dump(game_to_dict(g), fh)
