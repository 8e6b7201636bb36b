"""Independent ground truth for tiny games.

A GameDefinition is unrolled into an explicit extensive-form tree: a chance
root realizes the initial (state, private infos), then each stage interleaves
a player-1 node, a player-2 node (which does not see player 1's action), and
a chance node realizing the stage kernel.  Information sets group decision
nodes by (stage, common history, own private info).  Exact values come from
the realization-plan (sequence-form) LP, solved from both players' sides and
cross-checked.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .lp import LpError

NODE_CAP = 1_000_000


@dataclass
class Node:
    kind: str                  # "chance" | "p1" | "p2" | "terminal"
    children: list = field(default_factory=list)
    probs: np.ndarray = None   # chance only, aligned with children
    infoset: tuple = None      # decision nodes only
    payoff: float = 0.0        # terminal only: accumulated cost


@dataclass
class ExtensiveForm:
    nodes: list
    root: int
    infosets1: dict            # key -> list of node ids
    infosets2: dict

    @property
    def n_nodes(self):
        return len(self.nodes)


def build_extensive_form(g, cap=NODE_CAP) -> ExtensiveForm:
    """Unroll a GameDefinition into a tree; prunes zero-probability chance
    branches and accumulates stage costs into terminal payoffs."""
    nodes = []
    infosets1, infosets2 = {}, {}

    def add(node):
        if len(nodes) >= cap:
            raise ValueError(f"tree exceeds {cap} nodes")
        nodes.append(node)
        return len(nodes) - 1

    def stage(t, x, p1, p2, c_hist, acc):
        if t == g.horizon:
            return add(Node("terminal", payoff=acc))
        key1 = (1, t, c_hist, p1)
        key2 = (2, t, c_hist, p2)
        s = g.spaces[t]
        n1 = add(Node("p1", infoset=key1))
        infosets1.setdefault(key1, []).append(n1)
        for u1 in range(s.n_u1):
            n2 = add(Node("p2", infoset=key2))
            infosets2.setdefault(key2, []).append(n2)
            nodes[n1].children.append(n2)
            for u2 in range(s.n_u2):
                slice_k = g.kernel[t][x, p1, p2, u1, u2]
                ch = add(Node("chance", probs=None))
                nodes[n2].children.append(ch)
                probs = []
                step = acc + g.cost[t][x, u1, u2]
                for (xn, p1n, p2n, z), pr in np.ndenumerate(slice_k):
                    if pr <= 0.0:
                        continue
                    child = stage(t + 1, xn, p1n, p2n, c_hist + (z,), step)
                    nodes[ch].children.append(child)
                    probs.append(pr)
                nodes[ch].probs = np.array(probs)
        return n1

    root = add(Node("chance", probs=None))
    probs = []
    for (x, p1, p2), pr in np.ndenumerate(g.initial):
        if pr <= 0.0:
            continue
        nodes[root].children.append(stage(0, x, p1, p2, (), 0.0))
        probs.append(pr)
    nodes[root].probs = np.array(probs)
    return ExtensiveForm(nodes, root, infosets1, infosets2)


def check_perfect_recall(ef: ExtensiveForm):
    """True iff each player's information sets refine that player's own
    action/observation history.  On failure returns (False, witness) where
    the witness is (infoset key, history a, history b)."""
    seen = {}
    stack = [(ef.root, (), ())]
    while stack:
        nid, h1, h2 = stack.pop()
        node = ef.nodes[nid]
        if node.kind == "terminal":
            continue
        if node.kind == "chance":
            for c in node.children:
                stack.append((c, h1, h2))
            continue
        own = h1 if node.kind == "p1" else h2
        key = node.infoset
        if key in seen:
            if seen[key] != own:
                return False, (key, seen[key], own)
        else:
            seen[key] = own
        for a, c in enumerate(node.children):
            step = own + ((key, a),)
            if node.kind == "p1":
                stack.append((c, step, h2))
            else:
                stack.append((c, h1, step))
    return True, None


def _sequence_data(ef: ExtensiveForm):
    """Sequence indexing and terminal payoff triples for the sequence-form
    LP.  Sequence 0 is the empty sequence for both players."""
    regs = [{}, {}]            # infoset key -> (infoset row, parent seq, base)
    n_seq = [1, 1]
    n_info = [0, 0]
    terminals = []

    stack = [(ef.root, 0, 0, 1.0)]
    while stack:
        nid, s1, s2, pr = stack.pop()
        node = ef.nodes[nid]
        if node.kind == "terminal":
            terminals.append((s1, s2, pr * node.payoff))
            continue
        if node.kind == "chance":
            for c, p in zip(node.children, node.probs):
                stack.append((c, s1, s2, pr * p))
            continue
        i = 0 if node.kind == "p1" else 1
        parent = s1 if i == 0 else s2
        key = node.infoset
        if key not in regs[i]:
            regs[i][key] = (n_info[i], parent, n_seq[i])
            n_info[i] += 1
            n_seq[i] += len(node.children)
        row, reg_parent, base = regs[i][key]
        if reg_parent != parent:
            raise LpError(f"imperfect recall at information set {key}")
        for a, c in enumerate(node.children):
            child_seq = base + a
            if i == 0:
                stack.append((c, child_seq, s2, pr))
            else:
                stack.append((c, s1, child_seq, pr))
    return regs, n_seq, n_info, terminals


def _solve_sequence_lp(objective, a_ub, b_ub, a_eq, b_eq, nonneg, side):
    """Maximize objective over the sequence-form polytope; the tree LPs are
    ground truth, so they go to a mature external solver rather than the
    stage-game kernel they are used to check."""
    bounds = [(0, None) if nn else (None, None) for nn in nonneg]
    res = scipy.optimize.linprog(-objective, A_ub=a_ub, b_ub=b_ub,
                                 A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                                 method="highs")
    if not res.success:
        raise LpError(f"sequence-form LP ({side}): {res.message}")
    return -res.fun, res.x


def sequence_form_value(ef: ExtensiveForm):
    """Exact value (expected total cost, player 1 minimizing) and feasible
    realization plans for both players."""
    ok, witness = check_perfect_recall(ef)
    if not ok:
        raise LpError(f"imperfect recall, witness: {witness}")
    regs, n_seq, n_info, terminals = _sequence_data(ef)
    n1, n2 = n_seq
    a_mat = np.zeros((n1, n2))
    for s1, s2, v in terminals:
        a_mat[s1, s2] += v

    def flow(i):
        mat = np.zeros((1 + n_info[i], n_seq[i]))
        mat[0, 0] = 1.0
        for key, (row, parent, base) in regs[i].items():
            mat[1 + row, parent] = -1.0
            n_act = _n_actions(ef, i, key)
            mat[1 + row, base:base + n_act] = 1.0
        rhs = np.zeros(1 + n_info[i])
        rhs[0] = 1.0
        return mat, rhs

    e_mat, e_rhs = flow(0)
    f_mat, f_rhs = flow(1)

    # minimizer side: min_{x,p} f'p s.t. A'x - F'p <= 0, Ex = e, x >= 0
    me, mf = e_mat.shape[0], f_mat.shape[0]
    obj = np.concatenate([np.zeros(n1), -f_rhs])
    a_ub = np.hstack([a_mat.T, -f_mat.T])
    a_eq = np.hstack([e_mat, np.zeros((me, mf))])
    nonneg = np.concatenate([np.ones(n1, bool), np.zeros(mf, bool)])
    v1, x1 = _solve_sequence_lp(obj, a_ub, np.zeros(n2), a_eq, e_rhs,
                                nonneg, "player 1")
    value1 = -v1
    plan1 = np.clip(x1[:n1], 0.0, None)

    # maximizer side: max_{y,q} e'q s.t. E'q - Ay <= 0, Fy = f, y >= 0
    obj = np.concatenate([np.zeros(n2), e_rhs])
    a_ub = np.hstack([-a_mat, e_mat.T])
    a_eq = np.hstack([f_mat, np.zeros((mf, me))])
    nonneg = np.concatenate([np.ones(n2, bool), np.zeros(me, bool)])
    v2, x2 = _solve_sequence_lp(obj, a_ub, np.zeros(n1), a_eq, f_rhs,
                                nonneg, "player 2")
    value2 = v2
    plan2 = np.clip(x2[:n2], 0.0, None)

    if abs(value1 - value2) > 1e-8:
        raise LpError(f"sequence-form sides disagree: {value1} vs {value2}")
    return value1, plan1, plan2


def _n_actions(ef: ExtensiveForm, i, key):
    sets = ef.infosets1 if i == 0 else ef.infosets2
    return len(ef.nodes[sets[key][0]].children)


def swap_players(g):
    """GameDefinition with the player roles exchanged and costs negated, so
    values satisfy value(g) = -value(swap_players(g))."""
    from .model import GameDefinition, StageSpaces
    spaces = tuple(StageSpaces(s.n_x, s.n_p2, s.n_p1, s.n_u2, s.n_u1, s.n_z)
                   for s in g.spaces)
    kernel = tuple(k.transpose(0, 2, 1, 4, 3, 5, 7, 6, 8) for k in g.kernel)
    cost = tuple(-c.transpose(0, 2, 1) for c in g.cost)
    initial = g.initial.transpose(0, 2, 1)
    return GameDefinition(horizon=g.horizon, spaces=spaces, kernel=kernel,
                          cost=cost, initial=initial, labels=dict(g.labels))


def realization_to_behavioral(ef: ExtensiveForm, player, plan):
    """Behavioral strategy {infoset key: action distribution} from a
    realization plan; uniform at unreached information sets."""
    regs, n_seq, _, _ = _sequence_data(ef)
    reg = regs[player - 1]
    out = {}
    for key, (row, parent, base) in reg.items():
        n_act = _n_actions(ef, player - 1, key)
        block = plan[base:base + n_act]
        mass = plan[parent]
        if mass > 1e-12:
            out[key] = block / mass
        else:
            out[key] = np.full(n_act, 1.0 / n_act)
    return out
