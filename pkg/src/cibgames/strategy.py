"""Strategy objects and constructive results around the belief solver.

Covers the informed player's equilibrium strategy (a lazy stage LP over the
common-information belief), tabular history strategies with JSON round
trips, projection of prescription-history-dependent strategies onto common
histories, exact best-response evaluation, reduction of history-dependent
strategies to (state, opponent-information) form, and Monte-Carlo play.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .belief import Belief, Prescription
from .stage import one_sided_backup_minmax

HISTORY_CAP = 100_000
BR_NODE_CAP = 1_000_000

ROW_TOL = 1e-12


def _history_key(t, z_hist, p):
    return f"t={t};z={','.join(str(int(z)) for z in z_hist)};p={int(p)}"


def _parse_key(key):
    parts = dict(item.split("=", 1) for item in key.split(";"))
    z = tuple(int(v) for v in parts["z"].split(",") if v != "")
    return int(parts["t"]), z, int(parts["p"])


@dataclass
class HistoryStrategy:
    """Tabular behavioral strategy keyed by (stage, common history, private).

    table maps (t, z_hist, p) to an action distribution; `keying` states
    what the private index p is during play: "state" for the current state,
    "memory" for the accumulated state/action history code, "trivial" for
    players without private information.
    """
    player: int
    horizon: int
    table: dict
    keying: str = "trivial"

    def __post_init__(self):
        if self.player not in (1, 2):
            raise ValueError("player must be 1 or 2")
        if self.keying not in ("state", "memory", "trivial"):
            raise ValueError(f"unknown keying {self.keying!r}")
        for key, row in self.table.items():
            row = np.asarray(row, dtype=float)
            if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_TOL:
                raise ValueError(f"row at {key} is not a distribution")
            self.table[key] = row

    def row(self, t, z_hist, p):
        try:
            return self.table[(t, tuple(z_hist), p)]
        except KeyError:
            raise KeyError(f"no action row for stage {t}, history "
                           f"{tuple(z_hist)}, private index {p}") from None

    def to_json(self):
        return json.dumps({
            "player": self.player,
            "horizon": self.horizon,
            "keying": self.keying,
            "table": {_history_key(t, z, p): list(map(float, row))
                      for (t, z, p), row in self.table.items()},
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        table = {_parse_key(k): np.asarray(v, dtype=float)
                 for k, v in doc["table"].items()}
        return cls(player=int(doc["player"]), horizon=int(doc["horizon"]),
                   table=table, keying=doc.get("keying", "trivial"))


@dataclass
class CIBStrategy:
    """The informed player's equilibrium strategy, realized lazily.

    At (t, belief) the prescription is the minimizer of the stage min-max
    LP against the stored next-stage supporting vectors; the belief is a
    sufficient statistic for the common history, so play only needs the
    belief recursion.  Queries are deterministic and cached.
    """
    vf: object
    _presc_cache: dict = field(default_factory=dict, repr=False)
    _belief_cache: dict = field(default_factory=dict, repr=False)

    @property
    def game(self):
        return self.vf.game

    @property
    def horizon(self):
        return self.vf.game.horizon

    def prescription(self, t, pi: Belief) -> Prescription:
        key = (t, pi.dist.tobytes())
        hit = self._presc_cache.get(key)
        if hit is None:
            _, hit = one_sided_backup_minmax(pi, self.vf.alpha_sets[t + 1],
                                             self.game, t)
            self._presc_cache[key] = hit
        return hit

    def action_distribution(self, t, pi: Belief, x):
        return self.prescription(t, pi).gamma[x]

    def belief(self, t, z_hist):
        """Common-information belief after the observed z sequence, under
        this strategy's own prescriptions."""
        z_hist = tuple(z_hist)
        if len(z_hist) != t:
            raise ValueError("history length must equal the stage index")
        key = (t, z_hist)
        hit = self._belief_cache.get(key)
        if hit is None:
            if t == 0:
                hit = Belief(0, np.asarray(self.game.initial, dtype=float))
            else:
                from .belief import one_sided_next_belief
                prev = self.belief(t - 1, z_hist[:-1])
                g1 = self.prescription(t - 1, prev)
                hit = one_sided_next_belief(prev, g1, z_hist[-1], self.game)
            self._belief_cache[key] = hit
        return hit

    def row(self, t, z_hist, x):
        return self.action_distribution(t, self.belief(t, z_hist), x)

    def unroll(self, cap=HISTORY_CAP):
        """Prescriptions for every common history, as a dict keyed by
        (t, z_hist)."""
        g = self.game
        out = {}
        frontier = [()]
        for t in range(g.horizon):
            n_z = g.observation[t].shape[3] * g.transition[t].shape[2]
            if len(out) + len(frontier) > cap:
                raise ValueError(f"common history count exceeds cap {cap}")
            for z_hist in frontier:
                out[(t, z_hist)] = self.prescription(t, self.belief(t, z_hist))
            frontier = [z_hist + (z,) for z_hist in frontier
                        for z in range(n_z)]
        return out


def extract_cib_strategy(vf) -> CIBStrategy:
    """Wrap a solved value function as the informed player's strategy."""
    return CIBStrategy(vf=vf)


def rho_project(chi1, chi2, g, cap=HISTORY_CAP):
    """Project prescription-history-dependent strategies onto common
    histories by forward substitution.

    chi1/chi2 are callables (t, z_hist, gamma_hist) -> prescription matrix,
    where gamma_hist is the tuple of earlier (gamma1, gamma2) pairs.  The
    result maps (t, z_hist) to a Prescription pair and depends on the
    common history alone.
    """
    out = {}
    frontier = {(): ()}
    for t in range(g.horizon):
        n_z = g.kernel[t].shape[8]
        if len(out) + len(frontier) > cap:
            raise ValueError(f"common history count exceeds cap {cap}")
        nxt = {}
        for z_hist, gamma_hist in frontier.items():
            g1 = Prescription(t, 1, np.asarray(chi1(t, z_hist, gamma_hist),
                                               dtype=float))
            g2 = Prescription(t, 2, np.asarray(chi2(t, z_hist, gamma_hist),
                                               dtype=float))
            out[(t, z_hist)] = (g1, g2)
            for z in range(n_z):
                nxt[z_hist + (z,)] = gamma_hist + ((g1.gamma, g2.gamma),)
        frontier = nxt
    return out


def _plan_prescription(plan, t, z_hist, pi):
    if isinstance(plan, CIBStrategy):
        return plan.prescription(t, pi)
    n_x = pi.dist.shape[0]
    gamma = np.array([plan.row(t, z_hist, x) for x in range(n_x)])
    return Prescription(t, 1, gamma)


def best_response_value(g, plan, node_cap=BR_NODE_CAP):
    """Exact supremum value the uninformed player can force against a
    fixed informed-player strategy, with a maximizing strategy.

    Backward recursion over (stage, common history); the informed player's
    prescription pins the belief transition, and for each candidate pure
    action the continuation splits over observations.  A pure action is
    optimal at every node because the objective is linear in the action
    distribution.  plan is a CIBStrategy or a player-1 HistoryStrategy
    keyed by the current state.
    """
    T = g.horizon
    counter = [0]
    rows = {}

    def rec(t, z_hist, pi):
        if t == T:
            return 0.0
        counter[0] += 1
        if counter[0] > node_cap:
            raise ValueError(f"best-response recursion exceeds cap {node_cap}")
        trans, obs, cost = g.transition[t], g.observation[t], g.cost[t]
        n_u2, n_y2 = trans.shape[2], obs.shape[3]
        gamma1 = _plan_prescription(plan, t, z_hist, pi)
        best, best_u2, best_rows = -np.inf, -1, None
        for u2 in range(n_u2):
            val = float(np.einsum("a,ab,ab->", pi.dist, gamma1.gamma,
                                  cost[:, :, u2]))
            sub_rows = {}
            for y2 in range(n_y2):
                q = np.einsum("a,ab,abc,cb->c", pi.dist, gamma1.gamma,
                              trans[:, :, u2, :], obs[:, :, u2, y2])
                mass = q.sum()
                if mass > 1e-12:
                    z = y2 * n_u2 + u2
                    val += mass * rec(t + 1, z_hist + (z,),
                                      Belief(t + 1, q / mass))
                    sub_rows.update(branch_rows.pop((t + 1, z_hist + (z,)),
                                                    {}))
            if val > best:
                best, best_u2, best_rows = val, u2, sub_rows
        row = np.zeros(n_u2)
        row[best_u2] = 1.0
        merged = {(t, z_hist, 0): row}
        merged.update(best_rows)
        branch_rows[(t, z_hist)] = merged
        return best

    branch_rows = {}
    pi0 = Belief(0, np.asarray(g.initial, dtype=float))
    value = rec(0, (), pi0)
    table = branch_rows[(0, ())]
    br = HistoryStrategy(player=2, horizon=T, table=table, keying="trivial")
    return value, br


def _memory_code(g, xs, us):
    """Private index of a state/action path under memory accumulation."""
    n_x = g.initial.shape[0]
    p = xs[0]
    for s, (u1, xn) in enumerate(zip(us, xs[1:])):
        p = (p * g.transition[s].shape[1] + u1) * n_x + xn
    return p


def reduce_strategy(g1: HistoryStrategy, g, cap=HISTORY_CAP):
    """Reduce a full-history informed strategy to (state, common history).

    For every common history the informed player's hidden path is filtered
    exactly (conditioning on the action/observation sequence the history
    encodes), the filter is marginalized to the current state, and the
    action rule is the filtered mixture of the original rows.  Histories
    with exactly zero mass get the uniform row.  The reduction leaves the
    joint distribution of (state, both actions, the uninformed player's
    information) unchanged against every opponent strategy.
    """
    if g1.keying != "memory":
        raise ValueError("reduce_strategy expects a full-history strategy")
    T = g.horizon
    n_x = g.initial.shape[0]
    table = {}
    # weights[(xs, us)] = unnormalized joint mass of the hidden path and
    # the observations contained in the common history
    frontier = {(): {((x,), ()): float(g.initial[x]) for x in range(n_x)}}
    for t in range(T):
        trans, obs = g.transition[t], g.observation[t]
        n_u1, n_u2, n_y2 = trans.shape[1], trans.shape[2], obs.shape[3]
        if len(table) + len(frontier) * n_x > cap:
            raise ValueError(f"common history count exceeds cap {cap}")
        nxt = {}
        for z_hist, weights in frontier.items():
            act = {}
            for (xs, us), w in weights.items():
                act[(xs, us)] = g1.row(t, z_hist, _memory_code(g, xs, us))
            for x in range(n_x):
                mix = np.zeros(n_u1)
                mass = 0.0
                for (xs, us), w in weights.items():
                    if xs[-1] == x:
                        mix += w * act[(xs, us)]
                        mass += w
                table[(t, z_hist, x)] = (mix / mass if mass > 0.0
                                         else np.full(n_u1, 1.0 / n_u1))
            if t == T - 1:
                continue
            for y2 in range(n_y2):
                for u2 in range(n_u2):
                    z = y2 * n_u2 + u2
                    w2 = {}
                    for (xs, us), w in weights.items():
                        row = act[(xs, us)]
                        for u1 in range(n_u1):
                            for xn in range(n_x):
                                wn = (w * row[u1]
                                      * trans[xs[-1], u1, u2, xn]
                                      * obs[xn, u1, u2, y2])
                                if wn > 0.0:
                                    key = (xs + (xn,), us + (u1,))
                                    w2[key] = w2.get(key, 0.0) + wn
                    nxt[z_hist + (z,)] = w2
        frontier = nxt
    return HistoryStrategy(player=1, horizon=T, table=table, keying="state")


def _inverse_cdf(dist, u):
    c = 0.0
    for i, p in enumerate(dist):
        c += p
        if u < c:
            return i
    return len(dist) - 1


def _strategy_row(strat, t, z_hist, x, p_mem):
    if isinstance(strat, CIBStrategy):
        return strat.row(t, z_hist, x)
    if strat.keying == "state":
        return strat.row(t, z_hist, x)
    if strat.keying == "memory":
        return strat.row(t, z_hist, p_mem)
    return strat.row(t, z_hist, 0)


def simulate(g, strat1, strat2, seed=0, episodes=1000):
    """Monte-Carlo estimate of the expected total cost under a profile.

    All sampling is inverse-CDF in ascending index order, so runs are
    reproducible bit-for-bit under a fixed seed.  Returns (mean, standard
    error).
    """
    rng = np.random.default_rng(seed)
    n_x = g.initial.shape[0]
    totals = np.empty(episodes)
    for ep in range(episodes):
        x = _inverse_cdf(g.initial, rng.random())
        p_mem = x
        z_hist = ()
        total = 0.0
        for t in range(g.horizon):
            trans, obs, cost = g.transition[t], g.observation[t], g.cost[t]
            n_u1, n_u2 = trans.shape[1], trans.shape[2]
            u1 = _inverse_cdf(_strategy_row(strat1, t, z_hist, x, p_mem),
                              rng.random())
            u2 = _inverse_cdf(_strategy_row(strat2, t, z_hist, x, p_mem),
                              rng.random())
            total += cost[x, u1, u2]
            xn = _inverse_cdf(trans[x, u1, u2], rng.random())
            y2 = _inverse_cdf(obs[xn, u1, u2], rng.random())
            z_hist = z_hist + (y2 * n_u2 + u2,)
            p_mem = (p_mem * n_u1 + u1) * n_x + xn
            x = xn
        totals[ep] = total
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, se
