import numpy as np
import pytest

from cibgames.belief import Belief, Prescription
from cibgames.stage import (
    AlphaSet,
    AlphaVector,
    expected_stage_cost,
    general_stage_bounds,
    general_stage_game_T,
    one_sided_backup_maximin,
    one_sided_backup_minmax,
    prescription_grid,
    pwlc_eval,
    simplex_grid,
)

from .builders import random_game, random_one_sided, random_stochastic


def alpha_set(t, rows):
    return AlphaSet(t, tuple(AlphaVector(t, np.asarray(r, dtype=float))
                             for r in rows))


def random_alpha_set(rng, t, n_x, n_l=3, scale=1.0):
    return alpha_set(t, scale * rng.normal(size=(n_l, n_x)))


def backup_grid_oracle(pi, a_next, g, t, k=200):
    """Brute force over the minimizer's prescription grid.  For a fixed
    prescription the maximizer's best response is a pure action, so the
    inner problem is a max over actions of a closed-form expression."""
    cost = g.cost[t]
    n_x, n_u1, n_u2 = cost.shape
    trans, obs = g.transition[t], g.observation[t]
    al = a_next.matrix()
    m = np.einsum("abcd,dbce,fd->abcef", trans, obs, al)
    best = np.inf
    pts = simplex_grid(n_u1, k)
    grids = np.meshgrid(*[np.arange(pts.shape[0])] * n_x, indexing="ij")
    for combo in zip(*[a.reshape(-1) for a in grids]):
        gamma = pts[list(combo)]
        w = pi.dist[:, None] * gamma  # (x, u1) weights
        worst = -np.inf
        for u2 in range(n_u2):
            val = np.sum(w * cost[:, :, u2])
            # per-observation continuation: max over supporting vectors of
            # the sub-normalized successor measure
            val += np.einsum("ab,abef->ef", w, m[:, :, u2]).max(axis=1).sum()
            worst = max(worst, val)
        best = min(best, worst)
    return best


def test_expected_stage_cost_point_mass():
    dist = np.zeros((2, 2, 2))
    dist[1, 0, 1] = 1.0
    pi = Belief(0, dist)
    g1 = Prescription(0, 1, np.array([[0.0, 1.0], [1.0, 0.0]]))
    g2 = Prescription(0, 2, np.array([[1.0, 0.0], [0.0, 1.0]]))
    cost = np.arange(8, dtype=float).reshape(2, 2, 2)
    assert expected_stage_cost(pi, g1, g2, cost) == cost[1, 1, 1]


def test_expected_stage_cost_constant():
    rng = np.random.default_rng(0)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    g1 = Prescription(0, 1, random_stochastic(rng, (2, 2)))
    g2 = Prescription(0, 2, random_stochastic(rng, (2, 2)))
    assert expected_stage_cost(pi, g1, g2, np.full((2, 2, 2), 3.5)) == \
        pytest.approx(3.5, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_expected_stage_cost_matches_loops(seed):
    rng = np.random.default_rng(seed)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    g1 = Prescription(0, 1, random_stochastic(rng, (2, 2)))
    g2 = Prescription(0, 2, random_stochastic(rng, (2, 2)))
    cost = rng.normal(size=(2, 2, 2))
    total = 0.0
    for x in range(2):
        for p1 in range(2):
            for p2 in range(2):
                for u1 in range(2):
                    for u2 in range(2):
                        total += (pi.dist[x, p1, p2] * g1.gamma[p1, u1]
                                  * g2.gamma[p2, u2] * cost[x, u1, u2])
    assert expected_stage_cost(pi, g1, g2, cost) == pytest.approx(
        total, abs=1e-12)


def test_expected_stage_cost_shape_mismatch():
    pi = Belief(0, np.full((2, 1, 1), 0.5))
    g1 = Prescription(0, 1, np.ones((1, 1)))
    g2 = Prescription(0, 2, np.ones((1, 1)))
    with pytest.raises(ValueError):
        expected_stage_cost(pi, g1, g2, np.zeros((3, 1, 1)))


def test_pwlc_eval_basics():
    a = alpha_set(0, [[0.0, 0.0]])
    assert pwlc_eval(a, Belief(0, np.array([0.3, 0.7]))) == 0.0
    a = alpha_set(0, [[1.0, 0.0], [0.0, 1.0]])
    assert pwlc_eval(a, Belief(0, np.array([0.5, 0.5]))) == 0.5
    with pytest.raises(ValueError):
        pwlc_eval(a, Belief(1, np.array([0.5, 0.5])))


@pytest.mark.parametrize("seed", range(10))
def test_pwlc_homogeneity_exact(seed):
    from cibgames.belief import scale_belief
    rng = np.random.default_rng(seed)
    a = random_alpha_set(rng, 0, 4, n_l=5)
    pi = Belief(0, random_stochastic(rng, (4,)))
    for alpha in (0.0, 0.25, 0.5, 1.0):
        assert pwlc_eval(a, scale_belief(pi, alpha)) == \
            alpha * pwlc_eval(a, pi)


@pytest.mark.parametrize("seed", range(5))
def test_pwlc_midpoint_convexity(seed):
    rng = np.random.default_rng(100 + seed)
    a = random_alpha_set(rng, 0, 3, n_l=4)
    for _ in range(100):
        p = Belief(0, random_stochastic(rng, (3,)))
        q = Belief(0, random_stochastic(rng, (3,)))
        mid = Belief(0, 0.5 * (p.dist + q.dist))
        assert pwlc_eval(a, mid) <= \
            0.5 * pwlc_eval(a, p) + 0.5 * pwlc_eval(a, q) + 1e-10


def terminal_alpha(n_x):
    return alpha_set(1, [np.zeros(n_x)])


def test_maximin_single_state_matrix_game():
    rng = np.random.default_rng(1)
    g = random_one_sided(rng, n_x=1, n_u1=2, n_u2=2, n_y2=1, horizon=1)
    g.cost = (np.array([[[1.0, 0.0], [0.0, 1.0]]]),)
    sol = one_sided_backup_maximin(Belief(0, np.ones(1)), terminal_alpha(1),
                                   g, 0)
    assert sol.value == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_allclose(sol.gamma1.gamma, [[0.5, 0.5]], atol=1e-8)
    np.testing.assert_allclose(sol.q, [0.5, 0.5], atol=1e-8)


def test_maximin_action_independent_cost():
    rng = np.random.default_rng(2)
    g = random_one_sided(rng, n_x=2, horizon=1)
    c = np.zeros((2, 2, 2))
    c[0] = 1.5
    c[1] = -0.5
    g.cost = (c,)
    pi = Belief(0, np.array([0.5, 0.5]))
    sol = one_sided_backup_maximin(pi, terminal_alpha(2), g, 0)
    assert sol.value == pytest.approx(0.5 * 1.5 - 0.5 * 0.5, abs=1e-9)


def test_stage_solution_invariants():
    rng = np.random.default_rng(3)
    g = random_one_sided(rng, n_x=2, n_u1=2, n_u2=2, n_y2=2, horizon=2)
    pi = Belief(0, random_stochastic(rng, (2,)))
    a_next = random_alpha_set(rng, 1, 2)
    sol = one_sided_backup_maximin(pi, a_next, g, 0)
    assert sol.q.sum() == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(
        sol.lam.sum(axis=2),
        np.broadcast_to(sol.q[:, None], sol.lam.shape[:2]), atol=1e-9)
    assert float(sol.nu @ pi.dist) == pytest.approx(sol.value, abs=1e-7)


@pytest.mark.parametrize("seed", range(4))
def test_maximin_matches_grid_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    g = random_one_sided(rng, n_x=2, n_u1=2, n_u2=2, n_y2=2, horizon=2)
    pi = Belief(0, random_stochastic(rng, (2,)))
    # supporting vectors from an exact prior-stage backup
    zero = alpha_set(2, [np.zeros(2)])
    nus = [one_sided_backup_maximin(Belief(1, random_stochastic(rng, (2,))),
                                    zero, g, 1).nu for _ in range(3)]
    a_next = alpha_set(1, nus)
    sol = one_sided_backup_maximin(pi, a_next, g, 0)
    oracle = backup_grid_oracle(pi, a_next, g, 0, k=200)
    assert sol.value == pytest.approx(oracle, abs=2e-3)


@pytest.mark.parametrize("seed", range(25))
def test_minmax_equals_maximin(seed):
    rng = np.random.default_rng(300 + seed)
    n_x = int(rng.integers(1, 4))
    g = random_one_sided(rng, n_x=n_x, n_u1=int(rng.integers(1, 3)),
                         n_u2=int(rng.integers(1, 3)),
                         n_y2=int(rng.integers(1, 3)), horizon=2)
    pi = Belief(0, random_stochastic(rng, (n_x,)))
    a_next = random_alpha_set(rng, 1, n_x, n_l=int(rng.integers(1, 5)))
    v_max = one_sided_backup_maximin(pi, a_next, g, 0).value
    v_min, _ = one_sided_backup_minmax(pi, a_next, g, 0)
    assert abs(v_max - v_min) <= 1e-7


def test_minmax_degenerate_minimizer():
    rng = np.random.default_rng(4)
    g = random_one_sided(rng, n_x=2, n_u1=1, n_u2=2, n_y2=2, horizon=2)
    pi = Belief(0, random_stochastic(rng, (2,)))
    a_next = random_alpha_set(rng, 1, 2)
    v, g1 = one_sided_backup_minmax(pi, a_next, g, 0)
    np.testing.assert_array_equal(g1.gamma, np.ones((2, 1)))
    # value = max over u2 of stage expression under the unique gamma1
    m = np.einsum("abcd,dbce,fd->abcef", g.transition[0], g.observation[0],
                  a_next.matrix())
    w = pi.dist[:, None]  # gamma1 is all ones
    vals = []
    for u2 in range(2):
        v2 = np.sum(w[:, 0] * g.cost[0][:, 0, u2])
        v2 += np.einsum("a,aef->ef", pi.dist, m[:, 0, u2]).max(axis=1).sum()
        vals.append(v2)
    assert v == pytest.approx(max(vals), abs=1e-8)


def test_minmax_matching_pennies_uniform():
    rng = np.random.default_rng(5)
    g = random_one_sided(rng, n_x=1, n_u1=2, n_u2=2, n_y2=1, horizon=1)
    g.cost = (np.array([[[1.0, -1.0], [-1.0, 1.0]]]),)
    v, g1 = one_sided_backup_minmax(Belief(0, np.ones(1)),
                                    terminal_alpha(1), g, 0)
    assert v == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(g1.gamma, [[0.5, 0.5]], atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_supporting_vector_bounds_other_beliefs(seed):
    rng = np.random.default_rng(400 + seed)
    g = random_one_sided(rng, n_x=3, horizon=2)
    a_next = random_alpha_set(rng, 1, 3)
    pi = Belief(0, random_stochastic(rng, (3,)))
    sol = one_sided_backup_maximin(pi, a_next, g, 0)
    for _ in range(100):
        pi2 = Belief(0, random_stochastic(rng, (3,)))
        v2 = one_sided_backup_maximin(pi2, a_next, g, 0).value
        assert float(sol.nu @ pi2.dist) <= v2 + 1e-7


def test_general_T_plain_matrix_game():
    rng = np.random.default_rng(6)
    g = random_game(rng, n_x=1, n_p1=1, n_p2=1, n_u1=2, n_u2=2, horizon=1)
    g.cost = (np.array([[[1.0, -1.0], [-1.0, 1.0]]]),)
    pi = Belief(0, np.ones((1, 1, 1)))
    v, g1, g2 = general_stage_game_T(pi, g, 0)
    assert v == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(g1.gamma, [[0.5, 0.5]], atol=1e-8)
    np.testing.assert_allclose(g2.gamma, [[0.5, 0.5]], atol=1e-8)


def test_general_T_guessing_game():
    # player 1 knows x (p1 = x), player 2 guesses it; cost 1 on a correct
    # guess; player 1's action does not matter
    rng = np.random.default_rng(7)
    g = random_game(rng, n_x=2, n_p1=2, n_p2=1, n_u1=1, n_u2=2, horizon=1)
    cost = np.zeros((2, 1, 2))
    cost[0, 0, 0] = 1.0
    cost[1, 0, 1] = 1.0
    g.cost = (cost,)
    dist = np.zeros((2, 2, 1))
    dist[0, 0, 0] = dist[1, 1, 0] = 0.5
    v, _, _ = general_stage_game_T(Belief(0, dist), g, 0)
    assert v == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_general_T_matches_prescription_grid(seed):
    rng = np.random.default_rng(500 + seed)
    g = random_game(rng, horizon=1)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    v, _, _ = general_stage_game_T(pi, g, 0)
    minmax, maxmin = general_stage_bounds(pi, None, g, 0, k=100)
    assert maxmin - 2e-2 <= v <= minmax + 2e-2
    assert abs(minmax - v) <= 2e-2
    assert abs(maxmin - v) <= 2e-2


def test_general_T_cap():
    rng = np.random.default_rng(8)
    g = random_game(rng, n_p1=7, n_u1=3, horizon=1)
    pi = Belief(0, random_stochastic(rng, (7 * 2 * 2,)).reshape(2, 7, 2))
    with pytest.raises(ValueError):
        general_stage_game_T(pi, g, 0)


def test_general_bounds_trivial_cases():
    rng = np.random.default_rng(9)
    g = random_game(rng, n_u1=1, n_u2=1, horizon=1)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    minmax, maxmin = general_stage_bounds(pi, None, g, 0, k=3)
    g1 = Prescription(0, 1, np.ones((2, 1)))
    g2 = Prescription(0, 2, np.ones((2, 1)))
    w = expected_stage_cost(pi, g1, g2, g.cost[0])
    assert minmax == pytest.approx(w, abs=1e-12)
    assert maxmin == pytest.approx(w, abs=1e-12)

    g = random_game(rng, horizon=1)
    g.cost = (np.full((2, 2, 2), 1.25),)
    minmax, maxmin = general_stage_bounds(
        pi, lambda pts: np.zeros(len(pts)), g, 0, k=4)
    assert minmax == pytest.approx(1.25, abs=1e-12)
    assert maxmin == pytest.approx(1.25, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_general_bounds_ordering(seed):
    rng = np.random.default_rng(600 + seed)
    g = random_game(rng, horizon=1)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    nv = (lambda pts: pts.reshape(len(pts), -1) @ rng.normal(size=8))
    minmax, maxmin = general_stage_bounds(pi, nv, g, 0, k=6)
    assert maxmin <= minmax + 1e-9


def test_general_bounds_rejects_small_k_and_big_grids():
    rng = np.random.default_rng(10)
    g = random_game(rng, horizon=1)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    with pytest.raises(ValueError):
        general_stage_bounds(pi, None, g, 0, k=1)
    with pytest.raises(ValueError):
        general_stage_bounds(pi, None, g, 0, k=2000)


@pytest.mark.parametrize("seed", range(5))
def test_terminal_saddle_certificate(seed):
    rng = np.random.default_rng(700 + seed)
    g = random_game(rng, horizon=1)
    pi = Belief(0, random_stochastic(rng, (8,)).reshape(2, 2, 2))
    v, g1s, g2s = general_stage_game_T(pi, g, 0)
    from cibgames.stage import pure_prescriptions
    for d1 in pure_prescriptions(2, 2):
        assert expected_stage_cost(pi, Prescription(0, 1, d1), g2s,
                                   g.cost[0]) >= v - 1e-7
    for d2 in pure_prescriptions(2, 2):
        assert expected_stage_cost(pi, g1s, Prescription(0, 2, d2),
                                   g.cost[0]) <= v + 1e-7


def test_simplex_grid_contents():
    pts = simplex_grid(2, 4)
    assert pts.shape == (5, 2)
    np.testing.assert_allclose(pts.sum(axis=1), 1.0)
    pts3 = simplex_grid(3, 3)
    assert pts3.shape == (10, 3)
    grid = prescription_grid(2, 2, 2)
    assert grid.shape == (9, 2, 2)
    np.testing.assert_allclose(grid.sum(axis=2), 1.0)
