import json

import numpy as np
import pytest

from cibgames.cli import main, run
from cibgames.model import OneSidedGame, lower_one_sided, save_game
from cibgames.strategy import HistoryStrategy

from .builders import random_one_sided, revelation_game


def matching_pennies():
    return OneSidedGame(
        horizon=1,
        transition=(np.ones((1, 2, 2, 1)),),
        observation=(np.ones((1, 2, 2, 1)),),
        cost=(np.array([[[1.0, 0.0], [0.0, 1.0]]]),),
        initial=np.array([1.0]),
    )


@pytest.fixture
def game_file(tmp_path):
    def write(g, name="game.json"):
        path = tmp_path / name
        save_game(g, path)
        return str(path)
    return write


def test_validate_well_formed(game_file):
    code, rep = run(["validate", game_file(matching_pennies())])
    assert code == 0
    assert rep.values["violations"] == []


def test_validate_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"horizon": 1,\n  "one_sided": true,')
    code, rep = run(["validate", str(path)])
    assert code == 2
    assert "line" in rep.messages[-1]


def test_validate_missing_field(tmp_path):
    path = tmp_path / "partial.json"
    path.write_text(json.dumps({"horizon": 1, "one_sided": True}))
    code, rep = run(["validate", str(path)])
    assert code == 2
    assert "missing field" in rep.messages[-1]


def test_validate_inconsistent_game(game_file):
    g = matching_pennies()
    bad = OneSidedGame(g.horizon, (g.transition[0] * 2.0,), g.observation,
                       g.cost, g.initial)
    code, rep = run(["validate", game_file(bad)])
    assert code == 2
    assert rep.values["violations"]


def test_compare_matching_pennies(game_file):
    code, rep = run(["compare", game_file(matching_pennies())])
    assert code == 0
    assert rep.values["solver_value"] == pytest.approx(0.5, abs=1e-9)
    assert rep.values["oracle_value"] == pytest.approx(0.5, abs=1e-9)
    assert rep.exploitability <= 1e-7


def test_compare_revelation_game(game_file):
    code, rep = run(["compare", game_file(revelation_game()),
                     "--samples", "100"])
    assert code == 0
    gap = rep.values["oracle_value"] - rep.values["solver_value"]
    assert abs(gap) <= 1e-3
    assert rep.values["solver_value"] <= rep.values["oracle_value"] + 1e-7


def test_compare_solver_never_above_oracle(game_file):
    for seed in (1, 2, 3):
        g = random_one_sided(np.random.default_rng(seed), horizon=2)
        code, rep = run(["compare", game_file(g), "--samples", "50"])
        assert code == 0
        assert rep.values["solver_value"] <= rep.values["oracle_value"] + 1e-7


def test_compare_rerun_bit_exact(game_file):
    path = game_file(random_one_sided(np.random.default_rng(4), horizon=2))
    _, a = run(["compare", path, "--seed", "5"])
    _, b = run(["compare", path, "--seed", "5"])
    da, db = a.to_dict(), b.to_dict()
    del da["timing"], db["timing"]
    assert da == db


def test_horizon_cap_refusal(game_file):
    path = game_file(revelation_game())
    code, rep = run(["solve", path, "--max-horizon", "1"])
    assert code == 3
    assert "horizon" in rep.messages[-1]


def test_state_cap_refusal(game_file):
    g = random_one_sided(np.random.default_rng(6), n_x=3, horizon=1)
    code, rep = run(["solve", game_file(g), "--max-states", "2"])
    assert code == 3


def test_tree_cap_refusal(game_file):
    path = game_file(revelation_game())
    code, rep = run(["oracle", path, "--max-tree", "10"])
    assert code == 3


def test_oracle_refuses_imperfect_recall(game_file):
    # the memoryless lowering forgets the informed player's past actions
    gd = lower_one_sided(random_one_sided(np.random.default_rng(7),
                                          horizon=2))
    code, rep = run(["oracle", game_file(gd)])
    assert code == 3
    assert "recall" in rep.messages[-1]


def test_unknown_flag_rejected(game_file):
    with pytest.raises(SystemExit):
        run(["solve", game_file(matching_pennies()), "--bogus"])


def test_value_at_belief(game_file):
    code, rep = run(["value", game_file(revelation_game()),
                     "--belief", "0.3,0.7", "--samples", "100"])
    assert code == 0
    assert rep.values["value"] == pytest.approx(0.7, abs=1e-6)


def test_value_rejects_bad_belief(game_file):
    path = game_file(revelation_game())
    code, _ = run(["value", path, "--belief", "0.3,0.3"])
    assert code == 2
    code, _ = run(["value", path, "--belief", "0.2,0.3,0.5"])
    assert code == 2


def test_oracle_report_fields(game_file):
    code, rep = run(["oracle", game_file(revelation_game())])
    assert code == 0
    assert rep.values["value"] == pytest.approx(0.5, abs=1e-9)
    assert rep.values["tree_nodes"] > 0
    assert all(s > 0 for s in rep.values["plan_support"])


def test_oracle_dot_export(game_file, tmp_path):
    out = str(tmp_path / "tree.dot")
    code, rep = run(["oracle", game_file(matching_pennies()), "--dot", out])
    assert code == 0
    text = open(out).read()
    assert text.startswith("digraph") and "->" in text


def test_best_response_and_simulate(game_file, tmp_path):
    g = matching_pennies()
    path = game_file(g)
    s1 = HistoryStrategy(player=1, horizon=1,
                         table={(0, (), 0): np.array([0.5, 0.5])},
                         keying="state")
    f1 = tmp_path / "s1.json"
    f1.write_text(s1.to_json())
    br_out = tmp_path / "br.json"
    code, rep = run(["best-response", path, "--strategy", str(f1),
                     "--out", str(br_out)])
    assert code == 0
    assert rep.values["best_response_value"] == pytest.approx(0.5, abs=1e-12)
    code, rep = run(["simulate", path, "--strategies", str(f1), str(br_out),
                     "--episodes", "2000", "--seed", "1"])
    assert code == 0
    assert abs(rep.values["mean_cost"] - 0.5) <= \
        3 * rep.values["standard_error"] + 1e-12


def test_reduce_roundtrip(game_file, tmp_path):
    g = random_one_sided(np.random.default_rng(8), horizon=1)
    rng = np.random.default_rng(9)
    table = {(0, (), p): rng.dirichlet(np.ones(2)) for p in range(2)}
    s1 = HistoryStrategy(player=1, horizon=1, table=table, keying="memory")
    f1 = tmp_path / "mem.json"
    f1.write_text(s1.to_json())
    out = tmp_path / "red.json"
    code, rep = run(["reduce", game_file(g), "--strategy", str(f1),
                     "--out", str(out)])
    assert code == 0
    red = HistoryStrategy.from_json(out.read_text())
    assert red.keying == "state"
    assert rep.values["rows"] == len(red.table)


def test_export_alpha(game_file, tmp_path):
    out = str(tmp_path / "alpha.json")
    code, rep = run(["export-alpha", game_file(revelation_game()),
                     "--out", out, "--samples", "100"])
    assert code == 0
    doc = json.load(open(out))
    assert doc["value"] == pytest.approx(0.5, abs=1e-6)
    assert [s["t"] for s in doc["stages"]] == [0, 1, 2]
    # value at the uniform prior recoverable from the stage-0 pieces
    mat = np.array(doc["stages"][0]["alpha"])
    assert np.max(mat @ np.array([0.5, 0.5])) == pytest.approx(doc["value"])


def test_json_output_parses(game_file, capsys):
    code = main(["compare", game_file(matching_pennies()), "--json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["values"]["solver_value"] == pytest.approx(0.5)
    assert doc["exploitability"] <= 1e-7
