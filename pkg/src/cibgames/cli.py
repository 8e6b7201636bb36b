"""Command-line interface tying together game files, solvers, the
sequence-form oracle, and strategy tooling.

Exit codes: 0 success, 2 validation failure (malformed or inconsistent game
files), 3 refusal (resource caps exceeded, imperfect recall, or a query the
loaded game type does not support).
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import Belief
from .lp import LpError
from .model import (
    GameDefinition,
    OneSidedGame,
    load_game,
    lower_one_sided_memory,
    validate_game,
    validate_one_sided,
)
from .oracle import (
    build_extensive_form,
    check_perfect_recall,
    sequence_form_value,
)
from .solver import solve_general_bounds, solve_one_sided, solve_regression
from .stage import pwlc_eval
from .strategy import (
    HistoryStrategy,
    best_response_value,
    extract_cib_strategy,
    reduce_strategy,
    simulate,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_REFUSED = 3

DEFAULT_MAX_STATES = 8
DEFAULT_MAX_HORIZON = 4
DEFAULT_MAX_TREE = 1_000_000


def _native(obj):
    """Recursively convert numpy scalars and arrays to plain Python."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_native(v) for v in obj]
    return obj


@dataclass
class RunReport:
    """Everything a command prints: echoed inputs, numbers, and artifacts."""
    command: str
    config: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    exploitability: float = None
    timing: dict = field(default_factory=dict)
    seed: int = None
    artifacts: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def to_dict(self):
        out = {"command": self.command, "config": _native(self.config),
               "values": _native(self.values), "timing": _native(self.timing),
               "artifacts": list(self.artifacts), "messages": self.messages}
        if self.exploitability is not None:
            out["exploitability"] = float(self.exploitability)
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def render(self, as_json):
        if as_json:
            return json.dumps(self.to_dict(), indent=2, sort_keys=True)
        lines = [f"command: {self.command}"]
        for k, v in _native(self.config).items():
            lines.append(f"config.{k}: {v}")
        if self.seed is not None:
            lines.append(f"seed: {self.seed}")
        for k, v in _native(self.values).items():
            lines.append(f"{k}: {v!r}" if isinstance(v, float)
                         else f"{k}: {v}")
        if self.exploitability is not None:
            lines.append(f"exploitability: {float(self.exploitability)!r}")
        for k, v in self.timing.items():
            lines.append(f"time.{k}: {v:.3f}s")
        for p in self.artifacts:
            lines.append(f"artifact: {p}")
        lines.extend(self.messages)
        return "\n".join(lines)


class Refusal(Exception):
    """Raised when a command declines to run (caps, unsupported query)."""


class InvalidGame(Exception):
    """Raised for malformed or inconsistent game files."""


def _load(path):
    try:
        return load_game(path)
    except json.JSONDecodeError as e:
        raise InvalidGame(f"{path}: invalid JSON at line {e.lineno}, "
                          f"column {e.colno}: {e.msg}") from e
    except KeyError as e:
        raise InvalidGame(f"{path}: missing field {e.args[0]!r}") from e
    except (ValueError, TypeError) as e:
        raise InvalidGame(f"{path}: {e}") from e


def _check_valid(g):
    violations = (validate_one_sided(g) if isinstance(g, OneSidedGame)
                  else validate_game(g))
    if violations:
        raise InvalidGame("; ".join(violations))


def _check_caps(g, args):
    if isinstance(g, OneSidedGame):
        n_x = max(t.shape[0] for t in g.transition)
    else:
        n_x = max(s.n_x for s in g.spaces)
    if n_x > args.max_states:
        raise Refusal(f"{n_x} states exceeds cap {args.max_states} "
                      "(raise with --max-states)")
    if g.horizon > args.max_horizon:
        raise Refusal(f"horizon {g.horizon} exceeds cap {args.max_horizon} "
                      "(raise with --max-horizon)")


def _require_one_sided(g, command):
    if not isinstance(g, OneSidedGame):
        raise Refusal(f"{command} requires the one-sided game shorthand")


def _oracle_value(g, args):
    gd = lower_one_sided_memory(g) if isinstance(g, OneSidedGame) else g
    try:
        ef = build_extensive_form(gd, cap=args.max_tree)
    except ValueError as e:
        raise Refusal(str(e)) from e
    ok, witness = check_perfect_recall(ef)
    if not ok:
        raise Refusal(f"imperfect recall at information set {witness[0]}")
    value, plan1, plan2 = sequence_form_value(ef)
    return value, plan1, plan2, ef


def _parse_belief(text):
    vec = np.asarray([float(x) for x in text.split(",")], dtype=float)
    if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
        raise InvalidGame(f"--belief {text!r} is not a distribution")
    return vec


def _load_strategy(path):
    try:
        with open(path) as fh:
            return HistoryStrategy.from_json(fh.read())
    except json.JSONDecodeError as e:
        raise InvalidGame(f"{path}: invalid JSON at line {e.lineno}, "
                          f"column {e.colno}: {e.msg}") from e
    except (KeyError, ValueError) as e:
        raise InvalidGame(f"{path}: {e}") from e


# --- subcommands -------------------------------------------------------------


def cmd_validate(args, report):
    g = _load(args.game)
    violations = (validate_one_sided(g) if isinstance(g, OneSidedGame)
                  else validate_game(g))
    report.values["violations"] = violations
    if violations:
        raise InvalidGame("; ".join(violations))
    report.messages.append("ok")


def cmd_solve(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    report.seed = args.seed
    t0 = time.perf_counter()
    if isinstance(g, OneSidedGame):
        if args.pieces is not None:
            alpha_sets, mses = solve_regression(g, pieces=args.pieces,
                                                samples=args.samples,
                                                seed=args.seed)
            report.config["pieces"] = args.pieces
            report.values["value"] = pwlc_eval(alpha_sets[0],
                                               Belief(0, g.initial))
            report.values["stage_mse"] = list(mses)
        else:
            vf, value = solve_one_sided(g, samples_per_stage=args.samples,
                                        seed=args.seed)
            report.values["value"] = value
            report.values["alpha_counts"] = [len(a.vectors)
                                             for a in vf.alpha_sets]
        report.config["samples"] = args.samples
    else:
        tables, (upper, lower) = solve_general_bounds(
            g, belief_k=args.belief_grid, prescription_k=args.presc_grid)
        report.config["belief_grid"] = args.belief_grid
        report.config["prescription_grid"] = args.presc_grid
        report.values["upper"] = upper
        report.values["lower"] = lower
        report.values["cells"] = tables.n_cells()
    report.timing["solve"] = time.perf_counter() - t0


def cmd_value(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "value")
    belief = _parse_belief(args.belief)
    if belief.shape[0] != g.initial.shape[0]:
        raise InvalidGame(f"--belief has {belief.shape[0]} entries, "
                          f"game has {g.initial.shape[0]} states")
    report.seed = args.seed
    t0 = time.perf_counter()
    vf, _ = solve_one_sided(g, samples_per_stage=args.samples,
                            seed=args.seed)
    report.timing["solve"] = time.perf_counter() - t0
    report.config["belief"] = belief.tolist()
    report.values["value"] = vf.value_at(Belief(0, belief))


def cmd_oracle(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    t0 = time.perf_counter()
    value, plan1, plan2, ef = _oracle_value(g, args)
    report.timing["oracle"] = time.perf_counter() - t0
    report.values["value"] = value
    report.values["tree_nodes"] = ef.n_nodes
    report.values["infosets"] = [len(ef.infosets1), len(ef.infosets2)]
    report.values["plan_support"] = [int(np.sum(plan1 > 1e-9)),
                                     int(np.sum(plan2 > 1e-9))]
    if args.dot:
        _write_dot(ef, args.dot)
        report.artifacts.append(args.dot)


def cmd_best_response(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "best-response")
    g1 = _load_strategy(args.strategy)
    try:
        value, br = best_response_value(g, g1, node_cap=args.max_tree)
    except ValueError as e:
        raise Refusal(str(e)) from e
    report.values["best_response_value"] = value
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(br.to_json())
        report.artifacts.append(args.out)


def cmd_reduce(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "reduce")
    g1 = _load_strategy(args.strategy)
    try:
        red = reduce_strategy(g1, g)
    except ValueError as e:
        raise InvalidGame(str(e)) from e
    report.values["rows"] = len(red.table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(red.to_json())
        report.artifacts.append(args.out)
    else:
        report.messages.append(red.to_json())


def cmd_simulate(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "simulate")
    s1 = _load_strategy(args.strategies[0])
    s2 = _load_strategy(args.strategies[1])
    report.seed = args.seed
    t0 = time.perf_counter()
    mean, se = simulate(g, s1, s2, seed=args.seed, episodes=args.episodes)
    report.timing["simulate"] = time.perf_counter() - t0
    report.config["episodes"] = args.episodes
    report.values["mean_cost"] = mean
    report.values["standard_error"] = se


def cmd_export_alpha(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "export-alpha")
    report.seed = args.seed
    vf, value = solve_one_sided(g, samples_per_stage=args.samples,
                                seed=args.seed)
    doc = {"value": value,
           "stages": [{"t": t, "alpha": [v.vec.tolist()
                                         for v in a.vectors]}
                      for t, a in enumerate(vf.alpha_sets)]}
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    report.values["value"] = value
    report.artifacts.append(args.out)


def cmd_compare(args, report):
    g = _load(args.game)
    _check_valid(g)
    _check_caps(g, args)
    _require_one_sided(g, "compare")
    report.seed = args.seed
    report.config["samples"] = args.samples
    t0 = time.perf_counter()
    vf, solver_value = solve_one_sided(g, samples_per_stage=args.samples,
                                       seed=args.seed)
    report.timing["solve"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    oracle_value, _, _, _ = _oracle_value(g, args)
    report.timing["oracle"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    br_value, _ = best_response_value(g, extract_cib_strategy(vf),
                                      node_cap=args.max_tree)
    report.timing["best_response"] = time.perf_counter() - t0
    report.values["solver_value"] = solver_value
    report.values["oracle_value"] = oracle_value
    report.values["best_response_value"] = br_value
    report.values["gap"] = oracle_value - solver_value
    report.exploitability = br_value - oracle_value


def _write_dot(ef, path):
    kinds = {"chance": "ellipse", "p1": "box", "p2": "diamond",
             "terminal": "plaintext"}
    lines = ["digraph tree {"]
    for i, node in enumerate(ef.nodes):
        label = (f"{node.payoff:.3g}" if node.kind == "terminal"
                 else node.kind)
        lines.append(f'  n{i} [shape={kinds[node.kind]} label="{label}"];')
        for c in node.children:
            lines.append(f"  n{i} -> n{c};")
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --- argument parsing --------------------------------------------------------


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "value": cmd_value,
    "oracle": cmd_oracle,
    "best-response": cmd_best_response,
    "reduce": cmd_reduce,
    "simulate": cmd_simulate,
    "export-alpha": cmd_export_alpha,
    "compare": cmd_compare,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cibgames",
        description="Solvers for zero-sum games with asymmetric information.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("game", help="game definition JSON file")
        p.add_argument("--json", action="store_true", dest="as_json",
                       help="emit the report as JSON")
        p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
        p.add_argument("--max-horizon", type=int,
                       default=DEFAULT_MAX_HORIZON)
        p.add_argument("--max-tree", type=int, default=DEFAULT_MAX_TREE)

    def seeded(p):
        p.add_argument("--samples", type=int, default=200,
                       help="belief samples per stage")
        p.add_argument("--seed", type=int, default=0)

    common(sub.add_parser("validate", help="check a game file"))

    p = sub.add_parser("solve", help="solve a game")
    common(p)
    seeded(p)
    p.add_argument("--pieces", type=int, default=None,
                   help="fit this many linear pieces per stage instead of "
                        "running the exact backup")
    p.add_argument("--belief-grid", type=int, default=25,
                   help="belief grid resolution for two-sided bounds")
    p.add_argument("--presc-grid", type=int, default=10,
                   help="prescription grid resolution for two-sided bounds")

    p = sub.add_parser("value", help="evaluate the solved value at a belief")
    common(p)
    seeded(p)
    p.add_argument("--belief", required=True,
                   help="comma-separated belief over states")

    p = sub.add_parser("oracle", help="exact sequence-form value")
    common(p)
    p.add_argument("--dot", default=None,
                   help="write the game tree in DOT format")

    p = sub.add_parser("best-response",
                       help="best uninformed response to a strategy file")
    common(p)
    p.add_argument("--strategy", required=True)
    p.add_argument("--out", default=None,
                   help="write the responding strategy as JSON")

    p = sub.add_parser("reduce",
                       help="reduce a full-history strategy to current-state "
                            "form")
    common(p)
    p.add_argument("--strategy", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="Monte Carlo rollout of a profile")
    common(p)
    p.add_argument("--strategies", nargs=2, required=True,
                   metavar=("P1", "P2"))
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-alpha",
                       help="solve and dump the per-stage value pieces")
    common(p)
    seeded(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare",
                       help="solver vs oracle with exploitability")
    common(p)
    seeded(p)
    return parser


def run(argv):
    """Execute one command; returns (exit code, RunReport)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    report = RunReport(command=" ".join([args.subcommand] + list(argv[1:])))
    try:
        COMMANDS[args.subcommand](args, report)
    except InvalidGame as e:
        report.messages.append(f"validation failure: {e}")
        return EXIT_INVALID, report
    except Refusal as e:
        report.messages.append(f"refused: {e}")
        return EXIT_REFUSED, report
    except LpError as e:
        report.messages.append(f"refused: {e}")
        return EXIT_REFUSED, report
    return EXIT_OK, report


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    code, report = run(argv)
    try:
        as_json = "--json" in argv
        print(report.render(as_json))
    except BrokenPipeError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
