import json
import random
import sys

import pytest

from chessarena.cli import UserError, load_config, main
from chessarena.evals import MoveSelectionItem, save_move_items

from conftest import PUZZLES_CSV, playout

TOY_CMD = f"{sys.executable} -m chessarena.toy_engine"


def write_config(tmp_path, run_dir=None, extra=None, n_random=4):
    config = {
        "players": [{"id": f"rand-{i}", "kind": "random"} for i in range(n_random)],
        "seed": 0,
        "engine": {"path": TOY_CMD, "depth": 2},
    }
    if run_dir is not None:
        config["run_dir"] = str(run_dir)
    if extra:
        config.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"playerz": []}))
    with pytest.raises(UserError, match="'playerz'"):
        load_config(path)
    path.write_text(json.dumps({"players": [{"id": "a", "kind": "random", "elo": 1}]}))
    with pytest.raises(UserError, match="'elo' in players\\[0\\]"):
        load_config(path)
    path.write_text(json.dumps({"rating": {"initial": 1200}}))
    with pytest.raises(UserError, match="'initial' in rating"):
        load_config(path)
    path.write_text(json.dumps({"engine": {"binary": "sf"}}))
    with pytest.raises(UserError, match="'binary' in engine"):
        load_config(path)


def test_load_config_other_errors(tmp_path):
    with pytest.raises(UserError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(UserError, match="not valid JSON"):
        load_config(bad)
    dupes = tmp_path / "dupes.json"
    dupes.write_text(json.dumps({"players": [{"id": "a", "kind": "random"}] * 2}))
    with pytest.raises(UserError, match="unique"):
        load_config(dupes)
    badspec = tmp_path / "badspec.json"
    badspec.write_text(json.dumps({"players": [{"id": "a", "kind": "wizard"}]}))
    with pytest.raises(UserError, match="players\\[0\\]"):
        load_config(badspec)


def test_game_subcommand(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run")
    code = main(["game", "--config", str(config), "--white", "rand-0", "--black", "rand-1", "--seed", "3"])
    assert code == 0
    out = capsys.readouterr().out
    assert "rand-0 vs rand-1" in out
    games = list((tmp_path / "run" / "games").glob("*.jsonl"))
    assert len(games) == 1


def test_game_unknown_player_is_user_error(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run")
    code = main(["game", "--config", str(config), "--white", "ghost", "--black", "rand-1"])
    assert code == 1
    assert "ghost" in capsys.readouterr().err


def test_match_rejects_odd_n(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run")
    code = main(["match", "--config", str(config), "--white", "rand-0", "--black", "rand-1", "--n", "3"])
    assert code == 1
    assert "even" in capsys.readouterr().err


def test_match_alternates_and_writes_pool(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run")
    code = main(["match", "--config", str(config), "--white", "rand-0", "--black", "rand-1", "--n", "4"])
    assert code == 0
    pool = json.loads((tmp_path / "run" / "pool.json").read_text())
    games = {row["id"]: row["games"] for row in pool}
    assert games["rand-0"] == 4 and games["rand-1"] == 4


def test_tournament_determinism_and_leaderboard(tmp_path, capsys):
    artifacts = {}
    for name in ("a", "b"):
        run_dir = tmp_path / name
        config = write_config(tmp_path, run_dir=run_dir)
        code = main(
            ["tournament", "--config", str(config), "--rounds", "6", "--startup", "random", "--seed", "7"]
        )
        assert code == 0
        artifacts[name] = {
            "pool": (run_dir / "pool.json").read_bytes(),
            "lb_md": (run_dir / "leaderboard.md").read_bytes(),
            "lb_json": (run_dir / "leaderboard.json").read_bytes(),
            "rounds": (run_dir / "rounds.jsonl").read_bytes(),
        }
    assert artifacts["a"] == artifacts["b"]
    out = capsys.readouterr().out
    assert "| Rank | Model | Mode | Legal Moves | Rating | RD | Interval | Games |" in out


def test_tournament_specified_startup(tmp_path):
    run_dir = tmp_path / "run"
    config = write_config(tmp_path, run_dir=run_dir)
    code = main(
        ["tournament", "--config", str(config), "--rounds", "2", "--startup", "specified:rand-2"]
    )
    assert code == 0
    first = json.loads((run_dir / "rounds.jsonl").read_text().splitlines()[0])
    assert first["initiator"] == "rand-2"


def test_tournament_bad_startup_flag(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run")
    assert main(["tournament", "--config", str(config), "--rounds", "1", "--startup", "bogus"]) == 1
    assert main(["tournament", "--config", str(config), "--rounds", "1", "--startup", "specified:ghost"]) == 1


def test_tournament_annotation_fails_fast_without_engine(tmp_path, capsys):
    config = write_config(tmp_path, run_dir=tmp_path / "run", extra={"engine": {}})
    code = main(["tournament", "--config", str(config), "--rounds", "1", "--annotate"])
    assert code == 1
    assert "engine.path" in capsys.readouterr().err
    assert not list((tmp_path / "run" / "games").glob("*.jsonl"))


def test_tournament_with_annotation(tmp_path):
    run_dir = tmp_path / "run"
    config = write_config(tmp_path, run_dir=run_dir, n_random=2)
    code = main(["tournament", "--config", str(config), "--rounds", "1", "--annotate"])
    assert code == 0
    game_file = next((run_dir / "games").glob("*.jsonl"))
    plies = [json.loads(l) for l in game_file.read_text().splitlines()][1:-1]
    assert all(p["q"] is not None and p["in_top3"] is not None for p in plies if p["move"])


def test_leaderboard_requires_pool(tmp_path, capsys):
    code = main(["leaderboard", "--run-dir", str(tmp_path / "nothing")])
    assert code == 1
    assert "pool.json" in capsys.readouterr().err


def test_leaderboard_all_flag(tmp_path, capsys):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    (run_dir / "pool.json").write_text(
        json.dumps(
            [
                {"id": "solid", "r": 1700.0, "rd": 60.0, "games": 40, "mode": "blitz", "legal_moves_flag": True},
                {"id": "noisy", "r": 1900.0, "rd": 200.0, "games": 4, "mode": "blitz", "legal_moves_flag": True},
            ]
        )
    )
    assert main(["leaderboard", "--run-dir", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "solid" in out and "noisy" not in out
    assert main(["leaderboard", "--run-dir", str(run_dir), "--all"]) == 0
    out = capsys.readouterr().out
    assert "noisy" in out


def test_eval_basic_deterministic_items(tmp_path):
    out1 = tmp_path / "items1.jsonl"
    out2 = tmp_path / "items2.jsonl"
    assert main(["eval", "basic", "--n", "30", "--seed", "1", "--out", str(out1)]) == 0
    assert main(["eval", "basic", "--n", "30", "--seed", "1", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = [json.loads(l) for l in out1.read_text().splitlines()]
    assert len(rows) == 30
    assert all({"fen", "square", "expected_piece", "expected_moves"} <= set(r) for r in rows)


def test_eval_moves_with_random_player(tmp_path, capsys):
    rng = random.Random(0)
    from chessarena.core import legal_moves, parse_fen
    from chessarena.engine import MoveEval, Score, AnalysisTable, top_moves_of, win_rate_from_score

    items = []
    for s in range(20):
        fen = playout(s, 10).fen
        evals = tuple(
            MoveEval(m, Score("cp", rng.randrange(-300, 301)), win_rate_from_score(Score("cp", 0)))
            for m in legal_moves(parse_fen(fen))
        )
        evals = tuple(
            MoveEval(ev.move, ev.score, win_rate_from_score(ev.score)) for ev in evals
        )
        items.append(MoveSelectionItem(fen, (), "blitz", True, AnalysisTable(fen, 1, evals, top_moves_of(evals))))
    path = tmp_path / "items.jsonl"
    save_move_items(items, path)
    out = tmp_path / "report.jsonl"
    code = main(["eval", "moves", "--items", str(path), "--player", "random", "--out", str(out)])
    assert code == 0
    summary = json.loads(out.read_text().splitlines()[0])
    assert summary["lr"] == 100.0
    assert "LR (%)" in capsys.readouterr().out


def test_eval_puzzles_with_bundled_engine(tmp_path, capsys):
    out = tmp_path / "report.jsonl"
    code = main(
        ["eval", "puzzles", "--csv", str(PUZZLES_CSV), "--player", "toyfish",
         "--depth", "12", "--max", "6", "--out", str(out)]
    )
    assert code == 0
    summary = json.loads(out.read_text().splitlines()[0])
    assert summary["overall"] == 100.0


def test_eval_puzzles_missing_csv(tmp_path, capsys):
    code = main(["eval", "puzzles", "--csv", str(tmp_path / "none.csv"), "--player", "random"])
    assert code != 0


def test_engine_check(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["engine-check", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    assert "ToyFish" in out and "20 moves" in out
    assert main(["engine-check", "--engine", "/missing/engine"]) == 2
    assert "infrastructure error" in capsys.readouterr().err
    assert main(["engine-check"]) == 1


def test_run_dir_env_override(tmp_path, monkeypatch, capsys):
    env_dir = tmp_path / "from-env"
    monkeypatch.setenv("CHESSARENA_RUN_DIR", str(env_dir))
    config = write_config(tmp_path)  # no run_dir in config
    code = main(["game", "--config", str(config), "--white", "rand-0", "--black", "rand-1"])
    assert code == 0
    assert list((env_dir / "games").glob("*.jsonl"))


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "tournament" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["tournament", "--help"],
        ["match", "--help"],
        ["game", "--help"],
        ["eval", "basic", "--help"],
        ["eval", "moves", "--help"],
        ["eval", "puzzles", "--help"],
        ["leaderboard", "--help"],
        ["engine-check", "--help"],
    ],
)
def test_every_subcommand_documents_flags(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0
    assert "--" in capsys.readouterr().out


def test_tournament_rerun_is_idempotent(tmp_path):
    run_dir = tmp_path / "run"
    config = write_config(tmp_path, run_dir=run_dir)
    args = ["tournament", "--config", str(config), "--rounds", "4", "--startup", "random", "--seed", "9"]
    assert main(args) == 0
    pool1 = (run_dir / "pool.json").read_bytes()
    games1 = sorted(p.name for p in (run_dir / "games").glob("*.jsonl"))
    stamps = {p.name: p.stat().st_mtime_ns for p in (run_dir / "games").glob("*.jsonl")}
    assert main(args) == 0
    assert (run_dir / "pool.json").read_bytes() == pool1
    assert sorted(p.name for p in (run_dir / "games").glob("*.jsonl")) == games1
    # finished games were loaded, not replayed
    assert stamps == {p.name: p.stat().st_mtime_ns for p in (run_dir / "games").glob("*.jsonl")}
