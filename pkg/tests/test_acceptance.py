"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Criterion 6 uses a real
Stockfish binary when one is available (CHESSARENA_STOCKFISH or PATH) and
otherwise falls back to the bundled pure-Python engine over the same
harness; the stockfish-literal variant reports SKIP in that case.
"""

import json
import math
import os
import random
import shutil
import time

import pytest

from chessarena.cli import main as cli_main
from chessarena.core import (
    BoardState,
    MoveToken,
    apply_move,
    legal_moves,
    parse_fen,
    perft,
)
from chessarena.engine import (
    AnalysisTable,
    MoveEval,
    Score,
    start_engine,
    top_moves_of,
    win_rate_from_score,
)
from chessarena.evals import (
    MoveSelectionItem,
    load_lichess_puzzles,
    psa_report,
    rl_reward,
    run_move_selection,
    run_puzzle,
)
from chessarena.players import (
    PlayerSpec,
    build_blindfold_conversation,
    build_prompt,
    extract_move,
    random_player_move,
    replay_blindfold,
    request_move,
)
from chessarena.rating import (
    LOSS,
    MatchOutcome,
    PoolEntry,
    Q,
    RatingConfig,
    RatingState,
    WIN,
    expected_score,
    pairing_score,
    sample_opponent,
    update_pair,
    update_rating,
)

from conftest import GOLDEN_DIR, PUZZLES_CSV, TOY_ENGINE_CMD, ScriptedTransport
from oracle_glicko import ref_update

REFERENCE_37_FEN = "rnbqkbnr/pp2pppp/3p4/8/3pP3/5N2/PPP2PPP/RNBQKB1R w KQkq - 0 4"
REFERENCE_37_MOVES = set(
    "f3g5 f3e5 f3h4 f3d4 f3d2 f3g1 h1g1 f1a6 f1b5 f1c4 f1d3 f1e2 e1e2 e1d2 "
    "d1d4 d1d3 d1e2 d1d2 c1h6 c1g5 c1f4 c1e3 c1d2 b1c3 b1a3 b1d2 e4e5 h2h3 "
    "g2g3 c2c3 b2b3 a2a3 h2h4 g2g4 c2c4 b2b4 a2a4".split()
)


def report(number: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_move_generator():
    t0 = time.perf_counter()
    start = BoardState.start()
    counts = [perft(start, d) for d in (1, 2, 3, 4)]
    got_moves = {m.uci for m in legal_moves(parse_fen(REFERENCE_37_FEN))}
    elapsed = time.perf_counter() - t0
    ok = counts == [20, 400, 8902, 197281] and got_moves == REFERENCE_37_MOVES and elapsed < 5.0
    report(1, ok, f"perft {counts}, 37-move set exact={got_moves == REFERENCE_37_MOVES}, {elapsed:.2f}s")


def test_criterion_2_glicko_oracle():
    rng = random.Random(20250101)
    worst = 0.0
    rd_monotone = True
    for _ in range(1000):
        r, rd = rng.uniform(600, 2900), rng.uniform(50, 350)
        r_o, rd_o = rng.uniform(600, 2900), rng.uniform(50, 350)
        s = rng.choice([0.0, 0.5, 1.0])
        got = update_rating(RatingState(r, rd), RatingState(r_o, rd_o), MatchOutcome(s))
        want_r, want_rd = ref_update(r, rd, r_o, rd_o, s)
        worst = max(
            worst,
            abs(got.r - want_r) / max(abs(want_r), 1e-9),
            abs(got.rd - want_rd) / max(abs(want_rd), 1e-9),
        )
        rd_monotone = rd_monotone and got.rd <= rd and got.rd >= 50.0
    floored = update_rating(RatingState(1500, 50), RatingState(1500, 50), WIN)
    q_exact = abs(Q - math.log(10) / 400) < 1e-12
    ok = worst < 1e-9 and rd_monotone and floored.rd == 50.0 and q_exact
    report(2, ok, f"worst rel err {worst:.2e}, rd floored at 50, q exact={q_exact}")


def test_criterion_3_pairing_property():
    rng = random.Random(31337)
    argmax_ok = nearest_ok = True
    for trial in range(10_000):
        req = PoolEntry("me", RatingState(rng.uniform(800, 2600), rng.uniform(50, 350)))
        n = rng.randrange(1, 9)
        equal_rd = trial % 2 == 0
        rd = rng.uniform(50, 350)
        pool = [req] + [
            PoolEntry(
                f"p{i}",
                RatingState(rng.uniform(800, 2600), rd if equal_rd else rng.uniform(50, 350)),
            )
            for i in range(n)
        ]
        pick = sample_opponent(pool, req)
        best = max(pairing_score(req.rating, p.rating) for p in pool if p.id != "me")
        if pairing_score(req.rating, pick.rating) < best - 1e-15:
            argmax_ok = False
            break
        if equal_rd:
            nearest = min(abs(p.rating.r - req.rating.r) for p in pool if p.id != "me")
            if abs(pick.rating.r - req.rating.r) - nearest > 1e-9:
                nearest_ok = False
                break
    report(3, argmax_ok and nearest_ok, f"argmax={argmax_ok}, equal-rd nearest={nearest_ok} over 10k pools")


def _convergence_trial(seed: int, max_games: int = 35):
    rng = random.Random(seed)
    cfg = RatingConfig()
    strengths = {"new": 1570.0}
    pool = [PoolEntry("new", RatingState.fresh(cfg))]
    for i in range(9):
        strengths[f"inc{i}"] = 1150.0 + 140.0 * i
        pool.append(PoolEntry(f"inc{i}", RatingState(strengths[f"inc{i}"], 60.0, 30)))
    entrant = pool[0]
    for game in range(1, max_games + 1):
        opp = sample_opponent(pool, entrant)
        p_win = expected_score(strengths["new"], strengths[opp.id], 0.0)
        outcome = WIN if rng.random() < p_win else LOSS
        entrant.rating, opp.rating = update_pair(entrant.rating, opp.rating, outcome, cfg)
        if entrant.rating.rd < 100:
            return game
    return None


def test_criterion_4_convergence():
    t0 = time.perf_counter()
    results = [_convergence_trial(seed) for seed in range(100)]
    converged = sum(1 for g in results if g is not None)
    elapsed = time.perf_counter() - t0
    typical = sorted(g for g in results if g is not None)[len(results) // 2]
    ok = converged >= 95 and elapsed < 30.0
    report(4, ok, f"{converged}/100 trials reach rd<100 within 35 games (median {typical}), {elapsed:.1f}s")


def _synthetic_table(fen: str, rng: random.Random) -> AnalysisTable:
    evals = []
    for mv in legal_moves(parse_fen(fen)):
        score = Score("cp", rng.randrange(-300, 301))
        evals.append(MoveEval(mv, score, win_rate_from_score(score)))
    return AnalysisTable(fen, 1, tuple(evals), top_moves_of(evals))


def _item_corpus(n: int, seed: int):
    rng = random.Random(seed)
    items = []
    s = 0
    while len(items) < n:
        board = BoardState.start()
        for _ in range(6 + s % 30):
            moves = legal_moves(board)
            if not moves:
                break
            board = apply_move(board, moves[rng.randrange(len(moves))])
        s += 1
        if legal_moves(board):
            items.append(MoveSelectionItem(board.fen, (), "blitz", True, _synthetic_table(board.fen, rng)))
    return items


def test_criterion_5_mar_identities():
    rng = random.Random(6)
    exact_zero = True
    for seed in range(20):
        items = _item_corpus(1, seed + 500)
        table = items[0].table
        awr = table.awr
        mean = sum((ev.win_rate - awr) / awr for ev in table.evals) / len(table.evals)
        exact_zero = exact_zero and abs(mean) < 1e-12
    items = _item_corpus(40, 9)
    spec = PlayerSpec(id="llm", kind="llm_api", play_mode="blitz", provide_legal_moves=True)
    all_illegal = run_move_selection(
        spec, items, transport=ScriptedTransport(["```h8h1```"] * len(items))
    )
    minus_100 = all_illegal["mar"] == pytest.approx(-100.0) and all_illegal["lr"] == 0.0
    big = _item_corpus(800, 77)
    random_report = run_move_selection(
        PlayerSpec(id="random", kind="random"), big, rng=random.Random(424242)
    )
    near_zero = abs(random_report["mar"]) < 3.0
    ok = exact_zero and minus_100 and near_zero
    report(
        5,
        ok,
        f"per-position mean 0 exact={exact_zero}, all-illegal MAR={all_illegal['mar']:.1f}%, "
        f"random MAR={random_report['mar']:+.2f}% over {len(big)} items",
    )


def _acceptance_engine():
    override = os.environ.get("CHESSARENA_STOCKFISH")
    if override:
        return override, "stockfish"
    found = shutil.which("stockfish")
    if found:
        return found, "stockfish"
    return " ".join(TOY_ENGINE_CMD), "bundled-fallback"


def test_criterion_6_puzzle_harness_desk_scale():
    command, flavor = _acceptance_engine()
    t0 = time.perf_counter()
    puzzles = load_lichess_puzzles(PUZZLES_CSV, max_rating=1400, limit=200)
    assert len(puzzles) == 200
    spec = PlayerSpec(
        id="engine", kind="uci_engine", engine_command=command, engine_limits={"depth": 12}
    )
    handle = start_engine(command, options={"Threads": 1, "Hash": 16})
    try:
        outcomes = [run_puzzle(spec, p, handle=handle) for p in puzzles]
    finally:
        handle.quit()
    engine_psa = psa_report(outcomes)["overall"]
    rng = random.Random(0)
    random_spec = PlayerSpec(id="random", kind="random")
    random_psa = psa_report([run_puzzle(random_spec, p, rng=rng) for p in puzzles])["overall"]
    elapsed = time.perf_counter() - t0
    ok = engine_psa >= 90.0 and random_psa <= 2.0 and elapsed < 900.0
    report(
        6,
        ok,
        f"{flavor} depth 12 PSA={engine_psa:.1f}% (>=90), random PSA={random_psa:.1f}% (<=2), "
        f"{elapsed:.0f}s on 200 puzzles <=1400",
    )


def test_criterion_6_stockfish_literal():
    _command, flavor = _acceptance_engine()
    if flavor != "stockfish":
        pytest.skip(
            "no stockfish binary in this environment (set CHESSARENA_STOCKFISH or add to PATH); "
            "criterion 6 ran with the bundled engine over the identical harness"
        )
    # When stockfish exists the main criterion-6 test already ran it.


def _fixture_conversation(mode, legal_flag, fmt):
    board = BoardState.start()
    moves = []
    for uci in "e2e4 e7e5 g1f3 b8c6 f1b5 a7a6 b5a4 g8f6 e1g1 f6e4 d2d4 b7b5".split():
        mv = MoveToken.from_uci(uci)
        moves.append(mv)
        board = apply_move(board, mv)
    spec = PlayerSpec(id="fixture", play_mode=mode, provide_legal_moves=legal_flag, history_format=fmt)
    legal = legal_moves(board) if legal_flag else None
    if mode == "blindfold":
        return build_blindfold_conversation(spec, moves, legal, board.side_to_move)
    return build_prompt(spec, board, moves, legal, board.side_to_move)


def test_criterion_7_protocol_conformance():
    mismatches = []
    for mode in ("bullet", "blitz", "standard", "blindfold"):
        for legal_flag in (True, False):
            for fmt in ("uci_list", "pgn", "none"):
                name = f"{mode}_{'legal' if legal_flag else 'nolegal'}_{fmt}.json"
                expected = (GOLDEN_DIR / "prompts" / name).read_text()
                messages = _fixture_conversation(mode, legal_flag, fmt)
                rendered = json.dumps(
                    [m.as_dict() for m in messages], indent=2, ensure_ascii=False
                ) + "\n"
                if rendered != expected:
                    mismatches.append(name)
    corpus = json.loads((GOLDEN_DIR / "bullet_corpus.json").read_text())
    board = BoardState.start()
    miscls = [
        case["response"]
        for case in corpus
        if extract_move(case["response"], "bullet", board).outcome != case["expected"]
    ]
    spec = PlayerSpec(id="llm", kind="llm_api", play_mode="blitz", provide_legal_moves=True)
    messages = build_prompt(spec, board, [], legal_moves(board), "w")
    move, attempts, _ = request_move(spec, messages, board, ScriptedTransport(["junk"] * 9))
    forfeit_ok = move is None and len(attempts) == 5
    ok = not mismatches and not miscls and forfeit_ok
    report(
        7,
        ok,
        f"24/24 golden prompts byte-equal={not mismatches}, bullet corpus "
        f"{len(corpus) - len(miscls)}/{len(corpus)}, forfeit after exactly 5 attempts={forfeit_ok}",
    )


def test_criterion_8_blindfold_round_trip():
    spec = PlayerSpec(id="p", play_mode="blindfold", provide_legal_moves=True)
    checked_games = 0
    checked_plies = 0
    for seed in range(50):
        rng = random.Random(seed)
        board = BoardState.start()
        moves = []
        for _ply in range(40):
            legal = legal_moves(board)
            if not legal:
                break
            color = board.side_to_move
            conversation = build_blindfold_conversation(spec, moves, legal, color)
            replayed = BoardState.start()
            for uci in replay_blindfold(conversation):
                replayed = apply_move(replayed, MoveToken.from_uci(uci))
            assert replayed.fen == board.fen, f"seed {seed} ply {_ply}"
            checked_plies += 1
            mv = legal[rng.randrange(len(legal))]
            moves.append(mv)
            board = apply_move(board, mv)
        checked_games += 1
    ok = checked_games == 50
    report(8, ok, f"{checked_games} games / {checked_plies} plies: transcript replay == live FEN")


def test_criterion_9_end_to_end_determinism(tmp_path):
    artifacts = []
    for run in ("one", "two"):
        run_dir = tmp_path / run
        config = tmp_path / f"config_{run}.json"
        config.write_text(
            json.dumps(
                {
                    "players": [{"id": f"rand-{i}", "kind": "random"} for i in range(4)],
                    "run_dir": str(run_dir),
                    "seed": 2024,
                }
            )
        )
        code = cli_main(
            ["tournament", "--config", str(config), "--rounds", "20", "--startup", "random"]
        )
        assert code == 0
        artifacts.append(
            (
                (run_dir / "pool.json").read_bytes(),
                (run_dir / "leaderboard.md").read_bytes(),
                (run_dir / "leaderboard.json").read_bytes(),
            )
        )
    ok = artifacts[0] == artifacts[1]
    report(9, ok, "pool.json and leaderboard byte-identical across two 20-round runs")


def test_criterion_10_reward_scorer():
    ucis = [m.uci for m in legal_moves(BoardState.start())]
    evals = tuple(
        MoveEval(MoveToken.from_uci(u), Score("cp", 100 - 10 * i), win_rate_from_score(Score("cp", 100 - 10 * i)))
        for i, u in enumerate(ucis)
    )
    table = AnalysisTable(BoardState.start().fen, 1, evals, top_moves_of(evals))
    top = ucis[0]
    non_top = ucis[10]
    fen = table.fen

    def fmt(move):
        return f"<answer>\n```\n{move}\n```\n</answer>"

    cases = [
        (fmt(top), 0.1 + 0.3 + 0.6),
        (fmt(ucis[1]), 0.1 + 0.3 + 0.6),
        (fmt(ucis[2]), 0.1 + 0.3 + 0.6),
        (fmt(non_top), 0.1 + 0.3),
        (fmt(ucis[12]), 0.1 + 0.3),
        (fmt(ucis[19]), 0.1 + 0.3),
        (fmt("a1a8"), 0.1),
        (fmt("h8h1"), 0.1),
        (fmt("zz99"), 0.1),
        (f"the move is ```{top}```", 0.3 + 0.6),
        (f"```{ucis[1]}```", 0.3 + 0.6),
        (f"I'd play {top} here", 0.3 + 0.6),
        (f"```{non_top}```", 0.3),
        (f"maybe {ucis[15]}", 0.3),
        (f"{non_top}", 0.3),
        ("altogether unclear", 0.0),
        ("", 0.0),
        ("the knight looks misplaced", 0.0),
        ("a1a8 could work", 0.0 + 0.0),
        (f"<answer>no fence {top}</answer>", 0.3 + 0.6),
    ]
    assert len(cases) == 20
    failures = [
        (resp, rl_reward(resp, fen, table), want)
        for resp, want in cases
        if rl_reward(resp, fen, table) != want
    ]
    report(10, not failures, f"20/20 hand-computed reward sums exact (failures: {failures[:2]})")
