"""Operator entry point.

Subcommands: tournament, match, game, eval {basic|moves|puzzles},
leaderboard, engine-check. Configuration is one JSON file plus flag
overrides; secrets only ever come from environment variables. Exit codes:
0 success, 1 user error, 2 infrastructure error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import random
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import arena, evals
from .core import BoardState, apply_move, legal_moves
from .engine import AnalysisCache, EngineError, analyze_all_moves, start_engine
from .players import LLM_API, PlayerSpec, RANDOM, TransportError, UCI_ENGINE
from .rating import PoolEntry, RatingConfig, RatingState

DEFAULT_RUN_DIR = "runs/run"
RUN_DIR_ENV = "CHESSARENA_RUN_DIR"


class UserError(Exception):
    """Operator mistake: bad config, missing input, unknown player."""


@dataclass(frozen=True)
class EngineConfig:
    path: str = ""
    depth: int = 12
    threads: int = 1
    hash: int = 16

    @property
    def options(self) -> dict:
        return {"Threads": self.threads, "Hash": self.hash}


@dataclass
class RunConfig:
    players: list = dc_field(default_factory=list)
    rating: RatingConfig = dc_field(default_factory=RatingConfig)
    engine: EngineConfig = dc_field(default_factory=EngineConfig)
    concurrency: int = 1
    run_dir: str | None = None
    seed: int = 0
    ply_cap: int = 400

    def spec(self, player_id: str) -> PlayerSpec:
        for spec in self.players:
            if spec.id == player_id:
                return spec
        raise UserError(f"player {player_id!r} is not in the config")

    @property
    def game_config(self) -> arena.GameConfig:
        return arena.GameConfig(ply_cap=self.ply_cap, rating=self.rating)


def _check_keys(data: dict, allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise UserError(f"unknown key {unknown[0]!r} in {where}")


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UserError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UserError(f"config is not valid JSON: {exc}") from None
    _check_keys(data, ("players", "rating", "engine", "concurrency", "run_dir", "seed", "ply_cap"), "config")
    spec_fields = {f.name for f in dataclasses.fields(PlayerSpec)}
    players = []
    for i, row in enumerate(data.get("players", [])):
        _check_keys(row, spec_fields, f"players[{i}]")
        try:
            players.append(PlayerSpec(**row))
        except (TypeError, ValueError) as exc:
            raise UserError(f"players[{i}]: {exc}") from None
    rating_data = data.get("rating", {})
    _check_keys(rating_data, {f.name for f in dataclasses.fields(RatingConfig)}, "rating")
    engine_data = data.get("engine", {})
    _check_keys(engine_data, {f.name for f in dataclasses.fields(EngineConfig)}, "engine")
    cfg = RunConfig(
        players=players,
        rating=RatingConfig(**rating_data),
        engine=EngineConfig(**engine_data),
        concurrency=int(data.get("concurrency", 1)),
        run_dir=data.get("run_dir"),
        seed=int(data.get("seed", 0)),
        ply_cap=int(data.get("ply_cap", 400)),
    )
    ids = [p.id for p in cfg.players]
    if len(ids) != len(set(ids)):
        raise UserError("player ids must be unique")
    return cfg


def resolve_run_dir(flag_value, cfg: RunConfig) -> Path:
    chosen = flag_value or cfg.run_dir or os.environ.get(RUN_DIR_ENV) or DEFAULT_RUN_DIR
    return Path(chosen)


def build_pool(cfg: RunConfig) -> list:
    """Fresh pool from the config.

    Commands always recompute the rating trajectory from this fresh pool;
    finished games reload by content-addressed id, so re-running a command
    with the same seed reproduces the identical end state, and raising
    --rounds extends a previous run without replaying its games.
    """
    return [
        PoolEntry(
            id=spec.id,
            rating=RatingState.fresh(cfg.rating),
            mode=spec.play_mode if spec.kind == LLM_API else None,
            legal_moves=spec.provide_legal_moves,
        )
        for spec in cfg.players
    ]


def _annotation_handle(cfg: RunConfig):
    if not cfg.engine.path:
        raise UserError("annotation requires engine.path in the config")
    return start_engine(cfg.engine.path, cfg.engine.options)


def _annotate_all(records, cfg: RunConfig, run_dir: arena.RunDir | None):
    handle = _annotation_handle(cfg)
    cache = AnalysisCache(run_dir.root / "analysis") if run_dir else None
    try:
        for record in records:
            arena.annotate_record(record, handle, cfg.engine.depth, cache)
            if run_dir is not None:
                run_dir.write_game(record)
    finally:
        handle.quit()


# ---------------------------------------------------------------------------
# Subcommands


def cmd_tournament(args) -> int:
    cfg = load_config(args.config)
    run_dir = arena.RunDir(resolve_run_dir(args.run_dir, cfg))
    pool = build_pool(cfg)
    if len(pool) < 2:
        raise UserError("tournament needs at least 2 players in the config")
    startup_id = None
    if args.startup != "random":
        if not args.startup.startswith("specified:"):
            raise UserError("--startup must be 'random' or 'specified:<player id>'")
        startup_id = args.startup.split(":", 1)[1]
        cfg.spec(startup_id)
    if args.annotate:
        _annotation_handle(cfg).quit()  # fail fast before any game
    seed = cfg.seed if args.seed is None else args.seed
    with arena.PlayerRegistry(cfg.players) as registry:
        pool = arena.run_tournament(
            pool,
            rounds=args.rounds,
            registry=registry,
            cfg=cfg.game_config,
            games_per_match=args.games_per_match,
            startup_id=startup_id,
            seed=seed,
            run_dir=run_dir,
            stop_rd=args.stop_rd,
        )
    if args.annotate:
        records = [run_dir.read_game(gid) for gid in run_dir.game_ids()]
        _annotate_all(records, cfg, run_dir)
    entries = arena.compute_leaderboard(pool, cfg.rating)
    run_dir.write_leaderboard(entries)
    print(arena.render_leaderboard(entries))
    print(f"run dir: {run_dir.root}")
    return 0


def cmd_match(args) -> int:
    cfg = load_config(args.config)
    if args.n <= 0 or args.n % 2:
        raise UserError(f"--n must be a positive even number, got {args.n}")
    run_dir = arena.RunDir(resolve_run_dir(args.run_dir, cfg))
    cfg.spec(args.white), cfg.spec(args.black)
    pool = build_pool(cfg)
    if args.annotate:
        _annotation_handle(cfg).quit()
    seed = cfg.seed if args.seed is None else args.seed
    req = arena.MatchRequest(args.white, args.black, args.n)
    with arena.PlayerRegistry(cfg.players) as registry:
        records = arena.run_match(req, pool, cfg.game_config, registry, run_dir=run_dir, seed=seed)
    if args.annotate:
        _annotate_all(records, cfg, run_dir)
    run_dir.write_pool(pool)
    for record in records:
        _print_game_line(record, run_dir)
    return 0


def cmd_game(args) -> int:
    cfg = load_config(args.config)
    run_dir = arena.RunDir(resolve_run_dir(args.run_dir, cfg))
    cfg.spec(args.white), cfg.spec(args.black)
    if args.annotate:
        _annotation_handle(cfg).quit()
    seed = cfg.seed if args.seed is None else args.seed
    with arena.PlayerRegistry(cfg.players) as registry:
        record = arena.play_game(
            registry.player(args.white), registry.player(args.black), cfg.game_config, seed
        )
    if args.annotate:
        _annotate_all([record], cfg, run_dir)
    run_dir.write_game(record)
    _print_game_line(record, run_dir)
    return 0


def _print_game_line(record, run_dir) -> None:
    if record.aborted:
        outcome = f"aborted ({record.error})"
    else:
        score = {1.0: "1-0", 0.0: "0-1", 0.5: "1/2-1/2"}[record.result_white]
        outcome = f"{score} {record.termination.reason}"
    print(
        f"{record.game_id}: {record.white_id} vs {record.black_id} -> {outcome} "
        f"({len(record.plies)} plies) {run_dir.game_path(record.game_id)}"
    )


def _self_play_fens(n: int, seed: int) -> list:
    """Deterministic FEN corpus from seeded random self-play."""
    rng = random.Random(seed)
    fens = []
    seen = set()
    while len(fens) < n:
        board = BoardState.start()
        for _ in range(rng.randrange(8, 70)):
            moves = legal_moves(board)
            if not moves:
                break
            board = apply_move(board, moves[rng.randrange(len(moves))])
            if board.fen not in seen and len(legal_moves(board)) > 0:
                seen.add(board.fen)
                fens.append(board.fen)
                if len(fens) >= n:
                    break
    return fens


def _eval_resources(cfg: RunConfig, spec: PlayerSpec, seed: int):
    transport = handle = None
    rng = random.Random(seed)
    if spec.kind == UCI_ENGINE:
        handle = start_engine(spec.engine_command, spec.engine_options)
    elif spec.kind == LLM_API:
        from .players import HttpChatTransport

        transport = HttpChatTransport(spec)
    return transport, handle, rng


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UserError(f"{what} not found: {p}")
    return p


def cmd_eval_basic(args) -> int:
    if args.fens:
        fens = [
            line.strip()
            for line in _require_file(args.fens, "FEN file").read_text().splitlines()
            if line.strip()
        ]
        if not fens:
            raise UserError(f"no FENs in {args.fens}")
    else:
        fens = _self_play_fens(max(args.n, 50), args.seed)
    items = evals.build_basic_understanding_set(fens, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {
                        "fen": item.fen,
                        "square": item.square,
                        "expected_piece": item.expected_piece,
                        "expected_moves": list(item.expected_moves),
                        "category": item.category,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote {len(items)} items to {out}")
    if not args.player:
        return 0
    cfg = load_config(args.config) if args.config else RunConfig()
    spec = cfg.spec(args.player)
    if spec.kind != LLM_API:
        raise UserError("basic understanding needs an llm_api player")
    transport, _handle, _rng = _eval_resources(cfg, spec, args.seed)
    responses = []
    for item in items:
        messages = evals.build_basic_understanding_prompt(item.fen, item.square)
        try:
            responses.append(transport.complete(messages).text)
        except TransportError as exc:
            responses.append(f"<transport failure: {exc}>")
    report = evals.EvalReport.basic(evals.score_basic_understanding(items, responses))
    report.write_jsonl(out.with_suffix(".report.jsonl"))
    print(report.render())
    return 0


def cmd_eval_moves(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    items = evals.load_move_items(_require_file(args.items, "items file"))
    if args.max:
        items = items[: args.max]
    if not items:
        raise UserError(f"no items in {args.items}")
    spec = _player_spec(cfg, args.player)
    transport, handle, rng = _eval_resources(cfg, spec, args.seed)
    try:
        scores = evals.run_move_selection(
            spec, items, transport=transport, handle=handle, rng=rng, workers=cfg.concurrency
        )
    finally:
        if handle:
            handle.quit()
    report = evals.EvalReport.moves(scores)
    out = Path(args.out or "moves.report.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_jsonl(out)
    print(report.render())
    return 0


def cmd_eval_puzzles(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    puzzles = evals.load_lichess_puzzles(
        _require_file(args.csv, "puzzle CSV"),
        min_rating=args.min_rating,
        max_rating=args.max_rating,
        limit=args.max,
    )
    if not puzzles:
        raise UserError("no puzzles matched the filters")
    spec = _player_spec(cfg, args.player, depth=args.depth)
    transport, handle, rng = _eval_resources(cfg, spec, args.seed)
    try:
        outcomes = evals.run_puzzles(
            spec, puzzles, transport=transport, handle=handle, rng=rng, workers=cfg.concurrency
        )
    finally:
        if handle:
            handle.quit()
    report = evals.EvalReport.puzzles(outcomes)
    out = Path(args.out or "puzzles.report.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_jsonl(out)
    print(report.render())
    return 0


def _player_spec(cfg: RunConfig, player_id: str, depth: int | None = None) -> PlayerSpec:
    """Resolve a player id; 'random' and 'stockfish'/engine paths work without
    a config entry so desk-scale eval runs stay one-liners."""
    try:
        spec = cfg.spec(player_id)
    except UserError:
        if player_id == "random":
            return PlayerSpec(id="random", kind=RANDOM)
        if os.path.sep in player_id or player_id in ("stockfish", "toyfish"):
            command = (
                f"{sys.executable} -m chessarena.toy_engine" if player_id == "toyfish" else player_id
            )
            return PlayerSpec(
                id=player_id,
                kind=UCI_ENGINE,
                engine_command=command,
                engine_limits={"depth": depth or 12},
            )
        raise
    if depth is not None and spec.kind == UCI_ENGINE:
        return dataclasses.replace(spec, engine_limits={"depth": depth})
    return spec


def cmd_leaderboard(args) -> int:
    run_dir = arena.RunDir(resolve_run_dir(args.run_dir, RunConfig()))
    pool_path = run_dir.root / "pool.json"
    if not pool_path.exists():
        raise UserError(f"no pool.json in {run_dir.root}; run a tournament or match first")
    pool = run_dir.read_pool()
    rating_cfg = RatingConfig() if not args.all else RatingConfig(display_rd_threshold=float("inf"))
    entries = arena.compute_leaderboard(pool, rating_cfg)
    run_dir.write_leaderboard(entries)
    print(arena.render_leaderboard(entries))
    return 0


def cmd_engine_check(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    command = args.engine or cfg.engine.path
    if not command:
        raise UserError("pass --engine or set engine.path in the config")
    handle = start_engine(command, cfg.engine.options)
    try:
        table = analyze_all_moves(handle, BoardState.start().fen, depth=min(cfg.engine.depth, 8))
        print(f"engine: {handle.name}")
        print(f"analyzed start position: {len(table.evals)} moves, top {sorted(table.top_moves)}")
    finally:
        handle.quit()
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chessarena",
        description="Competitive chess arena for automated players (LLM endpoints, UCI engines, a random baseline).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run config")
        p.add_argument("--run-dir", help=f"run directory (default: ${RUN_DIR_ENV} or {DEFAULT_RUN_DIR})")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("tournament", help="run rated rounds with the pairing sampler")
    add_common(p)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--games-per-match", type=int, default=2, help="even number of games per pairing")
    p.add_argument("--startup", default="random", help="'random' or 'specified:<player id>'")
    p.add_argument("--stop-rd", type=float, default=None,
                   help="stop initiating matches for players whose rd reached this value")
    p.add_argument("--annotate", action="store_true", help="post-game engine annotation (Q / top-3)")
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("match", help="play an even number of games between two players")
    add_common(p)
    p.add_argument("--white", required=True, help="player id for game 1 white")
    p.add_argument("--black", required=True)
    p.add_argument("--n", type=int, default=2, help="number of games (even)")
    p.add_argument("--annotate", action="store_true")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("game", help="play a single game")
    add_common(p)
    p.add_argument("--white", required=True)
    p.add_argument("--black", required=True)
    p.add_argument("--annotate", action="store_true")
    p.set_defaults(func=cmd_game)

    ev = sub.add_parser("eval", help="fine-grained evaluation tasks")
    ev_sub = ev.add_subparsers(dest="task", required=True)

    p = ev_sub.add_parser("basic", help="piece identification + per-square legal moves")
    p.add_argument("--config", help="JSON run config (needed with --player)")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fens", help="file with one FEN per line (default: seeded self-play corpus)")
    p.add_argument("--out", default="basic.items.jsonl")
    p.add_argument("--player", help="llm player id to evaluate")
    p.set_defaults(func=cmd_eval_basic)

    p = ev_sub.add_parser("moves", help="single-move selection vs engine oracle")
    p.add_argument("--config")
    p.add_argument("--items", required=True, help="items JSONL with embedded oracle tables")
    p.add_argument("--player", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max", type=int, help="cap the number of items")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_moves)

    p = ev_sub.add_parser("puzzles", help="exact-match puzzle solving")
    p.add_argument("--config")
    p.add_argument("--csv", required=True, help="Lichess puzzle database CSV")
    p.add_argument("--player", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, help="engine search depth for engine players")
    p.add_argument("--max", type=int, help="cap the number of puzzles")
    p.add_argument("--min-rating", type=int)
    p.add_argument("--max-rating", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_puzzles)

    p = sub.add_parser("leaderboard", help="render the rating table of a run")
    p.add_argument("--run-dir")
    p.add_argument("--all", action="store_true", help="include unreliable (rd > threshold) entries")
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("engine-check", help="handshake + a shallow analysis smoke test")
    p.add_argument("--config")
    p.add_argument("--engine", help="engine command (overrides config engine.path)")
    p.set_defaults(func=cmd_engine_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EngineError, TransportError) as exc:
        print(f"infrastructure error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted; partial results were persisted", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
