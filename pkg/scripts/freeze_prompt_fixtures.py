#!/usr/bin/env python3
"""Render every play-mode prompt combination and freeze it under
tests/golden/. Run after any deliberate template change, then review the
diff; the acceptance suite compares byte-for-byte.
"""

import json
from pathlib import Path

from chessarena.core import BoardState, apply_move, legal_moves, parse_move
from chessarena.players import (
    HISTORY_FORMATS,
    PLAY_MODES,
    BLINDFOLD,
    PlayerSpec,
    build_blindfold_conversation,
    build_prompt,
    correction_message,
    _FAILURE_SENTENCES,
)

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

# Ruy Lopez open variation, 12 plies: long enough that a 10-ply window truncates.
FIXTURE_MOVES = "e2e4 e7e5 g1f3 b8c6 f1b5 a7a6 b5a4 g8f6 e1g1 f6e4 d2d4 b7b5".split()


def fixture_board():
    board = BoardState.start()
    moves = []
    for uci in FIXTURE_MOVES:
        mv = parse_move(uci, board)
        moves.append(mv)
        board = apply_move(board, mv)
    return board, moves


def main():
    prompts_dir = GOLDEN / "prompts"
    prompts_dir.mkdir(parents=True, exist_ok=True)
    board, moves = fixture_board()
    color = board.side_to_move
    for mode in PLAY_MODES:
        for legal_flag in (True, False):
            for fmt in HISTORY_FORMATS:
                spec = PlayerSpec(
                    id="fixture",
                    play_mode=mode,
                    provide_legal_moves=legal_flag,
                    history_format=fmt,
                )
                legal = legal_moves(board) if legal_flag else None
                if mode == BLINDFOLD:
                    messages = build_blindfold_conversation(spec, moves, legal, color)
                else:
                    messages = build_prompt(spec, board, moves, legal, color)
                name = f"{mode}_{'legal' if legal_flag else 'nolegal'}_{fmt}.json"
                payload = json.dumps([m.as_dict() for m in messages], indent=2, ensure_ascii=False)
                (prompts_dir / name).write_text(payload + "\n")
    corrections = {
        f"{outcome}:{mode}": correction_message(outcome, mode)
        for outcome in _FAILURE_SENTENCES
        for mode in PLAY_MODES
    }
    (GOLDEN / "corrections.json").write_text(
        json.dumps(corrections, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    )
    print(f"froze {len(PLAY_MODES) * 2 * len(HISTORY_FORMATS)} prompt fixtures + corrections")


if __name__ == "__main__":
    main()
