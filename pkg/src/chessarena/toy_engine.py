"""A tiny deterministic UCI engine: material counting plus a forced-mate scan.

Run with ``python -m chessarena.toy_engine``. It exists so the engine bridge,
annotation pipeline and puzzle harness can be exercised without an external
engine binary. It plays weak chess but finds forced mates in one, and mates
in two whose key move gives check, which is all the bundled puzzle corpus
requires. Output is fully deterministic for a given position and depth.
"""

from __future__ import annotations

import sys

from .core import (
    BoardState,
    is_check,
    legal_moves,
    parse_fen,
    START_FEN,
)
from .core.moves import _raw_apply, _raw_legal_moves

PIECE_VALUES = {1: 100, 2: 300, 3: 310, 4: 500, 5: 900, 6: 0}

MATE_SCAN_MIN_DEPTH = 3  # "go depth" threshold that enables the mate-in-2 scan


def material_balance(state: BoardState, pov: int) -> int:
    total = 0
    for code in state.board:
        if code:
            total += PIECE_VALUES[abs(code)] * (1 if code * pov > 0 else -1)
    return total


def _is_mate(state: BoardState) -> bool:
    return not _raw_legal_moves(state) and is_check(state)


def _has_mate_in_one(state: BoardState) -> bool:
    for raw in _raw_legal_moves(state):
        if _is_mate(_raw_apply(state, *raw)):
            return True
    return False


def _forces_mate_in_two(state: BoardState, after_key: BoardState) -> bool:
    """True if every reply to the key move allows mate on the next move."""
    replies = _raw_legal_moves(after_key)
    if not replies:
        return False  # stalemate or already mate; callers handle mate-in-1
    for raw in replies:
        if not _has_mate_in_one(_raw_apply(after_key, *raw)):
            return False
    return True


def score_moves(state: BoardState, depth: int) -> list:
    """(uci, kind, value) per legal move, from the mover's perspective."""
    pov = state.turn
    scored = []
    for mv in legal_moves(state):
        after = _raw_apply(state, mv.from_square.index, mv.to_square.index, mv.promotion)
        if _is_mate(after):
            scored.append((mv.uci, "mate", 1))
            continue
        if not _raw_legal_moves(after):  # stalemate
            scored.append((mv.uci, "cp", 0))
            continue
        if depth >= MATE_SCAN_MIN_DEPTH and is_check(after) and _forces_mate_in_two(state, after):
            scored.append((mv.uci, "mate", 2))
            continue
        scored.append((mv.uci, "cp", material_balance(after, pov)))
    return scored


def _order_key(entry):
    uci, kind, value = entry
    raw = (1_000_000 - value) if kind == "mate" else value
    return (-raw, uci)


def run(stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def emit(line: str) -> None:
        stdout.write(line + "\n")
        stdout.flush()

    state = parse_fen(START_FEN)
    multipv = 1
    for raw_line in stdin:
        line = raw_line.strip()
        if not line:
            continue
        cmd, _, rest = line.partition(" ")
        if cmd == "uci":
            emit("id name ToyFish 0.1")
            emit("id author chessarena")
            emit("option name MultiPV type spin default 1 min 1 max 256")
            emit("option name Threads type spin default 1 min 1 max 1")
            emit("option name Hash type spin default 1 min 1 max 64")
            emit("uciok")
        elif cmd == "isready":
            emit("readyok")
        elif cmd == "setoption":
            tokens = rest.split()
            if "name" in tokens and "value" in tokens:
                name = " ".join(tokens[tokens.index("name") + 1 : tokens.index("value")])
                value = " ".join(tokens[tokens.index("value") + 1 :])
                if name.lower() == "multipv":
                    multipv = max(1, int(value))
        elif cmd == "ucinewgame":
            state = parse_fen(START_FEN)
        elif cmd == "position":
            state = _set_position(rest)
        elif cmd == "go":
            depth = _go_depth(rest)
            scored = sorted(score_moves(state, depth), key=_order_key)
            if not scored:
                emit("bestmove (none)")
                continue
            for idx, (uci, kind, value) in enumerate(scored[:multipv], start=1):
                emit(
                    f"info depth {depth} seldepth {depth} multipv {idx} "
                    f"score {kind} {value} nodes {len(scored)} pv {uci}"
                )
            emit(f"bestmove {scored[0][0]}")
        elif cmd == "quit":
            break


def _set_position(rest: str) -> BoardState:
    rest = rest.strip()
    moves = []
    if " moves " in rest:
        rest, moves_part = rest.split(" moves ", 1)
        moves = moves_part.split()
    if rest.strip() == "startpos":
        state = parse_fen(START_FEN)
    elif rest.startswith("fen "):
        state = parse_fen(rest[4:].strip())
    else:
        raise ValueError(f"bad position command: {rest!r}")
    for uci in moves:
        for raw in _raw_legal_moves(state):
            frm, to, promo = raw
            if f"{_sq(frm)}{_sq(to)}{promo or ''}" == uci:
                state = _raw_apply(state, *raw)
                break
        else:
            raise ValueError(f"illegal move {uci} in position stream")
    return state


def _sq(index: int) -> str:
    return "abcdefgh"[index & 7] + "12345678"[index >> 3]


def _go_depth(rest: str) -> int:
    tokens = rest.split()
    if "depth" in tokens:
        return max(1, int(tokens[tokens.index("depth") + 1]))
    return 1  # nodes/movetime/infinite limits all map to the static search


if __name__ == "__main__":
    run()
