"""Self-contained chess rules kernel: positions, notation, legal moves,
termination. Everything here is an immutable value and every operation is a
pure function, so the kernel is safe for unrestricted concurrent use.
"""

from .board import (
    BLACK,
    BoardState,
    ChessError,
    FenError,
    Piece,
    START_FEN,
    Square,
    WHITE,
    parse_fen,
    serialize_fen,
)
from .moves import (
    AmbiguousSanError,
    IllegalMoveError,
    MoveParseError,
    MoveToken,
    UnmatchedSanError,
    apply_move,
    is_check,
    legal_moves,
    legal_moves_for_square,
    move_to_san,
    parse_move,
    perft,
)
from .status import (
    ALL_REASONS,
    CHECKMATE,
    DEFAULT_PLY_CAP,
    FIVEFOLD_REPETITION,
    FORFEIT,
    INSUFFICIENT_MATERIAL,
    MOVE_LIMIT,
    PositionHistory,
    SEVENTY_FIVE_MOVE_RULE,
    STALEMATE,
    Termination,
    game_status,
    repetition_key,
)

__all__ = [
    "ALL_REASONS",
    "AmbiguousSanError",
    "BLACK",
    "BoardState",
    "CHECKMATE",
    "ChessError",
    "DEFAULT_PLY_CAP",
    "FIVEFOLD_REPETITION",
    "FORFEIT",
    "FenError",
    "INSUFFICIENT_MATERIAL",
    "IllegalMoveError",
    "MOVE_LIMIT",
    "MoveParseError",
    "MoveToken",
    "Piece",
    "PositionHistory",
    "SEVENTY_FIVE_MOVE_RULE",
    "STALEMATE",
    "START_FEN",
    "Square",
    "Termination",
    "UnmatchedSanError",
    "WHITE",
    "apply_move",
    "game_status",
    "is_check",
    "legal_moves",
    "legal_moves_for_square",
    "move_to_san",
    "parse_fen",
    "parse_move",
    "perft",
    "repetition_key",
    "serialize_fen",
]
