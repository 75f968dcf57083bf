"""Board representation and FEN parsing/serialization.

Positions are immutable values: every mutation-style operation returns a new
``BoardState``. Internally the placement is a flat 64-tuple of signed piece
codes (white positive, black negative), indexed a1=0 .. h8=63, rank-major.
"""

from __future__ import annotations

from dataclasses import dataclass

WHITE = "w"
BLACK = "b"

# Piece kind codes for the internal signed encoding.
PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = 1, 2, 3, 4, 5, 6

KIND_TO_CODE = {"p": PAWN, "n": KNIGHT, "b": BISHOP, "r": ROOK, "q": QUEEN, "k": KING}
CODE_TO_KIND = {v: k for k, v in KIND_TO_CODE.items()}

# Castling rights bitmask.
CASTLE_WK, CASTLE_WQ, CASTLE_BK, CASTLE_BQ = 1, 2, 4, 8
_CASTLE_CHARS = (("K", CASTLE_WK), ("Q", CASTLE_WQ), ("k", CASTLE_BK), ("q", CASTLE_BQ))

FILE_NAMES = "abcdefgh"
RANK_NAMES = "12345678"
SQUARE_NAMES = tuple(f + r for r in RANK_NAMES for f in FILE_NAMES)

START_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"


class ChessError(Exception):
    """Base error for the rules kernel."""


class FenError(ChessError):
    """Raised for malformed or invariant-violating FEN text."""


@dataclass(frozen=True)
class Square:
    """A board square addressed by 0-based file (a=0) and rank (1st=0)."""

    file: int
    rank: int

    def __post_init__(self):
        if not (0 <= self.file <= 7 and 0 <= self.rank <= 7):
            raise ValueError(f"square off the board: file={self.file} rank={self.rank}")

    @classmethod
    def from_name(cls, name: str) -> "Square":
        if len(name) != 2 or name[0] not in FILE_NAMES or name[1] not in RANK_NAMES:
            raise ValueError(f"bad square name: {name!r}")
        return cls(FILE_NAMES.index(name[0]), RANK_NAMES.index(name[1]))

    @classmethod
    def from_index(cls, index: int) -> "Square":
        if not 0 <= index <= 63:
            raise ValueError(f"bad square index: {index}")
        return cls(index & 7, index >> 3)

    @property
    def index(self) -> int:
        return self.rank * 8 + self.file

    @property
    def name(self) -> str:
        return SQUARE_NAMES[self.index]

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Piece:
    """A piece kind ('p','n','b','r','q','k') plus color ('w' or 'b')."""

    kind: str
    color: str

    def __post_init__(self):
        if self.kind not in KIND_TO_CODE:
            raise ValueError(f"bad piece kind: {self.kind!r}")
        if self.color not in (WHITE, BLACK):
            raise ValueError(f"bad color: {self.color!r}")

    @classmethod
    def from_symbol(cls, symbol: str) -> "Piece":
        kind = symbol.lower()
        if kind not in KIND_TO_CODE:
            raise ValueError(f"bad piece symbol: {symbol!r}")
        return cls(kind, WHITE if symbol.isupper() else BLACK)

    @classmethod
    def from_code(cls, code: int) -> "Piece":
        return cls(CODE_TO_KIND[abs(code)], WHITE if code > 0 else BLACK)

    @property
    def symbol(self) -> str:
        return self.kind.upper() if self.color == WHITE else self.kind

    @property
    def code(self) -> int:
        c = KIND_TO_CODE[self.kind]
        return c if self.color == WHITE else -c


@dataclass(frozen=True)
class BoardState:
    """Full game position: placement, side to move, castling, en passant, clocks."""

    board: tuple
    turn: int  # +1 white to move, -1 black
    castling: int  # CASTLE_* bitmask
    ep: int | None  # en-passant target square index, if any
    halfmove_clock: int
    fullmove_number: int

    @classmethod
    def start(cls) -> "BoardState":
        return parse_fen(START_FEN)

    @property
    def side_to_move(self) -> str:
        return WHITE if self.turn > 0 else BLACK

    @property
    def castling_rights(self) -> str:
        s = "".join(ch for ch, bit in _CASTLE_CHARS if self.castling & bit)
        return s or "-"

    @property
    def en_passant(self) -> Square | None:
        return None if self.ep is None else Square.from_index(self.ep)

    @property
    def placement(self) -> tuple:
        """8x8 grid of optional Piece, indexed [rank][file] with rank 0 = rank 1."""
        return tuple(
            tuple(Piece.from_code(c) if c else None for c in self.board[r * 8 : r * 8 + 8])
            for r in range(8)
        )

    def piece_at(self, square) -> Piece | None:
        idx = _square_index(square)
        code = self.board[idx]
        return Piece.from_code(code) if code else None

    @property
    def fen(self) -> str:
        return serialize_fen(self)

    def __repr__(self) -> str:
        return f"BoardState({self.fen!r})"


def _square_index(square) -> int:
    if isinstance(square, Square):
        return square.index
    if isinstance(square, str):
        return Square.from_name(square).index
    if isinstance(square, int):
        if not 0 <= square <= 63:
            raise ValueError(f"bad square index: {square}")
        return square
    raise TypeError(f"not a square: {square!r}")


def parse_fen(text: str) -> BoardState:
    """Parse a six-field FEN string into a validated BoardState."""
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"expected 6 space-delimited fields, got {len(fields)}")
    placement, active, castling, ep_field, halfmove, fullmove = fields

    ranks = placement.split("/")
    if len(ranks) != 8:
        raise FenError(f"expected 8 ranks, got {len(ranks)}")
    board = [0] * 64
    for rank_idx, row in enumerate(ranks):
        rank = 7 - rank_idx  # FEN lists rank 8 first
        file = 0
        for ch in row:
            if ch.isdigit():
                if ch == "0" or ch == "9":
                    raise FenError(f"bad skip count {ch!r} in rank {8 - rank_idx}")
                file += int(ch)
            else:
                if file > 7:
                    raise FenError(f"rank {8 - rank_idx} has more than 8 squares")
                try:
                    piece = Piece.from_symbol(ch)
                except ValueError:
                    raise FenError(f"invalid piece symbol {ch!r}") from None
                board[rank * 8 + file] = piece.code
                file += 1
        if file != 8:
            raise FenError(f"rank {8 - rank_idx} has {file} squares, expected 8")

    if active == "w":
        turn = 1
    elif active == "b":
        turn = -1
    else:
        raise FenError(f"invalid active-color field {active!r}")

    rights = 0
    if castling != "-":
        seen = set()
        for ch in castling:
            for name, bit in _CASTLE_CHARS:
                if ch == name:
                    if ch in seen:
                        raise FenError(f"duplicate castling token {ch!r}")
                    seen.add(ch)
                    rights |= bit
                    break
            else:
                raise FenError(f"invalid castling token {ch!r}")

    ep = None
    if ep_field != "-":
        try:
            ep = Square.from_name(ep_field).index
        except ValueError:
            raise FenError(f"invalid en-passant field {ep_field!r}") from None

    try:
        halfmove_clock = int(halfmove)
        fullmove_number = int(fullmove)
    except ValueError:
        raise FenError("clock fields must be integers") from None
    if halfmove_clock < 0:
        raise FenError(f"negative halfmove clock {halfmove_clock}")
    if fullmove_number < 1:
        raise FenError(f"fullmove number must be positive, got {fullmove_number}")

    state = BoardState(tuple(board), turn, rights, ep, halfmove_clock, fullmove_number)
    _validate(state)
    return state


def _validate(state: BoardState) -> None:
    board = state.board
    if board.count(KING) != 1 or board.count(-KING) != 1:
        raise FenError("position must contain exactly one king per color")
    for idx in range(8):
        if abs(board[idx]) == PAWN or abs(board[56 + idx]) == PAWN:
            raise FenError("pawns may not stand on rank 1 or rank 8")
    if state.ep is not None:
        rank = state.ep >> 3
        # The target sits behind a pawn that just double-pushed, so it is on
        # rank 6 when white is to move and rank 3 when black is.
        if state.turn > 0 and rank != 5:
            raise FenError("en-passant square must be on rank 6 with white to move")
        if state.turn < 0 and rank != 2:
            raise FenError("en-passant square must be on rank 3 with black to move")


def serialize_fen(state: BoardState) -> str:
    """Serialize to canonical FEN; inverse of parse_fen on canonical input."""
    rows = []
    for rank in range(7, -1, -1):
        row = ""
        empty = 0
        for file in range(8):
            code = state.board[rank * 8 + file]
            if code == 0:
                empty += 1
            else:
                if empty:
                    row += str(empty)
                    empty = 0
                row += Piece.from_code(code).symbol
        if empty:
            row += str(empty)
        rows.append(row)
    ep = "-" if state.ep is None else SQUARE_NAMES[state.ep]
    return " ".join(
        [
            "/".join(rows),
            state.side_to_move,
            state.castling_rights,
            ep,
            str(state.halfmove_clock),
            str(state.fullmove_number),
        ]
    )
