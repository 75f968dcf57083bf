"""Legal move generation, move application, UCI/SAN parsing and rendering.

Generation computes checkers and absolute pins up front and emits only legal
moves; en-passant captures, whose discovered-check geometry is awkward, are
validated by making the move and testing the king. Raw moves are (from, to,
promotion) int/str triples; the public API wraps them in MoveToken.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .board import (
    BISHOP,
    BLACK,
    CODE_TO_KIND,
    ChessError,
    KING,
    KNIGHT,
    KIND_TO_CODE,
    PAWN,
    Piece,
    QUEEN,
    ROOK,
    SQUARE_NAMES,
    Square,
    BoardState,
    CASTLE_WK,
    CASTLE_WQ,
    CASTLE_BK,
    CASTLE_BQ,
    WHITE,
    _square_index,
)

UCI = "uci"
SAN = "san"


class MoveParseError(ChessError):
    """Move text that cannot be interpreted at all."""


class AmbiguousSanError(MoveParseError):
    """SAN that matches more than one legal move."""


class UnmatchedSanError(MoveParseError):
    """Well-formed SAN that matches no legal move in the position."""


class IllegalMoveError(ChessError):
    """A well-formed move that is not legal in the position."""


@dataclass(frozen=True, eq=False)
class MoveToken:
    """A move plus the surface text it was read from.

    Equality and hashing use only the resolved coordinates, so the same move
    parsed from UCI and from SAN compares equal.
    """

    from_square: Square
    to_square: Square
    promotion: str | None = None
    surface: str = ""
    notation: str = UCI

    @property
    def uci(self) -> str:
        return self.from_square.name + self.to_square.name + (self.promotion or "")

    @classmethod
    def from_uci(cls, text: str) -> "MoveToken":
        m = _UCI_RE.match(text)
        if not m:
            raise MoveParseError(f"not a UCI move: {text!r}")
        return cls(
            Square.from_name(m.group(1)),
            Square.from_name(m.group(2)),
            m.group(3) or None,
            surface=text,
            notation=UCI,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MoveToken):
            return NotImplemented
        return self.uci == other.uci

    def __hash__(self) -> int:
        return hash(self.uci)

    def __repr__(self) -> str:
        return f"MoveToken({self.uci!r})"


_UCI_RE = re.compile(r"^([a-h][1-8])([a-h][1-8])([nbrq])?$")
_SAN_RE = re.compile(
    r"^([NBRQK])?([a-h])?([1-8])?(x)?([a-h][1-8])(?:=?([NBRQ]))?([+#])?$"
)
_CASTLE_RE = re.compile(r"^(O-O-O|O-O|0-0-0|0-0)([+#])?$")


def _build_tables():
    knight, king, rays = [], [], []
    knight_deltas = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))
    king_deltas = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
    # First four directions orthogonal, last four diagonal (pin/attack logic
    # relies on that split).
    dirs = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (-1, 1), (1, -1))
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        knight.append(
            tuple((r + dr) * 8 + f + df for df, dr in knight_deltas if 0 <= f + df <= 7 and 0 <= r + dr <= 7)
        )
        king.append(
            tuple((r + dr) * 8 + f + df for df, dr in king_deltas if 0 <= f + df <= 7 and 0 <= r + dr <= 7)
        )
        per_dir = []
        for df, dr in dirs:
            ray = []
            nf, nr = f + df, r + dr
            while 0 <= nf <= 7 and 0 <= nr <= 7:
                ray.append(nr * 8 + nf)
                nf += df
                nr += dr
            per_dir.append(tuple(ray))
        rays.append(tuple(per_dir))
    pawn_att_w, pawn_att_b = [], []  # squares holding a pawn that attacks sq
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        pawn_att_w.append(
            tuple((r - 1) * 8 + f + df for df in (-1, 1) if 0 <= f + df <= 7 and r - 1 >= 0)
        )
        pawn_att_b.append(
            tuple((r + 1) * 8 + f + df for df in (-1, 1) if 0 <= f + df <= 7 and r + 1 <= 7)
        )
    return tuple(knight), tuple(king), tuple(rays), tuple(pawn_att_w), tuple(pawn_att_b)


KNIGHT_TABLE, KING_TABLE, RAYS, PAWN_ATTACKERS_W, PAWN_ATTACKERS_B = _build_tables()

_PROMO_KINDS = ("q", "r", "b", "n")


def _attacked(board, sq: int, by: int, ignore: int = -1) -> bool:
    """Is sq attacked by side `by`? `ignore` is treated as empty (king lifts)."""
    pawn_from = PAWN_ATTACKERS_W[sq] if by > 0 else PAWN_ATTACKERS_B[sq]
    pawn = PAWN * by
    for p in pawn_from:
        if board[p] == pawn:
            return True
    knight = KNIGHT * by
    for p in KNIGHT_TABLE[sq]:
        if board[p] == knight:
            return True
    king = KING * by
    for p in KING_TABLE[sq]:
        if board[p] == king:
            return True
    rook, bishop, queen = ROOK * by, BISHOP * by, QUEEN * by
    rays = RAYS[sq]
    for d in range(4):
        for p in rays[d]:
            code = board[p]
            if code == 0 or p == ignore:
                continue
            if code == rook or code == queen:
                return True
            break
    for d in range(4, 8):
        for p in rays[d]:
            code = board[p]
            if code == 0 or p == ignore:
                continue
            if code == bishop or code == queen:
                return True
            break
    return False


def is_check(state: BoardState) -> bool:
    """True if the side to move is in check."""
    king_sq = state.board.index(KING * state.turn)
    return _attacked(state.board, king_sq, -state.turn)


def _checkers_and_pins(board, king_sq: int, us: int):
    """Return (checker squares, block mask or None, {pinned sq: allowed set})."""
    them = -us
    checkers = []
    slider_paths = {}
    pinned = {}
    pawn_from = PAWN_ATTACKERS_W[king_sq] if them > 0 else PAWN_ATTACKERS_B[king_sq]
    for p in pawn_from:
        if board[p] == PAWN * them:
            checkers.append(p)
    for p in KNIGHT_TABLE[king_sq]:
        if board[p] == KNIGHT * them:
            checkers.append(p)
    rook, bishop, queen = ROOK * them, BISHOP * them, QUEEN * them
    rays = RAYS[king_sq]
    for d in range(8):
        slider = bishop if d >= 4 else rook
        shield = None
        path = []
        for p in rays[d]:
            code = board[p]
            path.append(p)
            if code == 0:
                continue
            if shield is None:
                if code == slider or code == queen:
                    checkers.append(p)
                    slider_paths[p] = frozenset(path)
                elif code * us > 0:
                    shield = p
                    continue
                break  # any blocking piece ends the ray
            else:
                if code == slider or code == queen:
                    pinned[shield] = frozenset(path)
                break
    block = None
    if len(checkers) == 1:
        # Single check: interpose on the slider's path or capture the checker.
        c = checkers[0]
        block = slider_paths.get(c, frozenset((c,)))
    return checkers, block, pinned


def _raw_apply(state: BoardState, frm: int, to: int, promo: str | None) -> BoardState:
    """Apply a pseudo-legal raw move without legality checks."""
    board = list(state.board)
    us = state.turn
    moving = board[frm]
    captured = board[to]
    ep = None
    kind = moving * us  # positive kind code
    if kind == PAWN:
        if to == state.ep and captured == 0 and (to & 7) != (frm & 7):
            board[to - 8 * us] = 0  # pawn taken en passant
            captured = PAWN  # counts as a capture for the clock
        elif abs(to - frm) == 16:
            ep = frm + 8 * us
        if promo:
            moving = KIND_TO_CODE[promo] * us
    elif kind == KING and abs((to & 7) - (frm & 7)) == 2:
        if to > frm:  # kingside: rook h-file to king's other side
            board[frm + 1] = board[frm + 3]
            board[frm + 3] = 0
        else:
            board[frm - 1] = board[frm - 4]
            board[frm - 4] = 0
    board[to] = moving
    board[frm] = 0
    castling = state.castling & _RIGHTS_MASK[frm] & _RIGHTS_MASK[to]
    halfmove = 0 if (kind == PAWN or captured != 0) else state.halfmove_clock + 1
    fullmove = state.fullmove_number + (1 if us < 0 else 0)
    return BoardState(tuple(board), -us, castling, ep, halfmove, fullmove)


def _rights_mask():
    mask = [CASTLE_WK | CASTLE_WQ | CASTLE_BK | CASTLE_BQ] * 64
    full = mask[0]
    mask[0] = full & ~CASTLE_WQ  # a1
    mask[7] = full & ~CASTLE_WK  # h1
    mask[4] = full & ~(CASTLE_WK | CASTLE_WQ)  # e1
    mask[56] = full & ~CASTLE_BQ  # a8
    mask[63] = full & ~CASTLE_BK  # h8
    mask[60] = full & ~(CASTLE_BK | CASTLE_BQ)  # e8
    return tuple(mask)


_RIGHTS_MASK = _rights_mask()


def _raw_legal_moves(state: BoardState):
    """All legal moves as (from, to, promotion-or-None) triples, unsorted."""
    board = state.board
    us = state.turn
    them = -us
    king_sq = board.index(KING * us)
    checkers, block, pinned = _checkers_and_pins(board, king_sq, us)
    moves = []

    for to in KING_TABLE[king_sq]:
        if board[to] * us > 0:
            continue
        if not _attacked(board, to, them, ignore=king_sq):
            moves.append((king_sq, to, None))

    if len(checkers) >= 2:
        return moves

    mask = block  # None means unrestricted

    fwd = 8 * us
    start_rank = 1 if us > 0 else 6
    promo_rank = 7 if us > 0 else 0
    ep = state.ep
    for frm in range(64):
        code = board[frm]
        if code * us <= 0 or frm == king_sq:
            continue
        kind = code * us
        allowed = pinned.get(frm)
        if kind == PAWN:
            one = frm + fwd
            targets = []
            if board[one] == 0:
                targets.append(one)
                two = one + fwd
                if (frm >> 3) == start_rank and board[two] == 0:
                    targets.append(two)
            caps = PAWN_ATTACKERS_B[frm] if us > 0 else PAWN_ATTACKERS_W[frm]
            # The attacker tables are symmetric: squares a pawn on frm attacks.
            for to in caps:
                if board[to] * us < 0:
                    targets.append(to)
                elif to == ep and ep is not None:
                    nxt = _raw_apply(state, frm, to, None)
                    if not _attacked(nxt.board, nxt.board.index(KING * us), them):
                        moves.append((frm, to, None))
            for to in targets:
                if allowed is not None and to not in allowed:
                    continue
                if mask is not None and to not in mask:
                    continue
                if (to >> 3) == promo_rank:
                    for promo in _PROMO_KINDS:
                        moves.append((frm, to, promo))
                else:
                    moves.append((frm, to, None))
        elif kind == KNIGHT:
            if allowed is not None:
                continue  # a pinned knight can never move
            for to in KNIGHT_TABLE[frm]:
                if board[to] * us > 0:
                    continue
                if mask is not None and to not in mask:
                    continue
                moves.append((frm, to, None))
        else:
            dir_range = range(4, 8) if kind == BISHOP else range(4) if kind == ROOK else range(8)
            rays = RAYS[frm]
            for d in dir_range:
                for to in rays[d]:
                    occupied = board[to]
                    if occupied * us > 0:
                        break
                    ok = (allowed is None or to in allowed) and (mask is None or to in mask)
                    if ok:
                        moves.append((frm, to, None))
                    if occupied != 0:
                        break

    if not checkers:
        if us > 0:
            if (
                state.castling & CASTLE_WK
                and board[5] == 0
                and board[6] == 0
                and board[7] == ROOK
                and not _attacked(board, 4, them)
                and not _attacked(board, 5, them)
                and not _attacked(board, 6, them)
            ):
                moves.append((4, 6, None))
            if (
                state.castling & CASTLE_WQ
                and board[1] == 0
                and board[2] == 0
                and board[3] == 0
                and board[0] == ROOK
                and not _attacked(board, 4, them)
                and not _attacked(board, 3, them)
                and not _attacked(board, 2, them)
            ):
                moves.append((4, 2, None))
        else:
            if (
                state.castling & CASTLE_BK
                and board[61] == 0
                and board[62] == 0
                and board[63] == -ROOK
                and not _attacked(board, 60, them)
                and not _attacked(board, 61, them)
                and not _attacked(board, 62, them)
            ):
                moves.append((60, 62, None))
            if (
                state.castling & CASTLE_BQ
                and board[57] == 0
                and board[58] == 0
                and board[59] == 0
                and board[56] == -ROOK
                and not _attacked(board, 60, them)
                and not _attacked(board, 59, them)
                and not _attacked(board, 58, them)
            ):
                moves.append((60, 58, None))
    return moves


def _raw_uci(raw) -> str:
    frm, to, promo = raw
    return SQUARE_NAMES[frm] + SQUARE_NAMES[to] + (promo or "")


def _token(raw) -> MoveToken:
    frm, to, promo = raw
    uci = _raw_uci(raw)
    return MoveToken(Square.from_index(frm), Square.from_index(to), promo, surface=uci, notation=UCI)


def legal_moves(state: BoardState) -> list:
    """All legal moves, sorted lexicographically by UCI string."""
    return [_token(raw) for raw in sorted(_raw_legal_moves(state), key=_raw_uci)]


def legal_moves_for_square(state: BoardState, square):
    """Piece on the square (if any) and the legal moves starting there.

    Moves are empty when the square is empty or holds a piece of the side not
    to move; the piece itself is still reported.
    """
    idx = _square_index(square)
    piece = state.piece_at(idx)
    if piece is None or piece.color != state.side_to_move:
        return piece, []
    return piece, [mv for mv in legal_moves(state) if mv.from_square.index == idx]


def apply_move(state: BoardState, move: MoveToken) -> BoardState:
    """Apply a legal move; raises IllegalMoveError otherwise."""
    frm = move.from_square.index
    raw = (frm, move.to_square.index, move.promotion)
    if raw not in _raw_legal_moves(state):
        code = state.board[frm]
        if code == 0:
            reason = f"no piece on {move.from_square.name}"
        elif code * state.turn < 0:
            reason = f"piece on {move.from_square.name} belongs to the opponent"
        else:
            reason = "move is not legal in this position"
        raise IllegalMoveError(f"{move.uci}: {reason}")
    return _raw_apply(state, *raw)


def perft(state: BoardState, depth: int) -> int:
    """Count leaf nodes of the legal-move tree at exactly `depth`."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if depth == 0:
        return 1
    raw = _raw_legal_moves(state)
    if depth == 1:
        return len(raw)
    return sum(perft(_raw_apply(state, *m), depth - 1) for m in raw)


def parse_move(text: str, state: BoardState) -> MoveToken:
    """Interpret move text: UCI first, then SAN against the board.

    UCI parses without consulting the position (legality is the caller's
    concern); SAN is resolved against the legal moves. Model output is noisy,
    so surrounding punctuation, backticks and stray case are tolerated.
    """
    cleaned = text.strip().strip("`'\"*.,;:!?()[]{}<>").strip()
    if not cleaned:
        raise MoveParseError("empty move text")
    m = _UCI_RE.match(cleaned.lower())
    if m:
        return MoveToken(
            Square.from_name(m.group(1)),
            Square.from_name(m.group(2)),
            m.group(3) or None,
            surface=text,
            notation=UCI,
        )
    return _parse_san(cleaned, state, original=text)


def _parse_san(text: str, state: BoardState, original: str = "") -> MoveToken:
    surface = original or text
    castle = _CASTLE_RE.match(text)
    legal = legal_moves(state)
    if castle:
        kingside = castle.group(1) in ("O-O", "0-0")
        king_from = 4 if state.turn > 0 else 60
        king_to = king_from + 2 if kingside else king_from - 2
        for mv in legal:
            if mv.from_square.index == king_from and mv.to_square.index == king_to:
                return MoveToken(mv.from_square, mv.to_square, None, surface=surface, notation=SAN)
        raise UnmatchedSanError(f"castling not legal here: {text!r}")
    m = _SAN_RE.match(text)
    if not m:
        raise MoveParseError(f"cannot interpret move text: {surface!r}")
    piece_letter, dis_file, dis_rank, _capture, target, promo, _suffix = m.groups()
    kind = (piece_letter or "P").lower()
    to_idx = Square.from_name(target).index
    want_promo = promo.lower() if promo else None
    matches = []
    for mv in legal:
        frm = mv.from_square
        if state.board[frm.index] * state.turn != KIND_TO_CODE[kind]:
            continue
        if mv.to_square.index != to_idx:
            continue
        if mv.promotion != want_promo:
            continue
        if kind == "k" and abs(mv.to_square.file - frm.file) == 2:
            continue  # castling is only written O-O / O-O-O
        if dis_file and frm.file != "abcdefgh".index(dis_file):
            continue
        if dis_rank and frm.rank != "12345678".index(dis_rank):
            continue
        matches.append(mv)
    if not matches:
        raise UnmatchedSanError(f"no legal move matches SAN {surface!r}")
    if len(matches) > 1:
        raise AmbiguousSanError(f"SAN {surface!r} matches {len(matches)} moves")
    mv = matches[0]
    return MoveToken(mv.from_square, mv.to_square, mv.promotion, surface=surface, notation=SAN)


def move_to_san(state: BoardState, move: MoveToken) -> str:
    """Minimal unambiguous SAN for a legal move, with +/# suffix."""
    legal = legal_moves(state)
    if move not in legal:
        raise IllegalMoveError(f"{move.uci}: not legal in this position")
    frm, to = move.from_square, move.to_square
    code = state.board[frm.index]
    kind = code * state.turn
    is_capture = state.board[to.index] != 0 or (kind == PAWN and state.ep == to.index and frm.file != to.file)

    if kind == KING and abs(to.file - frm.file) == 2:
        core = "O-O" if to.file > frm.file else "O-O-O"
    elif kind == PAWN:
        core = ""
        if is_capture:
            core += frm.name[0] + "x"
        core += to.name
        if move.promotion:
            core += "=" + move.promotion.upper()
    else:
        letter = CODE_TO_KIND[kind].upper()
        rivals = [
            mv
            for mv in legal
            if mv.to_square == to
            and mv.from_square != frm
            and state.board[mv.from_square.index] == code
        ]
        dis = ""
        if rivals:
            same_file = any(mv.from_square.file == frm.file for mv in rivals)
            same_rank = any(mv.from_square.rank == frm.rank for mv in rivals)
            if not same_file:
                dis = frm.name[0]
            elif not same_rank:
                dis = frm.name[1]
            else:
                dis = frm.name
        core = letter + dis + ("x" if is_capture else "") + to.name

    after = _raw_apply(state, frm.index, to.index, move.promotion)
    if is_check(after):
        core += "#" if not _raw_legal_moves(after) else "+"
    return core
