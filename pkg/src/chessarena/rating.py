"""Glicko-1 per-game rating updates and convergence-optimal opponent sampling.

Ratings update after every game. Pairing prefers opponents whose rating is
close and whose deviation is already small, which maximizes the information
both players gain and therefore the rate at which deviations shrink.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

Q = math.log(10) / 400


@dataclass(frozen=True)
class RatingConfig:
    init_r: float = 1500.0
    init_rd: float = 350.0
    min_rd: float = 50.0
    display_rd_threshold: float = 100.0
    q: float = Q

    def __post_init__(self):
        if not 0 < self.min_rd < self.init_rd:
            raise ValueError("need 0 < min_rd < init_rd")
        if self.q <= 0:
            raise ValueError("q must be positive")


@dataclass(frozen=True)
class RatingState:
    r: float
    rd: float
    games_played: int = 0

    @classmethod
    def fresh(cls, cfg: RatingConfig) -> "RatingState":
        return cls(cfg.init_r, cfg.init_rd, 0)


@dataclass(frozen=True)
class MatchOutcome:
    """Game score from one player's perspective: 1 win, 0.5 draw, 0 loss."""

    s: float

    def __post_init__(self):
        if self.s not in (0.0, 0.5, 1.0):
            raise ValueError(f"score must be 0, 0.5 or 1, got {self.s}")

    @property
    def reversed(self) -> "MatchOutcome":
        return MatchOutcome(1.0 - self.s)


WIN = MatchOutcome(1.0)
DRAW = MatchOutcome(0.5)
LOSS = MatchOutcome(0.0)


@dataclass
class PoolEntry:
    id: str
    rating: RatingState
    mode: str | None = None
    legal_moves: bool = True
    available: bool = True


def g(rd: float, q: float = Q) -> float:
    """Attenuation factor for opponent uncertainty; g(0) = 1, decreasing."""
    return 1.0 / math.sqrt(1.0 + 3.0 * q * q * rd * rd / (math.pi * math.pi))


def expected_score(r: float, r_o: float, rd_o: float, q: float = Q) -> float:
    return 1.0 / (1.0 + 10.0 ** (-g(rd_o, q) * (r - r_o) / 400.0))


def d_squared(r: float, r_o: float, rd_o: float, q: float = Q) -> float:
    e = expected_score(r, r_o, rd_o, q)
    gf = g(rd_o, q)
    return 1.0 / (q * q * gf * gf * e * (1.0 - e))


def update_rating(
    me: RatingState, opp: RatingState, outcome: MatchOutcome, cfg: RatingConfig | None = None
) -> RatingState:
    """One post-game update; both players of a game must be updated from the
    opponent's pre-game state, which keeps the pair order-independent."""
    cfg = cfg or RatingConfig()
    q = cfg.q
    e = expected_score(me.r, opp.r, opp.rd, q)
    d2 = d_squared(me.r, opp.r, opp.rd, q)
    denom = 1.0 / (me.rd * me.rd) + 1.0 / d2
    new_r = me.r + (q / denom) * g(opp.rd, q) * (outcome.s - e)
    new_rd = max(cfg.min_rd, math.sqrt(1.0 / denom))
    return RatingState(new_r, new_rd, me.games_played + 1)


def update_pair(
    a: RatingState, b: RatingState, outcome_a: MatchOutcome, cfg: RatingConfig | None = None
) -> tuple[RatingState, RatingState]:
    """Update both sides of one game from pre-game snapshots."""
    return (
        update_rating(a, b, outcome_a, cfg),
        update_rating(b, a, outcome_a.reversed, cfg),
    )


def pairing_score(a: RatingState, b: RatingState, q: float = Q) -> float:
    """Matching score: E_a(1-E_a) * (g(rd_a)^2 + g(rd_b)^2), maximized by
    near-equal ratings and small deviations on both sides."""
    e = expected_score(a.r, b.r, b.rd, q)
    ga, gb = g(a.rd, q), g(b.rd, q)
    return e * (1.0 - e) * (ga * ga + gb * gb)


def sample_opponent(pool: list, requester: PoolEntry) -> PoolEntry:
    """Best-scoring available opponent; ties broken by lower rd, then id."""
    candidates = [p for p in pool if p.available and p.id != requester.id]
    if not candidates:
        raise LookupError("no available opponent in the pool")
    return min(
        candidates,
        key=lambda p: (-pairing_score(requester.rating, p.rating), p.rating.rd, p.id),
    )


def select_initiator(
    pool: list, *, player_id: str | None = None, rng: random.Random | None = None
) -> PoolEntry:
    """Specified startup returns the named player; random startup draws
    uniformly from the given RNG (seed it for reproducible runs)."""
    if not pool:
        raise LookupError("empty pool")
    if player_id is not None:
        for entry in pool:
            if entry.id == player_id:
                return entry
        raise LookupError(f"no player {player_id!r} in the pool")
    if rng is None:
        raise ValueError("random startup requires an rng")
    return pool[rng.randrange(len(pool))]


def pool_to_json(pool: list) -> str:
    """Deterministic pool document: entries sorted by id, fixed field order."""
    rows = [
        {
            "id": p.id,
            "r": p.rating.r,
            "rd": p.rating.rd,
            "games": p.rating.games_played,
            "mode": p.mode,
            "legal_moves_flag": p.legal_moves,
        }
        for p in sorted(pool, key=lambda p: p.id)
    ]
    return json.dumps(rows, indent=2) + "\n"


def pool_from_json(text: str) -> list:
    rows = json.loads(text)
    return [
        PoolEntry(
            id=row["id"],
            rating=RatingState(row["r"], row["rd"], row["games"]),
            mode=row.get("mode"),
            legal_moves=row.get("legal_moves_flag", True),
        )
        for row in rows
    ]
