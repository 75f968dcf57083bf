#!/usr/bin/env python3
"""How fast does a fresh entrant's rating deviation converge under the
score-maximizing pairing rule, compared against random pairing?

Simulates pools of incumbents with known true strengths; game outcomes are
Bernoulli draws from the logistic expectation on the true strengths. Prints
games-to-reliability (rd < 100) statistics per pairing policy.

    python scripts/convergence_study.py --trials 200
"""

import argparse
import random
import statistics

from chessarena.rating import (
    LOSS,
    PoolEntry,
    RatingConfig,
    RatingState,
    WIN,
    expected_score,
    sample_opponent,
    update_pair,
)


def run_trial(seed: int, policy: str, max_games: int = 60):
    rng = random.Random(seed)
    cfg = RatingConfig()
    strengths = {"new": rng.uniform(1200, 2000)}
    pool = [PoolEntry("new", RatingState.fresh(cfg))]
    for i in range(9):
        strengths[f"inc{i}"] = 1150.0 + 140.0 * i
        pool.append(PoolEntry(f"inc{i}", RatingState(strengths[f"inc{i}"], 60.0, 30)))
    entrant = pool[0]
    for game in range(1, max_games + 1):
        if policy == "score":
            opp = sample_opponent(pool, entrant)
        else:
            opp = pool[1 + rng.randrange(len(pool) - 1)]
        p_win = expected_score(strengths["new"], strengths[opp.id], 0.0)
        outcome = WIN if rng.random() < p_win else LOSS
        entrant.rating, opp.rating = update_pair(entrant.rating, opp.rating, outcome, cfg)
        if entrant.rating.rd < 100:
            return game
    return None


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("| Pairing | Converged | Median games | P90 games |")
    print("|---|---|---|---|")
    for policy in ("score", "uniform"):
        games = [run_trial(args.seed * 100_000 + t, policy) for t in range(args.trials)]
        done = [g for g in games if g is not None]
        median = statistics.median(done) if done else float("nan")
        p90 = sorted(done)[int(0.9 * len(done))] if done else float("nan")
        print(f"| {policy} | {len(done)}/{args.trials} | {median:.0f} | {p90:.0f} |")


if __name__ == "__main__":
    main()
