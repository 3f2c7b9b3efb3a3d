"""Self-calibration: rate one ladder level against the whole ladder.

With --engine the level is played by a real UCI engine at that skill level.
Without it, rated random movers stand in and each capped game is decided from
the Elo expectation of the two ratings.

    python3 scripts/calibrate_ladder.py --level 5 --games 200
"""
from __future__ import annotations

import argparse

from chessmask.elo import (
    RatedPolicy,
    RulesConfig,
    StrengthAdjudicator,
    default_ladder,
    load_ladder,
    run_tournament,
)
from chessmask.engine import EnginePolicy, SearchLimits, handshake


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--level", type=int, default=5)
    p.add_argument("--games", type=int, default=200, help="games per ladder level")
    p.add_argument("--ladder")
    p.add_argument("--engine")
    p.add_argument("--movetime-ms", type=int, default=50)
    p.add_argument("--update", choices=("batch", "game"), default="batch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    args = p.parse_args()
    ladder = load_ladder(args.ladder) if args.ladder else default_ladder()
    target = next(e for e in ladder if e.level == args.level)
    if args.engine:
        limits = SearchLimits(movetime_ms=args.movetime_ms)
        handles = [handshake([args.engine], skill_level=args.level)]

        def opponent(entry):
            h = handshake([args.engine], skill_level=entry.level)
            handles.append(h)
            return EnginePolicy(h, limits, f"level{entry.level}")

        policy = EnginePolicy(handles[0], limits, f"level{args.level}")
        rules = RulesConfig()
    else:
        policy = RatedPolicy(target.rating, args.seed)

        def opponent(entry):
            return RatedPolicy(entry.rating, args.seed + entry.level + 1)

        rules = RulesConfig(max_plies=0, adjudicator=StrengthAdjudicator(args.seed))
    result = run_tournament(policy, ladder, args.games, opponent, rules=rules, update=args.update)
    print(result.table())
    print(f"table value {target.rating:.0f}, estimate {result.ledger.rating:.1f}, error {result.ledger.rating - target.rating:+.1f}")
    if args.out:
        result.write(args.out)
    if args.engine:
        for h in handles:
            h.close()


if __name__ == "__main__":
    main()
