"""Train toy models on FEN prompts and on PGN movetext from the same games, then compare.

    python3 scripts/fen_vs_pgn.py --out runs/fen_vs_pgn --steps 800
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import fields

from chessmask.experiment import CONDITIONS, ExperimentConfig, run_experiment, write_results


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="runs/fen_vs_pgn")
    p.add_argument("--conditions", default=",".join(CONDITIONS))
    for f in fields(ExperimentConfig):
        if f.type in ("int", "float"):
            p.add_argument("--" + f.name.replace("_", "-"), type=int if f.type == "int" else float)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if getattr(args, f.name, None) is not None}
    cfg = ExperimentConfig(**overrides)
    data, results = run_experiment(cfg, args.conditions.split(","))
    write_results(args.out, cfg, data, results)
    print(f"{'condition':<18} {'CE':>8} {'valid':>7} {'legal':>7} {'best':>7}")
    for r in results.values():
        rep = r.report
        print(f"{r.name:<18} {r.mean_ce:8.3f} {rep.valid_rate:7.2%} {rep.legal_rate:7.2%} {rep.best_rate:7.2%}")


if __name__ == "__main__":
    main()
