"""Coverage study of the sequential and naive intervals, with a width-ratio summary.

    python3 scripts/run_coverage.py --config configs/coverage.ini --out results/coverage.csv
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from bouq.config import ExperimentConfig, load_config
from bouq.coverage import CI_NAIVE, CI_SEQ, coverage_experiment

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "coverage.ini"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--repetitions", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/coverage.csv")
    args = ap.parse_args()

    cfg: ExperimentConfig = load_config(args.config, seed=args.seed, n_repetitions=args.repetitions)
    t0 = time.perf_counter()
    rows, _, failed = coverage_experiment(cfg, args.out, threads=args.threads)
    cells = {(r[0], r[1], r[2]): r for r in rows}
    print(f"{'nu':>4} {'iter':>4} {'seq cov':>8} {'naive cov':>9} {'seq width':>9} {'naive width':>11} {'ratio':>6}")
    for nu in cfg.nu_values():
        for k in sorted(cfg.checkpoints):
            s, g = cells[("" if nu is None else nu, k, CI_SEQ)], cells[("" if nu is None else nu, k, CI_NAIVE)]
            print(f"{nu!s:>4} {k:>4} {s[3]:>8.2f} {g[3]:>9.2f} {s[4]:>9.3f} {g[4]:>11.3f} {s[4] / g[4]:>6.2f}")
    print(f"failed repetitions: {failed}; {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
