"""Random instances of the spaced-point and Farey large sieve, the sifted-count bound, and Rankin's lower bound."""

import argparse
from dataclasses import dataclass

import numpy as np

from pnq.largesieve import (
    farey_check,
    prop_c1_check,
    random_sieve_system,
    random_spaced_points,
    rankin_lower_bound_check,
    sieve_bound,
    sifted_count,
)


@dataclass
class Config:
    instances: int = 20
    seed: int = 7
    coeff_N: int = 64
    delta: float = 0.05


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=Config.instances)
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    cfg = Config(instances=args.instances, seed=args.seed)
    rng = np.random.default_rng(cfg.seed)

    worst_c1 = worst_farey = 0.0
    sieve_viol = 0
    worst_sieve = 0.0
    rankin_bad = 0
    for _ in range(cfg.instances):
        a = rng.normal(size=cfg.coeff_N) + 1j * rng.normal(size=cfg.coeff_N)
        pts = random_spaced_points(rng, 12, cfg.delta, 1)
        lhs, rhs, _ = prop_c1_check(a, pts, cfg.delta)
        worst_c1 = max(worst_c1, lhs / rhs)
        lhs, rhs, _ = farey_check(a, int(rng.integers(2, 9)))
        worst_farey = max(worst_farey, lhs / rhs)
        system = random_sieve_system(rng)
        bound, _ = sieve_bound(system)
        count = sifted_count(system)
        worst_sieve = max(worst_sieve, count / float(bound))
        sieve_viol += count > bound
        rankin_bad += rankin_lower_bound_check(system)["status"] == "fail"

    print(f"instances            {cfg.instances}")
    print(f"spaced points        max lhs/rhs = {worst_c1:.4f}")
    print(f"Farey fractions      max lhs/rhs = {worst_farey:.4f}")
    print(f"sifted count         max count/bound = {worst_sieve:.4f}, violations = {sieve_viol}")
    print(f"Rankin lower bound   failures = {rankin_bad}")


if __name__ == "__main__":
    main()
