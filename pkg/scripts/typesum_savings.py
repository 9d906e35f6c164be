"""Type I and Type II sums of the prime-minus-model weight, with savings over the trivial bound as L varies."""

import argparse
import math
from dataclasses import dataclass

from pnq.quadfield import field_invariants
from pnq.typesums import (
    ProductWeight,
    coefficient_source,
    difference_weight,
    lambda_prime_weight,
    support_index,
    type_i_sum,
    type_ii_sum,
    weight_by_name,
)


@dataclass
class Config:
    n: int = 4
    X: int = 200_000
    Ls: tuple[float, ...] = (10.0, 30.0, 100.0, 300.0)
    ell: int = 0
    seed: int = 1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--X", type=float, default=Config.X)
    ap.add_argument("--ell", type=int, default=Config.ell)
    args = ap.parse_args()
    cfg = Config(n=args.n, X=int(args.X), ell=args.ell)

    inv = field_invariants(cfg.n)
    gap = difference_weight(lambda_prime_weight, weight_by_name("cramer", cfg.X))
    w = ProductWeight(gap, gap, cfg.ell, inv)
    index = support_index(w, cfg.X)
    alpha = coefficient_source("random", cfg.seed)
    beta = coefficient_source("random", cfg.seed + 1)
    print(f"n = {cfg.n}, X = {cfg.X}, ell = {cfg.ell}")
    print(f"{'L':>8} {'|type I|':>12} {'savings':>10} {'|type II|':>12}  {'II / sqrt-cancel':>16}")
    for L in cfg.Ls:
        one = type_i_sum(w, L, cfg.X, index)
        two = type_ii_sum(w, L, cfg.X, alpha, beta, index)
        # square-root cancellation scale for the bilinear sum
        scale = math.sqrt(cfg.X * one["divisors"]) if one["divisors"] else float("nan")
        print(f"{L:>8.0f} {abs(one['value']):>12.3f} {one['savings']:>10.2f} {abs(two):>12.3f}  {abs(two) / scale:>16.4f}")


if __name__ == "__main__":
    main()
