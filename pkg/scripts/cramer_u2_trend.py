"""U^2 distance between the prime weight and the Cramer model on [1, N] as N grows."""

import argparse
from dataclasses import dataclass

from pnq.acceptance import cramer_gap_norm
from pnq.cramer import CramerParams, flat_magnitude_report


@dataclass
class Config:
    exponents: tuple[int, ...] = (10, 12, 14, 16, 17)
    threads: int = 1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--exponents", type=int, nargs="*")
    args = ap.parse_args()
    cfg = Config(exponents=tuple(args.exponents) if args.exponents else Config.exponents)

    print(f"{'N':>8} {'Q':>6} {'U^2 distance':>14}")
    for e in cfg.exponents:
        N = 2**e
        print(f"{N:>8d} {CramerParams.from_scale(N).Q:>6.3f} {cramer_gap_norm(N, cfg.threads):>14.6f}")
    rep = flat_magnitude_report(2**cfg.exponents[-1])
    print("flat part at the largest scale:", {k: rep[k] for k in sorted(rep) if not isinstance(rep[k], (list, dict))})


if __name__ == "__main__":
    main()
