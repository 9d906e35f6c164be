"""Weighted prime counts on x^2 + n y^2 against the predicted main term, across scales and frequencies."""

import argparse
from dataclasses import dataclass

from pnq.quadfield import field_invariants
from pnq.typesums import headline_ratio, headline_sum, main_term_ratio, main_term_sum


@dataclass
class Config:
    n: int = 4
    scales: tuple[int, ...] = (10**5, 10**6, 10**7)
    ells: tuple[int, ...] = (0, 1, 2, 4)
    threads: int = 1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--scales", type=float, nargs="*")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = Config(n=args.n, threads=args.threads)
    if args.scales:
        cfg.scales = tuple(int(x) for x in args.scales)

    inv = field_invariants(cfg.n)
    print(f"n = {cfg.n}")
    print(f"{'X':>12} {'ell':>4} {'|S_ell| / main':>16} {'sharp ratio':>12}")
    for X in cfg.scales:
        base = headline_sum(inv, X, 0, threads=cfg.threads)
        for ell in cfg.ells:
            val = base if ell == 0 else headline_sum(inv, X, ell, threads=cfg.threads)
            ratio = headline_ratio(inv, X, val) if ell == 0 else abs(val) / abs(base)
            sharp = main_term_ratio(inv, X, main_term_sum(inv, X, 0, cfg.threads)) if ell == 0 else float("nan")
            print(f"{X:>12d} {ell:>4d} {ratio:>16.6f} {sharp:>12.6f}")


if __name__ == "__main__":
    main()
