"""Singular-series constant for each admissible n, by both routes, with the regularized tail bound."""

import argparse
from dataclasses import dataclass

from pnq.constants import kappa_direct, kappa_regularized
from pnq.quadfield import field_invariants


@dataclass
class Config:
    ns: tuple[int, ...] = (4, 6, 10, 12, 16, 22)
    direct_limit: int = 10**6
    tol: float = 1e-8


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="*")
    ap.add_argument("--direct-limit", type=int, default=Config.direct_limit)
    args = ap.parse_args()
    cfg = Config(ns=tuple(args.n) if args.n else Config.ns, direct_limit=args.direct_limit)

    print(f"{'n':>4} {'regularized':>14} {'tail bound':>11} {'P':>10} {'direct':>14} {'rel diff':>10}")
    for n in cfg.ns:
        inv = field_invariants(n)
        reg = kappa_regularized(inv, tol=cfg.tol)
        dire = kappa_direct(inv, cfg.direct_limit)
        rel = abs(reg.value - dire.value) / reg.value
        print(f"{n:>4} {reg.value:>14.9f} {reg.tail_bound:>11.2e} {reg.prime_limit:>10d} {dire.value:>14.9f} {rel:>10.2e}")


if __name__ == "__main__":
    main()
