"""Run the acceptance criteria and print one line per criterion; optionally write the measured values as JSON."""

import argparse
import json
import sys

from pnq.acceptance import CRITERIA, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--criteria", type=int, nargs="*", default=sorted(CRITERIA))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    results = run_suite(args.criteria, args.threads, echo=lambda s: print(s, flush=True))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.as_dict() for r in results], fh, indent=2, default=str)
    print(f"{sum(r.passed for r in results)}/{len(results)} passed")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
