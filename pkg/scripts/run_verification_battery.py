#!/usr/bin/env python3
"""Randomized oracle battery at configurable scale.

Draws random chain/star/fig2 queries with random predicates and checks each
against the brute-force oracle: output equality, full reduction, Bloom
superset, and the intermediate-size safety bounds.

    python scripts/run_verification_battery.py --queries 200 --seed 7
"""

import argparse
import sys
import time
from collections import Counter

import numpy as np

sys.path.insert(0, "tests")  # reuse the randomized query builders
from conftest import random_generated_query  # noqa: E402

from rpt.harness import verify  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--max-rows", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    verdicts = Counter()
    classes = Counter()
    t0 = time.time()
    failures = []
    for i in range(args.queries):
        query, instance = random_generated_query(rng, max_rows=args.max_rows)
        report = verify(query, instance)
        classes[report.classification] += 1
        for check in report.checks:
            verdicts[(check.name, check.passed)] += 1
            if not check.passed:
                failures.append((query.name, check.name, check.detail))
    elapsed = time.time() - t0

    print(f"{args.queries} queries in {elapsed:.1f}s; classes: {dict(classes)}")
    for (name, passed), count in sorted(verdicts.items()):
        print(f"  {'PASS' if passed else 'FAIL'} {name}: {count}")
    for failure in failures:
        print("  FAILED:", failure)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
