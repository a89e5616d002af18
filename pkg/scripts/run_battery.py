#!/usr/bin/env python3
"""Generate the seeded oracle battery and write one benchmark CSV.

The script:
 - generates GNL, MGNL, zero opt-out and JAP_DP instances into `.battery/`
 - runs the exact solvers and the matching oracle on every instance
 - writes `.battery/results.csv` without the timing column so reruns compare byte for byte
"""

from __future__ import annotations

import asyncio
import logging
import pathlib
import sys

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from gnlopt.const import (  # noqa: E402
    KIND_GNL,
    KIND_JAP_DP,
    KIND_MGNL,
    METHOD_BISECTION,
    METHOD_JAP_DP,
    METHOD_LOGCONVEX,
    METHOD_MGNL,
    METHOD_ZERO_OPTOUT,
    TERMINATION_OPTIMAL,
)
from gnlopt.instances import GenSpec, generate, save  # noqa: E402
from gnlopt.runner import oracle_method_for, records_to_csv, run_jobs  # noqa: E402

OUT_DIR = REPO_ROOT / ".battery"
_LOGGER = logging.getLogger("run_battery")


def battery() -> list[tuple[GenSpec, tuple[str, ...]]]:
    """Return every generation request with the methods it runs."""
    plan: list[tuple[GenSpec, tuple[str, ...]]] = []
    seed = 0
    for m in (6, 8, 10, 12):
        for n_nests in (2, 3, 4):
            for _ in range(5):
                plan.append((GenSpec(KIND_GNL, m, n_nests, seed), (METHOD_BISECTION, METHOD_LOGCONVEX)))
                seed += 1
    for T in (2, 3):
        for m in (6, 8, 10):
            for _ in range(5):
                plan.append((GenSpec(KIND_MGNL, m, 2, seed, T=T), (METHOD_MGNL,)))
                seed += 1
    for _ in range(20):
        plan.append((GenSpec(KIND_GNL, 8, 3, seed, zero_optout_nests=1), (METHOD_ZERO_OPTOUT,)))
        seed += 1
    for m in (4, 5, 6):
        for _ in range(10):
            plan.append((GenSpec(KIND_JAP_DP, m, 2, seed, L=3), (METHOD_JAP_DP,)))
            seed += 1
    return plan


def main() -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    tasks = []
    for spec, methods in battery():
        path = save(generate(spec), OUT_DIR / f"{spec.kind.lower()}_{spec.seed:03d}.json")
        tasks.extend((path, method) for method in methods)
        tasks.append((path, oracle_method_for(spec.kind)))
    records = asyncio.run(run_jobs(tasks, jobs=4))
    output = OUT_DIR / "results.csv"
    output.write_text(records_to_csv(records, timing=False), encoding="utf-8")
    failures = [record for record in records if record.termination != TERMINATION_OPTIMAL]
    _LOGGER.info("Wrote %s records to %s, %s not optimal", len(records), output, len(failures))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
