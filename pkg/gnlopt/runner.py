"""Run solver and oracle methods on instance files and collect result records."""

from __future__ import annotations

import asyncio
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass
import io
import logging
import math
import os
import pathlib
import time
from typing import Any

from .assortment import mixed_beta, solve_gnl_bisection, solve_gnl_logconvex, solve_mgnl, solve_zero_optout
from .bnb import SolveResult
from .config import CONF_EPSILON, CONF_PRICING, cp_config, seed_override, solver_config, validate_config
from .const import (
    CSV_HEADER,
    DEFAULT_EPSILON,
    EXIT_ERROR,
    EXIT_INFEASIBLE,
    EXIT_LIMIT,
    EXIT_OK,
    FLOAT_DIGITS,
    KIND_GNL,
    KIND_JAP_CP,
    KIND_JAP_DP,
    KIND_MGNL,
    LIMIT_TERMINATIONS,
    METHOD_BISECTION,
    METHOD_JAP_CP,
    METHOD_JAP_DP,
    METHOD_LOGCONVEX,
    METHOD_MGNL,
    METHOD_ORACLE_ASSORT,
    METHOD_ORACLE_JAP_CP,
    METHOD_ORACLE_JAP_DP,
    METHOD_ZERO_OPTOUT,
    TERMINATION_ERROR,
    TERMINATION_INFEASIBLE,
    TERMINATION_OPTIMAL,
)
from .errors import GnlError, InfeasibleError, ModelError
from .instances import Instance, load
from .models import GnlModel, MgnlModel
from .oracle import OracleResult, enumerate_assortments, enumerate_jap_cp, enumerate_jap_dp
from .pricing import solve_jap_cp, solve_jap_dp
from .reformulate import choose_beta

_LOGGER = logging.getLogger(__name__)

_ORACLE_FOR_KIND = {
    KIND_GNL: METHOD_ORACLE_ASSORT,
    KIND_MGNL: METHOD_ORACLE_ASSORT,
    KIND_JAP_DP: METHOD_ORACLE_JAP_DP,
    KIND_JAP_CP: METHOD_ORACLE_JAP_CP,
}


@dataclass(frozen=True, slots=True)
class RunRecord:
    """One (instance, method) run in CSV column order."""

    instance: str
    method: str
    objective: float
    bound: float
    gap: float
    nodes: int
    cuts_oa: int
    cuts_sc: int
    cuts_mc: int
    seconds: float
    seed: int
    termination: str

    @property
    def sort_key(self) -> tuple[str, str]:
        return self.instance, self.method

    def row(self, *, timing: bool = True) -> list[str]:
        return [
            self.instance,
            self.method,
            _real(self.objective),
            _real(self.bound),
            _real(self.gap),
            str(self.nodes),
            str(self.cuts_oa),
            str(self.cuts_sc),
            str(self.cuts_mc),
            f"{self.seconds:.6f}" if timing else "",
            str(self.seed),
            self.termination,
        ]


def _real(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{FLOAT_DIGITS}g")


def oracle_method_for(kind: str) -> str:
    return _ORACLE_FOR_KIND[kind]


def _gnl_model(instance: Instance) -> GnlModel:
    if not isinstance(instance.model, GnlModel):
        raise ModelError(f"method needs a GNL instance, got {instance.kind}")
    return instance.model


def _mixed_model(instance: Instance) -> MgnlModel:
    if isinstance(instance.model, MgnlModel):
        return instance.model
    return MgnlModel(segments=(_gnl_model(instance),), theta=[1.0])


def _solve(instance: Instance, method: str, settings: Mapping[str, Any], epsilon: float) -> SolveResult | OracleResult:
    config = solver_config(settings)
    constraints = instance.constraints
    if method == METHOD_BISECTION:
        model = _gnl_model(instance)
        return solve_gnl_bisection(model, constraints, choose_beta(model), config=config)
    if method == METHOD_LOGCONVEX:
        model = _gnl_model(instance)
        return solve_gnl_logconvex(model, constraints, choose_beta(model), config)
    if method == METHOD_ZERO_OPTOUT:
        model = _gnl_model(instance)
        return solve_zero_optout(model, constraints, choose_beta(model), config)
    if method == METHOD_MGNL:
        mixed = _mixed_model(instance)
        beta = mixed_beta(mixed)
        return solve_mgnl(mixed, constraints, beta, config)
    if method == METHOD_JAP_DP:
        if instance.ladder is None:
            raise ModelError(f"method {method} needs a price ladder")
        return solve_jap_dp(instance.structure, instance.ladder, constraints, config)
    if method == METHOD_JAP_CP:
        if instance.bounds is None:
            raise ModelError(f"method {method} needs price bounds")
        return solve_jap_cp(instance.structure, instance.bounds, constraints, epsilon, cp_config(settings)).as_result()
    if method == METHOD_ORACLE_ASSORT:
        if isinstance(instance.model, MgnlModel):
            return enumerate_assortments(instance.model, constraints)
        model = _gnl_model(instance)
        return enumerate_assortments(model, constraints, allow_empty_nests=model.has_zero_optout)
    if method == METHOD_ORACLE_JAP_DP:
        if instance.ladder is None:
            raise ModelError(f"method {method} needs a price ladder")
        return enumerate_jap_dp(instance.structure, instance.ladder, constraints)
    if method == METHOD_ORACLE_JAP_CP:
        if instance.bounds is None:
            raise ModelError(f"method {method} needs price bounds")
        return enumerate_jap_cp(instance.structure, instance.bounds, constraints)
    raise ModelError(f"Unknown method: {method}")


def _record(name: str, method: str, seed: int, outcome: SolveResult | OracleResult, seconds: float) -> RunRecord:
    if isinstance(outcome, OracleResult):
        return RunRecord(
            instance=name,
            method=method,
            objective=outcome.objective,
            bound=outcome.objective,
            gap=0.0,
            nodes=outcome.evaluated,
            cuts_oa=0,
            cuts_sc=0,
            cuts_mc=0,
            seconds=seconds,
            seed=seed,
            termination=TERMINATION_OPTIMAL,
        )
    counts = outcome.family_counts()
    return RunRecord(
        instance=name,
        method=method,
        objective=outcome.objective,
        bound=outcome.bound,
        gap=outcome.gap,
        nodes=outcome.nodes,
        cuts_oa=counts.get("oa", 0),
        cuts_sc=counts.get("sc", 0),
        cuts_mc=counts.get("mc", 0),
        seconds=seconds,
        seed=seed,
        termination=outcome.termination,
    )


def _failed(name: str, method: str, seed: int, termination: str, seconds: float) -> RunRecord:
    return RunRecord(
        instance=name,
        method=method,
        objective=math.nan,
        bound=math.nan,
        gap=math.nan,
        nodes=0,
        cuts_oa=0,
        cuts_sc=0,
        cuts_mc=0,
        seconds=seconds,
        seed=seed,
        termination=termination,
    )


def run_one(
    path: str | os.PathLike[str],
    method: str,
    settings: Mapping[str, Any] | None = None,
    *,
    epsilon: float | None = None,
) -> RunRecord:
    """Solve one instance file with one method; failures become records."""
    file_path = pathlib.Path(path)
    name = file_path.stem
    resolved = validate_config(settings)
    gap_epsilon = epsilon if epsilon is not None else resolved[CONF_PRICING].get(CONF_EPSILON, DEFAULT_EPSILON)
    started = time.perf_counter()
    try:
        instance = load(file_path)
    except GnlError as err:
        _LOGGER.error("Cannot load %s: %s", file_path, err)
        return _failed(name, method, seed_override(0), TERMINATION_ERROR, time.perf_counter() - started)
    seed = seed_override(instance.seed)
    try:
        outcome = _solve(instance, method, resolved, gap_epsilon)
    except InfeasibleError as err:
        _LOGGER.info("%s on %s is infeasible: %s", method, name, err)
        return _failed(name, method, seed, TERMINATION_INFEASIBLE, time.perf_counter() - started)
    except GnlError as err:
        _LOGGER.error("%s on %s failed: %s", method, name, err)
        return _failed(name, method, seed, TERMINATION_ERROR, time.perf_counter() - started)
    except (ValueError, ArithmeticError) as err:
        # numpy's LinAlgError is a ValueError
        _LOGGER.exception("%s on %s raised %s", method, name, type(err).__name__)
        return _failed(name, method, seed, TERMINATION_ERROR, time.perf_counter() - started)
    record = _record(name, method, seed, outcome, time.perf_counter() - started)
    _LOGGER.info("%s on %s: objective=%s gap=%s (%s)", method, name, record.objective, record.gap, record.termination)
    return record


def _run_task(task: tuple[str, str, Mapping[str, Any] | None, float | None]) -> RunRecord:
    path, method, settings, epsilon = task
    return run_one(path, method, settings, epsilon=epsilon)


async def run_jobs(
    tasks: Iterable[tuple[str | os.PathLike[str], str]],
    settings: Mapping[str, Any] | None = None,
    *,
    jobs: int = 1,
    epsilon: float | None = None,
) -> list[RunRecord]:
    """Run (instance, method) pairs, up to `jobs` at a time, sorted by (instance, method)."""
    payloads = [(str(path), method, settings, epsilon) for path, method in tasks]
    if jobs <= 1:
        records = [_run_task(payload) for payload in payloads]
    else:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            records = await asyncio.gather(*(loop.run_in_executor(executor, _run_task, payload) for payload in payloads))
    return sorted(records, key=lambda record: record.sort_key)


def exit_code_for(record: RunRecord) -> int:
    """Map a record onto the exit-code contract."""
    if record.termination == TERMINATION_OPTIMAL:
        return EXIT_OK
    if record.termination == TERMINATION_INFEASIBLE:
        return EXIT_INFEASIBLE
    if record.termination in LIMIT_TERMINATIONS and math.isfinite(record.objective):
        return EXIT_LIMIT
    return EXIT_ERROR


def records_to_csv(records: Sequence[RunRecord], *, timing: bool = True) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in records:
        writer.writerow(record.row(timing=timing))
    return buffer.getvalue()


def append_record(path: str | os.PathLike[str], record: RunRecord) -> None:
    """Append a record row, writing the header first for a new file."""
    file_path = pathlib.Path(path)
    fresh = not file_path.exists() or file_path.stat().st_size == 0
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("a", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if fresh:
            writer.writerow(CSV_HEADER)
        writer.writerow(record.row())
