"""Experiment harness: configuration, seeded runs, CSV traces, comparisons.

A run is fully determined by its configuration: the problem family, its size
and seed, the algorithm, rho, the iteration budget and the subproblem
tolerance.  Identical configurations produce identical traces (all columns
except the informational ``wall_ms`` timing are bit-reproducible, for any
thread count).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import admm as admm_mod
from . import aladin
from .diagnostics import CSV_HEADER, IterationRecord, comm_floats, energy, format_float, record_to_csv_row
from .problems import ConsensusProblem, pseudo_huber_problem, quadratic_problem, sensor_allocation_problem

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunSummary",
    "RunResult",
    "CompareResult",
    "ALGORITHMS",
    "PROBLEMS",
    "build_problem",
    "run",
    "compare",
]

ALGORITHMS = (
    "bfgs-aladin",
    "reduced-aladin",
    "matrix-prox-aladin",
    "admm-dual-first",
    "admm-aggregate-first",
)

PROBLEMS = ("quadratic", "pseudo-huber", "sensor-allocation")

_ALADIN_VARIANTS = {
    "bfgs-aladin": aladin.Variant.BFGS,
    "reduced-aladin": aladin.Variant.REDUCED,
    "matrix-prox-aladin": aladin.Variant.MATRIX_PROX,
}


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    problem: str = "sensor-allocation"
    algo: str = "bfgs-aladin"
    N: int = 20
    n: int = 10
    rho: float = 100.0
    max_iter: int = 200
    seed: int = 42
    hessian_schedule: int | None = None
    tol: float = 1e-10
    stop_tol: float = 0.0
    threads: int | None = None

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGORITHMS)}")
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.problem == "sensor-allocation" and self.n != 10:
            raise ConfigError("sensor-allocation is a fixed 10-dimensional problem (5 + 5)")
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        if self.max_iter < 1:
            raise ConfigError("max-iter must be at least 1")
        if self.hessian_schedule is not None and self.hessian_schedule < 2:
            raise ConfigError("hessian-schedule base must be at least 2")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.stop_tol < 0:
            raise ConfigError("stop-tol must be non-negative")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return self.threads
        return max(1, min(self.N, os.cpu_count() or 1))


@dataclass
class RunSummary:
    final_residual: float
    rounds: int
    total_floats_up: int
    total_floats_down: int
    stopped_early: bool


@dataclass
class RunResult:
    config: RunConfig
    records: list[IterationRecord]
    summary: RunSummary

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines += [record_to_csv_row(r) for r in self.records]
        s = self.summary
        lines.append(
            f"# final_residual={format_float(s.final_residual)} rounds={s.rounds} "
            f"total_floats_up={s.total_floats_up} total_floats_down={s.total_floats_down}"
        )
        return "\n".join(lines) + "\n"


@dataclass
class CompareResult:
    configs: list[RunConfig]
    results: dict[str, RunResult] = field(default_factory=dict)

    def to_csv(self) -> str:
        algos = [c.algo for c in self.configs]
        lines = ["round," + ",".join(algos)]
        depth = max(len(self.results[a].records) for a in algos)
        for k in range(depth):
            cells = [str(k + 1)]
            for a in algos:
                recs = self.results[a].records
                cells.append(format_float(recs[k].consensus_residual) if k < len(recs) else "")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def build_problem(config: RunConfig) -> ConsensusProblem:
    config.validate()
    if config.problem == "quadratic":
        return quadratic_problem(config.N, config.n, config.seed)
    if config.problem == "pseudo-huber":
        return pseudo_huber_problem(config.N, config.n, config.seed)
    return sensor_allocation_problem(config.N, config.seed)


def _executor_for(config: RunConfig):
    threads = config.resolved_threads()
    if threads <= 1:
        return None
    return ThreadPoolExecutor(max_workers=threads, thread_name_prefix="agent")


def _run_aladin(config: RunConfig, problem: ConsensusProblem, progress: Callable | None) -> list[IterationRecord]:
    variant = _ALADIN_VARIANTS[config.algo]
    agents, coord = aladin.init_states(problem, config.rho)
    executor = _executor_for(config)
    options = aladin.RoundOptions(
        subproblem_tol=config.tol,
        hessian_schedule=config.hessian_schedule,
        executor=executor,
        reference=problem.known_solution,
    )
    records: list[IterationRecord] = []
    try:
        for _ in range(config.max_iter):
            rec = aladin.run_round(variant, problem, agents, coord, config.rho, options)
            records.append(rec)
            if progress is not None:
                progress(rec)
            if config.stop_tol > 0 and rec.consensus_residual <= config.stop_tol:
                break
    finally:
        if executor is not None:
            executor.shutdown()
    return records


def _run_admm(config: RunConfig, problem: ConsensusProblem, progress: Callable | None) -> list[IterationRecord]:
    round_fn = (
        admm_mod.admm_round_dual_first
        if config.algo == "admm-dual-first"
        else admm_mod.admm_round_aggregate_first
    )
    states, z = admm_mod.admm_init_states(problem)
    executor = _executor_for(config)
    ref = problem.known_solution
    rho_eye = [config.rho * np.eye(problem.n) for _ in range(problem.num_agents)]
    records: list[IterationRecord] = []
    try:
        for k in range(1, config.max_iter + 1):
            t0 = time.perf_counter()
            z, up, down = round_fn(
                problem,
                states,
                z,
                config.rho,
                tol=config.tol,
                executor=executor,
                round_index=k,
            )
            residual = float(sum(np.linalg.norm(st.x - z) for st in states))
            dual_sum = np.zeros(problem.n)
            for st in states:
                dual_sum = dual_sum + st.lam
            e = None
            if ref is not None:
                e = energy(z, [st.lam for st in states], ref, rho_eye)
            rec = IterationRecord(
                round=k,
                consensus_residual=residual,
                objective_at_z=problem.total_value(z),
                energy=e,
                dual_sum_norm=float(np.linalg.norm(dual_sum)),
                floats_up=up,
                floats_down=down,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
            records.append(rec)
            if progress is not None:
                progress(rec)
            if config.stop_tol > 0 and residual <= config.stop_tol:
                break
    finally:
        if executor is not None:
            executor.shutdown()
    return records


def run(config: RunConfig, progress: Callable | None = None) -> RunResult:
    """Execute a configured run and return its trace and summary."""
    config.validate()
    problem = build_problem(config)
    if config.algo in _ALADIN_VARIANTS:
        records = _run_aladin(config, problem, progress)
    else:
        records = _run_admm(config, problem, progress)

    expected = comm_floats(config.algo, problem.num_agents, problem.n)
    for rec in records:
        if (rec.floats_up, rec.floats_down) != expected:
            raise RuntimeError(
                f"communication accounting mismatch at round {rec.round}: "
                f"counted {(rec.floats_up, rec.floats_down)}, formula {expected}"
            )

    summary = RunSummary(
        final_residual=records[-1].consensus_residual,
        rounds=len(records),
        total_floats_up=sum(r.floats_up for r in records),
        total_floats_down=sum(r.floats_down for r in records),
        stopped_early=len(records) < config.max_iter,
    )
    return RunResult(config=config, records=records, summary=summary)


def compare(configs: list[RunConfig]) -> CompareResult:
    """Run several algorithms on the identical problem instance.

    All configurations must agree on the problem family, size and seed so the
    traces differ only by algorithm.
    """
    if not configs:
        raise ConfigError("compare needs at least one configuration")
    for c in configs:
        c.validate()
    head = configs[0]
    for c in configs[1:]:
        if (c.problem, c.N, c.n, c.seed) != (head.problem, head.N, head.n, head.seed):
            raise ConfigError("compare requires all configurations to share problem, N, n and seed")
    if len({c.algo for c in configs}) != len(configs):
        raise ConfigError("compare requires distinct algorithms")

    result = CompareResult(configs=list(configs))
    for c in configs:
        result.results[c.algo] = run(c)
    return result
