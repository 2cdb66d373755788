# -*- coding: utf-8 -*-

import asyncio
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .assembly import GlobalSystem, ReducedRelaxation, assemble, reduce
from .benchmarks import (
    REFERENCE_DIFFUSION_TIME,
    REFERENCE_ADVECTION,
    REFERENCE_CONVERGENCE,
    REFERENCE_LONG_TIME,
    REFERENCE_DIFFUSION_2D,
    REFERENCE_QUARTER_DISK,
    QUARTER_DISK_CENTER_VALUE,
    BenchmarkCase,
    Problem,
    advection_dispersion_1d,
    build_problem,
    convergence_ratio,
    diffusion_1d,
    diffusion_2d,
    exact_solution,
    linf_error,
    normalized_error,
    quarter_disk,
    time_for_value,
    with_spacing,
)
from .config import SWEEP_CONCURRENCY
from .elements import interpolate_at
from .run_config import Tolerances
from .solver import EigenFactorization, SolutionSeries, eigendecompose, evolve
from .utils import ResultTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedProblem:
    """与 γ 无关的部分: 组装、约化与特征分解，可被多个 γ 共享。"""
    problem: Problem
    system: GlobalSystem
    reduced: ReducedRelaxation
    fact: EigenFactorization
    setup_seconds: float


@dataclass(frozen=True, eq=False)
class RunResult:
    prepared: PreparedProblem
    series: SolutionSeries
    wall_seconds: float


def prepare(problem: Problem, tolerances: Optional[Tolerances] = None) -> PreparedProblem:
    tolerances = tolerances or Tolerances()
    start = time.perf_counter()
    system = assemble(problem.mesh, problem.coeffs, problem.bcs)
    reduced = reduce(system, problem.u0)
    fact = eigendecompose(system.C, system.K, tolerances.eigen_residual, tolerances.defect_cond)
    return PreparedProblem(problem, system, reduced, fact, time.perf_counter() - start)


def evolve_prepared(
    prepared: PreparedProblem,
    gamma: float,
    times: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> RunResult:
    tolerances = tolerances or Tolerances()
    start = time.perf_counter()
    series = evolve(
        prepared.fact, prepared.reduced, gamma, times,
        ml_cfg=tolerances.ml_config(), imag_tol=tolerances.imag_residue, mesh=prepared.problem.mesh,
    )
    return RunResult(prepared, series, prepared.setup_seconds + time.perf_counter() - start)


def run_problem(
    problem: Problem,
    gamma: float,
    times: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> RunResult:
    """组装、约化、特征分解并在给定时刻求值。"""
    return evolve_prepared(prepare(problem, tolerances), gamma, times, tolerances)


def run_case(case: BenchmarkCase, times: Sequence[float], tolerances: Optional[Tolerances] = None) -> RunResult:
    return run_problem(build_problem(case), case.gamma, times, tolerances)


# --- 并发批量运行 ---

async def _limited(semaphore: asyncio.Semaphore, func, *args):
    async with semaphore:
        return await asyncio.to_thread(func, *args)


async def run_gamma_sweep(
    problem: Problem,
    gammas: Sequence[float],
    times: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> Dict[float, RunResult]:
    """同一问题的多个 γ：特征分解只做一次，各 γ 的求值并发执行。"""
    prepared = await asyncio.to_thread(prepare, problem, tolerances)
    semaphore = asyncio.Semaphore(SWEEP_CONCURRENCY)
    results = await asyncio.gather(
        *(_limited(semaphore, evolve_prepared, prepared, g, times, tolerances) for g in gammas)
    )
    logger.info(f"γ 扫描完成: {', '.join(f'{g:g}' for g in gammas)}")
    return dict(zip(gammas, results))


async def run_cases(
    cases: Sequence[BenchmarkCase],
    times: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> List[RunResult]:
    semaphore = asyncio.Semaphore(SWEEP_CONCURRENCY)
    return list(await asyncio.gather(*(_limited(semaphore, run_case, c, times, tolerances) for c in cases)))


async def run_convergence(
    case: BenchmarkCase,
    ladder: Sequence[int],
    t: float,
    tolerances: Optional[Tolerances] = None,
) -> ResultTable:
    """按网格密度序列计算 L∞ 误差与收敛阶。"""
    cases = [with_spacing(case, n) for n in ladder]
    results = await run_cases(cases, [t], tolerances)
    ml_cfg = (tolerances or Tolerances()).ml_config()
    table = ResultTable(['h', 'linf_error', 'ratio'])
    previous: Optional[Tuple[float, float]] = None
    for c, result in zip(cases, results):
        error = linf_error(c, result.series, t, ml_cfg)
        ratio = None if previous is None else convergence_ratio(previous[1], error, previous[0], c.spacing)
        table.add_row(c.spacing, error, ratio)
        previous = (c.spacing, error)
        logger.info(f"h={c.spacing:.6g}: L∞={error:.6e}" + (f", ratio={ratio:.4f}" if ratio is not None else ""))
    return table


# --- 复现参考研究 ---

async def _diffusion_time_study() -> ResultTable:
    times = [0.0] + list(REFERENCE_DIFFUSION_TIME['times'])
    cases = [diffusion_1d(10, 1), diffusion_1d(10, 2), diffusion_1d(100, 1)]
    results = await run_cases(cases, times)
    table = ResultTable(['t', 'linear_h10', 'quadratic_h10', 'linear_h100'])
    for t in times:
        row = [0.0 if t == 0 else normalized_error(c, r.series, c.midpoint, t) for c, r in zip(cases, results)]
        table.add_row(t, *row)
    return table


def _spacing_rows(cases: Sequence[BenchmarkCase], results: Sequence[RunResult], times: Sequence[float]) -> ResultTable:
    table = ResultTable(['h'] + [f"t={t:g}" for t in times])
    for c, r in zip(cases, results):
        table.add_row(c.spacing, *[normalized_error(c, r.series, c.midpoint, t) for t in times])
    return table


async def _advection_study() -> ResultTable:
    times = REFERENCE_ADVECTION['times']
    cases = [advection_dispersion_1d(n) for n in (10, 20, 40)]
    return _spacing_rows(cases, await run_cases(cases, times), times)


async def _convergence_study() -> ResultTable:
    ladder = REFERENCE_CONVERGENCE['n_elems']
    linear = await run_convergence(diffusion_1d(10, 1), ladder, 10.0)
    quadratic = await run_convergence(diffusion_1d(10, 2), ladder, 10.0)
    table = ResultTable(['h', 'linf_linear', 'ratio_linear', 'linf_quadratic', 'ratio_quadratic'])
    for lin, quad in zip(linear.rows, quadratic.rows):
        table.add_row(lin[0], lin[1], lin[2], quad[1], quad[2])
    return table


async def _long_time_study() -> ResultTable:
    times = REFERENCE_LONG_TIME['times']
    cases = [diffusion_1d(100, 1), diffusion_1d(100, 2)]
    results = await run_cases(cases, times)
    table = ResultTable(['element'] + [f"t={t:g}" for t in times])
    for label, c, r in zip(('linear', 'quadratic'), cases, results):
        table.add_row(label, *[normalized_error(c, r.series, c.midpoint, t) for t in times])
    return table


async def _diffusion_2d_study() -> ResultTable:
    times = REFERENCE_DIFFUSION_2D['times']
    cases = [diffusion_2d(n) for n in (4, 8, 16)]
    return _spacing_rows(cases, await run_cases(cases, times), times)


async def _quarter_disk_study() -> ResultTable:
    gamma = 0.8
    t = time_for_value(QUARTER_DISK_CENTER_VALUE, gamma)
    cases = [quarter_disk(0, gamma), quarter_disk(2, gamma)]
    results = await run_cases(cases, [t])
    table = ResultTable(['x', 'y', 'elements_3', 'elements_48', 'exact'], metadata={'t': t})
    for point in REFERENCE_QUARTER_DISK:
        values = [interpolate_at(r.series.mesh, r.series.at(t), point) for r in results]
        table.add_row(point[0], point[1], *values, exact_solution(cases[1], point, t))
    logger.info(f"探测时刻 t={t:.10f} (E_0.8(-t^0.8) = {QUARTER_DISK_CENTER_VALUE})")
    return table


STUDY_BUILDERS = {
    'diffusion_time': _diffusion_time_study,
    'advection': _advection_study,
    'convergence': _convergence_study,
    'long_time': _long_time_study,
    'diffusion_2d': _diffusion_2d_study,
    'quarter_disk': _quarter_disk_study,
}


async def reproduce_study(name: str) -> ResultTable:
    if name not in STUDY_BUILDERS:
        raise ValueError(f"未知参考研究 {name!r}，可选: {', '.join(STUDY_BUILDERS)}")
    return await STUDY_BUILDERS[name]()

