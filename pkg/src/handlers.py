# -*- coding: utf-8 -*-

import asyncio
import logging
import time
from dataclasses import asdict, replace
from functools import wraps
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .benchmarks import (
    BenchmarkId,
    breakthrough_node,
    linf_error,
    make_case,
    peak_arrival_time,
    tracer_setup,
)
from .config import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_SOLVER_ERROR, EXIT_UNEXPECTED, VERSION
from .errors import ConfigError, FemError, MeshFormatError, MeshValidationError, NoExactSolutionError
from .jobs import STUDY_BUILDERS, reproduce_study, run_convergence, run_gamma_sweep
from .mesh import check_mesh, generate_interval, generate_quarter_disk, generate_rectangle, load_mesh, save_mesh
from .run_config import (
    Tolerances,
    build_run_problem,
    check_gamma,
    config_hash,
    load_run_config,
    load_tracer_overrides,
)
from .specfun import mittag_leffler
from .utils import ResultTable, format_gamma, generated_at, write_csv, write_json

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = Path('results')
INPUT_ERRORS = (ConfigError, MeshFormatError, MeshValidationError)


# --- 装饰器 ---

def exit_code(func):
    """把异常映射为退出码: 输入错误 2，求解诊断 3，其他 1。"""
    @wraps(func)
    def wrapped(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except INPUT_ERRORS as e:
            logger.critical(f"输入错误: {e}")
            return EXIT_CONFIG_ERROR
        except FemError as e:
            logger.critical(f"求解失败 ({type(e).__name__}): {e}")
            return EXIT_SOLVER_ERROR
        except Exception as e:
            logger.critical(f"未预期的异常: {e}", exc_info=True)
            return EXIT_UNEXPECTED
    return wrapped


def _gammas(values: Optional[Sequence[float]], default: float) -> list:
    if not values:
        return [default]
    checked = [check_gamma(g, '--gamma') for g in values]
    return sorted(set(checked))


def _eigen_summary(fact) -> dict:
    return {
        'count': int(fact.n),
        'min_real': float(fact.lambdas.real.min()),
        'max_real': float(fact.lambdas.real.max()),
        'max_abs_imag': float(np.abs(fact.lambdas.imag).max()),
    }


# --- 命令处理器 ---

@exit_code
def cmd_solve(config_path: str, out_dir: Optional[str] = None, gammas: Optional[Sequence[float]] = None) -> int:
    cfg = load_run_config(config_path)
    gamma_list = _gammas(gammas, cfg.gamma)
    problem = build_run_problem(cfg)
    out = Path(out_dir) if out_dir else (cfg.output_dir or DEFAULT_OUT_DIR)

    start = time.perf_counter()
    results = asyncio.run(run_gamma_sweep(problem, gamma_list, cfg.times, cfg.tolerances))
    wall = time.perf_counter() - start

    runs = []
    for gamma, result in results.items():
        target = out / 'times.csv' if len(gamma_list) == 1 else out / f"gamma_{format_gamma(gamma)}" / 'times.csv'
        write_csv(result.series.to_frame(), target)
        entry = {'gamma': gamma, 'csv': str(target.relative_to(out))}
        if cfg.case is not None:
            case = replace(cfg.case, gamma=gamma)
            entry['linf_error_last'] = linf_error(case, result.series, cfg.times[-1], cfg.tolerances.ml_config())
        runs.append(entry)
        logger.info(f"γ={gamma:g} 结果已写入 {target}")

    prepared = next(iter(results.values())).prepared
    summary = {
        'version': VERSION,
        'generated_at': generated_at(),
        'config_hash': cfg.config_hash(gamma_list),
        'n_nodes': problem.mesh.n_nodes,
        'n_free': prepared.system.n_free,
        'eigenvalues': _eigen_summary(prepared.fact),
        'cond_estimate': prepared.fact.cond_estimate,
        'wall_time_s': wall,
        'runs': runs,
    }
    write_json(summary, out / 'summary.json')
    return EXIT_OK


@exit_code
def cmd_convergence(
    case_id: str,
    ladder: Sequence[int],
    t: float,
    gamma: float = 0.8,
    order: int = 1,
    out_dir: Optional[str] = None,
) -> int:
    gamma = check_gamma(gamma, '--gamma')
    if not ladder:
        raise ConfigError("至少需要一个网格密度", field='--n')
    if t <= 0:
        raise ConfigError(f"时刻必须 > 0，当前值: {t}", field='--time')
    try:
        case_id = BenchmarkId(case_id)
        params = {'gamma': gamma}
        if case_id in (BenchmarkId.DIFFUSION_1D, BenchmarkId.ADVECTION_DISPERSION_1D):
            params['order'] = order
        case = make_case(case_id, **params)
    except (ValueError, NoExactSolutionError) as e:
        raise ConfigError(str(e), field='--case') from e

    table = asyncio.run(run_convergence(case, list(ladder), t))
    out = Path(out_dir) if out_dir else DEFAULT_OUT_DIR
    table.write(out / 'convergence.csv')
    write_json({
        'version': VERSION,
        'generated_at': generated_at(),
        'config_hash': config_hash({'case': asdict(case), 'ladder': list(ladder), 't': t}),
        'case': case.id.value,
    }, out / 'summary.json')
    logger.info(f"收敛性结果已写入 {out / 'convergence.csv'}")
    return EXIT_OK


@exit_code
def cmd_tracer(
    gammas: Optional[Sequence[float]] = None,
    out_dir: Optional[str] = None,
    config_path: Optional[str] = None,
) -> int:
    scenario, n_elems = load_tracer_overrides(config_path)
    gamma_list = sorted(set(_gammas(gammas, scenario.gamma)) | {1.0})
    problem = tracer_setup(scenario, n_elems)
    times = scenario.output_times()
    node = breakthrough_node(problem.mesh, scenario)

    results = asyncio.run(run_gamma_sweep(problem, gamma_list, times))
    table = ResultTable(['t'] + [f"gamma_{format_gamma(g)}" for g in gamma_list])
    curves = {g: results[g].series.values[:, node] for g in gamma_list}
    for i, t in enumerate(times):
        table.add_row(t, *[curves[g][i] for g in gamma_list])

    out = Path(out_dir) if out_dir else DEFAULT_OUT_DIR
    table.write(out / 'breakthrough.csv')
    scenario_dict = asdict(scenario)
    write_json({
        'version': VERSION,
        'generated_at': generated_at(),
        'config_hash': config_hash({'scenario': scenario_dict, 'n_elems': n_elems, 'gammas': gamma_list}),
        'scenario': scenario_dict,
        'v0': scenario.v0,
        'd0': scenario.d0,
        'n_elems': n_elems,
        'peak_arrival': {format_gamma(g): peak_arrival_time(times, curves[g]) for g in gamma_list},
    }, out / 'summary.json')
    logger.info(f"穿透曲线已写入 {out / 'breakthrough.csv'} ({len(times)} 行)")
    return EXIT_OK


@exit_code
def cmd_ml(gamma: float, re: float, im: float = 0.0) -> int:
    value = mittag_leffler(gamma, complex(re, im))
    if im == 0.0:
        print(f"{value.real:.15g}")
    else:
        print(f"{value.real:.15g}{value.imag:+.15g}j")
    return EXIT_OK


@exit_code
def cmd_mesh_gen(
    kind: str,
    out_path: str,
    length: float = 1.0,
    height: float = 1.0,
    n: int = 10,
    ny: Optional[int] = None,
    order: int = 1,
    refine: int = 2,
) -> int:
    try:
        if kind == 'interval':
            mesh = generate_interval(length, n, order)
        elif kind == 'rectangle':
            mesh = generate_rectangle(length, height, n, ny or n)
        elif kind == 'quarter_disk':
            mesh = generate_quarter_disk(refine)
        else:
            raise ConfigError(f"未知网格类型 {kind!r}", field='kind')
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field=kind) from e
    save_mesh(mesh, out_path)
    return EXIT_OK


@exit_code
def cmd_mesh_check(path: str) -> int:
    mesh = load_mesh(path)
    check_mesh(mesh)
    tags = ', '.join(f"{name}={len(faces)}" for name, faces in sorted(mesh.boundary_tags.items()))
    print(f"ok: dim={mesh.dim} nodes={mesh.n_nodes} elements={len(mesh.elements)} tags[{tags}]")
    return EXIT_OK


@exit_code
def cmd_reproduce(study: str, out_dir: Optional[str] = None) -> int:
    if study not in STUDY_BUILDERS:
        raise ConfigError(f"未知参考研究 {study!r}，可选: {', '.join(STUDY_BUILDERS)}", field='--study')
    table = asyncio.run(reproduce_study(study))
    table.metadata.setdefault('config_hash', config_hash({'study': study, 'tolerances': asdict(Tolerances())}))
    out = Path(out_dir) if out_dir else DEFAULT_OUT_DIR
    target = out / f"{study}.csv"
    table.write(target)
    write_json({**table.metadata, 'generated_at': generated_at(), 'study': study}, out / f"{study}.json")
    logger.info(f"参考研究 {study} 已写入 {target}")
    return EXIT_OK
