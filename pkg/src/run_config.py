# -*- coding: utf-8 -*-

import hashlib
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .assembly import BoundaryData, DirichletSpec
from .benchmarks import BenchmarkCase, BenchmarkId, Problem, TracerScenario, build_problem, make_case
from .config import DEFECT_COND_LIMIT, EIGEN_RESIDUAL_TOL, IMAG_RESIDUE_TOL, ML_ABS_TOL, TAG_DIRICHLET
from .elements import CoefficientField
from .errors import ConfigError, MeshValidationError
from .mesh import load_mesh
from .specfun import MLConfig, bessel_j0

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PROFILES = ('zero', 'constant', 'sine', 'exp', 'bessel_j0')

_BENCHMARK_PARAMS = {
    BenchmarkId.DIFFUSION_1D: ('n_elems', 'order', 'length'),
    BenchmarkId.ADVECTION_DISPERSION_1D: ('n_elems', 'order', 'a', 'k'),
    BenchmarkId.DIFFUSION_2D: ('n_elems',),
    BenchmarkId.QUARTER_DISK: ('refine',),
}


@dataclass(frozen=True)
class Tolerances:
    ml_abs_tol: float = ML_ABS_TOL
    eigen_residual: float = EIGEN_RESIDUAL_TOL
    imag_residue: float = IMAG_RESIDUE_TOL
    defect_cond: float = DEFECT_COND_LIMIT

    def ml_config(self) -> MLConfig:
        return MLConfig(target_abs_tol=self.ml_abs_tol)


@dataclass(frozen=True)
class RunConfig:
    path: Path
    problem: Dict[str, Any]
    gamma: float
    times: Tuple[float, ...]
    output_dir: Optional[Path]
    tolerances: Tolerances
    case: Optional[BenchmarkCase] = None

    def canonical(self, gammas: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        """参与哈希的规范化内容（不含 output 块）。

        gammas 为实际运行的 γ 列表；内置算例按补全默认值后的参数哈希。
        """
        if self.case is not None:
            problem = {**asdict(self.case), 'id': self.case.id.value}
            problem.pop('gamma')
        else:
            problem = self.problem
        return {
            'problem': problem,
            'gamma': sorted({float(g) for g in (gammas or [self.gamma])}),
            'times': list(self.times),
            'tolerances': asdict(self.tolerances),
        }

    def config_hash(self, gammas: Optional[Sequence[float]] = None) -> str:
        return config_hash(self.canonical(gammas))


def config_hash(payload: Dict[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


class _Locator:
    """把字段名映射到配置文本中的行号，供报错定位。"""

    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path

    def line_of(self, key: str) -> Optional[int]:
        match = re.search(r'"' + re.escape(key) + r'"\s*:', self.text)
        if match is None:
            return None
        return self.text.count('\n', 0, match.start()) + 1

    def error(self, field: str, reason: str) -> ConfigError:
        key = re.split(r'[.\[]', field)[-1].rstrip(']') if field else ''
        return ConfigError(reason, field=field, line=self.line_of(key) if key else None, path=self.path)


# --- 字段校验 ---

def _number(loc: _Locator, value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise loc.error(field, f"必须是有限数值，当前值: {value!r}")
    return float(value)


def _positive(loc: _Locator, value: Any, field: str) -> float:
    number = _number(loc, value, field)
    if number <= 0:
        raise loc.error(field, f"必须 > 0，当前值: {value!r}")
    return number


def _integer(loc: _Locator, value: Any, field: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise loc.error(field, f"必须是 >= {minimum} 的整数，当前值: {value!r}")
    return value


def check_gamma(value: Any, field: str = 'gamma', loc: Optional[_Locator] = None) -> float:
    loc = loc or _Locator('', '<cli>')
    gamma = _number(loc, value, field)
    if not 0.0 < gamma <= 1.0:
        raise loc.error(field, f"γ 必须在 (0, 1] 内，当前值: {value!r}")
    return gamma


def _times(loc: _Locator, raw: Any) -> Tuple[float, ...]:
    if isinstance(raw, dict):
        for key in ('start', 'stop', 'step'):
            if key not in raw:
                raise loc.error(f"times.{key}", "缺少字段")
        start = _number(loc, raw['start'], 'times.start')
        stop = _number(loc, raw['stop'], 'times.stop')
        step = _positive(loc, raw['step'], 'times.step')
        if stop < start:
            raise loc.error('times.stop', f"必须 >= start，当前值: {stop}")
        count = int(math.floor((stop - start) / step + 1e-9))
        values = [round(start + k * step, 12) for k in range(count + 1)]
    elif isinstance(raw, list) and raw:
        values = [_number(loc, v, f"times[{i}]") for i, v in enumerate(raw)]
    else:
        raise loc.error('times', "必须是非空数组或 {start, stop, step}")
    if values[0] < 0:
        raise loc.error('times', f"时刻必须非负，当前首值: {values[0]}")
    if any(b < a for a, b in zip(values, values[1:])):
        raise loc.error('times', "时刻必须按升序排列")
    return tuple(values)


def _tolerances(loc: _Locator, raw: Any) -> Tolerances:
    if raw is None:
        return Tolerances()
    if not isinstance(raw, dict):
        raise loc.error('tolerances', "必须是对象")
    known = {f.name for f in fields(Tolerances)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise loc.error(f"tolerances.{unknown[0]}", "未知的容差字段")
    values = {key: _positive(loc, raw[key], f"tolerances.{key}") for key in raw}
    return Tolerances(**values)


def _benchmark_case(loc: _Locator, raw: Dict[str, Any], gamma: float) -> BenchmarkCase:
    try:
        case_id = BenchmarkId(raw['benchmark'])
    except ValueError:
        raise loc.error('problem.benchmark', f"未知算例 {raw['benchmark']!r}") from None
    if case_id not in _BENCHMARK_PARAMS:
        raise loc.error('problem.benchmark', "tracer 算例请使用 tracer 子命令")
    allowed = _BENCHMARK_PARAMS[case_id]
    params: Dict[str, Any] = {}
    for key, value in raw.items():
        if key == 'benchmark':
            continue
        if key not in allowed:
            raise loc.error(f"problem.{key}", f"算例 {case_id.value} 不接受该参数")
        if key in ('n_elems', 'refine'):
            params[key] = _integer(loc, value, f"problem.{key}", 0 if key == 'refine' else 1)
        elif key == 'order':
            if value not in (1, 2) or isinstance(value, bool):
                raise loc.error('problem.order', f"只能是 1 或 2，当前值: {value!r}")
            params[key] = value
        else:
            params[key] = _positive(loc, value, f"problem.{key}")
    return make_case(case_id, gamma=gamma, **params)


def _profile(loc: _Locator, raw: Any, field: str) -> Callable[[np.ndarray], float]:
    if not isinstance(raw, dict) or 'profile' not in raw:
        raise loc.error(field, f"必须是 {{\"profile\": ...}}，可选 {', '.join(PROFILES)}")
    name = raw['profile']
    if name == 'zero':
        return lambda x: 0.0
    if name == 'constant':
        value = _number(loc, raw.get('value', 1.0), f"{field}.value")
        return lambda x: value
    if name == 'sine':
        length = _positive(loc, raw.get('length', 1.0), f"{field}.length")
        return lambda x: float(np.prod(np.sin(np.pi * np.asarray(x) / length)))
    if name == 'exp':
        return lambda x: math.exp(x[0])
    if name == 'bessel_j0':
        return lambda x: bessel_j0(float(np.linalg.norm(x)))
    raise loc.error(f"{field}.profile", f"未知剖面 {name!r}，可选 {', '.join(PROFILES)}")


def _resolve(base_dir: Path, loc: _Locator, value: Any, field: str) -> Path:
    if not isinstance(value, str) or not value:
        raise loc.error(field, "必须是文件路径字符串")
    path = Path(value)
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise loc.error(field, f"文件不存在: {path}")
    return path


def _coefficients(loc: _Locator, raw: Any, dim: int) -> None:
    if not isinstance(raw, dict):
        raise loc.error('custom.coefficients', "必须是对象")
    for key, value in raw.items():
        field = f"coefficients.{key}"
        if key not in ('A', 'D', 'P', 'f'):
            raise loc.error(field, "只支持 A、D、P、f")
        if key == 'A' and isinstance(value, list):
            if len(value) != dim:
                raise loc.error(field, f"速度向量长度必须为 {dim}，当前为 {len(value)}")
            for i, v in enumerate(value):
                _number(loc, v, f"{field}[{i}]")
        elif key == 'D' and isinstance(value, list):
            if len(value) != dim or not all(isinstance(row, list) and len(row) == dim for row in value):
                raise loc.error(field, f"扩散张量必须是 {dim}×{dim} 矩阵")
            for i, row in enumerate(value):
                for j, v in enumerate(row):
                    _number(loc, v, f"{field}[{i}][{j}]")
        elif key == 'D':
            if _number(loc, value, field) < 0:
                raise loc.error(field, f"必须 >= 0，当前值: {value!r}")
        else:
            _number(loc, value, field)


def _boundary_tags(loc: _Locator, raw: Any) -> None:
    if not isinstance(raw, dict):
        raise loc.error('boundary.tags', "必须是对象")
    for name, faces in raw.items():
        pairs_ok = isinstance(faces, list) and all(
            isinstance(face, list) and len(face) == 2
            and all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in face)
            for face in faces
        )
        if not pairs_ok:
            raise loc.error(f"tags.{name}", "必须是 [单元, 面] 非负整数对列表")


def _validate_custom(loc: _Locator, raw: Any, base_dir: Path) -> None:
    if not isinstance(raw, dict):
        raise loc.error('problem.custom', "必须是对象")
    for key in ('mesh', 'initial_condition'):
        if key not in raw:
            raise loc.error(f"custom.{key}", "缺少字段")
    mesh = load_mesh(_resolve(base_dir, loc, raw['mesh'], 'custom.mesh'))
    ic = raw['initial_condition']
    if isinstance(ic, dict) and 'file' in ic:
        _resolve(base_dir, loc, ic['file'], 'initial_condition.file')
    else:
        _profile(loc, ic, 'custom.initial_condition')
    _coefficients(loc, raw.get('coefficients', {}), mesh.dim)

    boundary = raw.get('boundary', {})
    if not isinstance(boundary, dict):
        raise loc.error('custom.boundary', "必须是对象")
    unknown = sorted(set(boundary) - {'dirichlet', 'neumann', 'convective', 'tags'})
    if unknown:
        raise loc.error(f"boundary.{unknown[0]}", "未知的边界字段")
    if 'tags' in boundary:
        _boundary_tags(loc, boundary['tags'])
        try:
            mesh.with_tags(boundary['tags'])
        except MeshValidationError as e:
            raise loc.error('boundary.tags', str(e)) from e
    dirichlet = boundary.get('dirichlet', {'profile': 'zero'})
    _profile(loc, dirichlet, 'boundary.dirichlet')
    if 'rate' in dirichlet:
        rate = _number(loc, dirichlet['rate'], 'dirichlet.rate')
        if rate < 0:
            raise loc.error('dirichlet.rate', f"必须 >= 0，当前值: {rate}")
    if 'neumann' in boundary:
        neumann = boundary['neumann']
        if not isinstance(neumann, dict) or set(neumann) != {'q'}:
            raise loc.error('boundary.neumann', "必须是 {\"q\": 数值}")
        _number(loc, neumann['q'], 'neumann.q')
    if 'convective' in boundary:
        convective = boundary['convective']
        if not isinstance(convective, dict):
            raise loc.error('boundary.convective', "必须是 {\"h_c\": 数值, \"u_inf\": 数值}")
        for key in ('h_c', 'u_inf'):
            if key not in convective:
                raise loc.error(f"convective.{key}", "缺少字段")
        unknown = sorted(set(convective) - {'h_c', 'u_inf'})
        if unknown:
            raise loc.error(f"convective.{unknown[0]}", "未知字段")
        if _number(loc, convective['h_c'], 'convective.h_c') < 0:
            raise loc.error('convective.h_c', f"必须 >= 0，当前值: {convective['h_c']!r}")
        _number(loc, convective['u_inf'], 'convective.u_inf')


# --- 入口 ---

def parse_run_config(text: str, path: str = '<config>', base_dir: Optional[Path] = None) -> RunConfig:
    loc = _Locator(text, path)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 语法错误: {e.msg}", line=e.lineno, path=path) from e
    if not isinstance(payload, dict):
        raise ConfigError("顶层必须是对象", line=1, path=path)
    base_dir = base_dir or Path('.')

    unknown = sorted(set(payload) - {'problem', 'gamma', 'times', 'output', 'tolerances'})
    if unknown:
        raise loc.error(unknown[0], "未知字段")
    for key in ('problem', 'gamma', 'times'):
        if key not in payload:
            raise ConfigError("缺少必需字段", field=key, path=path)

    gamma = check_gamma(payload['gamma'], 'gamma', loc)
    times = _times(loc, payload['times'])
    tolerances = _tolerances(loc, payload.get('tolerances'))

    problem = payload['problem']
    if not isinstance(problem, dict) or ('benchmark' in problem) == ('custom' in problem):
        raise loc.error('problem', "必须恰好包含 benchmark 或 custom 之一")
    case = None
    if 'benchmark' in problem:
        case = _benchmark_case(loc, problem, gamma)
    else:
        _validate_custom(loc, problem['custom'], base_dir)

    output = payload.get('output', {})
    output_dir = None
    if not isinstance(output, dict):
        raise loc.error('output', "必须是对象")
    if 'dir' in output:
        if not isinstance(output['dir'], str):
            raise loc.error('output.dir', "必须是路径字符串")
        output_dir = base_dir / output['dir']

    return RunConfig(Path(path), problem, gamma, times, output_dir, tolerances, case)


def load_run_config(path: PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"无法读取配置文件: {e}", path=str(path)) from e
    return parse_run_config(text, str(path), path.parent)


def _custom_problem(cfg: RunConfig) -> Problem:
    base_dir = cfg.path.parent
    loc = _Locator('', str(cfg.path))
    raw = cfg.problem['custom']
    mesh = load_mesh(_resolve(base_dir, loc, raw['mesh'], 'custom.mesh'))

    boundary = raw.get('boundary', {})
    if 'tags' in boundary:
        mesh = mesh.with_tags(boundary['tags'])

    coefficients = raw.get('coefficients', {})
    coeffs = CoefficientField.build(
        mesh.dim,
        A=coefficients.get('A', 0.0),
        D=coefficients.get('D', 1.0),
        P=coefficients.get('P', 0.0),
        f=coefficients.get('f', 0.0),
    )

    dirichlet_raw = boundary.get('dirichlet', {'profile': 'zero'})
    dirichlet_fn = _profile(loc, dirichlet_raw, 'boundary.dirichlet')
    nodes = mesh.tagged_nodes(TAG_DIRICHLET)
    values = [dirichlet_fn(mesh.coords[i]) for i in nodes]
    dirichlet = DirichletSpec.separable(nodes, values, float(dirichlet_raw.get('rate', 0.0)))

    convective = boundary.get('convective')
    bcs = BoundaryData(
        dirichlet=dirichlet,
        neumann_flux=float(boundary.get('neumann', {}).get('q', 0.0)),
        convective=None if convective is None else (float(convective['h_c']), float(convective['u_inf'])),
    )

    ic = raw['initial_condition']
    if isinstance(ic, dict) and 'file' in ic:
        ic_path = _resolve(base_dir, loc, ic['file'], 'initial_condition.file')
        try:
            u0 = np.asarray(json.loads(ic_path.read_text(encoding='utf-8')), dtype=float)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"初值文件无法解析: {e}", field='initial_condition.file', path=str(ic_path)) from e
        if u0.shape != (mesh.n_nodes,):
            raise ConfigError(f"初值长度 {u0.size} 与节点数 {mesh.n_nodes} 不符", field='initial_condition.file', path=str(ic_path))
    else:
        fn = _profile(loc, ic, 'custom.initial_condition')
        u0 = np.array([fn(x) for x in mesh.coords])
    return Problem(mesh, coeffs, bcs, u0)


def build_run_problem(cfg: RunConfig) -> Problem:
    if cfg.case is not None:
        return build_problem(cfg.case)
    return _custom_problem(cfg)


# --- tracer 参数覆盖 ---

def load_tracer_overrides(path: Optional[PathLike]) -> Tuple[TracerScenario, int]:
    """读取 tracer 场景覆盖项，返回 (场景, 单元数)。未给文件时使用默认场景与 20 个单元。"""
    if path is None:
        return TracerScenario(), 20
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"无法读取配置文件: {e}", path=str(path)) from e
    loc = _Locator(text, str(path))
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 语法错误: {e.msg}", line=e.lineno, path=str(path)) from e
    if not isinstance(payload, dict):
        raise ConfigError("顶层必须是对象", line=1, path=str(path))

    known = {f.name for f in fields(TracerScenario)}
    overrides: Dict[str, Any] = {}
    n_elems = 20
    for key, value in payload.items():
        if key == 'n_elems':
            n_elems = _integer(loc, value, key, 4)
        elif key == 'dispersion_rule':
            if value not in ('product', 'ratio'):
                raise loc.error(key, f"只能是 product 或 ratio，当前值: {value!r}")
            overrides[key] = value
        elif key == 'gamma':
            overrides[key] = check_gamma(value, key, loc)
        elif key in known:
            overrides[key] = _positive(loc, value, key)
        else:
            raise loc.error(key, "未知的 tracer 参数")
    try:
        scenario = TracerScenario(**overrides)
    except ValueError as e:
        raise ConfigError(str(e), path=str(path)) from e
    return scenario, n_elems
