# -*- coding: utf-8 -*-

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .assembly import BoundaryData, DirichletSpec
from .config import TAG_DIRICHLET, TAG_NEUMANN
from .elements import CoefficientField, gauss_legendre, interpolate_at, shape_values
from .errors import NoExactSolutionError
from .mesh import Mesh, generate_interval, generate_quarter_disk, generate_rectangle
from .specfun import MLConfig, bessel_j0, mittag_leffler

logger = logging.getLogger(__name__)


class BenchmarkId(str, Enum):
    DIFFUSION_1D = 'diffusion1d'
    ADVECTION_DISPERSION_1D = 'advection1d'
    DIFFUSION_2D = 'diffusion2d'
    QUARTER_DISK = 'quarter_disk'
    TRACER_RADIAL = 'tracer'


@dataclass(frozen=True)
class BenchmarkCase:
    """内置算例的参数。n_elems 是每个方向的单元数；quarter_disk 用 refine。"""
    id: BenchmarkId
    gamma: float = 0.8
    length: float = 1.0
    k: float = 1.0
    a: float = 0.0
    n_elems: int = 10
    order: int = 1
    refine: int = 2

    @property
    def has_exact(self) -> bool:
        return self.id is not BenchmarkId.TRACER_RADIAL

    @property
    def spacing(self) -> float:
        if self.id is BenchmarkId.QUARTER_DISK:
            return 2.0 ** -self.refine
        return self.length / self.n_elems

    @property
    def midpoint(self) -> Tuple[float, ...]:
        if self.id is BenchmarkId.DIFFUSION_2D:
            return (self.length / 2, self.length / 2)
        if self.id is BenchmarkId.QUARTER_DISK:
            return (0.0, 0.0)
        return (self.length / 2,)


@dataclass(frozen=True, eq=False)
class Problem:
    """可直接组装求解的问题: 网格、系数、边界数据与节点初值。"""
    mesh: Mesh
    coeffs: CoefficientField
    bcs: BoundaryData
    u0: np.ndarray


def diffusion_1d(n_elems: int = 10, order: int = 1, gamma: float = 0.8, length: float = 10.0) -> BenchmarkCase:
    return BenchmarkCase(BenchmarkId.DIFFUSION_1D, gamma, length, length ** 2 / math.pi ** 2, 0.0, n_elems, order)


def advection_dispersion_1d(n_elems: int = 10, order: int = 1, gamma: float = 0.8, a: float = 2.0, k: float = 1.0) -> BenchmarkCase:
    return BenchmarkCase(BenchmarkId.ADVECTION_DISPERSION_1D, gamma, 1.0, k, a, n_elems, order)


def diffusion_2d(n_elems: int = 4, gamma: float = 0.8) -> BenchmarkCase:
    return BenchmarkCase(BenchmarkId.DIFFUSION_2D, gamma, 1.0, 1.0 / math.pi ** 2, 0.0, n_elems, 1)


def quarter_disk(refine: int = 2, gamma: float = 0.8) -> BenchmarkCase:
    return BenchmarkCase(BenchmarkId.QUARTER_DISK, gamma, 1.0, 1.0, 0.0, 1, 1, refine)


CASE_FACTORIES: Dict[BenchmarkId, Callable[..., BenchmarkCase]] = {
    BenchmarkId.DIFFUSION_1D: diffusion_1d,
    BenchmarkId.ADVECTION_DISPERSION_1D: advection_dispersion_1d,
    BenchmarkId.DIFFUSION_2D: diffusion_2d,
    BenchmarkId.QUARTER_DISK: quarter_disk,
}


def make_case(case_id, **params) -> BenchmarkCase:
    case_id = BenchmarkId(case_id)
    if case_id not in CASE_FACTORIES:
        raise NoExactSolutionError(f"{case_id.value} 不是带解析解的算例，请使用 tracer 命令")
    return CASE_FACTORIES[case_id](**params)


def with_spacing(case: BenchmarkCase, n: int) -> BenchmarkCase:
    """同一算例换一档网格密度（quarter_disk 下 n 是 refine 级数）。"""
    if case.id is BenchmarkId.QUARTER_DISK:
        return replace(case, refine=n)
    return replace(case, n_elems=n)


# --- 解析解与误差 ---

def _decay_rate(case: BenchmarkCase) -> float:
    if case.id is BenchmarkId.DIFFUSION_1D:
        return case.k * math.pi ** 2 / case.length ** 2
    if case.id is BenchmarkId.ADVECTION_DISPERSION_1D:
        return case.a - case.k
    if case.id is BenchmarkId.DIFFUSION_2D:
        return 2.0 * case.k * math.pi ** 2 / case.length ** 2
    return case.k


def _spatial_profile(case: BenchmarkCase, pos: np.ndarray) -> float:
    if case.id is BenchmarkId.DIFFUSION_1D:
        return math.sin(math.pi * pos[0] / case.length)
    if case.id is BenchmarkId.ADVECTION_DISPERSION_1D:
        return math.exp(pos[0])
    if case.id is BenchmarkId.DIFFUSION_2D:
        return math.sin(math.pi * pos[0] / case.length) * math.sin(math.pi * pos[1] / case.length)
    return bessel_j0(math.hypot(pos[0], pos[1]))


def exact_solution(case: BenchmarkCase, pos, t: float, cfg: Optional[MLConfig] = None) -> float:
    if not case.has_exact:
        raise NoExactSolutionError(f"算例 {case.id.value} 没有解析解")
    pos = np.atleast_1d(np.asarray(pos, dtype=float))
    decay = mittag_leffler(case.gamma, -_decay_rate(case) * t ** case.gamma, cfg).real
    return _spatial_profile(case, pos) * decay


def normalized_error(case: BenchmarkCase, numeric, point, t: float, cfg: Optional[MLConfig] = None) -> float:
    """|(u_exact - u)/u_exact| 在探测点处的值；探测点不是节点时用形函数插值。"""
    exact = exact_solution(case, point, t, cfg)
    if exact == 0.0:
        raise ZeroDivisionError(f"解析解在探测点 {point} 处为零，无法归一化")
    value = interpolate_at(numeric.mesh, numeric.at(t), point)
    return abs((exact - value) / exact)


def linf_error(case: BenchmarkCase, numeric, t: float, cfg: Optional[MLConfig] = None) -> float:
    coords = numeric.mesh.coords
    values = numeric.at(t)
    decay = mittag_leffler(case.gamma, -_decay_rate(case) * t ** case.gamma, cfg).real
    exact = np.array([_spatial_profile(case, x) for x in coords]) * decay
    return float(np.abs(exact - values).max())


def convergence_ratio(err_h1: float, err_h2: float, h1: float, h2: float) -> float:
    if min(err_h1, err_h2, h1, h2) <= 0:
        raise ValueError(f"误差与网格尺寸必须 > 0: {(err_h1, err_h2, h1, h2)}")
    if h1 == h2:
        raise ValueError("h1 与 h2 不能相等")
    return math.log(err_h1 / err_h2) / math.log(h1 / h2)


# --- 算例装配 ---

def _nodal(mesh: Mesh, fn: Callable[[np.ndarray], float]) -> np.ndarray:
    return np.array([fn(x) for x in mesh.coords])


def build_problem(case: BenchmarkCase) -> Problem:
    """按算例生成网格、系数、边界与节点插值初值。"""
    if case.id is BenchmarkId.TRACER_RADIAL:
        raise NoExactSolutionError("tracer 请使用 tracer_setup")

    if case.id is BenchmarkId.DIFFUSION_1D:
        mesh = generate_interval(case.length, case.n_elems, case.order)
        coeffs = CoefficientField.build(1, D=case.k)
        dirichlet = DirichletSpec.homogeneous(mesh.tagged_nodes(TAG_DIRICHLET))
    elif case.id is BenchmarkId.ADVECTION_DISPERSION_1D:
        mesh = generate_interval(case.length, case.n_elems, case.order)
        coeffs = CoefficientField.build(1, A=case.a, D=case.k)
        nodes = mesh.tagged_nodes(TAG_DIRICHLET)
        dirichlet = DirichletSpec.separable(nodes, [math.exp(mesh.coords[i, 0]) for i in nodes], case.a - case.k)
    elif case.id is BenchmarkId.DIFFUSION_2D:
        mesh = generate_rectangle(case.length, case.length, case.n_elems, case.n_elems)
        coeffs = CoefficientField.build(2, D=case.k)
        dirichlet = DirichletSpec.homogeneous(mesh.tagged_nodes(TAG_DIRICHLET))
    else:
        mesh = generate_quarter_disk(case.refine)
        coeffs = CoefficientField.build(2, D=case.k)
        nodes = mesh.tagged_nodes(TAG_DIRICHLET)
        dirichlet = DirichletSpec.separable(nodes, bessel_j0(1.0), case.k)

    u0 = _nodal(mesh, lambda x: _spatial_profile(case, x))
    return Problem(mesh, coeffs, BoundaryData(dirichlet), u0)


# --- 示踪剂径向输运 ---

@dataclass(frozen=True)
class TracerScenario:
    """径向示踪试验参数（长度 m，时间 d，质量 kg）。dispersion_rule: 'product' 取 d0 = a·v0，'ratio' 取 d0 = v0/a。"""
    mass: float = 20.81
    t0: float = 3.54
    r_i: float = 30.0
    r_e: float = 60.0
    r_c: float = 60.127
    b: float = 35.0
    theta: float = 0.023
    velocity_numerator: float = 0.0564
    dispersivity: float = 6.8
    pumping_rate: float = 12.4
    gamma: float = 0.92
    dispersion_rule: str = 'product'
    dt: float = 10.0
    t_end: float = 321.0

    def __post_init__(self):
        positive = ('mass', 't0', 'r_i', 'r_e', 'r_c', 'b', 'theta', 'velocity_numerator',
                    'dispersivity', 'pumping_rate', 'gamma', 'dt', 't_end')
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} 必须 > 0，当前值: {value}")
        if not (self.r_i < self.r_e < self.r_c):
            raise ValueError(f"需要 R_i < R_e < r_c，当前值: {self.r_i}, {self.r_e}, {self.r_c}")
        if self.dispersion_rule not in ('product', 'ratio'):
            raise ValueError(f"dispersion_rule 只能是 product 或 ratio，当前值: {self.dispersion_rule}")

    @property
    def v0(self) -> float:
        return self.velocity_numerator / self.theta

    @property
    def d0(self) -> float:
        if self.dispersion_rule == 'product':
            return self.dispersivity * self.v0
        return self.v0 / self.dispersivity

    @property
    def source_position(self) -> float:
        return self.r_c - self.r_i

    @property
    def source_scale(self) -> float:
        return self.mass / (2.0 * math.pi * self.source_position * self.b * self.theta * self.t0)

    def output_times(self) -> np.ndarray:
        count = int(math.floor(self.t_end / self.dt + 1e-9))
        return self.dt * np.arange(count + 1)


def _hat_integral(mesh: Mesh, node: int) -> float:
    total = 0.0
    for element in mesh.elements:
        if node not in element.node_ids:
            continue
        local = element.node_ids.index(node)
        X = mesh.coords[list(element.node_ids)]
        rule = gauss_legendre(3, 1)
        for xi, w in zip(rule.points, rule.weights):
            N, dN = shape_values(element.kind, xi)
            total += N[local] * float(dN[:, 0] @ X[:, 0]) * w
    return total


def tracer_setup(scenario: TracerScenario, n_elems: int = 20) -> Problem:
    """[0, R_e] 上的 Line3 网格；r=0 为零值 Dirichlet，r=R_e 为自然边界；δ 初值投影为单位积分的节点帽函数。"""
    if int(n_elems) < 4:
        raise ValueError(f"tracer 至少需要 4 个单元，当前值: {n_elems}")
    center = scenario.source_position
    if not 0.0 < center < scenario.r_e:
        raise ValueError(f"源点 r={center} 不在 (0, R_e) 内")

    base = generate_interval(scenario.r_e, int(n_elems), order=2)
    last = len(base.elements) - 1
    mesh = base.with_tags({TAG_DIRICHLET: [(0, 0)], TAG_NEUMANN: [(last, 1)]})

    r_c, v0, d0 = scenario.r_c, scenario.v0, scenario.d0
    coeffs = CoefficientField(
        A=lambda x: np.array([v0 / (r_c - x[0])]),
        D=lambda x: d0 / (r_c - x[0]),
        P=lambda x: 0.0,
        f=lambda x: 0.0,
        radial_weight=lambda x: r_c - x[0],
    )
    dirichlet = DirichletSpec.homogeneous(mesh.tagged_nodes(TAG_DIRICHLET))

    node = int(np.argmin(np.abs(mesh.coords[:, 0] - center)))
    u0 = np.zeros(mesh.n_nodes)
    u0[node] = scenario.source_scale / _hat_integral(mesh, node)
    logger.debug(f"δ 初值投影到节点 {node} (r={mesh.coords[node, 0]:.3f})，峰值 {u0[node]:.6e}")
    return Problem(mesh, coeffs, BoundaryData(dirichlet), u0)


def breakthrough_node(mesh: Mesh, scenario: TracerScenario) -> int:
    return int(np.argmin(np.abs(mesh.coords[:, 0] - scenario.r_e)))


def peak_arrival_time(times: Sequence[float], values: Sequence[float]) -> float:
    """穿透曲线首次达到最大值的时刻。"""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0 or times.shape != values.shape:
        raise ValueError("times 与 values 必须等长且非空")
    return float(times[int(np.argmax(values))])


def time_for_value(value: float, gamma: float, t_max: float = 100.0, cfg: Optional[MLConfig] = None) -> float:
    """求 t 使 E_γ(-t^γ) = value (0 < value < 1)。"""
    if not 0.0 < value < 1.0:
        raise ValueError(f"目标值必须在 (0, 1) 内，当前值: {value}")

    def gap(t: float) -> float:
        return mittag_leffler(gamma, -t ** gamma, cfg).real - value

    if gap(t_max) > 0:
        raise ValueError(f"在 [0, {t_max}] 内找不到 E_{gamma}(-t^{gamma}) = {value}")
    return float(optimize.brentq(gap, 0.0, t_max, xtol=1e-14, rtol=1e-13))


# --- 参考数据 (γ=0.8) ---

REFERENCE_DIFFUSION_TIME = {
    'times': (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    'linear_h10': (1.3517e-3, 2.2855e-3, 3.0766e-3, 3.7734e-3, 4.3983e-3, 4.9644e-3, 5.4805e-3, 5.9530e-3, 6.3868e-3),
    'quadratic_h10': (1.0525e-6, 0.4709e-6, 1.7646e-6, 2.9057e-6, 3.9302e-6, 4.8592e-6, 5.7070e-6, 6.4838e-6, 7.1975e-6),
    'linear_h100': (1.3485e-5, 2.2814e-5, 3.0726e-5, 3.7703e-5, 4.3965e-5, 4.9643e-5, 5.4825e-5, 5.9572e-5, 6.3934e-5),
}

REFERENCE_ADVECTION = {
    'times': (2.0, 4.0, 6.0, 8.0),
    10: (0.9860e-4, 0.9790e-4, 0.9724e-4, 0.9677e-4),
    20: (0.2459e-4, 0.2441e-4, 0.2425e-4, 0.2413e-4),
    40: (0.6143e-5, 0.6099e-5, 0.6058e-5, 0.6029e-5),
}

REFERENCE_CONVERGENCE = {
    'n_elems': (10, 20, 40, 80, 160),
    'linear': (4.327591e-4, 1.087320e-4, 2.721688e-5, 6.806336e-6, 1.701717e-6),
    'linear_ratio': (None, 1.9928, 1.9982, 1.9996, 1.9999),
    'quadratic': (7.739342e-7, 4.909022e-8, 3.080541e-9, 1.937557e-10, 1.265827e-11),
    'quadratic_ratio': (None, 3.9787, 3.9942, 3.9909, 3.9361),
}

REFERENCE_LONG_TIME = {
    'times': (10.0, 100.0, 1000.0, 10000.0),
    'linear': (1.0136e-4, 8.4909e-5, 8.2652e-5, 8.2307e-5),
    'quadratic': (1.3185e-9, 1.0614e-9, 1.0242e-9, 1.0186e-9),
}

REFERENCE_DIFFUSION_2D = {
    'times': (2.0, 4.0, 6.0, 8.0),
    4: (6.5673e-2, 6.1143e-2, 5.7924e-2, 5.6111e-2),
    8: (1.6937e-2, 1.5786e-2, 1.4929e-2, 1.4444e-2),
    16: (4.2664e-3, 3.9778e-3, 3.7602e-3, 3.6368e-3),
}

# (x, y): (3 单元, 48 单元, 解析解)
REFERENCE_QUARTER_DISK = {
    (0.0, 0.0): (0.37770, 0.38638, 0.38695),
    (0.35355, 0.35355): (0.34055, 0.36233, 0.36314),
    (0.21339, 0.21339): (None, 0.37760, 0.37819),
    (0.42678, 0.17678): (None, 0.36603, 0.36658),
    (0.67533, 0.27973): (None, 0.33659, 0.33696),
    (0.53033, 0.53033): (None, 0.33404, 0.33442),
    (0.27973, 0.67533): (None, 0.33659, 0.33696),
    (0.17678, 0.42678): (None, 0.36603, 0.36658),
}
QUARTER_DISK_CENTER_VALUE = 0.38695
