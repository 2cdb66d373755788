# -*- coding: utf-8 -*-

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .config import TAG_CONVECTIVE, TAG_DIRICHLET, TAG_NEUMANN
from .elements import CoefficientField, QuadratureRule, Scalar, element_matrices
from .errors import AssemblyError, SingularSystemError
from .mesh import Mesh
from .specfun import MLConfig, mittag_leffler

logger = logging.getLogger(__name__)

_SINGULAR_COND = 1e12


class DirichletMode(str, Enum):
    CONSTANT = 'constant'
    SEPARABLE = 'separable'


@dataclass(frozen=True, eq=False)
class DirichletSpec:
    """本质边界条件: Ū(t) = Ū₀ (constant) 或 Ū₀·E_γ(-λ_b t^γ) (separable)。

    节点按编号排序保存，values 与 node_ids 一一对应；λ_b = 0 的 separable 归一为 constant。
    """
    node_ids: Tuple[int, ...]
    values: np.ndarray
    mode: DirichletMode = DirichletMode.CONSTANT
    rate: float = 0.0

    def __post_init__(self):
        ids = np.asarray(self.node_ids, dtype=int).reshape(-1)
        values = np.broadcast_to(np.asarray(self.values, dtype=float), ids.shape).astype(float)
        if len(set(ids.tolist())) != ids.size:
            raise AssemblyError(f"Dirichlet 节点重复: {ids.tolist()}")
        if not np.all(np.isfinite(values)):
            raise AssemblyError("Dirichlet 边界值必须是有限值")
        mode = DirichletMode(self.mode)
        rate = float(self.rate)
        if not np.isfinite(rate) or rate < 0:
            raise AssemblyError(f"separable 衰减率 λ_b 必须 >= 0，当前值: {rate}")
        if mode is DirichletMode.SEPARABLE and rate == 0.0:
            mode = DirichletMode.CONSTANT
        if mode is DirichletMode.CONSTANT:
            rate = 0.0
        order = np.argsort(ids)
        values = values[order]
        values.setflags(write=False)
        object.__setattr__(self, 'node_ids', tuple(int(i) for i in ids[order]))
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mode', mode)
        object.__setattr__(self, 'rate', rate)

    @classmethod
    def constant(cls, node_ids: Sequence[int], values) -> 'DirichletSpec':
        return cls(tuple(node_ids), values)

    @classmethod
    def separable(cls, node_ids: Sequence[int], values, rate: float) -> 'DirichletSpec':
        return cls(tuple(node_ids), values, DirichletMode.SEPARABLE, rate)

    @classmethod
    def homogeneous(cls, node_ids: Sequence[int]) -> 'DirichletSpec':
        return cls(tuple(node_ids), 0.0)

    def decay(self, gamma: float, t: float, cfg: Optional[MLConfig] = None) -> float:
        """时间因子 E_γ(-λ_b t^γ)；constant 模式恒为 1。"""
        if self.mode is DirichletMode.CONSTANT or t == 0:
            return 1.0
        return mittag_leffler(gamma, -self.rate * t ** gamma, cfg).real

    def values_at(self, gamma: float, t: float, cfg: Optional[MLConfig] = None) -> np.ndarray:
        return self.values * self.decay(gamma, t, cfg)


@dataclass(frozen=True)
class BoundaryData:
    """边界数据: neumann 面上的通量 q，convective 面上的 (h_c, u∞)，以及 Dirichlet 条件。"""
    dirichlet: DirichletSpec
    neumann_flux: Scalar = 0.0
    convective: Optional[Tuple[float, float]] = None


@dataclass(frozen=True, eq=False)
class DofMap:
    n_nodes: int
    free: np.ndarray
    fixed: np.ndarray

    def scatter(self, u_free: np.ndarray, u_fixed: np.ndarray) -> np.ndarray:
        full = np.empty(self.n_nodes, dtype=np.result_type(u_free, u_fixed))
        full[self.free] = u_free
        full[self.fixed] = u_fixed
        return full


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    C: np.ndarray
    K: np.ndarray
    Cbar: np.ndarray
    Kbar: np.ndarray
    F: np.ndarray
    dof_map: DofMap
    dirichlet: DirichletSpec

    @property
    def n_free(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class ReducedRelaxation:
    """齐次分数阶松弛系统 C·D^γŨ + KŨ = 0 与还原物理解所需的数据。

    U(t) = Ũ(t) - shift + particular·E_γ(-rate·t^γ)，particular 仅在 separable 模式下存在。
    """
    C: np.ndarray
    K: np.ndarray
    u0_tilde: np.ndarray
    shift: np.ndarray
    particular: Optional[np.ndarray]
    rate: float
    u0: np.ndarray
    dof_map: DofMap
    dirichlet: DirichletSpec = field(repr=False)

    def physical_free(self, u_tilde: np.ndarray, decay: float = 1.0) -> np.ndarray:
        u = u_tilde - self.shift
        if self.particular is not None:
            u = u + self.particular * decay
        return u

    def full_nodal(self, u_free: np.ndarray, decay: float = 1.0) -> np.ndarray:
        return self.dof_map.scatter(u_free, self.dirichlet.values * decay)


# --- 组装 ---

def _faces_by_element(mesh: Mesh, tag: str) -> Dict[int, List[int]]:
    grouped: Dict[int, List[int]] = defaultdict(list)
    for e, f in sorted(mesh.boundary_tags.get(tag, ())):
        grouped[e].append(f)
    return grouped


def _has_flux(q: Scalar) -> bool:
    return callable(q) or float(q) != 0.0


def assemble(
    mesh: Mesh,
    coeffs: CoefficientField,
    bcs: BoundaryData,
    rule: Optional[QuadratureRule] = None,
) -> GlobalSystem:
    """逐单元计算 Ce、Ke、Fe 并叠加为全局矩阵，再按自由/Dirichlet 节点拆分列块。"""
    n = mesh.n_nodes
    spec = bcs.dirichlet
    tagged = set(mesh.tagged_nodes(TAG_DIRICHLET))
    unknown = [i for i in spec.node_ids if i not in tagged]
    if unknown:
        raise AssemblyError(f"Dirichlet 节点 {unknown} 不在 '{TAG_DIRICHLET}' 标记的边界上")

    neumann_faces = _faces_by_element(mesh, TAG_NEUMANN)
    convective_faces = _faces_by_element(mesh, TAG_CONVECTIVE)
    if convective_faces and bcs.convective is None:
        raise AssemblyError(f"网格含 '{TAG_CONVECTIVE}' 边界，但没有给出 (h_c, u∞)")
    if bcs.convective is not None and not convective_faces:
        raise AssemblyError(f"给出了对流边界数据，但网格没有 '{TAG_CONVECTIVE}' 标记")
    if _has_flux(bcs.neumann_flux) and not neumann_faces:
        raise AssemblyError(f"给出了非零通量 q，但网格没有 '{TAG_NEUMANN}' 标记")

    C_full = np.zeros((n, n))
    K_full = np.zeros((n, n))
    F_full = np.zeros(n)
    for element in mesh.elements:
        neumann = [(bcs.neumann_flux, f) for f in neumann_faces.get(element.id, ())] if _has_flux(bcs.neumann_flux) else None
        convective = None
        if bcs.convective is not None and element.id in convective_faces:
            h_c, u_inf = bcs.convective
            convective = [(h_c, u_inf, f) for f in convective_faces[element.id]]
        em = element_matrices(mesh, element, coeffs, rule, convective=convective, neumann=neumann)
        idx = np.asarray(element.node_ids)
        C_full[np.ix_(idx, idx)] += em.Ce
        K_full[np.ix_(idx, idx)] += em.Ke
        F_full[idx] += em.Fe

    fixed = np.asarray(spec.node_ids, dtype=int)
    free = np.setdiff1d(np.arange(n), fixed)
    if free.size == 0:
        raise AssemblyError("所有节点都是 Dirichlet 节点，没有自由度")
    dof_map = DofMap(n, free, fixed)

    system = GlobalSystem(
        C=C_full[np.ix_(free, free)],
        K=K_full[np.ix_(free, free)],
        Cbar=C_full[np.ix_(free, fixed)],
        Kbar=K_full[np.ix_(free, fixed)],
        F=F_full[free],
        dof_map=dof_map,
        dirichlet=spec,
    )
    logger.debug(f"组装完成: 自由度 {free.size}, Dirichlet 节点 {fixed.size}")
    return system


# --- 约化 ---

def _solve_checked(A: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    if not np.any(rhs):
        return np.zeros_like(rhs)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _SINGULAR_COND:
        nullity = linalg.null_space(A, rcond=1e-10).shape[1]
        logger.error(f"{label} 奇异 (条件数 {cond:.2e})，零空间维数 {nullity}")
        raise SingularSystemError(f"{label} 奇异 (条件数 {cond:.2e})，零空间维数 {nullity}，无法求平移量")
    return linalg.solve(A, rhs)


def reduce(system: GlobalSystem, u0: np.ndarray) -> ReducedRelaxation:
    """把带 Dirichlet 数据的系统化为齐次松弛系统，u0 为全部节点上的初值。"""
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    dof_map = system.dof_map
    if u0.size != dof_map.n_nodes:
        raise AssemblyError(f"初值长度 {u0.size} 与节点数 {dof_map.n_nodes} 不符")
    if not np.all(np.isfinite(u0)):
        raise AssemblyError("初值必须是有限值")

    spec = system.dirichlet
    U0 = u0[dof_map.free]
    Ubar0 = spec.values

    if spec.mode is DirichletMode.CONSTANT:
        shift = _solve_checked(system.K, system.Kbar @ Ubar0 - system.F, "K")
        particular = None
        u0_tilde = U0 + shift
    else:
        rate = spec.rate
        shift = -_solve_checked(system.K, system.F, "K")
        rhs = (rate * system.Cbar - system.Kbar) @ Ubar0
        particular = _solve_checked(system.K - rate * system.C, rhs, f"K - {rate:g}·C")
        u0_tilde = U0 + shift - particular

    physical0 = u0.copy()
    physical0.setflags(write=False)
    return ReducedRelaxation(
        C=system.C,
        K=system.K,
        u0_tilde=u0_tilde,
        shift=shift,
        particular=particular,
        rate=spec.rate,
        u0=physical0,
        dof_map=dof_map,
        dirichlet=spec,
    )
