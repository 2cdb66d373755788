# -*- coding: utf-8 -*-

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ElementError
from .mesh import Element, ElementKind, Mesh

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], Union[float, np.ndarray]]
Scalar = Union[float, Field]
# (h_c, u∞, 局部面号) / (q, 局部面号)
ConvectiveFace = Tuple[float, float, int]
NeumannFace = Tuple[Scalar, int]

_QUAD4_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class ElementMatrices:
    Ce: np.ndarray
    Ke: np.ndarray
    Fe: np.ndarray


def _as_field(value) -> Field:
    if callable(value):
        return value
    constant = np.array(value, dtype=float) if np.ndim(value) else float(value)
    return lambda x: constant


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """方程系数 A(x)、D(x)、P(x)、f(x)，可选径向权函数 w(x)。

    D 可以是标量（各向同性）或 dim×dim 矩阵。设置 radial_weight 时，单元积分按
    w·∂^γu = -(wA)·∇u + ∇·(wD∇u) + wPu + wf 的加权通量形式组装。
    """
    A: Field
    D: Field
    P: Field
    f: Field
    radial_weight: Optional[Field] = None

    @classmethod
    def build(cls, dim: int, A=0.0, D=1.0, P=0.0, f=0.0, radial_weight=None) -> 'CoefficientField':
        if not callable(A):
            A = np.broadcast_to(np.asarray(A, dtype=float), (dim,)).copy()
        return cls(_as_field(A), _as_field(D), _as_field(P), _as_field(f),
                   None if radial_weight is None else _as_field(radial_weight))

    def evaluate(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float, float, float]:
        dim = x.shape[0]
        a = np.broadcast_to(np.asarray(self.A(x), dtype=float), (dim,))
        d = np.asarray(self.D(x), dtype=float)
        d = d * np.eye(dim) if d.ndim == 0 else d.reshape(dim, dim)
        p = float(self.P(x))
        f = float(self.f(x))
        w = 1.0 if self.radial_weight is None else float(self.radial_weight(x))
        values = np.concatenate([a, d.ravel(), [p, f, w]])
        if not np.all(np.isfinite(values)):
            raise ElementError(f"系数在 x={x} 处不是有限值")
        if not np.allclose(d, d.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(d).max())):
            raise ElementError(f"扩散张量 D 在 x={x} 处不对称")
        if np.linalg.eigvalsh(d).min() < -1e-14 * max(1.0, np.abs(d).max()):
            raise ElementError(f"扩散张量 D 在 x={x} 处不定")
        return a, d, p, f, w


def _shape(kind: ElementKind, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if kind is ElementKind.LINE2:
        s = xi[0]
        return np.array([(1 - s) / 2, (1 + s) / 2]), np.array([[-0.5], [0.5]])
    if kind is ElementKind.LINE3:
        s = xi[0]
        N = np.array([-s * (1 - s) / 2, 1 - s * s, s * (1 + s) / 2])
        dN = np.array([[s - 0.5], [-2 * s], [s + 0.5]])
        return N, dN
    if kind is ElementKind.QUAD4:
        s, t = xi
        cs, ct = _QUAD4_CORNERS[:, 0], _QUAD4_CORNERS[:, 1]
        N = (1 + cs * s) * (1 + ct * t) / 4
        dN = np.column_stack([cs * (1 + ct * t) / 4, ct * (1 + cs * s) / 4])
        return N, dN
    raise ElementError(f"未知单元类型: {kind}")


def shape_values(kind: ElementKind, xi) -> Tuple[np.ndarray, np.ndarray]:
    """自然坐标 ξ 处的形函数 N 及其对自然坐标的导数 dN (n×dim)。"""
    try:
        kind = ElementKind(kind)
    except ValueError:
        raise ElementError(f"未知单元类型: {kind!r}") from None
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (kind.dim,):
        raise ElementError(f"{kind.value} 需要 {kind.dim} 个自然坐标，实际为 {xi.shape}")
    if np.any(np.abs(xi) > 1.0 + 1e-12):
        raise ValueError(f"自然坐标必须在 [-1, 1] 内: {xi}")
    return _shape(kind, xi)


@lru_cache(maxsize=None)
def gauss_legendre(order: int, dim: int) -> QuadratureRule:
    """Gauss-Legendre 积分规则，二维为张量积。"""
    if order not in (1, 2, 3, 4, 5):
        raise ElementError(f"不支持的积分阶数: {order}")
    if dim not in (1, 2):
        raise ElementError(f"不支持的维数: {dim}")
    x, w = np.polynomial.legendre.leggauss(order)
    if dim == 1:
        points, weights = x.reshape(-1, 1), w
    else:
        points = np.array([[xi, eta] for eta in x for xi in x])
        weights = np.array([wi * wj for wj in w for wi in w])
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights)


def default_rule(kind: ElementKind) -> QuadratureRule:
    return gauss_legendre(3 if kind is ElementKind.LINE3 else 2, kind.dim)


def _jacobian(dN: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, float]:
    # J[a, b] = ∂x_b/∂ξ_a
    J = dN.T @ X
    return J, float(np.linalg.det(J))


def jacobian_determinants(mesh: Mesh, element: Element) -> np.ndarray:
    X = mesh.coords[list(element.node_ids)]
    rule = gauss_legendre(2, element.kind.dim)
    return np.array([_jacobian(_shape(element.kind, xi)[1], X)[1] for xi in rule.points])


def _face_terms(mesh: Mesh, element: Element, face: int):
    """面上的积分点：返回 (N 全单元向量, 物理坐标, 积分权×面 Jacobian) 序列。"""
    local = element.kind.faces[face]
    X = mesh.coords[list(element.node_ids)]
    n = element.kind.n_nodes
    if len(local) == 1:
        N = np.zeros(n)
        N[local[0]] = 1.0
        yield N, X[local[0]], 1.0
        return
    a, b = local
    half_length = 0.5 * float(np.linalg.norm(X[b] - X[a]))
    rule = gauss_legendre(2, 1)
    for (s,), wq in zip(rule.points, rule.weights):
        N = np.zeros(n)
        N[a], N[b] = (1 - s) / 2, (1 + s) / 2
        yield N, N @ X, wq * half_length


def element_matrices(
    mesh: Mesh,
    elem: Element,
    coeffs: CoefficientField,
    rule: Optional[QuadratureRule] = None,
    convective: Optional[Sequence[ConvectiveFace]] = None,
    neumann: Optional[Sequence[NeumannFace]] = None,
) -> ElementMatrices:
    """单元矩阵 Ce、Ke 与载荷 Fe，等参映射 + Gauss 积分。

    对流面 n·D∇u = h_c(u∞ - u): Ke 加 ∫h_c NᵀN，Fe 加 ∫h_c u∞ Nᵀ。
    """
    kind = elem.kind
    rule = rule or default_rule(kind)
    X = mesh.coords[list(elem.node_ids)]
    n = kind.n_nodes
    Ce = np.zeros((n, n))
    Ke = np.zeros((n, n))
    Fe = np.zeros(n)

    for xi, wq in zip(rule.points, rule.weights):
        N, dN = _shape(kind, xi)
        J, det = _jacobian(dN, X)
        if det <= 1e-14 * max(1.0, np.abs(J).max()) ** kind.dim:
            raise ElementError(f"单元 {elem.id} 在 ξ={xi} 处 Jacobian 奇异或反向: det={det:.3e}")
        grad = dN @ np.linalg.inv(J).T
        x = N @ X
        A, D, P, f, w = coeffs.evaluate(x)
        dv = w * det * wq
        NN = np.outer(N, N)
        Ce += NN * dv
        Ke += (np.outer(N, grad @ A) + grad @ D @ grad.T - P * NN) * dv
        Fe += f * N * dv

    for q, face in neumann or ():
        q_field = _as_field(q)
        for N, x, ds in _face_terms(mesh, elem, face):
            w = 1.0 if coeffs.radial_weight is None else float(coeffs.radial_weight(x))
            Fe += float(q_field(x)) * w * N * ds

    for h_c, u_inf, face in convective or ():
        for N, x, ds in _face_terms(mesh, elem, face):
            w = 1.0 if coeffs.radial_weight is None else float(coeffs.radial_weight(x))
            Ke += h_c * w * np.outer(N, N) * ds
            Fe += h_c * u_inf * w * N * ds

    return ElementMatrices(Ce, Ke, Fe)


def _inverse_map(kind: ElementKind, X: np.ndarray, point: np.ndarray) -> Optional[np.ndarray]:
    xi = np.zeros(kind.dim)
    for _ in range(30):
        N, dN = _shape(kind, xi)
        residual = N @ X - point
        J, det = _jacobian(dN, X)
        if abs(det) < 1e-300:
            return None
        step = np.linalg.solve(J.T, residual)
        xi = xi - step
        if np.max(np.abs(step)) < 1e-14:
            return xi
        if np.max(np.abs(xi)) > 10:
            return None
    return xi


def interpolate_at(mesh: Mesh, nodal_values: np.ndarray, point) -> float:
    """在任意点用所在单元的形函数插值节点值。"""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    values = np.asarray(nodal_values)
    for element in mesh.elements:
        X = mesh.coords[list(element.node_ids)]
        if np.any(point < X.min(axis=0) - 1e-9) or np.any(point > X.max(axis=0) + 1e-9):
            continue
        xi = _inverse_map(element.kind, X, point)
        if xi is None or np.any(np.abs(xi) > 1.0 + 1e-9):
            continue
        N, _ = _shape(element.kind, np.clip(xi, -1.0, 1.0))
        return float(np.real(N @ values[list(element.node_ids)]))
    raise ValueError(f"点 {point} 不在网格内")
