# -*- coding: utf-8 -*-

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Tuple, Union

import numpy as np

from .config import EXCLUSIVE_TAGS, TAG_DIRICHLET, TAG_NEUMANN
from .errors import MeshFormatError, MeshValidationError
from .utils import write_text_atomic

logger = logging.getLogger(__name__)

Face = Tuple[int, int]
PathLike = Union[str, Path]


class ElementKind(str, Enum):
    LINE2 = 'Line2'
    LINE3 = 'Line3'
    QUAD4 = 'Quad4'

    @property
    def dim(self) -> int:
        return 2 if self is ElementKind.QUAD4 else 1

    @property
    def n_nodes(self) -> int:
        return {ElementKind.LINE2: 2, ElementKind.LINE3: 3, ElementKind.QUAD4: 4}[self]

    @property
    def faces(self) -> Tuple[Tuple[int, ...], ...]:
        """局部面编号 -> 局部节点编号；一维单元的“面”即端点。"""
        if self is ElementKind.LINE2:
            return ((0,), (1,))
        if self is ElementKind.LINE3:
            return ((0,), (2,))
        return ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass(frozen=True)
class Node:
    id: int
    coords: Tuple[float, ...]


@dataclass(frozen=True)
class Element:
    id: int
    kind: ElementKind
    node_ids: Tuple[int, ...]


@dataclass(frozen=True)
class Mesh:
    dim: int
    nodes: Tuple[Node, ...]
    elements: Tuple[Element, ...]
    boundary_tags: Mapping[str, FrozenSet[Face]] = field(default_factory=dict)

    @cached_property
    def coords(self) -> np.ndarray:
        arr = np.array([node.coords for node in self.nodes], dtype=float).reshape(len(self.nodes), self.dim)
        arr.setflags(write=False)
        return arr

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def face_nodes(self, face: Face) -> Tuple[int, ...]:
        element = self.elements[face[0]]
        return tuple(element.node_ids[i] for i in element.kind.faces[face[1]])

    def tagged_nodes(self, tag: str) -> Tuple[int, ...]:
        node_ids = set()
        for face in self.boundary_tags.get(tag, frozenset()):
            node_ids.update(self.face_nodes(face))
        return tuple(sorted(node_ids))

    def with_tags(self, tags: Mapping[str, Iterable[Face]]) -> 'Mesh':
        """返回替换边界标记后的新网格（问题配置可覆盖默认标记）。"""
        mesh = replace(self, boundary_tags=_freeze_tags(tags))
        check_mesh(mesh)
        return mesh


def _freeze_tags(tags: Mapping[str, Iterable[Face]]) -> Dict[str, FrozenSet[Face]]:
    return {name: frozenset((int(e), int(f)) for e, f in faces) for name, faces in tags.items()}


# --- 网格生成 ---

def generate_interval(length: float, n_elems: int, order: int = 1) -> Mesh:
    """[0, L] 上的均匀一维网格，两端默认标记为 dirichlet。"""
    if not (math.isfinite(length) and length > 0):
        raise ValueError(f"区间长度必须 > 0，当前值: {length}")
    if int(n_elems) < 1:
        raise ValueError(f"单元数必须 >= 1，当前值: {n_elems}")
    if order not in (1, 2):
        raise ValueError(f"单元阶数只支持 1 或 2，当前值: {order}")

    n_elems = int(n_elems)
    n_steps = order * n_elems
    nodes = tuple(Node(i, (length * i / n_steps,)) for i in range(n_steps + 1))
    kind = ElementKind.LINE2 if order == 1 else ElementKind.LINE3
    elements = tuple(
        Element(e, kind, tuple(order * e + k for k in range(order + 1)))
        for e in range(n_elems)
    )
    tags = {TAG_DIRICHLET: [(0, 0), (n_elems - 1, 1)]}
    return Mesh(1, nodes, elements, _freeze_tags(tags))


def generate_rectangle(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """结构化 Quad4 网格，四条边默认标记为 dirichlet。"""
    if not (lx > 0 and ly > 0 and math.isfinite(lx) and math.isfinite(ly)):
        raise ValueError(f"矩形尺寸必须 > 0，当前值: {lx} x {ly}")
    if int(nx) < 1 or int(ny) < 1:
        raise ValueError(f"网格划分数必须 >= 1，当前值: {nx} x {ny}")

    nx, ny = int(nx), int(ny)

    def nid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    nodes = tuple(
        Node(nid(i, j), (lx * i / nx, ly * j / ny))
        for j in range(ny + 1) for i in range(nx + 1)
    )
    elements = []
    boundary = []
    for j in range(ny):
        for i in range(nx):
            e = j * nx + i
            elements.append(Element(e, ElementKind.QUAD4, (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1))))
            if j == 0:
                boundary.append((e, 0))
            if i == nx - 1:
                boundary.append((e, 1))
            if j == ny - 1:
                boundary.append((e, 2))
            if i == 0:
                boundary.append((e, 3))
    return Mesh(2, nodes, tuple(elements), _freeze_tags({TAG_DIRICHLET: boundary}))


class _NodeRegistry:
    """按坐标合并块间共享节点。"""

    def __init__(self):
        self._ids: Dict[Tuple[float, float], int] = {}
        self.coords: List[Tuple[float, float]] = []

    def get(self, x: float, y: float) -> int:
        key = (round(x, 12) + 0.0, round(y, 12) + 0.0)
        if key not in self._ids:
            self._ids[key] = len(self.coords)
            self.coords.append((x, y))
        return self._ids[key]


def _signed_area(points: List[Tuple[float, float]]) -> float:
    area = 0.0
    for k in range(len(points)):
        x0, y0 = points[k]
        x1, y1 = points[(k + 1) % len(points)]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def generate_quarter_disk(refine: int) -> Mesh:
    """四分之一单位圆的三块结构网格：中心块加两个贴弧块，共 3·4^refine 个 Quad4 单元。

    中心块角点为 (0,0)、(0.5,0)、(√2/4,√2/4)、(0,0.5)；贴弧块在内边直线与外弧之间线性插值，
    弧上节点按角度均分。圆弧标记 dirichlet，两条直边标记 neumann。
    """
    if int(refine) < 0:
        raise ValueError(f"refine 必须 >= 0，当前值: {refine}")
    n = 2 ** int(refine)
    corner = math.sqrt(2.0) / 4.0
    p = (0.5, 0.0)
    q = (corner, corner)
    r = (0.0, 0.5)
    registry = _NodeRegistry()
    quads: List[Tuple[int, int, int, int]] = []

    def add_block(point_at):
        grid = [[registry.get(*point_at(i / n, j / n)) for j in range(n + 1)] for i in range(n + 1)]
        for i in range(n):
            for j in range(n):
                ids = [grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]
                if _signed_area([registry.coords[k] for k in ids]) < 0:
                    ids = [ids[0], ids[3], ids[2], ids[1]]
                quads.append(tuple(ids))

    def central(s, t):
        x = s * (1 - t) * p[0] + s * t * q[0]
        y = s * t * q[1] + (1 - s) * t * r[1]
        return x, y

    def rim(u, v):
        inner_x = p[0] + v * (q[0] - p[0])
        inner_y = p[1] + v * (q[1] - p[1])
        angle = v * math.pi / 4.0
        return (1 - u) * inner_x + u * math.cos(angle), (1 - u) * inner_y + u * math.sin(angle)

    add_block(central)
    add_block(rim)
    add_block(lambda u, v: tuple(reversed(rim(u, v))))

    nodes = tuple(Node(i, c) for i, c in enumerate(registry.coords))
    elements = tuple(Element(e, ElementKind.QUAD4, ids) for e, ids in enumerate(quads))

    def on_arc(nid):
        x, y = registry.coords[nid]
        return abs(math.hypot(x, y) - 1.0) < 1e-9

    def on_axis(nid, axis):
        return abs(registry.coords[nid][axis]) < 1e-12

    dirichlet, neumann = [], []
    for element in elements:
        for f, local in enumerate(ElementKind.QUAD4.faces):
            a, b = (element.node_ids[k] for k in local)
            if on_arc(a) and on_arc(b):
                dirichlet.append((element.id, f))
            elif (on_axis(a, 0) and on_axis(b, 0)) or (on_axis(a, 1) and on_axis(b, 1)):
                neumann.append((element.id, f))

    logger.debug(f"四分之一圆网格: refine={refine}, 节点 {len(nodes)}, 单元 {len(elements)}")
    return Mesh(2, nodes, elements, _freeze_tags({TAG_DIRICHLET: dirichlet, TAG_NEUMANN: neumann}))


# --- 校验 ---

def check_mesh(mesh: Mesh) -> None:
    """检查网格不变量，失败抛出 MeshValidationError。"""
    if mesh.dim not in (1, 2):
        raise MeshValidationError(f"dim 只能是 1 或 2，当前值: {mesh.dim}")
    if not mesh.nodes:
        raise MeshValidationError("网格没有节点")
    for index, node in enumerate(mesh.nodes):
        if node.id != index:
            raise MeshValidationError(f"节点编号必须连续: 位置 {index} 的节点编号为 {node.id}")
        if len(node.coords) != mesh.dim or not all(math.isfinite(c) for c in node.coords):
            raise MeshValidationError(f"节点 {index} 坐标非法: {node.coords}")

    n_nodes = len(mesh.nodes)
    for index, element in enumerate(mesh.elements):
        if element.id != index:
            raise MeshValidationError(f"单元编号必须连续: 位置 {index} 的单元编号为 {element.id}")
        if element.kind.dim != mesh.dim:
            raise MeshValidationError(f"单元 {index} 类型 {element.kind.value} 与网格维数 {mesh.dim} 不符")
        if len(element.node_ids) != element.kind.n_nodes:
            raise MeshValidationError(f"单元 {index} 节点数应为 {element.kind.n_nodes}")
        if len(set(element.node_ids)) != len(element.node_ids):
            raise MeshValidationError(f"单元 {index} 节点重复: {element.node_ids}")
        if any(not 0 <= nid < n_nodes for nid in element.node_ids):
            raise MeshValidationError(f"单元 {index} 引用了不存在的节点: {element.node_ids}")

    for name, faces in mesh.boundary_tags.items():
        for e, f in faces:
            if not 0 <= e < len(mesh.elements):
                raise MeshValidationError(f"标记 {name} 引用了不存在的单元 {e}")
            if not 0 <= f < len(mesh.elements[e].kind.faces):
                raise MeshValidationError(f"标记 {name} 引用了单元 {e} 不存在的面 {f}")

    present = [t for t in EXCLUSIVE_TAGS if t in mesh.boundary_tags]
    for i, first in enumerate(present):
        for second in present[i + 1:]:
            overlap = mesh.boundary_tags[first] & mesh.boundary_tags[second]
            if overlap:
                raise MeshValidationError(f"标记 {first} 与 {second} 重叠: {sorted(overlap)}")

    from .elements import jacobian_determinants

    for element in mesh.elements:
        dets = jacobian_determinants(mesh, element)
        if np.any(dets <= 0):
            raise MeshValidationError(f"单元 {element.id} 的 Jacobian 行列式非正: {dets.min():.3e}")


# --- 读写 ---

def mesh_to_dict(mesh: Mesh) -> dict:
    return {
        'dim': mesh.dim,
        'nodes': [list(node.coords) for node in mesh.nodes],
        'elements': [{'kind': el.kind.value, 'nodes': list(el.node_ids)} for el in mesh.elements],
        'tags': {name: [list(face) for face in sorted(faces)] for name, faces in sorted(mesh.boundary_tags.items())},
    }


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise MeshFormatError(f"缺少字段 '{key}'", field=f"{path}{key}" if path else key)
    return obj[key]


def mesh_from_dict(payload: dict) -> Mesh:
    dim = _require(payload, 'dim', '')
    if dim not in (1, 2) or isinstance(dim, bool):
        raise MeshFormatError(f"dim 只能是 1 或 2，当前值: {dim!r}", field='dim')

    raw_nodes = _require(payload, 'nodes', '')
    if not isinstance(raw_nodes, list):
        raise MeshFormatError("nodes 必须是列表", field='nodes')
    nodes = []
    for i, coords in enumerate(raw_nodes):
        if not isinstance(coords, list) or len(coords) != dim:
            raise MeshFormatError(f"节点坐标必须是长度为 {dim} 的列表", field=f"nodes[{i}]")
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coords):
            raise MeshFormatError("节点坐标必须是数值", field=f"nodes[{i}]")
        nodes.append(Node(i, tuple(float(c) for c in coords)))

    raw_elements = _require(payload, 'elements', '')
    if not isinstance(raw_elements, list):
        raise MeshFormatError("elements 必须是列表", field='elements')
    elements = []
    for e, raw in enumerate(raw_elements):
        kind_name = _require(raw, 'kind', f"elements[{e}].")
        node_ids = _require(raw, 'nodes', f"elements[{e}].")
        try:
            kind = ElementKind(kind_name)
        except ValueError:
            raise MeshFormatError(f"未知单元类型 {kind_name!r}", field=f"elements[{e}].kind") from None
        if not isinstance(node_ids, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in node_ids):
            raise MeshFormatError("单元节点必须是整数列表", field=f"elements[{e}].nodes")
        elements.append(Element(e, kind, tuple(node_ids)))

    raw_tags = payload.get('tags', {})
    if not isinstance(raw_tags, dict):
        raise MeshFormatError("tags 必须是对象", field='tags')
    tags = {}
    for name, faces in raw_tags.items():
        if not isinstance(faces, list) or not all(
            isinstance(f, list) and len(f) == 2 and all(isinstance(v, int) for v in f) for f in faces
        ):
            raise MeshFormatError("标记必须是 [单元, 面] 整数对列表", field=f"tags.{name}")
        tags[name] = faces

    mesh = Mesh(int(dim), tuple(nodes), tuple(elements), _freeze_tags(tags))
    check_mesh(mesh)
    return mesh


def save_mesh(mesh: Mesh, path: PathLike) -> None:
    write_text_atomic(Path(path), json.dumps(mesh_to_dict(mesh), indent=1) + '\n')
    logger.info(f"网格已保存: {path} (节点 {mesh.n_nodes}, 单元 {len(mesh.elements)})")


def load_mesh(path: PathLike) -> Mesh:
    """读取 JSON 网格文件；语法错误附带行号，结构错误附带字段路径。"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise MeshFormatError(f"无法读取网格文件 {path}: {e}") from e
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise MeshFormatError(f"JSON 语法错误: {e.msg}", line=e.lineno) from e
    if not isinstance(payload, dict):
        raise MeshFormatError("网格文件顶层必须是对象", line=1)
    return mesh_from_dict(payload)
