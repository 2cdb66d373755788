# -*- coding: utf-8 -*-

import json
import math

import numpy as np
import pytest

from src.errors import MeshFormatError, MeshValidationError
from src.mesh import (
    Element,
    ElementKind,
    Mesh,
    Node,
    check_mesh,
    generate_interval,
    generate_quarter_disk,
    generate_rectangle,
    load_mesh,
    mesh_from_dict,
    mesh_to_dict,
    save_mesh,
)


class TestGenerators:
    """测试结构化网格生成。"""

    def test_interval_linear(self):
        mesh = generate_interval(10.0, 10)
        assert mesh.dim == 1
        assert mesh.n_nodes == 11
        assert len(mesh.elements) == 10
        assert mesh.coords[5, 0] == pytest.approx(5.0)
        assert mesh.tagged_nodes('dirichlet') == (0, 10)

    def test_interval_quadratic_has_midpoints(self):
        mesh = generate_interval(1.0, 4, order=2)
        assert mesh.n_nodes == 9
        assert all(el.kind is ElementKind.LINE3 for el in mesh.elements)
        assert mesh.elements[1].node_ids == (2, 3, 4)
        assert mesh.tagged_nodes('dirichlet') == (0, 8)

    @pytest.mark.parametrize("args", [(0.0, 4, 1), (1.0, 0, 1), (1.0, 4, 3)])
    def test_interval_rejects_bad_input(self, args):
        with pytest.raises(ValueError):
            generate_interval(*args)

    def test_rectangle(self):
        mesh = generate_rectangle(1.0, 2.0, 4, 3)
        assert mesh.n_nodes == 20
        assert len(mesh.elements) == 12
        # 边界节点: 除内部 3x2 个之外全部
        assert len(mesh.tagged_nodes('dirichlet')) == 20 - 6
        check_mesh(mesh)

    @pytest.mark.parametrize("refine,n_elems", [(0, 3), (1, 12), (2, 48)])
    def test_quarter_disk_counts(self, refine, n_elems):
        mesh = generate_quarter_disk(refine)
        assert len(mesh.elements) == n_elems
        check_mesh(mesh)

    def test_quarter_disk_tags(self):
        mesh = generate_quarter_disk(2)
        arc = mesh.coords[list(mesh.tagged_nodes('dirichlet'))]
        assert np.allclose(np.hypot(arc[:, 0], arc[:, 1]), 1.0)
        # 两个贴弧块各 4 段，共 9 个节点
        assert len(arc) == 9
        axis = mesh.coords[list(mesh.tagged_nodes('neumann'))]
        assert np.all(np.isclose(axis[:, 0], 0.0) | np.isclose(axis[:, 1], 0.0))

    def test_quarter_disk_area(self):
        """单元面积之和逼近 π/4（弧被折线近似）。"""
        mesh = generate_quarter_disk(3)
        area = 0.0
        for el in mesh.elements:
            pts = mesh.coords[list(el.node_ids)]
            x, y = pts[:, 0], pts[:, 1]
            area += 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        assert area == pytest.approx(math.pi / 4, rel=5e-3)

    def test_quarter_disk_negative_refine(self):
        with pytest.raises(ValueError):
            generate_quarter_disk(-1)


class TestCheckMesh:
    """测试网格不变量校验。"""

    def test_inverted_element(self):
        nodes = (Node(0, (0.0,)), Node(1, (1.0,)))
        mesh = Mesh(1, nodes, (Element(0, ElementKind.LINE2, (1, 0)),))
        with pytest.raises(MeshValidationError):
            check_mesh(mesh)

    def test_missing_node_reference(self):
        nodes = (Node(0, (0.0,)), Node(1, (1.0,)))
        mesh = Mesh(1, nodes, (Element(0, ElementKind.LINE2, (0, 2)),))
        with pytest.raises(MeshValidationError):
            check_mesh(mesh)

    def test_overlapping_exclusive_tags(self):
        mesh = generate_interval(1.0, 2)
        with pytest.raises(MeshValidationError):
            mesh.with_tags({'dirichlet': [(0, 0)], 'neumann': [(0, 0)]})

    def test_unknown_face(self):
        mesh = generate_interval(1.0, 2)
        with pytest.raises(MeshValidationError):
            mesh.with_tags({'dirichlet': [(0, 5)]})

    def test_kind_dimension_mismatch(self):
        nodes = tuple(Node(i, (float(i),)) for i in range(4))
        mesh = Mesh(1, nodes, (Element(0, ElementKind.QUAD4, (0, 1, 2, 3)),))
        with pytest.raises(MeshValidationError):
            check_mesh(mesh)


class TestMeshIO:
    """测试 JSON 读写。"""

    def test_save_load_round_trip(self, tmp_path):
        mesh = generate_quarter_disk(1)
        path = tmp_path / 'disk.json'
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        assert loaded == mesh

    def test_dict_contains_tags(self):
        payload = mesh_to_dict(generate_interval(1.0, 3))
        assert payload['tags'] == {'dirichlet': [[0, 0], [2, 1]]}

    def test_syntax_error_reports_line(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "dim": 1,\n  "nodes": [[0.0], [1.0]\n}\n', encoding='utf-8')
        with pytest.raises(MeshFormatError) as info:
            load_mesh(path)
        assert info.value.line is not None
        assert '行' in str(info.value)

    def test_missing_field_reports_path(self):
        with pytest.raises(MeshFormatError) as info:
            mesh_from_dict({'dim': 1, 'nodes': [[0.0], [1.0]], 'elements': [{'kind': 'Line2'}]})
        assert info.value.field == 'elements[0].nodes'

    def test_unknown_kind(self):
        with pytest.raises(MeshFormatError):
            mesh_from_dict({'dim': 1, 'nodes': [[0.0], [1.0]], 'elements': [{'kind': 'Tri3', 'nodes': [0, 1]}]})

    def test_bad_coordinates(self):
        with pytest.raises(MeshFormatError) as info:
            mesh_from_dict({'dim': 2, 'nodes': [[0.0]], 'elements': []})
        assert info.value.field == 'nodes[0]'

    def test_load_validates(self, tmp_path):
        path = tmp_path / 'inverted.json'
        path.write_text(json.dumps({
            'dim': 1,
            'nodes': [[0.0], [1.0]],
            'elements': [{'kind': 'Line2', 'nodes': [1, 0]}],
        }), encoding='utf-8')
        with pytest.raises(MeshValidationError):
            load_mesh(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshFormatError):
            load_mesh(tmp_path / 'nope.json')
