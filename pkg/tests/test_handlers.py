# -*- coding: utf-8 -*-

import json

import pandas as pd
import pytest

from src.benchmarks import diffusion_1d, exact_solution
from src.config import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_SOLVER_ERROR
from src.handlers import (
    cmd_convergence,
    cmd_mesh_check,
    cmd_mesh_gen,
    cmd_ml,
    cmd_solve,
    cmd_tracer,
)
from src.main import main
from src.mesh import generate_interval, save_mesh

SOLVE_CONFIG = {
    'problem': {'benchmark': 'diffusion1d', 'n_elems': 10, 'order': 1},
    'gamma': 0.8,
    'times': {'start': 0.0, 'stop': 0.9, 'step': 0.1},
}


def _write_config(tmp_path, payload, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2), encoding='utf-8')
    return path


class TestSolveCommand:
    """测试 solve 命令。"""

    def test_writes_csv_and_summary(self, tmp_path):
        config = _write_config(tmp_path, SOLVE_CONFIG)
        out = tmp_path / 'out'
        assert cmd_solve(str(config), str(out)) == EXIT_OK

        frame = pd.read_csv(out / 'times.csv')
        assert list(frame.columns[:2]) == ['t', 'u0']
        assert len(frame) == 10
        # 中点 x=L/2 为节点 5，t=0.5 时与解析解的相对误差约 4.4e-3
        row = frame[frame['t'] == 0.5].iloc[0]
        exact = exact_solution(diffusion_1d(), (5.0,), 0.5)
        assert abs(row['u5'] - exact) / exact == pytest.approx(4.3983e-3, rel=1e-2)

        summary = json.loads((out / 'summary.json').read_text(encoding='utf-8'))
        assert summary['n_nodes'] == 11
        assert summary['n_free'] == 9
        assert summary['eigenvalues']['max_real'] < 0
        assert len(summary['config_hash']) == 64
        assert summary['runs'][0]['linf_error_last'] > 0

    def test_deterministic_csv(self, tmp_path):
        config = _write_config(tmp_path, SOLVE_CONFIG)
        cmd_solve(str(config), str(tmp_path / 'a'))
        cmd_solve(str(config), str(tmp_path / 'b'))
        assert (tmp_path / 'a' / 'times.csv').read_bytes() == (tmp_path / 'b' / 'times.csv').read_bytes()

    def test_csv_uses_lf(self, tmp_path):
        config = _write_config(tmp_path, SOLVE_CONFIG)
        cmd_solve(str(config), str(tmp_path / 'out'))
        assert b'\r\n' not in (tmp_path / 'out' / 'times.csv').read_bytes()

    def test_gamma_family(self, tmp_path):
        config = _write_config(tmp_path, SOLVE_CONFIG)
        out = tmp_path / 'family'
        assert cmd_solve(str(config), str(out), [0.6, 1.0]) == EXIT_OK
        assert (out / 'gamma_0.6' / 'times.csv').is_file()
        assert (out / 'gamma_1' / 'times.csv').is_file()
        summary = json.loads((out / 'summary.json').read_text(encoding='utf-8'))
        assert [run['gamma'] for run in summary['runs']] == [0.6, 1.0]

    def test_invalid_gamma_exit_code(self, tmp_path):
        config = _write_config(tmp_path, {**SOLVE_CONFIG, 'gamma': 1.5})
        assert cmd_solve(str(config), str(tmp_path / 'out')) == EXIT_CONFIG_ERROR
        assert not (tmp_path / 'out' / 'times.csv').exists()

    def test_missing_config_exit_code(self, tmp_path):
        assert cmd_solve(str(tmp_path / 'absent.json')) == EXIT_CONFIG_ERROR

    def test_single_gamma_override_changes_hash(self, tmp_path):
        """单个 --gamma 覆盖写出的 config_hash 与按配置运行不同。"""
        config = _write_config(tmp_path, SOLVE_CONFIG)
        assert cmd_solve(str(config), str(tmp_path / 'base')) == EXIT_OK
        assert cmd_solve(str(config), str(tmp_path / 'same'), [0.8]) == EXIT_OK
        assert cmd_solve(str(config), str(tmp_path / 'other'), [0.5]) == EXIT_OK
        hashes = {
            name: json.loads((tmp_path / name / 'summary.json').read_text(encoding='utf-8'))['config_hash']
            for name in ('base', 'same', 'other')
        }
        assert hashes['base'] == hashes['same']
        assert hashes['base'] != hashes['other']

    def test_invalid_boundary_exit_code(self, tmp_path):
        """自定义问题的边界字段写错时返回输入错误退出码。"""
        save_mesh(generate_interval(1.0, 4), tmp_path / 'line.json')
        config = _write_config(tmp_path, {
            'problem': {'custom': {
                'mesh': 'line.json',
                'boundary': {'convective': {'h_c': 'high', 'u_inf': 0.0}},
                'initial_condition': {'profile': 'zero'},
            }},
            'gamma': 0.8,
            'times': [0.0, 1.0],
        })
        assert cmd_solve(str(config), str(tmp_path / 'out')) == EXIT_CONFIG_ERROR
        assert not (tmp_path / 'out' / 'times.csv').exists()

    def test_solver_error_exit_code(self, tmp_path):
        """纯 Neumann 扩散加源项时 K 奇异，返回求解诊断退出码。"""
        mesh_path = tmp_path / 'line.json'
        mesh_path.write_text(json.dumps({
            'dim': 1,
            'nodes': [[0.0], [0.5], [1.0]],
            'elements': [{'kind': 'Line2', 'nodes': [0, 1]}, {'kind': 'Line2', 'nodes': [1, 2]}],
            'tags': {'neumann': [[0, 0], [1, 1]]},
        }), encoding='utf-8')
        config = _write_config(tmp_path, {
            'problem': {'custom': {
                'mesh': 'line.json',
                'coefficients': {'f': 1.0},
                'initial_condition': {'profile': 'zero'},
            }},
            'gamma': 0.8,
            'times': [0.0, 1.0],
        })
        assert cmd_solve(str(config), str(tmp_path / 'out')) == EXIT_SOLVER_ERROR


class TestConvergenceCommand:
    """测试 convergence 命令。"""

    def test_ladder(self, tmp_path):
        assert cmd_convergence('diffusion1d', [10, 20], 10.0, out_dir=str(tmp_path)) == EXIT_OK
        frame = pd.read_csv(tmp_path / 'convergence.csv')
        assert list(frame.columns) == ['h', 'linf_error', 'ratio']
        assert pd.isna(frame['ratio'][0])
        assert frame['linf_error'][0] == pytest.approx(4.327591e-4, rel=2e-2)
        assert 1.95 <= frame['ratio'][1] <= 2.05

    def test_single_spacing(self, tmp_path):
        assert cmd_convergence('diffusion2d', [4], 2.0, out_dir=str(tmp_path)) == EXIT_OK
        text = (tmp_path / 'convergence.csv').read_text(encoding='utf-8')
        assert text.splitlines()[1].endswith(',')

    def test_tracer_has_no_exact_solution(self, tmp_path):
        assert cmd_convergence('tracer', [10], 1.0, out_dir=str(tmp_path)) == EXIT_CONFIG_ERROR

    def test_unknown_case(self, tmp_path):
        assert cmd_convergence('heat3d', [10], 1.0, out_dir=str(tmp_path)) == EXIT_CONFIG_ERROR


class TestTracerCommand:
    """测试 tracer 命令。"""

    def test_default_run(self, tmp_path):
        assert cmd_tracer(out_dir=str(tmp_path)) == EXIT_OK
        frame = pd.read_csv(tmp_path / 'breakthrough.csv')
        assert list(frame.columns) == ['t', 'gamma_0.92', 'gamma_1']
        assert len(frame) == 33
        summary = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
        assert set(summary['peak_arrival']) == {'0.92', '1'}

    def test_invalid_gamma(self, tmp_path):
        assert cmd_tracer([1.2], out_dir=str(tmp_path)) == EXIT_CONFIG_ERROR


class TestMlCommand:
    """测试 ml 命令。"""

    def test_exp(self, capsys):
        assert cmd_ml(1.0, 1.0) == EXIT_OK
        assert capsys.readouterr().out.strip() == '2.71828182845905'

    def test_complex(self, capsys):
        assert cmd_ml(1.0, 0.0, 1.0) == EXIT_OK
        out = capsys.readouterr().out.strip()
        assert out.endswith('j')
        assert complex(out) == pytest.approx(complex(0.54030230586814, 0.841470984807897), abs=1e-13)

    def test_invalid_order(self):
        assert cmd_ml(0.0, 1.0) == EXIT_SOLVER_ERROR


class TestMeshCommands:
    """测试 mesh gen / check。"""

    def test_generate_and_check(self, tmp_path, capsys):
        path = tmp_path / 'disk.json'
        assert cmd_mesh_gen('quarter_disk', str(path), refine=1) == EXIT_OK
        assert cmd_mesh_check(str(path)) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith('ok:')
        assert 'elements=12' in out

    def test_bad_parameters(self, tmp_path):
        assert cmd_mesh_gen('interval', str(tmp_path / 'x.json'), n=0) == EXIT_CONFIG_ERROR

    def test_broken_file(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"dim": 3}', encoding='utf-8')
        assert cmd_mesh_check(str(path)) == EXIT_CONFIG_ERROR


class TestMain:
    """测试命令行入口。"""

    def test_ml_subcommand(self, capsys):
        assert main(['ml', '--quiet', '--gamma', '0.5', '--re', '-1']) == EXIT_OK
        value = float(capsys.readouterr().out)
        assert value == pytest.approx(0.427583576155807, abs=1e-12)

    def test_reproduce_quarter_disk(self, tmp_path):
        assert main(['reproduce', '--quiet', '--study', 'quarter_disk', '--out', str(tmp_path)]) == EXIT_OK
        frame = pd.read_csv(tmp_path / 'quarter_disk.csv')
        assert list(frame.columns) == ['x', 'y', 'elements_3', 'elements_48', 'exact']
        assert len(frame) == 8
        metadata = json.loads((tmp_path / 'quarter_disk.json').read_text(encoding='utf-8'))
        assert metadata['study'] == 'quarter_disk'
        assert len(metadata['config_hash']) == 64

    def test_unknown_study(self):
        with pytest.raises(SystemExit) as info:
            main(['reproduce', '--study', 'nope'])
        assert info.value.code == 2

    def test_mesh_subcommands(self, tmp_path, capsys):
        path = tmp_path / 'rect.json'
        assert main(['mesh', 'gen', 'rectangle', str(path), '--n', '3', '--quiet']) == EXIT_OK
        assert main(['mesh', 'check', str(path), '--quiet']) == EXIT_OK
        assert 'nodes=16' in capsys.readouterr().out
