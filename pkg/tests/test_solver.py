# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from src.assembly import assemble, reduce
from src.benchmarks import (
    advection_dispersion_1d,
    build_problem,
    diffusion_1d,
    diffusion_2d,
    quarter_disk,
)
from src.errors import DefectiveSystemError, EigenSolverError, InvalidOrderError, SingularStepMatrixError
from src.solver import (
    caputo_l1,
    eigendecompose,
    evolve,
    l1_oracle,
    l1_series,
    l1_weights,
    matrix_exponential_oracle,
    relaxation_residual,
)
from src.specfun import mittag_leffler


def _prepared(case):
    problem = build_problem(case)
    system = assemble(problem.mesh, problem.coeffs, problem.bcs)
    reduced = reduce(system, problem.u0)
    fact = eigendecompose(system.C, system.K)
    return problem, system, reduced, fact


ORACLE_CASES = [
    diffusion_1d(10, 1),
    diffusion_1d(6, 2),
    advection_dispersion_1d(10),
    diffusion_2d(4),
    quarter_disk(1),
]


class TestEigendecompose:
    """测试 -M 的特征分解。"""

    def test_symmetric_diffusion(self):
        _, system, _, fact = _prepared(diffusion_1d(10, 1))
        M = np.linalg.solve(system.C, system.K)
        assert np.allclose(-M @ fact.B, fact.B * fact.lambdas, atol=1e-10)
        assert np.allclose(fact.B @ fact.Binv, np.eye(fact.n), atol=1e-10)
        assert np.all(fact.lambdas.real < 0)
        assert np.all(fact.lambdas.imag == 0)

    def test_discrete_decay_rate(self):
        """节点 sin 是线性单元的精确特征向量，最小衰减率为 6/h²·(1-cos θ)/(2+cos θ)·k。"""
        case = diffusion_1d(10, 1)
        _, _, _, fact = _prepared(case)
        theta = np.pi / 10
        expected = 6.0 * (1 - np.cos(theta)) / (2 + np.cos(theta)) * case.k
        assert -fact.lambdas.real.max() == pytest.approx(expected, rel=1e-10)

    def test_nonsymmetric_advection(self):
        _, system, _, fact = _prepared(advection_dispersion_1d(10))
        M = np.linalg.solve(system.C, system.K)
        assert not np.allclose(system.K, system.K.T)
        assert np.allclose(-M @ fact.B, fact.B * fact.lambdas, atol=1e-9)
        assert fact.cond_estimate < 1e8

    def test_defective_matrix(self):
        C = np.eye(2)
        K = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DefectiveSystemError):
            eigendecompose(C, K)

    def test_indefinite_mass(self):
        with pytest.raises(EigenSolverError):
            eigendecompose(np.diag([1.0, -1.0]), np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(EigenSolverError):
            eigendecompose(np.eye(2), np.eye(3))


class TestEvolve:
    """测试基于 Mittag-Leffler 的时间演化。"""

    def test_initial_time_is_exact(self):
        problem, _, reduced, fact = _prepared(advection_dispersion_1d(10))
        series = evolve(fact, reduced, 0.8, [0.0, 1.0])
        assert np.array_equal(series.values[0], problem.u0)

    def test_boundary_values_follow_dirichlet_data(self):
        problem, system, reduced, fact = _prepared(advection_dispersion_1d(10))
        t = 2.0
        series = evolve(fact, reduced, 0.8, [t])
        fixed = system.dof_map.fixed
        assert np.allclose(series.at(t)[fixed], system.dirichlet.values_at(0.8, t))

    @pytest.mark.parametrize("case", ORACLE_CASES, ids=lambda c: f"{c.id.value}-{c.order}")
    def test_order_one_matches_matrix_exponential(self, case):
        _, _, reduced, fact = _prepared(case)
        times = [0.0, 0.1, 0.5, 1.0, 3.0]
        series = evolve(fact, reduced, 1.0, times)
        oracle = matrix_exponential_oracle(reduced, times)
        assert np.max(np.abs(series.values - oracle.values)) <= 1e-10

    def test_invalid_order(self):
        _, _, reduced, fact = _prepared(diffusion_1d(4, 1))
        with pytest.raises(InvalidOrderError):
            evolve(fact, reduced, 1.5, [1.0])
        with pytest.raises(InvalidOrderError):
            evolve(fact, reduced, 0.0, [1.0])

    def test_negative_time(self):
        _, _, reduced, fact = _prepared(diffusion_1d(4, 1))
        with pytest.raises(ValueError):
            evolve(fact, reduced, 0.8, [-1.0])

    def test_series_frame_and_lookup(self):
        problem, _, reduced, fact = _prepared(diffusion_1d(4, 1))
        series = evolve(fact, reduced, 0.8, [0.0, 0.5], mesh=problem.mesh)
        frame = series.to_frame()
        assert list(frame.columns) == ['t', 'u0', 'u1', 'u2', 'u3', 'u4']
        assert len(frame) == 2
        with pytest.raises(KeyError):
            series.at(0.7)

    @pytest.mark.parametrize("case", [diffusion_1d(10, 1), advection_dispersion_1d(10)], ids=lambda c: c.id.value)
    def test_analytic_residual_vanishes(self, case):
        """C·D^γU + KU + C̄·D^γŪ + K̄Ū - F 在各采样时刻为零。"""
        _, system, reduced, fact = _prepared(case)
        for t in np.linspace(0.2, 20.0, 10):
            residual = relaxation_residual(system, reduced, fact, 0.8, t)
            assert np.max(np.abs(residual)) <= 1e-9

    def test_linear_in_initial_state(self):
        """齐次 Dirichlet 纯扩散: evolve(αu+βv) = α·evolve(u) + β·evolve(v)。"""
        problem, system, _, fact = _prepared(diffusion_1d(10, 1))
        rng = np.random.default_rng(0)
        u = problem.u0
        v = rng.standard_normal(u.size)
        v[[0, -1]] = 0.0
        times = [0.0, 0.3, 1.0, 7.5]
        alpha, beta = 2.5, -1.3
        combined = evolve(fact, reduce(system, alpha * u + beta * v), 0.8, times)
        separate = (alpha * evolve(fact, reduce(system, u), 0.8, times).values
                    + beta * evolve(fact, reduce(system, v), 0.8, times).values)
        assert np.max(np.abs(combined.values - separate)) <= 1e-12

    @pytest.mark.parametrize("case", [diffusion_1d(10, 1), diffusion_2d(4)], ids=lambda c: c.id.value)
    def test_pure_diffusion_decays(self, case):
        """单模态初值下各节点 |U| 单调不增，随机初值下 C-范数单调不增。"""
        problem, system, reduced, fact = _prepared(case)
        times = np.linspace(0.0, 20.0, 41)
        series = evolve(fact, reduced, 0.8, times)
        assert np.all(np.diff(np.abs(series.values), axis=0) <= 1e-13)

        rng = np.random.default_rng(1)
        u0 = rng.standard_normal(problem.mesh.n_nodes)
        u0[list(system.dof_map.fixed)] = 0.0
        free = system.dof_map.free
        values = evolve(fact, reduce(system, u0), 0.8, times).values[:, free]
        energy = np.einsum('ti,ij,tj->t', values, system.C, values)
        assert np.all(np.diff(energy) <= 1e-12 * energy[0])


class TestL1Scheme:
    """测试 L1 时间步进校验器。"""

    def test_weights(self):
        b = l1_weights(0.5, 4)
        assert b[0] == 1.0
        assert b[1] == pytest.approx(np.sqrt(2) - 1)
        assert np.all(np.diff(b) < 0)

    def test_weights_order_one(self):
        assert list(l1_weights(1.0, 4)) == [1.0, 0.0, 0.0, 0.0]

    def test_caputo_of_linear_function(self):
        """D^γ t = t^{1-γ}/Γ(2-γ)，L1 格式对线性函数精确。"""
        gamma, dt = 0.6, 0.01
        t = dt * np.arange(101)
        derivative = caputo_l1(t, dt, gamma)
        expected = t[1:] ** (1 - gamma) / math.gamma(2 - gamma)
        assert np.allclose(derivative, expected, rtol=1e-10)

    @pytest.mark.parametrize("case", [diffusion_1d(10, 1), advection_dispersion_1d(10), diffusion_2d(4)],
                             ids=lambda c: c.id.value)
    def test_matches_evolve(self, case):
        """t >= 0.1 的整张时间网格上偏差 <= 1e-3；更早的初始层由 L1 格式的起步误差主导。"""
        _, system, reduced, fact = _prepared(case)
        stepped = l1_series(system, reduced, 0.8, 1e-3, 1.0)
        mask = stepped.times >= 0.1 - 1e-12
        exact = evolve(fact, reduced, 0.8, stepped.times[mask])
        assert np.max(np.abs(stepped.values[mask] - exact.values)) <= 1e-3

    def test_fine_step_covers_initial_layer(self):
        """dt=2.5e-4 时包括初始层在内的全部时刻偏差 <= 1e-3。"""
        _, system, reduced, fact = _prepared(diffusion_1d(10, 1))
        stepped = l1_series(system, reduced, 0.8, 2.5e-4, 1.0)
        every = slice(None, None, 4)
        exact = evolve(fact, reduced, 0.8, stepped.times[every])
        assert np.max(np.abs(stepped.values[every] - exact.values)) <= 1e-3

    def test_scalar_relaxation(self):
        """D^γu = -u, u(0)=1 在 t=1 处接近 E_0.8(-1)。"""
        series = l1_oracle(np.eye(1), np.eye(1), np.ones(1), 0.8, 1e-3, 1.0)
        assert series.times[-1] == pytest.approx(1.0)
        assert abs(series.values[-1, 0] - mittag_leffler(0.8, -1.0).real) <= 5e-4

    def test_step_count(self):
        series = l1_oracle(np.eye(1), np.eye(1), np.ones(1), 0.7, 0.1, 1.0)
        assert len(series.times) == 11
        assert series.times[-1] == pytest.approx(1.0)

    def test_singular_step_matrix(self):
        with pytest.raises(SingularStepMatrixError):
            l1_oracle(np.zeros((2, 2)), np.zeros((2, 2)), np.ones(2), 0.7, 0.1, 1.0)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            l1_oracle(np.eye(1), np.eye(1), np.ones(1), 0.7, 0.0, 1.0)
