# -*- coding: utf-8 -*-

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from .assembly import GlobalSystem, ReducedRelaxation
from .config import DEFECT_COND_LIMIT, EIGEN_RESIDUAL_TOL, IMAG_RESIDUE_TOL, STABILITY_WARN_TOL
from .errors import (
    DefectiveSystemError,
    EigenSolverError,
    ImaginaryResidueError,
    InvalidOrderError,
    SingularStepMatrixError,
)
from .mesh import Mesh
from .specfun import MLConfig, gamma_fn, mittag_leffler, mittag_leffler_many

logger = logging.getLogger(__name__)

# (F_const, F_sep, λ_b): F(t) = F_const + F_sep·E_γ(-λ_b t^γ)
Forcing = Tuple[np.ndarray, Optional[np.ndarray], float]

_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class EigenFactorization:
    """-M = -C⁻¹K 的特征分解: -M·B = B·diag(lambdas)。"""
    B: np.ndarray
    lambdas: np.ndarray
    Binv: np.ndarray
    cond_estimate: float
    residual: float

    @property
    def n(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True, eq=False)
class SolutionSeries:
    times: np.ndarray
    values: np.ndarray
    gamma: float
    mesh: Optional[Mesh] = None

    def index_of(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-12))
        if hits.size == 0:
            raise KeyError(f"解序列中没有时刻 t={t}")
        return int(hits[0])

    def at(self, t: float) -> np.ndarray:
        return self.values[self.index_of(t)]

    def to_frame(self) -> pd.DataFrame:
        columns = [f"u{i}" for i in range(self.values.shape[1])]
        df = pd.DataFrame(self.values, columns=columns)
        df.insert(0, 't', self.times)
        return df


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 < gamma <= 1.0):
        raise InvalidOrderError(f"时间分数阶 γ 必须在 (0, 1] 内，当前值: {gamma}")
    return gamma


def _check_times(times: Sequence[float]) -> np.ndarray:
    arr = np.asarray(times, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("至少需要一个输出时刻")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"输出时刻必须是非负有限值: {arr.tolist()}")
    return arr


# --- 特征分解 ---

def eigendecompose(
    C: np.ndarray,
    K: np.ndarray,
    residual_tol: Optional[float] = None,
    defect_cond: Optional[float] = None,
) -> EigenFactorization:
    """分解 C（Cholesky）得到 M = C⁻¹K，再求 -M 的特征对。

    K 对称时用广义对称问题 K v = w C v（特征向量 C-正交），否则用 LAPACK 非对称 QR。
    """
    residual_tol = EIGEN_RESIDUAL_TOL if residual_tol is None else residual_tol
    defect_cond = DEFECT_COND_LIMIT if defect_cond is None else defect_cond
    C = np.asarray(C, dtype=float)
    K = np.asarray(K, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape != K.shape or C.shape[0] == 0:
        raise EigenSolverError(f"C 与 K 必须是同型非空方阵: {C.shape} / {K.shape}")

    try:
        c_factor = linalg.cho_factor(C)
    except linalg.LinAlgError as e:
        raise EigenSolverError(f"C 不是正定矩阵: {e}") from e
    M = linalg.cho_solve(c_factor, K)
    m_norm = max(float(np.abs(M).max()), _TINY)

    k_scale = max(float(np.abs(K).max()), _TINY)
    symmetric = np.allclose(K, K.T, rtol=0.0, atol=1e-13 * k_scale)
    try:
        if symmetric:
            w, V = linalg.eigh(K, C)
            lambdas = (-w).astype(complex)
            B = V.astype(complex)
            Binv = (V.T @ C).astype(complex)
        else:
            lambdas, B = linalg.eig(-M)
            Binv = None
    except linalg.LinAlgError as e:
        logger.error(f"特征值求解失败: {e}")
        raise EigenSolverError(f"特征值求解未收敛: {e}") from e

    cond = float(np.linalg.cond(B))
    if not math.isfinite(cond) or cond > defect_cond:
        logger.error(f"特征向量矩阵条件数 {cond:.3e} 超过上限 {defect_cond:.1e}")
        raise DefectiveSystemError(
            f"-M 接近亏损 (特征向量条件数 {cond:.3e} > {defect_cond:.1e})，请改用 L1 时间步进"
        )
    if Binv is None:
        Binv = linalg.inv(B)

    residual = float(np.abs(-M @ B - B * lambdas).max())
    if residual > residual_tol * m_norm:
        raise EigenSolverError(f"特征分解残差 {residual:.3e} 超过 {residual_tol:.1e}·‖M‖={residual_tol * m_norm:.3e}")
    inverse_error = float(np.abs(B @ Binv - np.eye(B.shape[0])).max())
    if inverse_error > residual_tol * max(cond, 1.0):
        raise EigenSolverError(f"B·B⁻¹ 偏离单位阵 {inverse_error:.3e}")

    max_real = float(lambdas.real.max())
    if max_real > STABILITY_WARN_TOL:
        logger.warning(f"存在实部为正的特征值 Re(Λ)={max_real:.3e}，解可能随时间增长")

    logger.debug(f"特征分解完成: n={lambdas.size}, Λ ∈ [{lambdas.real.min():.4e}, {max_real:.4e}], cond={cond:.3e}")
    return EigenFactorization(B, lambdas, Binv, cond, residual)


# --- 时间演化 ---

def _realify(u: np.ndarray, t: float, imag_tol: float) -> np.ndarray:
    scale = max(float(np.abs(u).max()), _TINY)
    residue = float(np.abs(u.imag).max())
    if residue > imag_tol * scale:
        logger.error(f"t={t} 时虚部残留 {residue:.3e} 超过 {imag_tol:.1e}·max|u|")
        raise ImaginaryResidueError(f"t={t} 时虚部残留 {residue:.3e}，复共轭特征对不一致")
    return u.real


def evolve(
    fact: EigenFactorization,
    reduced: ReducedRelaxation,
    gamma: float,
    times: Sequence[float],
    ml_cfg: Optional[MLConfig] = None,
    imag_tol: Optional[float] = None,
    mesh: Optional[Mesh] = None,
) -> SolutionSeries:
    """Ũ_t = B·diag(E_γ(Λ_i t^γ))·B⁻¹·Ũ₀，再还原为全部节点上的物理解。"""
    gamma = _check_gamma(gamma)
    times = _check_times(times)
    imag_tol = IMAG_RESIDUE_TOL if imag_tol is None else imag_tol
    modal0 = fact.Binv @ reduced.u0_tilde

    rows = []
    for t in times:
        if t == 0.0:
            rows.append(np.array(reduced.u0, dtype=float))
            continue
        tg = t ** gamma
        u_tilde = fact.B @ (mittag_leffler_many(gamma, fact.lambdas * tg, ml_cfg) * modal0)
        decay = reduced.dirichlet.decay(gamma, t, ml_cfg)
        u_free = _realify(reduced.physical_free(u_tilde, decay), t, imag_tol)
        rows.append(reduced.full_nodal(u_free, decay))
    return SolutionSeries(times, np.vstack(rows), gamma, mesh)


def matrix_exponential_oracle(
    reduced: ReducedRelaxation,
    times: Sequence[float],
    mesh: Optional[Mesh] = None,
) -> SolutionSeries:
    """γ=1 的参照解 Ũ_t = expm(-M t)·Ũ₀。"""
    times = _check_times(times)
    M = linalg.solve(reduced.C, reduced.K, assume_a='pos')
    rows = []
    for t in times:
        if t == 0.0:
            rows.append(np.array(reduced.u0, dtype=float))
            continue
        u_tilde = linalg.expm(-M * t) @ reduced.u0_tilde
        decay = math.exp(-reduced.rate * t)
        rows.append(reduced.full_nodal(reduced.physical_free(u_tilde, decay), decay))
    return SolutionSeries(times, np.vstack(rows), 1.0, mesh)


# --- L1 时间步进 (独立校验) ---

def l1_weights(gamma: float, n: int) -> np.ndarray:
    j = np.arange(n, dtype=float)
    b = (j + 1.0) ** (1.0 - gamma) - j ** (1.0 - gamma)
    if n:
        # γ=1 时 0^0 会把 b_0 算成 0
        b[0] = 1.0
    return b


def caputo_l1(values: Sequence[float], dt: float, gamma: float) -> np.ndarray:
    """均匀采样序列的 L1 Caputo 导数，返回 t_1..t_N 上的值（长度比输入少 1）。"""
    gamma = _check_gamma(gamma)
    u = np.asarray(values, dtype=float)
    diffs = np.diff(u, axis=0)
    n = diffs.shape[0]
    b = l1_weights(gamma, n)
    c0 = dt ** (-gamma) / gamma_fn(2.0 - gamma)
    out = np.empty((n,) + u.shape[1:])
    for m in range(1, n + 1):
        out[m - 1] = c0 * (b[:m] @ diffs[m - 1::-1])
    return out


def l1_oracle(
    C: np.ndarray,
    K: np.ndarray,
    u0: np.ndarray,
    gamma: float,
    dt: float,
    T: float,
    forcing: Optional[Forcing] = None,
    ml_cfg: Optional[MLConfig] = None,
) -> SolutionSeries:
    """L1 格式逐步求解 C·D^γU + KU = F(t)，每步只解一个预先 LU 分解的线性方程组。"""
    gamma = _check_gamma(gamma)
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"时间步长必须 > 0，当前值: {dt}")
    if not (T >= 0 and math.isfinite(T)):
        raise ValueError(f"终止时刻必须 >= 0，当前值: {T}")
    C = np.asarray(C, dtype=float)
    K = np.asarray(K, dtype=float)
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    n_steps = int(math.floor(T / dt + 1e-9))
    times = dt * np.arange(n_steps + 1)

    c0 = dt ** (-gamma) / gamma_fn(2.0 - gamma)
    step_matrix = c0 * C + K
    lu, piv = linalg.lu_factor(step_matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * max(float(np.abs(step_matrix).max()), _TINY) * step_matrix.shape[0]:
        raise SingularStepMatrixError(f"步进矩阵 c0·C + K 奇异 (最小主元 {pivots.min():.3e})")

    if forcing is None:
        f_const, f_sep, rate = np.zeros_like(u0), None, 0.0
    else:
        f_const, f_sep, rate = forcing

    b = l1_weights(gamma, n_steps + 1)
    U = np.empty((n_steps + 1, u0.size))
    U[0] = u0
    diffs = np.empty((n_steps, u0.size))
    for m in range(1, n_steps + 1):
        history = b[1:m] @ diffs[m - 2::-1] if m > 1 else 0.0
        rhs = c0 * (C @ (U[m - 1] - history)) + f_const
        if f_sep is not None:
            rhs = rhs + f_sep * mittag_leffler(gamma, -rate * times[m] ** gamma, ml_cfg).real
        U[m] = linalg.lu_solve((lu, piv), rhs)
        diffs[m - 1] = U[m] - U[m - 1]
    return SolutionSeries(times, U, gamma)


def l1_series(
    system: GlobalSystem,
    reduced: ReducedRelaxation,
    gamma: float,
    dt: float,
    T: float,
    ml_cfg: Optional[MLConfig] = None,
    mesh: Optional[Mesh] = None,
) -> SolutionSeries:
    """在自由度上跑 L1 步进（Dirichlet 数据移到右端），再拼回全部节点，可直接与 evolve 比较。"""
    spec = system.dirichlet
    dof_map = system.dof_map
    if reduced.particular is None:
        forcing = (system.F - system.Kbar @ spec.values, None, 0.0)
    else:
        forcing = (system.F.copy(), (spec.rate * system.Cbar - system.Kbar) @ spec.values, spec.rate)
    free_series = l1_oracle(system.C, system.K, reduced.u0[dof_map.free], gamma, dt, T, forcing, ml_cfg)

    rows = []
    for t, u_free in zip(free_series.times, free_series.values):
        rows.append(dof_map.scatter(u_free, spec.values_at(gamma, t, ml_cfg)))
    rows[0] = np.array(reduced.u0, dtype=float)
    return SolutionSeries(free_series.times, np.vstack(rows), gamma, mesh)


def relaxation_residual(
    system: GlobalSystem,
    reduced: ReducedRelaxation,
    fact: EigenFactorization,
    gamma: float,
    t: float,
    ml_cfg: Optional[MLConfig] = None,
) -> np.ndarray:
    """解析残差 C·D^γU + KU + C̄·D^γŪ + K̄Ū - F，利用 D^γ E_γ(λt^γ) = λ E_γ(λt^γ)。"""
    gamma = _check_gamma(gamma)
    tg = t ** gamma
    modal = mittag_leffler_many(gamma, fact.lambdas * tg, ml_cfg) * (fact.Binv @ reduced.u0_tilde)
    u_tilde = fact.B @ modal
    du_tilde = fact.B @ (fact.lambdas * modal)

    decay = reduced.dirichlet.decay(gamma, t, ml_cfg)
    U = reduced.physical_free(u_tilde, decay)
    DU = du_tilde
    Ubar = system.dirichlet.values * decay
    DUbar = np.zeros_like(Ubar)
    if reduced.particular is not None:
        DU = DU - reduced.rate * reduced.particular * decay
        DUbar = -reduced.rate * Ubar

    residual = system.C @ DU + system.K @ U + system.Cbar @ DUbar + system.Kbar @ Ubar - system.F
    return np.real(residual)
