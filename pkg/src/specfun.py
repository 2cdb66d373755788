# -*- coding: utf-8 -*-

import cmath
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .config import ML_ABS_TOL, ML_MAX_SERIES_TERMS
from .errors import GammaOverflowError, InvalidOrderError, MLConvergenceError, PoleError

logger = logging.getLogger(__name__)

ComplexScalar = complex
Number = Union[int, float, complex]

# Lanczos 近似 (g=7, n=9)
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)
_GAMMA_MAX_ARG = 171.6243769563027
_EPS = float(np.finfo(float).eps)

# 围道积分截断: exp(-46) 远低于双精度分辨率
_CONTOUR_DECAY = 46.0


@dataclass(frozen=True)
class MLConfig:
    """Mittag-Leffler 求值精度配置。"""
    target_abs_tol: float = ML_ABS_TOL
    max_series_terms: int = ML_MAX_SERIES_TERMS

    def __post_init__(self):
        if not (math.isfinite(self.target_abs_tol) and self.target_abs_tol > 0):
            raise ValueError(f"target_abs_tol 必须 > 0，当前值: {self.target_abs_tol}")
        if int(self.max_series_terms) < 1:
            raise ValueError(f"max_series_terms 必须 >= 1，当前值: {self.max_series_terms}")


DEFAULT_ML_CONFIG = MLConfig()


def _lanczos_sum(z: float) -> Tuple[float, float]:
    a = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        a += _LANCZOS_COEFFS[i] / (z + i)
    return a, z + _LANCZOS_G + 0.5


def gamma_fn(x: float) -> float:
    """Γ(x)，x>=0.5 用 Lanczos 近似，x<0.5 用反射公式。"""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Γ 的参数必须是有限实数: {x}")
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"Γ 在非正整数处无定义: x={x}")
    if x > _GAMMA_MAX_ARG:
        raise GammaOverflowError(f"Γ({x}) 超出双精度范围")

    if x == math.floor(x) and x <= 171.0:
        return float(math.factorial(int(x) - 1))

    if x < 0.5:
        if 1.0 - x > _GAMMA_MAX_ARG:
            # |Γ(x)| 下溢
            return math.copysign(0.0, math.sin(math.pi * x))
        result = math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
        if math.isinf(result):
            raise GammaOverflowError(f"Γ({x}) 超出双精度范围")
        return result

    a, t = _lanczos_sum(x - 1.0)
    # 拆成两个半幂，避免 t^(x-0.5) 在 x 接近上限时溢出
    half_power = t ** (0.5 * (x - 0.5))
    return _SQRT_TWO_PI * a * (half_power * math.exp(-t)) * half_power


def log_gamma(x: float) -> float:
    """ln Γ(x)，仅用于 x>0 的大参数场景。"""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"log_gamma 仅支持正实数: {x}")
    if x < 0.5:
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    a, t = _lanczos_sum(x - 1.0)
    return _HALF_LOG_TWO_PI + (x - 0.5) * math.log(t) - t + math.log(a)


def _reciprocal_gamma(x: float) -> float:
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    if x > _GAMMA_MAX_ARG:
        return math.exp(-log_gamma(x))
    return 1.0 / gamma_fn(x)


def bessel_j0(x: float) -> float:
    """第一类零阶 Bessel 函数 J0，幂级数求和。"""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"J0 的参数必须是有限实数: {x}")
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    for k in range(1, 200):
        term *= q / (k * k)
        total += term
        if abs(term) <= 0.5 * _EPS * abs(total):
            break
    return total


# --- Mittag-Leffler 各求值区间 ---

def _taylor_series(gamma: float, z: complex, cfg: MLConfig) -> Optional[complex]:
    """Taylor 级数；舍入误差上界 8·eps·Σ|项| 超过容差时返回 None。"""
    tol = cfg.target_abs_tol
    total = 0j
    abs_total = 0.0
    zn = 1.0 + 0j
    prev = math.inf
    for n in range(int(cfg.max_series_terms)):
        term = zn * _reciprocal_gamma(gamma * n + 1.0)
        mag = abs(term)
        if not math.isfinite(mag):
            return None
        total += term
        abs_total += mag
        if 8.0 * _EPS * abs_total > tol:
            return None
        if n > 0 and mag < prev and mag <= 0.01 * _EPS * abs_total:
            return total
        prev = mag
        zn *= z
    return None


def _asymptotic_negative_axis(gamma: float, x: float, cfg: MLConfig) -> Optional[float]:
    """负实轴渐近展开 E_γ(-x) ≈ Σ (-1)^{k+1} x^{-k} / Γ(1-γk)，0<γ<1。"""
    tol = cfg.target_abs_tol
    if x < 1.0:
        return None

    # γ>2/3 时存在指数小量余项
    c = math.cos(math.pi / gamma)
    if c < 0.0 and (2.0 / gamma) * math.exp(c * x ** (1.0 / gamma)) > 0.1 * tol:
        return None

    log_x = math.log(x)
    total = 0.0
    prev_envelope = math.inf
    for k in range(1, int(cfg.max_series_terms) + 1):
        y = gamma * k
        if y < 1.0:
            envelope = math.exp(-k * log_x) / gamma_fn(1.0 - y)
            coeff_sign = 1.0
        else:
            # 1/Γ(1-y) = Γ(y)·sin(π(1-y))/π
            envelope = math.exp(log_gamma(y) - k * log_x) / math.pi
            coeff_sign = math.sin(math.pi * (1.0 - y))
        if envelope > prev_envelope:
            return None
        sign = 1.0 if k % 2 == 1 else -1.0
        total += sign * coeff_sign * envelope
        if envelope <= 0.1 * tol and envelope <= 0.5 * _EPS * abs(total):
            return total
        prev_envelope = envelope
    return None


def _quad(func: Callable[[float], float], upper: float, points: Optional[List[float]], tol: float) -> Tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        value, error = integrate.quad(
            func, 0.0, upper, points=points, epsabs=0.01 * tol, epsrel=1e-13, limit=500,
        )
    return value, error


def _contour_integral(gamma: float, z: complex, cfg: MLConfig) -> complex:
    """Hankel 围道积分表示 (0<γ<1)，两条射线夹角 ±μ，μ ∈ (γπ/2, γπ]。"""
    tol = cfg.target_abs_tol
    theta = gamma * math.pi
    arg = abs(cmath.phase(z))
    mu = theta
    if abs(arg - theta) < 0.05 * theta:
        # z 贴近射线时转动围道
        mu = 0.8 * theta
    decay = math.cos(mu / gamma)
    chi_max = (_CONTOUR_DECAY / -decay) ** gamma
    radius = abs(z)
    points = [radius] if radius < chi_max else None
    inv_gamma = 1.0 / gamma

    def ray(sign: float) -> Callable[[float], complex]:
        rot = cmath.exp(1j * sign * mu)
        rot_pow = cmath.exp(1j * sign * mu / gamma)

        def integrand(chi: float) -> complex:
            return cmath.exp(chi ** inv_gamma * rot_pow) * rot / (chi * rot - z)
        return integrand

    upper_ray = ray(1.0)
    if z.imag == 0.0:
        value, error = _quad(lambda chi: upper_ray(chi).imag, chi_max, points, tol)
        integral = complex(value / theta, 0.0)
        error /= theta
    else:
        lower_ray = ray(-1.0)
        re_part, re_err = _quad(lambda chi: (upper_ray(chi) - lower_ray(chi)).real, chi_max, points, tol)
        im_part, im_err = _quad(lambda chi: (upper_ray(chi) - lower_ray(chi)).imag, chi_max, points, tol)
        integral = complex(re_part, im_part) / (2j * theta)
        error = (re_err + im_err) / (2.0 * theta)

    if error > tol:
        raise MLConvergenceError(
            f"E_{gamma}({z}) 围道积分误差估计 {error:.3e} 超过容差 {tol:.1e}"
        )

    if arg < mu:
        try:
            residue = cmath.exp(z ** inv_gamma) / gamma
        except OverflowError as e:
            raise MLConvergenceError(f"E_{gamma}({z}) 溢出: {e}") from e
        integral += residue
    if z.imag == 0.0:
        return complex(integral.real, 0.0)
    return integral


def _duplication(gamma: float, z: complex, cfg: MLConfig) -> complex:
    """γ>1 时用 (2m+1) 倍公式化为阶数 <=1 的求值。"""
    m = math.ceil((gamma - 1.0) / 2.0)
    n = 2 * m + 1
    root = z ** (1.0 / n)
    total = 0j
    for h in range(-m, m + 1):
        total += mittag_leffler(gamma / n, root * cmath.exp(2j * math.pi * h / n), cfg)
    total /= n
    if z.imag == 0.0:
        return complex(total.real, 0.0)
    return total


def mittag_leffler(gamma: float, z: Number, cfg: Optional[MLConfig] = None) -> complex:
    """单参数 Mittag-Leffler 函数 E_γ(z) = Σ z^n / Γ(γn+1)，绝对误差不超过 cfg.target_abs_tol。"""
    cfg = cfg or DEFAULT_ML_CONFIG
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0.0:
        raise InvalidOrderError(f"Mittag-Leffler 阶数必须 > 0，当前值: {gamma}")
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"Mittag-Leffler 参数必须有限: {z}")

    if z == 0:
        return 1.0 + 0j
    if gamma == 1.0:
        return cmath.exp(z)

    value = _taylor_series(gamma, z, cfg)
    if value is not None:
        return value
    if gamma > 1.0:
        return _duplication(gamma, z, cfg)
    if z.imag == 0.0 and z.real < 0.0:
        tail = _asymptotic_negative_axis(gamma, -z.real, cfg)
        if tail is not None:
            return complex(tail, 0.0)
    return _contour_integral(gamma, z, cfg)


def mittag_leffler_many(gamma: float, zs: Iterable[Number], cfg: Optional[MLConfig] = None) -> np.ndarray:
    """对数组逐点求值，保持输入形状。"""
    arr = np.asarray(zs, dtype=complex)
    flat = [mittag_leffler(gamma, z, cfg) for z in arr.ravel()]
    return np.array(flat, dtype=complex).reshape(arr.shape)
