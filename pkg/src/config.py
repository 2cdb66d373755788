# -*- coding: utf-8 -*-

import logging
import os
import sys

# --- 日志配置 ---
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()

logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=getattr(logging, LOG_LEVEL, logging.INFO),
)
for _logger_name in ("asyncio",):
    logging.getLogger(_logger_name).setLevel(logging.WARNING)

logger = logging.getLogger(__name__)

# --- 数值精度配置 (从环境变量读取) ---
ML_ABS_TOL = float(os.getenv('ML_ABS_TOL', '1e-12'))
ML_MAX_SERIES_TERMS = int(os.getenv('ML_MAX_SERIES_TERMS', '500'))
EIGEN_RESIDUAL_TOL = float(os.getenv('EIGEN_RESIDUAL_TOL', '1e-9'))
IMAG_RESIDUE_TOL = float(os.getenv('IMAG_RESIDUE_TOL', '1e-8'))
DEFECT_COND_LIMIT = float(os.getenv('DEFECT_COND_LIMIT', '1e8'))
STABILITY_WARN_TOL = float(os.getenv('STABILITY_WARN_TOL', '1e-10'))

# --- 批量运行与输出配置 ---
SWEEP_CONCURRENCY = int(os.getenv('SWEEP_CONCURRENCY', '4'))
RESULT_TIMEZONE = os.getenv('RESULT_TIMEZONE', 'Asia/Shanghai')
CSV_FLOAT_FORMAT = os.getenv('CSV_FLOAT_FORMAT', '%.15g')

# --- 应用内常量 ---
VERSION = '1.0.0'
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3
TAG_DIRICHLET = 'dirichlet'
TAG_NEUMANN = 'neumann'
TAG_CONVECTIVE = 'convective'
EXCLUSIVE_TAGS = (TAG_DIRICHLET, TAG_NEUMANN, TAG_CONVECTIVE)


def validate_config():
    """验证环境变量配置的合法性，不合法则退出。"""
    errors = []

    if LOG_LEVEL not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        errors.append(f"LOG_LEVEL 不是合法的日志级别，当前值: {LOG_LEVEL}")
    if ML_ABS_TOL <= 0:
        errors.append(f"ML_ABS_TOL 必须 > 0，当前值: {ML_ABS_TOL}")
    if ML_MAX_SERIES_TERMS < 1:
        errors.append(f"ML_MAX_SERIES_TERMS 必须 >= 1，当前值: {ML_MAX_SERIES_TERMS}")
    if EIGEN_RESIDUAL_TOL <= 0:
        errors.append(f"EIGEN_RESIDUAL_TOL 必须 > 0，当前值: {EIGEN_RESIDUAL_TOL}")
    if IMAG_RESIDUE_TOL <= 0:
        errors.append(f"IMAG_RESIDUE_TOL 必须 > 0，当前值: {IMAG_RESIDUE_TOL}")
    if DEFECT_COND_LIMIT <= 1:
        errors.append(f"DEFECT_COND_LIMIT 必须 > 1，当前值: {DEFECT_COND_LIMIT}")
    if STABILITY_WARN_TOL < 0:
        errors.append(f"STABILITY_WARN_TOL 必须 >= 0，当前值: {STABILITY_WARN_TOL}")
    if SWEEP_CONCURRENCY < 1:
        errors.append(f"SWEEP_CONCURRENCY 必须 >= 1，当前值: {SWEEP_CONCURRENCY}")
    try:
        CSV_FLOAT_FORMAT % 1.0
    except (TypeError, ValueError):
        errors.append(f"CSV_FLOAT_FORMAT 不是合法的浮点格式，当前值: {CSV_FLOAT_FORMAT}")

    if errors:
        for err in errors:
            logger.critical(f"配置错误: {err}")
        sys.exit(EXIT_CONFIG_ERROR)


def log_config():
    """在启动时打印当前配置。"""
    logger.info("--- 求解器配置 ---")
    logger.info(f"Mittag-Leffler 绝对误差目标: {ML_ABS_TOL}")
    logger.info(f"级数最大项数: {ML_MAX_SERIES_TERMS}")
    logger.info(f"特征分解残差上限: {EIGEN_RESIDUAL_TOL}")
    logger.info(f"虚部残留上限: {IMAG_RESIDUE_TOL}")
    logger.info(f"特征向量条件数上限: {DEFECT_COND_LIMIT}")
    logger.info(f"批量运行并发数: {SWEEP_CONCURRENCY}")
    logger.info(f"结果时间戳时区: {RESULT_TIMEZONE}")
    logger.info("--------------------")
