# -*- coding: utf-8 -*-

from typing import Optional


class FemError(Exception):
    """本项目所有可预期错误的基类。"""


class PoleError(FemError, ValueError):
    pass


class GammaOverflowError(FemError, OverflowError):
    pass


class InvalidOrderError(FemError, ValueError):
    pass


class MLConvergenceError(FemError, ArithmeticError):
    pass


class MeshFormatError(FemError, ValueError):
    """网格文件无法解析，附带行号与字段路径。"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        location = []
        if line is not None:
            location.append(f"第 {line} 行")
        if field:
            location.append(f"字段 {field}")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class MeshValidationError(FemError, ValueError):
    pass


class ElementError(FemError, ValueError):
    pass


class AssemblyError(FemError, ValueError):
    pass


class SingularSystemError(FemError, ArithmeticError):
    pass


class EigenSolverError(FemError, ArithmeticError):
    pass


class DefectiveSystemError(EigenSolverError):
    pass


class ImaginaryResidueError(FemError, ArithmeticError):
    pass


class SingularStepMatrixError(FemError, ArithmeticError):
    pass


class NoExactSolutionError(FemError, LookupError):
    pass


class ConfigError(FemError, ValueError):
    """运行配置校验失败；消息格式为 "<路径>:<行号>: <字段>: <原因>"。"""

    def __init__(self, reason: str, field: str = '', line: Optional[int] = None, path: str = '<config>'):
        self.reason = reason
        self.field = field
        self.line = line
        self.path = path
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {field}: {reason}" if field else f"{where}: {reason}")
