"""
异常定义模块
库代码统一抛出以下异常，仅由命令行层（main.py）捕获并映射为退出码
"""
from typing import Optional


class PolyMomentError(Exception):
    """项目内所有异常的基类"""


class DimensionMismatchError(PolyMomentError, ValueError):
    """维度或形状不一致"""


class DegeneratePolynomialError(PolyMomentError, ValueError):
    """需要非零多项式时传入了零多项式"""


class ProblemParseError(PolyMomentError, ValueError):
    """问题文件解析失败，附带字段路径与行号"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        context = []
        if line is not None:
            context.append(f"line {line}")
        if field:
            context.append(f"field {field}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class MomentRangeError(PolyMomentError, ValueError):
    """指数超出矩存储范围，或构造矩矩阵所需的矩不足"""


class ReformulationUsageError(PolyMomentError):
    """重构问题时仍带有不等式约束（应先调用 slackify）"""


class NumericError(PolyMomentError, ArithmeticError):
    """决策向量中出现非有限值"""


class DegenerateSolutionError(PolyMomentError):
    """所有混合分量的质量都接近零，无法恢复最优点"""


class BandTooTightError(PolyMomentError):
    """网格枚举时没有任何点落在可行带内"""


class NotSeparableError(PolyMomentError):
    """约束耦合了多个变量，无法逐轴枚举"""


class OracleGuardError(PolyMomentError, ValueError):
    """枚举规模超过保护上限"""
