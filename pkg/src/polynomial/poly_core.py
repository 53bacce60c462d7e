"""
稀疏多元多项式模块
单项式基下的稀疏多项式运算、约束优化问题定义，以及不等式约束的松弛变量变换
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from ..utils.exceptions import DegeneratePolynomialError, DimensionMismatchError
from ..utils.logger import get_logger

logger = get_logger(__name__)

MultiIndex = Tuple[int, ...]
Scalar = Union[int, float]

# 批量求值时每块的点数上限，控制 (N, T, D) 中间数组的内存
_EVAL_CHUNK = 65536


def graded_lex_key(index: MultiIndex) -> Tuple[int, MultiIndex]:
    """分级字典序：先比较总次数，再按字典序比较"""
    return sum(index), index


def _normalize_index(index: Iterable[int], dimension: int) -> MultiIndex:
    normalized = tuple(int(e) for e in index)
    if len(normalized) != dimension:
        raise DimensionMismatchError(
            f"多重指标长度 {len(normalized)} 与维度 {dimension} 不一致: {normalized}"
        )
    if any(e < 0 for e in normalized):
        raise DimensionMismatchError(f"多重指标含负指数: {normalized}")
    return normalized


@dataclass(frozen=True, eq=False)
class SparsePoly:
    """
    单项式基下的稀疏多项式，terms 为 多重指标 -> 系数 的映射

    构造后不可变：零系数被剔除，项按分级字典序存储。
    """

    dimension: int
    terms: Mapping[MultiIndex, float]

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise DimensionMismatchError(f"多项式维度必须为正整数: {self.dimension}")
        accumulated: Dict[MultiIndex, float] = {}
        for index, coeff in dict(self.terms).items():
            key = _normalize_index(index, self.dimension)
            accumulated[key] = accumulated.get(key, 0.0) + float(coeff)
        cleaned = {k: accumulated[k] for k in sorted(accumulated, key=graded_lex_key) if accumulated[k] != 0.0}
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "terms", MappingProxyType(cleaned))

    # ------------------------------------------------------------------ 构造
    @classmethod
    def zero(cls, dimension: int) -> "SparsePoly":
        return cls(dimension, {})

    @classmethod
    def constant(cls, dimension: int, value: Scalar) -> "SparsePoly":
        return cls(dimension, {(0,) * dimension: value})

    @classmethod
    def variable(cls, dimension: int, i: int, power: int = 1) -> "SparsePoly":
        """第 i 个坐标（从 0 开始）的 power 次幂"""
        if not 0 <= i < dimension:
            raise DimensionMismatchError(f"变量下标越界: {i}（维度 {dimension}）")
        index = [0] * dimension
        index[i] = power
        return cls(dimension, {tuple(index): 1.0})

    # ------------------------------------------------------------------ 属性
    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        """总次数；零多项式约定为 0"""
        if not self.terms:
            return 0
        return max(sum(index) for index in self.terms)

    @property
    def n_terms(self) -> int:
        """支撑集大小 N(p)"""
        return len(self.terms)

    @property
    def support(self) -> Tuple[MultiIndex, ...]:
        return tuple(self.terms)

    def variable_degree(self, i: int) -> int:
        """第 i 个变量的最高指数"""
        if not self.terms:
            return 0
        return max(index[i] for index in self.terms)

    def depends_on(self) -> Tuple[int, ...]:
        """实际出现的变量下标"""
        return tuple(i for i in range(self.dimension) if self.variable_degree(i) > 0)

    @cached_property
    def exponent_matrix(self) -> np.ndarray:
        """(T, D) 整数指数矩阵，行顺序与 terms 一致"""
        if not self.terms:
            return np.zeros((0, self.dimension), dtype=np.int64)
        return np.array(list(self.terms.keys()), dtype=np.int64)

    @cached_property
    def coefficient_vector(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=float)

    def embed(self, dimension: int) -> "SparsePoly":
        """在末尾追加未使用的坐标，提升到更高维度"""
        if dimension < self.dimension:
            raise DimensionMismatchError(f"无法嵌入到更低维度: {self.dimension} -> {dimension}")
        pad = (0,) * (dimension - self.dimension)
        return SparsePoly(dimension, {index + pad: c for index, c in self.terms.items()})

    # ------------------------------------------------------------------ 运算
    def _check_same_dimension(self, other: "SparsePoly") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatchError(f"多项式维度不一致: {self.dimension} vs {other.dimension}")

    def __add__(self, other: Union["SparsePoly", Scalar]) -> "SparsePoly":
        if not isinstance(other, SparsePoly):
            other = SparsePoly.constant(self.dimension, other)
        self._check_same_dimension(other)
        merged = dict(self.terms)
        for index, coeff in other.terms.items():
            merged[index] = merged.get(index, 0.0) + coeff
        return SparsePoly(self.dimension, merged)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly(self.dimension, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: Union["SparsePoly", Scalar]) -> "SparsePoly":
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "SparsePoly":
        return (-self) + other

    def __mul__(self, other: Union["SparsePoly", Scalar]) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            return multiply(self, other)
        return SparsePoly(self.dimension, {k: c * float(other) for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __pow__(self, power: int) -> "SparsePoly":
        if power < 0:
            raise ValueError("多项式幂次必须为非负整数")
        result = SparsePoly.constant(self.dimension, 1.0)
        for _ in range(power):
            result = multiply(result, self)
        return result

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate(self, x)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.dimension == other.dimension and dict(self.terms) == dict(other.terms)

    def __hash__(self) -> int:
        return hash((self.dimension, tuple(self.terms.items())))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: List[str] = []
        for index, coeff in self.terms.items():
            factors = [
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}"
                for i, e in enumerate(index) if e > 0
            ]
            monomial = "*".join(factors)
            if not monomial:
                parts.append(f"{coeff:+g}")
            elif coeff == 1.0:
                parts.append(f"+{monomial}")
            elif coeff == -1.0:
                parts.append(f"-{monomial}")
            else:
                parts.append(f"{coeff:+g}*{monomial}")
        text = " ".join(parts)
        return text[1:] if text.startswith("+") else text


def evaluate(p: SparsePoly, x: Sequence[float]) -> float:
    """
    计算 p(x) = Σ p_n x^n

    项按分级字典序累加，结果可复现。

    Args:
        p: 多项式
        x: 长度为 p.dimension 的实向量

    Returns:
        多项式取值
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise DimensionMismatchError(f"求值点形状 {x.shape} 与多项式维度 {p.dimension} 不一致")
    if p.is_zero:
        return 0.0
    monomials = np.prod(x[np.newaxis, :] ** p.exponent_matrix, axis=1)
    return float(np.dot(p.coefficient_vector, monomials))


def evaluate_many(p: SparsePoly, points: np.ndarray) -> np.ndarray:
    """批量求值，points 形状为 (N, D)"""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != p.dimension:
        raise DimensionMismatchError(f"求值点形状 {points.shape} 与多项式维度 {p.dimension} 不一致")
    values = np.zeros(points.shape[0])
    if p.is_zero:
        return values
    exponents = p.exponent_matrix[np.newaxis, :, :]
    for start in range(0, points.shape[0], _EVAL_CHUNK):
        block = points[start:start + _EVAL_CHUNK, np.newaxis, :]
        values[start:start + _EVAL_CHUNK] = np.prod(block ** exponents, axis=2) @ p.coefficient_vector
    return values


def eval_gradient(p: SparsePoly, x: Sequence[float]) -> np.ndarray:
    """解析梯度 ∇p(x)"""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise DimensionMismatchError(f"求值点形状 {x.shape} 与多项式维度 {p.dimension} 不一致")
    grad = np.zeros(p.dimension)
    if p.is_zero:
        return grad
    exponents = p.exponent_matrix
    coeffs = p.coefficient_vector
    for i in range(p.dimension):
        power = exponents[:, i]
        if not power.any():
            continue
        reduced = exponents.copy()
        reduced[:, i] = np.maximum(power - 1, 0)
        grad[i] = float(np.dot(coeffs * power, np.prod(x[np.newaxis, :] ** reduced, axis=1)))
    return grad


def multiply(a: SparsePoly, b: SparsePoly) -> SparsePoly:
    """系数卷积；精确抵消的项被剔除"""
    a._check_same_dimension(b)
    product: Dict[MultiIndex, float] = {}
    for index_a, coeff_a in a.terms.items():
        for index_b, coeff_b in b.terms.items():
            key = tuple(i + j for i, j in zip(index_a, index_b))
            product[key] = product.get(key, 0.0) + coeff_a * coeff_b
    return SparsePoly(a.dimension, product)


def square_to_gamma(g: SparsePoly) -> SparsePoly:
    """返回 γ = g·g（平方约束多项式的系数）"""
    if g.is_zero:
        raise DegeneratePolynomialError("零约束多项式无法平方（0=0 的约束应在上游剔除）")
    return multiply(g, g)


@dataclass(frozen=True)
class ProblemSpec:
    """
    [-1,1]^D 上的约束多项式优化问题

    min p(x)  s.t.  g_j(x) = 0,  h_k(x) >= 0
    """

    dimension: int
    objective: SparsePoly
    equalities: Tuple[SparsePoly, ...] = ()
    inequalities: Tuple[SparsePoly, ...] = ()

    def __post_init__(self):
        equalities = tuple(self.equalities)
        inequalities = tuple(self.inequalities)
        for poly in (self.objective,) + equalities + inequalities:
            if poly.dimension != self.dimension:
                raise DimensionMismatchError(
                    f"问题维度 {self.dimension} 与多项式维度 {poly.dimension} 不一致"
                )
        kept_equalities = tuple(g for g in equalities if not g.is_zero)
        if len(kept_equalities) != len(equalities):
            logger.warning(f"剔除 {len(equalities) - len(kept_equalities)} 个零等式约束（0=0）")
        kept_inequalities = tuple(h for h in inequalities if not h.is_zero)
        if len(kept_inequalities) != len(inequalities):
            logger.warning(f"剔除 {len(inequalities) - len(kept_inequalities)} 个零不等式约束（0>=0）")
        object.__setattr__(self, "equalities", kept_equalities)
        object.__setattr__(self, "inequalities", kept_inequalities)
        if self.degree < 1:
            raise DegeneratePolynomialError("问题次数必须至少为 1")

    @property
    def degree(self) -> int:
        """问题次数 d：目标与全部约束的最高次数"""
        polys = (self.objective,) + self.equalities + self.inequalities
        return max(poly.degree for poly in polys)

    @property
    def n_equalities(self) -> int:
        return len(self.equalities)

    @property
    def n_inequalities(self) -> int:
        return len(self.inequalities)

    def max_equality_violation(self, x: Sequence[float]) -> float:
        if not self.equalities:
            return 0.0
        return max(abs(evaluate(g, x)) for g in self.equalities)

    def max_inequality_violation(self, x: Sequence[float]) -> float:
        if not self.inequalities:
            return 0.0
        return max(max(0.0, -evaluate(h, x)) for h in self.inequalities)


def slack_scale_squared(h: SparsePoly) -> float:
    """s_k^2 = Σ|h_n|，保证 [-1,1]^D 上 h <= s_k^2，松弛变量可落在 [-1,1]"""
    return float(sum(abs(c) for c in h.terms.values()))


def slack_scale(h: SparsePoly) -> float:
    return math.sqrt(slack_scale_squared(h))


def slackify(problem: ProblemSpec) -> ProblemSpec:
    """
    引入 K 个松弛坐标，把 h_k(x) >= 0 改写为 h_k(x) - (s_k y_k)^2 = 0

    Args:
        problem: 原问题（维度 D，K 个不等式）

    Returns:
        维度 D+K、仅含等式约束的问题；目标函数不依赖松弛坐标
    """
    if not problem.inequalities:
        return problem

    base = problem.dimension
    lifted = base + problem.n_inequalities
    equalities = [g.embed(lifted) for g in problem.equalities]
    for k, h in enumerate(problem.inequalities):
        index = [0] * lifted
        index[base + k] = 2
        scale_sq = slack_scale_squared(h)
        equalities.append(h.embed(lifted) - SparsePoly(lifted, {tuple(index): scale_sq}))
        logger.debug(f"不等式 {k + 1} 松弛缩放 s^2={scale_sq:g}")

    return ProblemSpec(lifted, problem.objective.embed(lifted), tuple(equalities), ())
