"""
乘积测度矩模块
乘积测度混合的矩 φ_n、梯度、Hankel 矩矩阵 / 局部化矩阵组装与 γ·φ 约束值
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from ..polynomial.poly_core import MultiIndex, SparsePoly
from ..utils.exceptions import DimensionMismatchError, MomentRangeError, NumericError
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class MomentVector:
    """
    L 个乘积测度的截断矩，data[l, i, k] = μ^(l)_{i,k}，k = 0..2d
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 3 or data.shape[2] % 2 != 1:
            raise DimensionMismatchError(f"矩数组形状必须为 (L, D, 2d+1)，实际为 {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError("矩数组含非有限值")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_components(self) -> int:
        return self.data.shape[0]

    @property
    def dimension(self) -> int:
        return self.data.shape[1]

    @property
    def degree(self) -> int:
        return (self.data.shape[2] - 1) // 2


MomentLike = Union[MomentVector, np.ndarray]


def as_moment_array(mu: MomentLike) -> np.ndarray:
    if isinstance(mu, MomentVector):
        return mu.data
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 3:
        raise DimensionMismatchError(f"矩数组必须是三维 (L, D, 2d+1)，实际为 {mu.shape}")
    return mu


def _check_exponents(mu: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    exponents = np.atleast_2d(np.asarray(exponents, dtype=np.int64))
    if exponents.shape[1] != mu.shape[1]:
        raise DimensionMismatchError(f"多重指标长度 {exponents.shape[1]} 与矩维度 {mu.shape[1]} 不一致")
    if exponents.size and (exponents.min() < 0 or exponents.max() >= mu.shape[2]):
        raise MomentRangeError(f"指数超出矩存储范围 0..{mu.shape[2] - 1}")
    return exponents


def prod_except(factors: np.ndarray) -> np.ndarray:
    """沿最后一轴计算“除自身外”的乘积，用前缀/后缀积避免除零"""
    ones = np.ones(factors.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, factors[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, factors[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def _gather(mu: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """返回 (L, T, D) 数组：mu[l, i, exponents[t, i]]"""
    axis = np.arange(mu.shape[1])[np.newaxis, :]
    return mu[:, axis, exponents]


def component_products(mu: MomentLike, exponents: np.ndarray) -> np.ndarray:
    """各分量的乘积 Π_i μ^(l)_{i,n_i}，返回 (L, T)"""
    mu = as_moment_array(mu)
    exponents = _check_exponents(mu, exponents)
    return np.prod(_gather(mu, exponents), axis=2)


def phi_batch(mu: MomentLike, exponents: np.ndarray) -> np.ndarray:
    """批量计算 φ_n(μ)，exponents 形状 (T, D)，返回 (T,)"""
    return component_products(mu, exponents).sum(axis=0)


def product_adjoint(mu: MomentLike, exponents: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    伴随累加：Σ_{l,t} weights[l,t] · ∂(Π_i μ^(l)_{i,n_i}) / ∂μ

    Args:
        mu: 矩数组 (L, D, 2d+1)
        exponents: (T, D) 多重指标
        weights: (L, T) 权重

    Returns:
        与 mu 同形状的梯度
    """
    mu = as_moment_array(mu)
    exponents = _check_exponents(mu, exponents)
    grad = np.zeros_like(mu)
    if exponents.shape[0] == 0:
        return grad
    partial = prod_except(_gather(mu, exponents)) * np.asarray(weights, dtype=float)[:, :, np.newaxis]
    n_components, n_terms, dimension = partial.shape
    l_index = np.broadcast_to(np.arange(n_components)[:, None, None], partial.shape)
    i_index = np.broadcast_to(np.arange(dimension)[None, None, :], partial.shape)
    k_index = np.broadcast_to(exponents[np.newaxis, :, :], partial.shape)
    np.add.at(grad, (l_index, i_index, k_index), partial)
    return grad


def phi(mu: MomentLike, n: MultiIndex) -> float:
    """φ_n(μ) = Σ_l Π_i μ^(l)_{i,n_i}"""
    return float(phi_batch(mu, np.asarray([n]))[0])


def phi_gradient(mu: MomentLike, n: MultiIndex) -> np.ndarray:
    """∂φ_n/∂μ^(l)_{i,k} = [k = n_i] · Π_{j≠i} μ^(l)_{j,n_j}"""
    mu = as_moment_array(mu)
    return product_adjoint(mu, np.asarray([n]), np.ones((mu.shape[0], 1)))


def gamma_dot_phi(mu: MomentLike, l: int, gamma: SparsePoly) -> float:
    """
    单个分量上的 γ·φ(μ^(l)) = Σ_n γ_n Π_i μ^(l)_{i,n_i}

    Args:
        mu: 矩数组
        l: 分量下标（从 0 开始）
        gamma: 平方约束多项式

    Returns:
        约束值；对真实测度等于 ∫ g² dμ^(l)
    """
    mu = as_moment_array(mu)
    if not 0 <= l < mu.shape[0]:
        raise DimensionMismatchError(f"分量下标越界: {l}（L={mu.shape[0]}）")
    if gamma.is_zero:
        return 0.0
    products = component_products(mu[l:l + 1], gamma.exponent_matrix)[0]
    return float(np.dot(gamma.coefficient_vector, products))


def localizing_weight() -> SparsePoly:
    """局部化权重 1 - t²"""
    return SparsePoly(1, {(0,): 1.0, (2,): -1.0})


def assemble_moment_matrix(mu_slice: Sequence[float], weight: Optional[SparsePoly] = None,
                           order: int = 0) -> np.ndarray:
    """
    一维（加权）矩矩阵 [M]_{m,n} = Σ_k h_k μ_{k+m+n}

    Args:
        mu_slice: 一维矩序列 μ_0..μ_K
        weight: 单变量权重多项式，None 表示 h ≡ 1
        order: 矩阵阶数 d'，结果为 (d'+1)×(d'+1)

    Returns:
        对称 Hankel 结构矩阵
    """
    mu_slice = np.asarray(mu_slice, dtype=float)
    if weight is None:
        weight = SparsePoly.constant(1, 1.0)
    if weight.dimension != 1:
        raise DimensionMismatchError(f"权重多项式必须是单变量，实际维度 {weight.dimension}")
    if order < 0:
        raise MomentRangeError(f"矩矩阵阶数必须非负: {order}")
    needed = 2 * order + weight.degree + 1
    if mu_slice.shape[0] < needed:
        raise MomentRangeError(f"矩不足: 阶数 {order}、权重次数 {weight.degree} 需要 {needed} 个矩，仅有 {mu_slice.shape[0]}")

    # 加权后的移位序列 s_j = Σ_k h_k μ_{k+j}
    shifted = np.zeros(2 * order + 1)
    for (k,), h_k in weight.terms.items():
        shifted += h_k * mu_slice[k:k + 2 * order + 1]
    return linalg.hankel(shifted[:order + 1], shifted[order:])


def hankel_blocks(mu: np.ndarray, order: int) -> np.ndarray:
    """批量组装 𝓜_order(μ^(l)_i)，返回 (L, D, order+1, order+1)"""
    index = np.add.outer(np.arange(order + 1), np.arange(order + 1))
    return mu[..., index]


def localizing_blocks(mu: np.ndarray, order: int) -> np.ndarray:
    """批量组装 𝓜_order(μ^(l)_i; 1-t²)，返回 (L, D, order+1, order+1)"""
    index = np.add.outer(np.arange(order + 1), np.arange(order + 1))
    return mu[..., index] - mu[..., index + 2]


def hankel_adjoint(weights: np.ndarray, n_moments: int) -> np.ndarray:
    """hankel_blocks 的伴随：把矩阵权重按反对角线累加回矩"""
    size = weights.shape[-1]
    grad = np.zeros(weights.shape[:-2] + (n_moments,))
    for m in range(size):
        for n in range(size):
            grad[..., m + n] += weights[..., m, n]
    return grad


def localizing_adjoint(weights: np.ndarray, n_moments: int) -> np.ndarray:
    """localizing_blocks 的伴随"""
    size = weights.shape[-1]
    grad = np.zeros(weights.shape[:-2] + (n_moments,))
    for m in range(size):
        for n in range(size):
            grad[..., m + n] += weights[..., m, n]
            grad[..., m + n + 2] -= weights[..., m, n]
    return grad


def dirac_moments(x: Sequence[float], n_moments: int) -> np.ndarray:
    """点 x 处 Dirac 测度的各轴矩 x_i^k，返回 (D, n_moments)"""
    x = np.asarray(x, dtype=float)
    return np.vander(x, N=n_moments, increasing=True)


def product_measure_moments(points: np.ndarray, degree: int,
                            weights: Optional[Sequence[float]] = None) -> MomentVector:
    """
    由 L 个 Dirac 乘积测度构造矩向量

    Args:
        points: (L, D) 各分量的支撑点
        degree: 问题次数 d，存储 2d+1 个矩
        weights: 各分量质量，乘到第一个坐标的矩上；默认全为 1
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    data = np.stack([dirac_moments(p, 2 * degree + 1) for p in points])
    if weights is not None:
        data[:, 0, :] *= np.asarray(weights, dtype=float)[:, np.newaxis]
    return MomentVector(data)


def psd_sqrt(matrix: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """对称半正定平方根；特征值先截断到 floor 以上"""
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = linalg.eigh(sym)
    eigvals = np.maximum(eigvals, floor)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def psd_factor(matrix: np.ndarray, rank: int, floor: float = 0.0) -> np.ndarray:
    """
    秩 rank 的因子 F 使 FFᵀ ≈ M

    满秩时返回对称平方根；否则取最大的 rank 个特征对。
    """
    size = matrix.shape[0]
    if rank >= size:
        return psd_sqrt(matrix, floor)
    eigvals, eigvecs = linalg.eigh(0.5 * (matrix + matrix.T))
    eigvals = np.maximum(eigvals[::-1][:rank], floor)
    return eigvecs[:, ::-1][:, :rank] * np.sqrt(eigvals)


def min_eigenvalue(matrix: np.ndarray) -> float:
    return float(linalg.eigvalsh(0.5 * (matrix + matrix.T))[0])


def is_psd(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    """最小特征值 >= -tol·max(1, ‖M‖)"""
    scale = max(1.0, float(np.linalg.norm(matrix, 2)))
    return min_eigenvalue(matrix) >= -tol * scale
