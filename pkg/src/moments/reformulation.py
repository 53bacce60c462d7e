"""
矩重构模块
把 ProblemSpec 构造成 Burer-Monteiro 分解后的纯等式约束非线性规划，含解析一阶导数
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..polynomial.poly_core import ProblemSpec, SparsePoly, square_to_gamma
from ..utils.exceptions import DimensionMismatchError, NumericError, ReformulationUsageError
from ..utils.logger import get_logger
from .moment_model import (
    component_products,
    hankel_adjoint,
    hankel_blocks,
    localizing_adjoint,
    localizing_blocks,
    phi_batch,
    product_adjoint,
    psd_factor,
)

logger = get_logger(__name__)

# 初始点构造参数
_INIT_MOMENT_NOISE = 0.01
_INIT_EIGEN_FLOOR = 1e-6


@dataclass(frozen=True)
class DecisionLayout:
    """决策向量布局：[μ | X | Y] 三段，各段按 (l, i) 顺序展开"""

    dimension: int
    degree: int
    n_components: int
    n_equalities: int
    rank_x: int
    rank_y: int

    @property
    def n_moments(self) -> int:
        return 2 * self.degree + 1

    @property
    def moment_shape(self) -> Tuple[int, int, int]:
        return self.n_components, self.dimension, self.n_moments

    @property
    def x_shape(self) -> Tuple[int, int, int, int]:
        return self.n_components, self.dimension, self.degree + 1, self.rank_x

    @property
    def y_shape(self) -> Tuple[int, int, int, int]:
        return self.n_components, self.dimension, self.degree, self.rank_y

    @property
    def mu_size(self) -> int:
        return int(np.prod(self.moment_shape))

    @property
    def x_size(self) -> int:
        return int(np.prod(self.x_shape))

    @property
    def y_size(self) -> int:
        return int(np.prod(self.y_shape))

    @property
    def mu_slice(self) -> slice:
        return slice(0, self.mu_size)

    @property
    def x_slice(self) -> slice:
        return slice(self.mu_size, self.mu_size + self.x_size)

    @property
    def y_slice(self) -> slice:
        start = self.mu_size + self.x_size
        return slice(start, start + self.y_size)

    @property
    def total(self) -> int:
        return self.mu_size + self.x_size + self.y_size

    # 约束计数
    @property
    def n_hankel(self) -> int:
        size = self.degree + 1
        return self.n_components * self.dimension * size * (size + 1) // 2

    @property
    def n_localizing(self) -> int:
        size = self.degree
        return self.n_components * self.dimension * size * (size + 1) // 2

    @property
    def n_gamma(self) -> int:
        return self.n_equalities * self.n_components

    @property
    def n_constraints(self) -> int:
        return self.n_hankel + self.n_localizing + self.n_gamma + 1

    def constraint_blocks(self) -> Dict[str, slice]:
        """约束残差向量中各段的位置"""
        edges = np.cumsum([0, self.n_hankel, self.n_localizing, self.n_gamma, 1])
        names = ("hankel", "localizing", "gamma", "normalization")
        return {name: slice(int(edges[k]), int(edges[k + 1])) for k, name in enumerate(names)}

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """拆分为 μ (L,D,2d+1)、X (L,D,d+1,rx)、Y (L,D,d,ry) 视图"""
        return (
            z[self.mu_slice].reshape(self.moment_shape),
            z[self.x_slice].reshape(self.x_shape),
            z[self.y_slice].reshape(self.y_shape),
        )

    def pack(self, mu: np.ndarray, x_factors: np.ndarray, y_factors: np.ndarray) -> np.ndarray:
        return np.concatenate([
            np.asarray(mu, dtype=float).reshape(-1),
            np.asarray(x_factors, dtype=float).reshape(-1),
            np.asarray(y_factors, dtype=float).reshape(-1),
        ])


class ReformulatedNLP:
    """
    重构后的非线性规划

    目标 Σ p_n φ_n(μ)；约束依次为 Hankel - XXᵀ 上三角、局部化矩阵 - YYᵀ 上三角、
    γ^(j)·φ(μ^(l))（按 l 主序）以及 φ_0 - 1。

    分量质量只放在第一个坐标上：i >= 2 的 μ^(l)_{i,0} 固定为 1，
    其余变量限制在 [-1,1] 盒内（偶数阶矩在 [0,1]），见 bounds。
    """

    def __init__(self, problem: ProblemSpec, n_components: int,
                 rank_x: Optional[int] = None, rank_y: Optional[int] = None):
        if problem.n_inequalities:
            raise ReformulationUsageError("问题仍含不等式约束，请先调用 slackify")
        if n_components < 1:
            raise DimensionMismatchError(f"混合分量数 L 必须 >= 1: {n_components}")

        d = problem.degree
        rank_x = d + 1 if rank_x is None else int(rank_x)
        rank_y = d if rank_y is None else int(rank_y)
        if not (1 <= rank_x <= d + 1 and 0 <= rank_y <= d):
            raise DimensionMismatchError(f"分解秩越界: rank_x={rank_x}, rank_y={rank_y}, d={d}")

        self.problem = problem
        self.layout = DecisionLayout(
            dimension=problem.dimension,
            degree=d,
            n_components=n_components,
            n_equalities=problem.n_equalities,
            rank_x=rank_x,
            rank_y=rank_y,
        )
        self.objective_exponents = problem.objective.exponent_matrix
        self.objective_coeffs = problem.objective.coefficient_vector
        self.gammas: List[SparsePoly] = [square_to_gamma(g) for g in problem.equalities]
        self._hankel_triu = np.triu_indices(d + 1)
        self._localizing_triu = np.triu_indices(d)
        self._zero_index = np.zeros((1, problem.dimension), dtype=np.int64)
        self.bounds = self._gauge_box()

    def _gauge_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        决策变量的盒约束

        [-1,1] 上的测度按坐标缩放后总能取 μ^(l)_{1,0} ∈ [0,1]、其余 μ^(l)_{i,0} = 1，
        此时 |μ_k| <= μ_0 <= 1，且 X、Y 的行范数不超过对应对角元的平方根。
        """
        layout = self.layout
        mu_lower = np.full(layout.moment_shape, -1.0)
        mu_lower[..., 0::2] = 0.0
        mu_upper = np.ones(layout.moment_shape)
        mu_lower[:, 1:, 0] = 1.0

        factor_size = layout.x_size + layout.y_size
        lower = np.concatenate([mu_lower.reshape(-1), -np.ones(factor_size)])
        upper = np.concatenate([mu_upper.reshape(-1), np.ones(factor_size)])
        return lower, upper

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(z, dtype=float), self.bounds[0], self.bounds[1])

    @property
    def n_variables(self) -> int:
        return self.layout.total

    @property
    def n_constraints(self) -> int:
        return self.layout.n_constraints

    def _unpack(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.layout.total,):
            raise DimensionMismatchError(f"决策向量长度 {z.shape} 与布局 {self.layout.total} 不一致")
        if not np.all(np.isfinite(z)):
            raise NumericError("决策向量含非有限值")
        return self.layout.split(z)

    def moments(self, z: np.ndarray) -> np.ndarray:
        return self._unpack(z)[0]

    # ------------------------------------------------------------------ 目标
    def eval_objective(self, z: np.ndarray) -> float:
        mu, _, _ = self._unpack(z)
        if self.objective_coeffs.size == 0:
            return 0.0
        return float(np.dot(self.objective_coeffs, phi_batch(mu, self.objective_exponents)))

    def eval_objective_grad(self, z: np.ndarray) -> np.ndarray:
        mu, _, _ = self._unpack(z)
        grad = np.zeros(self.layout.total)
        if self.objective_coeffs.size:
            weights = np.broadcast_to(self.objective_coeffs, (self.layout.n_components, self.objective_coeffs.size))
            grad[self.layout.mu_slice] = product_adjoint(mu, self.objective_exponents, weights).reshape(-1)
        return grad

    # ------------------------------------------------------------------ 约束
    def eval_constraints(self, z: np.ndarray) -> np.ndarray:
        mu, x_factors, y_factors = self._unpack(z)
        d = self.layout.degree

        hankel = hankel_blocks(mu, d) - x_factors @ np.swapaxes(x_factors, -1, -2)
        localizing = localizing_blocks(mu, d - 1) - y_factors @ np.swapaxes(y_factors, -1, -2)

        parts = [
            hankel[..., self._hankel_triu[0], self._hankel_triu[1]].reshape(-1),
            localizing[..., self._localizing_triu[0], self._localizing_triu[1]].reshape(-1),
        ]
        if self.gammas:
            gamma_values = np.column_stack([
                component_products(mu, gamma.exponent_matrix) @ gamma.coefficient_vector
                for gamma in self.gammas
            ])
            parts.append(gamma_values.reshape(-1))
        parts.append(np.array([phi_batch(mu, self._zero_index)[0] - 1.0]))
        return np.concatenate(parts)

    def eval_constraint_jacobian_product(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Jᵀv，按与 eval_constraints 相同的表达式做伴随累加"""
        mu, x_factors, y_factors = self._unpack(z)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.layout.n_constraints,):
            raise DimensionMismatchError(f"乘子向量长度 {v.shape} 与约束数 {self.layout.n_constraints} 不一致")

        layout = self.layout
        d = layout.degree
        blocks = layout.constraint_blocks()
        batch = (layout.n_components, layout.dimension)

        v_hankel = np.zeros(batch + (d + 1, d + 1))
        v_hankel[..., self._hankel_triu[0], self._hankel_triu[1]] = v[blocks["hankel"]].reshape(batch + (-1,))
        v_localizing = np.zeros(batch + (d, d))
        v_localizing[..., self._localizing_triu[0], self._localizing_triu[1]] = \
            v[blocks["localizing"]].reshape(batch + (-1,))

        grad_mu = hankel_adjoint(v_hankel, layout.n_moments)
        grad_mu += localizing_adjoint(v_localizing, layout.n_moments)
        if self.gammas:
            v_gamma = v[blocks["gamma"]].reshape(layout.n_components, len(self.gammas))
            for j, gamma in enumerate(self.gammas):
                weights = np.outer(v_gamma[:, j], gamma.coefficient_vector)
                grad_mu += product_adjoint(mu, gamma.exponent_matrix, weights)
        v_norm = v[blocks["normalization"]][0]
        grad_mu += product_adjoint(mu, self._zero_index, np.full((layout.n_components, 1), v_norm))

        # d/dX Σ V∘(XXᵀ) = (V + Vᵀ) X，残差中为减号
        grad_x = -(v_hankel + np.swapaxes(v_hankel, -1, -2)) @ x_factors
        grad_y = -(v_localizing + np.swapaxes(v_localizing, -1, -2)) @ y_factors
        return layout.pack(grad_mu, grad_x, grad_y)

    # ------------------------------------------------------------------ 初始点
    def factors_for(self, mu: np.ndarray, floor: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """由矩构造 X、Y：各 (l,i) 矩阵的对称半正定平方根（满秩时）"""
        layout = self.layout
        d = layout.degree
        hankel = hankel_blocks(mu, d)
        localizing = localizing_blocks(mu, d - 1)
        x_factors = np.zeros(layout.x_shape)
        y_factors = np.zeros(layout.y_shape)
        for l in range(layout.n_components):
            for i in range(layout.dimension):
                x_factors[l, i] = psd_factor(hankel[l, i], layout.rank_x, floor)
                if layout.rank_y > 0:
                    y_factors[l, i] = psd_factor(localizing[l, i], layout.rank_y, floor)
        return x_factors, y_factors

    def point_from_moments(self, mu: np.ndarray, floor: float = 0.0) -> np.ndarray:
        """把矩数组补全为决策向量"""
        mu = np.asarray(mu, dtype=float).reshape(self.layout.moment_shape)
        x_factors, y_factors = self.factors_for(mu, floor)
        return self.layout.pack(mu, x_factors, y_factors)

    def initial_point(self, seed: int) -> np.ndarray:
        """
        随机初始点（同一 seed 结果相同）

        每个 (l,i) 取 U[-1,1] 上的 Dirac 矩，k>=1 的矩加标准差 0.01 的扰动；
        分量质量取 Dirichlet 权重乘到第一个坐标的矩上，使 φ_0 = 1；
        X、Y 为特征值截断到 1e-6 后的对称平方根，最后截断到 bounds 内。
        """
        rng = np.random.default_rng(seed)
        layout = self.layout
        points = rng.uniform(-1.0, 1.0, size=(layout.n_components, layout.dimension))
        mu = points[..., np.newaxis] ** np.arange(layout.n_moments)
        mu[..., 1:] += rng.normal(0.0, _INIT_MOMENT_NOISE, size=mu[..., 1:].shape)

        weights = rng.dirichlet(np.ones(layout.n_components))
        weights /= weights.sum()
        mu[:, 0, :] *= weights[:, np.newaxis]
        mu_box = [bound[layout.mu_slice].reshape(layout.moment_shape) for bound in self.bounds]
        mu = np.clip(mu, mu_box[0], mu_box[1])
        return self.project(self.point_from_moments(mu, floor=_INIT_EIGEN_FLOOR))

    def restart_point(self, seed: int) -> np.ndarray:
        return self.initial_point(seed)


def build(problem: ProblemSpec, n_components: int,
          rank_x: Optional[int] = None, rank_y: Optional[int] = None) -> ReformulatedNLP:
    """
    构造重构问题

    Args:
        problem: 仅含等式约束的问题（先 slackify）
        n_components: 混合分量数 L
        rank_x: X 因子列数，默认 d+1
        rank_y: Y 因子列数，默认 d

    Returns:
        ReformulatedNLP
    """
    nlp = ReformulatedNLP(problem, n_components, rank_x, rank_y)
    logger.debug(
        f"构造重构问题: D={nlp.layout.dimension}, d={nlp.layout.degree}, L={n_components}, "
        f"变量 {nlp.n_variables}, 等式 {nlp.n_constraints}"
    )
    return nlp


def cost_profile(nlp: ReformulatedNLP) -> pd.DataFrame:
    """各表达式的规模与单次求值代价估计"""
    layout = nlp.layout
    D, d, L = layout.dimension, layout.degree, layout.n_components
    n_obj = int(nlp.objective_coeffs.size)
    max_gamma_terms = max((g.n_terms for g in nlp.gammas), default=0)
    max_g_terms = max((g.n_terms for g in nlp.problem.equalities), default=0)
    J = layout.n_equalities

    rows = [
        ("objective", "1", 1, "O(N(p) L D)", n_obj * L * D),
        ("moment_matrix", "(d+1)x(d+1)", L * D * (d + 1) ** 2, "O(L D d^2)", L * D * (d + 1) ** 2),
        ("localizing_matrix", "d x d", L * D * d ** 2, "O(L D d^2)", 2 * L * D * d ** 2),
        ("factor_products", "O(d) x O(d)", L * D * ((d + 1) ** 2 + d ** 2),
         "O(D d^3)", L * D * ((d + 1) ** 2 * layout.rank_x + d ** 2 * layout.rank_y)),
        ("normalization", "1", 1, "O(L D)", L * D),
        ("gamma_dot_phi", "J", J * L, "O(max_j N(g_j)^2 J D)", max_gamma_terms * J * L * D),
    ]
    frame = pd.DataFrame(rows, columns=["expression", "size", "n_values", "cost", "estimated_ops"])
    frame.attrs["max_constraint_terms"] = max_g_terms
    return frame


def time_evaluations(nlp: ReformulatedNLP, repeats: int = 20, seed: int = 0) -> Dict[str, float]:
    """各求值函数的中位墙钟时间（秒）"""
    z = nlp.initial_point(seed)
    v = np.random.default_rng(seed).standard_normal(nlp.n_constraints)
    calls = {
        "objective": lambda: nlp.eval_objective(z),
        "objective_grad": lambda: nlp.eval_objective_grad(z),
        "constraints": lambda: nlp.eval_constraints(z),
        "jacobian_product": lambda: nlp.eval_constraint_jacobian_product(z, v),
    }
    timings: Dict[str, float] = {}
    for name, call in calls.items():
        samples = []
        for _ in range(max(1, repeats)):
            start = time.perf_counter()
            call()
            samples.append(time.perf_counter() - start)
        timings[name] = float(np.median(samples))
    return timings
