# 修改文件：src/analysis/recovery.py
# 修改内容：最优点恢复、候选点验证、网格与逐轴枚举两种独立验证

"""
最优解恢复模块
从重构问题的解中读出最优点与最优值，并提供暴力网格 / 可分离枚举两种独立验证
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ..moments.moment_model import MomentLike, as_moment_array
from ..polynomial.poly_core import ProblemSpec, SparsePoly, eval_gradient, evaluate, evaluate_many
from ..utils.exceptions import (
    BandTooTightError,
    DegenerateSolutionError,
    DimensionMismatchError,
    NotSeparableError,
    OracleGuardError,
)
from ..utils.logger import get_logger

logger = get_logger(__name__)

# 分量质量低于此值视为退化
MASS_FLOOR = 1e-8
# 网格验证的规模上限
GRID_MAX_DIMENSION = 4
GRID_MAX_POINTS = 10 ** 8
GRID_CHUNK = 1 << 18
# 逐轴枚举参数
SEPARABLE_GRID = 20001
SEPARABLE_ROOT_TOL = 1e-12
SEPARABLE_MERGE_TOL = 1e-9
SEPARABLE_MAX_WORK = 10 ** 7


def relative_error(value: float, reference: float) -> float:
    """|f - f*| / max(1, |f*|)"""
    return abs(value - reference) / max(1.0, abs(reference))


@dataclass
class RecoveredSolution:
    location: np.ndarray
    value: float
    component_mass: np.ndarray
    max_equality_violation: float
    max_inequality_violation: float
    component: int  # 从 1 开始编号


@dataclass
class VerificationReport:
    feasible: bool
    in_box: bool
    value: float
    max_equality_violation: float
    max_inequality_violation: float
    box_violation: float
    rel_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "in_box": self.in_box,
            "value": self.value,
            "max_equality_violation": self.max_equality_violation,
            "max_inequality_violation": self.max_inequality_violation,
            "box_violation": self.box_violation,
            "rel_error": self.rel_error,
        }


@dataclass
class GridResult:
    value: float
    location: np.ndarray
    n_kept: int
    n_scanned: int


def recover_location(mu: MomentLike, problem: ProblemSpec) -> RecoveredSolution:
    """
    取质量 α^(l) = Π_i μ^(l)_{i,0} 绝对值最大的分量，读出 x_i = μ_{i,1} / μ_{i,0}

    Args:
        mu: 矩数组 (L, D', 2d+1)，D' >= problem.dimension（多出的是松弛坐标）
        problem: 原问题

    Returns:
        RecoveredSolution，坐标截断到 [-1,1]

    Raises:
        DegenerateSolutionError: 所有分量质量都低于 1e-8
    """
    mu = as_moment_array(mu)
    if mu.shape[1] < problem.dimension or mu.shape[2] < 2:
        raise DimensionMismatchError(f"矩数组形状 {mu.shape} 不足以恢复 {problem.dimension} 维点")

    masses = np.prod(mu[:, :, 0], axis=1)
    if np.max(np.abs(masses)) < MASS_FLOOR:
        raise DegenerateSolutionError(f"所有分量质量都低于 {MASS_FLOOR:g}: {masses}")

    # argmax 返回首个最大值，即并列时取编号最小的分量
    best = int(np.argmax(np.abs(masses)))
    dominant = mu[best, : problem.dimension]
    location = np.clip(dominant[:, 1] / dominant[:, 0], -1.0, 1.0)

    solution = RecoveredSolution(
        location=location,
        value=evaluate(problem.objective, location),
        component_mass=masses,
        max_equality_violation=problem.max_equality_violation(location),
        max_inequality_violation=problem.max_inequality_violation(location),
        component=best + 1,
    )
    logger.debug(f"恢复最优点: 分量 {solution.component}, 质量 {masses[best]:.4g}, 值 {solution.value:.6g}")
    return solution


def verify_candidate(problem: ProblemSpec, x: Sequence[float], tol_feas: float = 1e-6,
                     reference_value: Optional[float] = None) -> VerificationReport:
    """检查候选点的可行性、盒约束与目标值（给定参考值时附带相对误差）"""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise DimensionMismatchError(f"候选点长度 {x.shape} 与维度 {problem.dimension} 不一致")

    eq_violation = problem.max_equality_violation(x)
    ineq_violation = problem.max_inequality_violation(x)
    box_violation = float(np.max(np.maximum(np.abs(x) - 1.0, 0.0)))
    value = evaluate(problem.objective, x)
    return VerificationReport(
        feasible=eq_violation <= tol_feas and ineq_violation <= tol_feas,
        in_box=box_violation == 0.0,
        value=value,
        max_equality_violation=eq_violation,
        max_inequality_violation=ineq_violation,
        box_violation=box_violation,
        rel_error=None if reference_value is None else relative_error(value, reference_value),
    )


def _violation_many(problem: ProblemSpec, points: np.ndarray) -> np.ndarray:
    violation = np.zeros(points.shape[0])
    for g in problem.equalities:
        violation = np.maximum(violation, np.abs(evaluate_many(g, points)))
    for h in problem.inequalities:
        violation = np.maximum(violation, np.maximum(-evaluate_many(h, points), 0.0))
    return violation


def brute_force_grid(problem: ProblemSpec, points_per_axis: int = 801, band: float = 5e-3,
                     axis_values: Optional[Sequence[float]] = None,
                     jobs: int = 1) -> GridResult:
    """
    均匀网格暴力搜索

    Args:
        problem: 问题（D <= 4）
        points_per_axis: 每轴点数（axis_values 给定时忽略）
        band: 可行带宽 τ，保留 max_j |g_j| <= τ 的点
        axis_values: 自定义每轴候选值
        jobs: 并行线程数，按块顺序归约，结果与 jobs 无关

    Returns:
        GridResult；并列最小值取字典序最小的点
    """
    dimension = problem.dimension
    if dimension > GRID_MAX_DIMENSION:
        raise OracleGuardError(f"网格验证仅支持 D <= {GRID_MAX_DIMENSION}，实际 D={dimension}")
    if axis_values is not None:
        axis = np.sort(np.asarray(axis_values, dtype=float))
    else:
        if points_per_axis < 2:
            raise OracleGuardError(f"每轴点数至少为 2: {points_per_axis}")
        axis = np.linspace(-1.0, 1.0, points_per_axis)
    total = axis.size ** dimension
    if total > GRID_MAX_POINTS:
        raise OracleGuardError(f"网格点数 {total} 超过上限 {GRID_MAX_POINTS:g}")

    shape = (axis.size,) * dimension

    def scan(start: int) -> Tuple[float, Optional[np.ndarray], int]:
        flat = np.arange(start, min(start + GRID_CHUNK, total))
        points = axis[np.stack(np.unravel_index(flat, shape), axis=1)]
        kept = _violation_many(problem, points) <= band
        if not kept.any():
            return np.inf, None, 0
        values = np.where(kept, evaluate_many(problem.objective, points), np.inf)
        k = int(np.argmin(values))
        return float(values[k]), points[k], int(kept.sum())

    starts = range(0, total, GRID_CHUNK)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(scan, starts))
    else:
        results = [scan(start) for start in starts]

    best_value, best_point, n_kept = np.inf, None, 0
    for value, point, kept in results:
        n_kept += kept
        if point is not None and value < best_value:
            best_value, best_point = value, point

    if best_point is None:
        raise BandTooTightError(f"可行带 τ={band:g} 内没有网格点（共扫描 {total} 个点）")
    logger.info(f"网格验证: 扫描 {total} 点，保留 {n_kept} 点，最小值 {best_value:.6g}")
    return GridResult(value=best_value, location=np.array(best_point), n_kept=n_kept, n_scanned=total)


def _univariate_roots(poly: SparsePoly, axis_index: int, grid_points: int) -> np.ndarray:
    """[-1,1] 上单变量多项式的实根：网格符号变化 + 二分"""
    dimension = poly.dimension

    def restricted(t: float) -> float:
        x = np.zeros(dimension)
        x[axis_index] = t
        return evaluate(poly, x)

    grid = np.linspace(-1.0, 1.0, grid_points)
    points = np.zeros((grid_points, dimension))
    points[:, axis_index] = grid
    values = evaluate_many(poly, points)

    roots: List[float] = list(grid[values == 0.0])
    for k in np.nonzero(values[:-1] * values[1:] < 0)[0]:
        roots.append(optimize.bisect(restricted, grid[k], grid[k + 1], xtol=SEPARABLE_ROOT_TOL))
    return _merge_roots(roots)


def _merge_roots(roots: Sequence[float]) -> np.ndarray:
    merged: List[float] = []
    for root in sorted(roots):
        if not merged or root - merged[-1] > SEPARABLE_MERGE_TOL:
            merged.append(root)
    return np.array(merged)


def enumerate_separable(problem: ProblemSpec, grid_points: int = SEPARABLE_GRID) -> np.ndarray:
    """
    逐轴求根后取笛卡尔积，枚举可分离问题的全部可行点

    每个等式约束必须只依赖一个变量，且每个变量至少有一个约束；
    只依赖一个变量的不等式约束用于过滤该轴的根。

    Returns:
        (N, D) 可行点数组，按字典序排列
    """
    dimension = problem.dimension
    per_axis: List[Optional[np.ndarray]] = [None] * dimension

    for j, g in enumerate(problem.equalities):
        depends = g.depends_on()
        if len(depends) != 1:
            raise NotSeparableError(f"等式约束 {j + 1} 依赖变量 {[i + 1 for i in depends]}，不可分离")
        i = depends[0]
        roots = _univariate_roots(g, i, grid_points)
        if per_axis[i] is None:
            per_axis[i] = roots
        else:
            # 同一变量上的多个约束取根集交集
            per_axis[i] = np.array([r for r in per_axis[i]
                                    if np.any(np.abs(roots - r) <= SEPARABLE_MERGE_TOL)])

    for k, h in enumerate(problem.inequalities):
        depends = h.depends_on()
        if len(depends) > 1:
            raise NotSeparableError(f"不等式约束 {k + 1} 依赖多个变量，不可分离")
        if not depends:
            continue
        i = depends[0]
        if per_axis[i] is None:
            continue
        kept = []
        for r in per_axis[i]:
            x = np.zeros(dimension)
            x[i] = r
            if evaluate(h, x) >= -SEPARABLE_MERGE_TOL:
                kept.append(r)
        per_axis[i] = np.array(kept)

    missing = [i + 1 for i, roots in enumerate(per_axis) if roots is None]
    if missing:
        raise NotSeparableError(f"变量 {missing} 没有约束，可行集不是有限点集")

    count = int(np.prod([roots.size for roots in per_axis]))
    if dimension * count > SEPARABLE_MAX_WORK:
        raise OracleGuardError(f"枚举规模 D·N={dimension * count} 超过上限 {SEPARABLE_MAX_WORK:g}")
    if count == 0:
        return np.zeros((0, dimension))
    return np.array(list(itertools.product(*per_axis)), dtype=float)


def separable_minimum(problem: ProblemSpec) -> Tuple[float, np.ndarray]:
    """可分离问题的精确最小值与位置"""
    points = enumerate_separable(problem)
    if points.shape[0] == 0:
        raise BandTooTightError("可分离枚举没有找到可行点")
    values = evaluate_many(problem.objective, points)
    k = int(np.argmin(values))
    return float(values[k]), points[k]


def polish_location(problem: ProblemSpec, x: Sequence[float], steps: int = 5) -> np.ndarray:
    """
    在 [-1,1]^D 上对 ½Σg_j² + ½Σmin(h_k,0)² 做至多 steps 步投影梯度（Armijo 回溯）
    """
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)

    def merit(point: np.ndarray) -> Tuple[float, np.ndarray]:
        value = 0.0
        grad = np.zeros_like(point)
        for g in problem.equalities:
            residual = evaluate(g, point)
            value += 0.5 * residual ** 2
            grad += residual * eval_gradient(g, point)
        for h in problem.inequalities:
            residual = min(evaluate(h, point), 0.0)
            if residual < 0.0:
                value += 0.5 * residual ** 2
                grad += residual * eval_gradient(h, point)
        return value, grad

    value, grad = merit(x)
    for _ in range(steps):
        if value == 0.0 or not np.any(grad):
            break
        step = 1.0
        while step > 1e-12:
            candidate = np.clip(x - step * grad, -1.0, 1.0)
            new_value, new_grad = merit(candidate)
            if new_value <= value + 1e-4 * min(float(np.dot(grad, candidate - x)), 0.0):
                break
            step *= 0.5
        else:
            break
        x, value, grad = candidate, new_value, new_grad
    return x
