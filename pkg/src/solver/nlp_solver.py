"""
非线性规划求解模块
增广拉格朗日外层 + 投影 L-BFGS 内层的等式约束求解器，失败时按新随机种子重启
"""
from __future__ import annotations

import dataclasses
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Deque, Dict, List, Optional, Protocol, Tuple

import numpy as np

from ..utils.exceptions import DimensionMismatchError, NumericError
from ..utils.logger import get_logger

logger = get_logger(__name__)

Box = Tuple[np.ndarray, np.ndarray]

# Armijo 回溯参数
_ARMIJO_C1 = 1e-4
_ARMIJO_SHRINK = 0.5
_MAX_BACKTRACKS = 60
# 判定停滞所需的连续无改进外层迭代数（ρ 已达上限时）
_STALL_ITERATIONS = 3


class SolveStatus(str, Enum):
    CONVERGED = "Converged"
    RESTART_EXHAUSTED = "RestartExhausted"
    ITERATION_LIMIT = "IterationLimit"
    NUMERIC_FAILURE = "NumericFailure"


class NLPProblem(Protocol):
    """求解器所需的问题接口"""

    n_variables: int
    n_constraints: int
    bounds: Optional[Box]

    def eval_objective(self, x: np.ndarray) -> float: ...

    def eval_objective_grad(self, x: np.ndarray) -> np.ndarray: ...

    def eval_constraints(self, x: np.ndarray) -> np.ndarray: ...

    def eval_constraint_jacobian_product(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def restart_point(self, seed: int) -> np.ndarray: ...


@dataclass
class CallableNLP:
    """由若干函数拼装的问题，便于小规模问题与测试"""

    n_variables: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian_transpose: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    n_constraints: int = 0
    bounds: Optional[Box] = None
    start_scale: float = 1.0

    def eval_objective(self, x: np.ndarray) -> float:
        return float(self.objective(x))

    def eval_objective_grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient(x), dtype=float)

    def eval_constraints(self, x: np.ndarray) -> np.ndarray:
        if self.constraints is None:
            return np.zeros(0)
        return np.asarray(self.constraints(x), dtype=float)

    def eval_constraint_jacobian_product(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.jacobian_transpose is None:
            return np.zeros(self.n_variables)
        return np.asarray(self.jacobian_transpose(x, v), dtype=float)

    def restart_point(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.bounds is not None:
            return rng.uniform(self.bounds[0], self.bounds[1])
        return rng.normal(0.0, self.start_scale, size=self.n_variables)


@dataclass
class SolverConfig:
    """求解器配置，默认值见 config.py"""

    tol: float = 1e-2
    max_outer: int = 100
    max_inner: int = 500
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    feasibility_improvement_ratio: float = 0.25
    max_restarts: int = 3
    seed: int = 0
    max_penalty: float = 1e12
    lbfgs_memory: int = 10
    record_trace: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol 必须为正: {self.tol}")
        if not self.penalty_growth > 1:
            raise ValueError(f"penalty_growth 必须大于 1: {self.penalty_growth}")
        if self.initial_penalty <= 0 or self.max_penalty < self.initial_penalty:
            raise ValueError(f"罚参数非法: ρ0={self.initial_penalty}, 上限={self.max_penalty}")
        if not 0 < self.feasibility_improvement_ratio < 1:
            raise ValueError(f"feasibility_improvement_ratio 必须在 (0,1) 内: {self.feasibility_improvement_ratio}")
        for name in ("max_outer", "max_inner", "lbfgs_memory"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} 必须为正整数: {getattr(self, name)}")
        if self.max_restarts < 0:
            raise ValueError(f"max_restarts 不能为负: {self.max_restarts}")

    @classmethod
    def from_config(cls, **overrides: Any) -> "SolverConfig":
        """读取 config.py 中的 SOLVER_* 常量，overrides 中非 None 的字段覆盖之"""
        try:
            import config
        except ImportError:
            config = None

        values = {
            "tol": getattr(config, "SOLVER_TOL", cls.tol),
            "max_outer": getattr(config, "SOLVER_MAX_OUTER", cls.max_outer),
            "max_inner": getattr(config, "SOLVER_MAX_INNER", cls.max_inner),
            "initial_penalty": getattr(config, "SOLVER_INITIAL_PENALTY", cls.initial_penalty),
            "penalty_growth": getattr(config, "SOLVER_PENALTY_GROWTH", cls.penalty_growth),
            "feasibility_improvement_ratio": getattr(
                config, "SOLVER_FEASIBILITY_RATIO", cls.feasibility_improvement_ratio
            ),
            "max_restarts": getattr(config, "SOLVER_MAX_RESTARTS", cls.max_restarts),
            "max_penalty": getattr(config, "SOLVER_MAX_PENALTY", cls.max_penalty),
            "lbfgs_memory": getattr(config, "SOLVER_LBFGS_MEMORY", cls.lbfgs_memory),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def replace(self, **changes: Any) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class SolveReport:
    status: SolveStatus
    objective: float
    x: np.ndarray
    max_violation: float
    stationarity: float
    outer_iterations: int
    inner_iterations: int
    restarts: int
    wall_time: float
    multipliers: Optional[np.ndarray] = None
    penalty: float = 0.0
    trace: List[List[float]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "max_violation": self.max_violation,
            "stationarity": self.stationarity,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "restarts": self.restarts,
            "wall_time_s": self.wall_time,
            "penalty": self.penalty,
        }


@dataclass
class _Attempt:
    status: SolveStatus
    x: np.ndarray
    multipliers: np.ndarray
    penalty: float
    outer: int = 0
    inner: int = 0
    trace: List[List[float]] = field(default_factory=list)


def _project(x: np.ndarray, box: Optional[Box]) -> np.ndarray:
    if box is None:
        return x
    return np.clip(x, box[0], box[1])


def _projected_step(x: np.ndarray, grad: np.ndarray, box: Optional[Box]) -> np.ndarray:
    """投影梯度残差 P(x - g) - x"""
    return _project(x - grad, box) - x


def kkt_residual(nlp: NLPProblem, x: np.ndarray, multipliers: np.ndarray,
                 penalty: float = 0.0, box: Optional[Box] = None) -> Tuple[float, float]:
    """
    KKT 残差

    Args:
        nlp: 问题
        x: 当前点
        multipliers: 乘子 λ
        penalty: 罚参数 ρ，梯度取 f + Jᵀ(λ + ρc)；ρ=0 时即 f + Jᵀλ
        box: 变量上下界，None 时取 nlp.bounds

    Returns:
        (stationarity, feasibility)：投影梯度的无穷范数与 max|c|
    """
    x = np.asarray(x, dtype=float)
    multipliers = np.asarray(multipliers, dtype=float)
    if x.shape != (nlp.n_variables,):
        raise DimensionMismatchError(f"x 长度 {x.shape} 与变量数 {nlp.n_variables} 不一致")
    if multipliers.shape != (nlp.n_constraints,):
        raise DimensionMismatchError(f"λ 长度 {multipliers.shape} 与约束数 {nlp.n_constraints} 不一致")
    if box is None:
        box = getattr(nlp, "bounds", None)

    c = nlp.eval_constraints(x)
    grad = nlp.eval_objective_grad(x)
    if c.size:
        grad = grad + nlp.eval_constraint_jacobian_product(x, multipliers + penalty * c)
    feasibility = float(np.max(np.abs(c))) if c.size else 0.0
    stationarity = float(np.max(np.abs(_projected_step(x, grad, box)))) if x.size else 0.0
    return stationarity, feasibility


class AugmentedLagrangianSolver:
    """
    增广拉格朗日求解器

    外层：λ ← λ + ρc，可行性未按比例下降时 ρ 放大；
    内层：带盒约束投影与 Armijo 回溯的 L-BFGS，最小化 f + λᵀc + (ρ/2)‖c‖²。
    """

    def __init__(self, cfg: Optional[SolverConfig] = None):
        self.cfg = cfg or SolverConfig()

    # ------------------------------------------------------------------ 公共接口
    def solve(self, nlp: NLPProblem, x0: np.ndarray, box: Optional[Box] = None) -> SolveReport:
        cfg = self.cfg
        start_time = time.perf_counter()

        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (nlp.n_variables,):
            raise DimensionMismatchError(f"x0 长度 {x0.shape} 与变量数 {nlp.n_variables} 不一致")
        box = self._check_box(nlp, box)

        if not np.isfinite(self._safe_objective(nlp, x0)):
            logger.warning("初始点目标值非有限，直接返回 NumericFailure")
            return self._report(nlp, SolveStatus.NUMERIC_FAILURE, x0, np.zeros(nlp.n_constraints),
                                0.0, 0, 0, 0, start_time, box, [])

        restart_seeds = np.random.SeedSequence(cfg.seed).generate_state(max(cfg.max_restarts, 1))
        total_outer = total_inner = 0
        restarts = 0
        x_start = _project(x0, box)
        trace: List[List[float]] = []

        while True:
            attempt = self._attempt(nlp, x_start, box)
            total_outer += attempt.outer
            total_inner += attempt.inner
            trace.extend(attempt.trace)

            if attempt.status in (SolveStatus.CONVERGED, SolveStatus.ITERATION_LIMIT):
                status = attempt.status
                break
            if restarts >= cfg.max_restarts:
                status = SolveStatus.RESTART_EXHAUSTED if cfg.max_restarts > 0 else attempt.status
                logger.warning(f"重启次数用尽（{restarts}），状态 {status.value}")
                break

            seed = int(restart_seeds[restarts])
            restarts += 1
            logger.warning(f"第 {restarts} 次重启（原因: {attempt.status.value}），新种子 {seed}")
            x_start = _project(np.asarray(nlp.restart_point(seed), dtype=float), box)

        return self._report(nlp, status, attempt.x, attempt.multipliers, attempt.penalty,
                            total_outer, total_inner, restarts, start_time, box, trace)

    # ------------------------------------------------------------------ 内部实现
    @staticmethod
    def _check_box(nlp: NLPProblem, box: Optional[Box]) -> Optional[Box]:
        if box is None:
            box = getattr(nlp, "bounds", None)
        if box is None:
            return None
        lower = np.broadcast_to(np.asarray(box[0], dtype=float), (nlp.n_variables,))
        upper = np.broadcast_to(np.asarray(box[1], dtype=float), (nlp.n_variables,))
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DimensionMismatchError("盒约束上下界必须为有限值")
        if np.any(lower > upper):
            raise DimensionMismatchError("盒约束下界大于上界")
        return lower, upper

    @staticmethod
    def _safe_objective(nlp: NLPProblem, x: np.ndarray) -> float:
        try:
            with np.errstate(all="ignore"):
                return float(nlp.eval_objective(x))
        except (NumericError, FloatingPointError, OverflowError):
            return float("nan")

    @staticmethod
    def _merit(nlp: NLPProblem, x: np.ndarray, lam: np.ndarray, rho: float) -> Tuple[float, np.ndarray]:
        """增广拉格朗日函数值与梯度；非有限时返回 nan"""
        try:
            with np.errstate(all="ignore"):
                f = nlp.eval_objective(x)
                grad = nlp.eval_objective_grad(x)
                if lam.size:
                    c = nlp.eval_constraints(x)
                    value = f + float(np.dot(lam, c)) + 0.5 * rho * float(np.dot(c, c))
                    grad = grad + nlp.eval_constraint_jacobian_product(x, lam + rho * c)
                else:
                    value = f
        except (NumericError, FloatingPointError, OverflowError):
            return float("nan"), np.full(x.shape, np.nan)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return float("nan"), np.full(x.shape, np.nan)
        return float(value), grad

    @staticmethod
    def _two_loop(grad: np.ndarray, history: Deque[Tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
        """L-BFGS 双循环递归，返回 H·g"""
        q = grad.copy()
        alphas = []
        for s, y, rho_sy in reversed(history):
            alpha = rho_sy * np.dot(s, q)
            q -= alpha * y
            alphas.append(alpha)
        if history:
            s, y, _ = history[-1]
            gamma = np.dot(s, y) / np.dot(y, y)
        else:
            gamma = 1.0 / max(1.0, float(np.max(np.abs(grad))))
        r = gamma * q
        for (s, y, rho_sy), alpha in zip(history, reversed(alphas)):
            beta = rho_sy * np.dot(y, r)
            r += s * (alpha - beta)
        return r

    def _minimize_merit(self, nlp: NLPProblem, x: np.ndarray, lam: np.ndarray, rho: float,
                        box: Optional[Box], inner_tol: float,
                        trace: Optional[List[float]]) -> Tuple[np.ndarray, int, bool]:
        """内层投影 L-BFGS；返回 (x, 迭代数, 是否数值正常)"""
        value, grad = self._merit(nlp, x, lam, rho)
        if not np.isfinite(value):
            return x, 0, False
        if trace is not None:
            trace.append(value)

        history: Deque[Tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=self.cfg.lbfgs_memory)
        iterations = 0
        while iterations < self.cfg.max_inner:
            if np.max(np.abs(_projected_step(x, grad, box))) <= inner_tol:
                break
            iterations += 1

            # 活动集：贴边且梯度指向外侧的变量固定
            free = np.ones_like(x, dtype=bool)
            if box is not None:
                free &= ~(((x <= box[0]) & (grad > 0)) | ((x >= box[1]) & (grad < 0)))
            direction = -self._two_loop(grad * free, history) * free
            if np.dot(grad, direction) >= 0:
                history.clear()
                direction = -self._two_loop(grad * free, history) * free
            if not np.any(direction):
                break

            step = 1.0
            accepted = False
            for _ in range(_MAX_BACKTRACKS):
                x_new = _project(x + step * direction, box)
                value_new, grad_new = self._merit(nlp, x_new, lam, rho)
                decrease = min(float(np.dot(grad, x_new - x)), 0.0)
                if np.isfinite(value_new) and value_new <= value + _ARMIJO_C1 * decrease:
                    accepted = True
                    break
                step *= _ARMIJO_SHRINK

            if not accepted:
                if history:
                    history.clear()
                    continue
                logger.debug(f"线搜索失败，内层提前结束（第 {iterations} 步）")
                break

            s = x_new - x
            y = grad_new - grad
            sy = float(np.dot(s, y))
            if sy > 1e-12 * max(1.0, float(np.dot(y, y))):
                history.append((s, y, 1.0 / sy))
            x, value, grad = x_new, value_new, grad_new
            if trace is not None:
                trace.append(value)

        return x, iterations, True

    def _attempt(self, nlp: NLPProblem, x0: np.ndarray, box: Optional[Box]) -> _Attempt:
        cfg = self.cfg
        x = x0.copy()
        lam = np.zeros(nlp.n_constraints)
        rho = cfg.initial_penalty
        inner_tol = 0.1 * cfg.tol
        attempt = _Attempt(SolveStatus.ITERATION_LIMIT, x, lam, rho)

        try:
            c = nlp.eval_constraints(x)
        except NumericError:
            attempt.status = SolveStatus.NUMERIC_FAILURE
            return attempt
        feasibility = float(np.max(np.abs(c))) if c.size else 0.0
        stalled = 0

        for outer in range(1, cfg.max_outer + 1):
            attempt.outer = outer
            trace = [] if cfg.record_trace else None
            x, n_inner, ok = self._minimize_merit(nlp, x, lam, rho, box, inner_tol, trace)
            attempt.inner += n_inner
            attempt.x = x
            if trace is not None:
                attempt.trace.append(trace)
            if not ok:
                attempt.status = SolveStatus.NUMERIC_FAILURE
                return attempt

            stationarity, new_feasibility = kkt_residual(nlp, x, lam, rho, box)
            logger.debug(
                f"外层 {outer}: 可行性 {new_feasibility:.3e}, 稳定性 {stationarity:.3e}, "
                f"ρ={rho:.1e}, 内层 {n_inner}"
            )
            if new_feasibility <= cfg.tol and stationarity <= cfg.tol:
                if lam.size:
                    lam = lam + rho * nlp.eval_constraints(x)
                attempt.multipliers, attempt.penalty = lam, rho
                attempt.status = SolveStatus.CONVERGED
                return attempt

            if lam.size:
                lam = lam + rho * nlp.eval_constraints(x)
                if not np.all(np.isfinite(lam)):
                    attempt.status = SolveStatus.NUMERIC_FAILURE
                    return attempt

            if new_feasibility > max(cfg.tol, cfg.feasibility_improvement_ratio * feasibility):
                if rho >= cfg.max_penalty:
                    stalled += 1
                    if stalled >= _STALL_ITERATIONS:
                        logger.warning(f"ρ 已达上限 {cfg.max_penalty:.0e} 且可行性连续 {stalled} 次未改进")
                        attempt.multipliers, attempt.penalty = lam, rho
                        attempt.status = SolveStatus.NUMERIC_FAILURE
                        return attempt
                else:
                    rho = min(rho * cfg.penalty_growth, cfg.max_penalty)
            else:
                stalled = 0
            feasibility = new_feasibility
            attempt.multipliers, attempt.penalty = lam, rho

        return attempt

    def _report(self, nlp: NLPProblem, status: SolveStatus, x: np.ndarray, lam: np.ndarray,
                rho: float, outer: int, inner: int, restarts: int, start_time: float,
                box: Optional[Box], trace: List[List[float]]) -> SolveReport:
        objective = self._safe_objective(nlp, x)
        try:
            stationarity, feasibility = kkt_residual(nlp, x, lam, 0.0, box)
        except NumericError:
            stationarity = feasibility = float("nan")
        return SolveReport(
            status=status,
            objective=objective,
            x=x,
            max_violation=feasibility,
            stationarity=stationarity,
            outer_iterations=outer,
            inner_iterations=inner,
            restarts=restarts,
            wall_time=time.perf_counter() - start_time,
            multipliers=lam,
            penalty=rho,
            trace=trace,
        )


def solve(nlp: NLPProblem, x0: np.ndarray, box: Optional[Box] = None,
          cfg: Optional[SolverConfig] = None) -> SolveReport:
    """便捷入口：用给定配置求解一次"""
    return AugmentedLagrangianSolver(cfg).solve(nlp, x0, box)
