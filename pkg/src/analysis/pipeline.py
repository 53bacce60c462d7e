"""
求解流水线
重构方法：slackify → build → 求解 → 恢复（可选打磨）；原始方法：盒约束直接求解
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..moments.reformulation import build
from ..polynomial.poly_core import ProblemSpec, evaluate, slackify
from ..solver.direct import DirectNLP
from ..solver.nlp_solver import AugmentedLagrangianSolver, SolveReport, SolverConfig
from ..utils.exceptions import DegenerateSolutionError
from ..utils.logger import get_logger
from .recovery import RecoveredSolution, VerificationReport, polish_location, recover_location, verify_candidate

logger = get_logger(__name__)

METHOD_REFORMULATION = "reformulation"
METHOD_ORIGINAL = "original"


@dataclass
class PipelineResult:
    method: str
    report: SolveReport
    location: Optional[np.ndarray]
    value: float
    verification: Optional[VerificationReport] = None
    recovered: Optional[RecoveredSolution] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        """求解收敛且成功取得最优点"""
        return self.report.converged and self.location is not None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "method": self.method,
            "value": self.value,
            "location": None if self.location is None else self.location.tolist(),
            "solver": self.report.to_dict(),
            "error": self.error,
        }
        if self.verification is not None:
            payload["verification"] = self.verification.to_dict()
        if self.recovered is not None:
            payload["component"] = self.recovered.component
            payload["component_mass"] = self.recovered.component_mass.tolist()
        return payload


def solve_reformulation(problem: ProblemSpec, n_components: int = 2,
                        cfg: Optional[SolverConfig] = None, polish: bool = False,
                        rank_x: Optional[int] = None, rank_y: Optional[int] = None,
                        reference_value: Optional[float] = None) -> PipelineResult:
    """
    用矩重构求解原问题

    Args:
        problem: 原问题（可含不等式）
        n_components: 混合分量数 L
        cfg: 求解器配置，seed 决定初始点
        polish: 是否对恢复的点做至多 5 步投影梯度打磨
        rank_x / rank_y: BM 因子列数，默认满秩
        reference_value: 已知最优值（用于相对误差）

    Returns:
        PipelineResult；分量质量全部退化时 location 为 None，error 给出原因
    """
    cfg = cfg or SolverConfig()
    nlp = build(slackify(problem), n_components, rank_x, rank_y)
    report = AugmentedLagrangianSolver(cfg).solve(nlp, nlp.initial_point(cfg.seed))

    try:
        recovered = recover_location(nlp.moments(report.x), problem)
    except DegenerateSolutionError as exc:
        logger.warning(f"最优点恢复失败: {exc}")
        return PipelineResult(METHOD_REFORMULATION, report, None, float("nan"), error=str(exc))

    location = recovered.location
    if polish:
        location = polish_location(problem, location)
    verification = verify_candidate(problem, location, tol_feas=10 * cfg.tol, reference_value=reference_value)
    return PipelineResult(
        method=METHOD_REFORMULATION,
        report=report,
        location=location,
        value=evaluate(problem.objective, location),
        verification=verification,
        recovered=recovered,
    )


def solve_original(problem: ProblemSpec, cfg: Optional[SolverConfig] = None,
                   reference_value: Optional[float] = None) -> PipelineResult:
    """直接在 [-1,1]^(D+K) 上求解原问题（对照基线），起点均匀随机"""
    cfg = cfg or SolverConfig()
    nlp = DirectNLP(problem)
    report = AugmentedLagrangianSolver(cfg).solve(nlp, nlp.initial_point(cfg.seed))
    location = nlp.project_location(report.x)
    verification = verify_candidate(problem, location, tol_feas=10 * cfg.tol, reference_value=reference_value)
    return PipelineResult(
        method=METHOD_ORIGINAL,
        report=report,
        location=location,
        value=evaluate(problem.objective, location),
        verification=verification,
    )


def solve_problem(problem: ProblemSpec, method: str, cfg: Optional[SolverConfig] = None,
                  **kwargs: Any) -> PipelineResult:
    """按方法名分派"""
    if method == METHOD_REFORMULATION:
        return solve_reformulation(problem, cfg=cfg, **kwargs)
    if method == METHOD_ORIGINAL:
        kwargs.pop("n_components", None)
        kwargs.pop("polish", None)
        kwargs.pop("rank_x", None)
        kwargs.pop("rank_y", None)
        return solve_original(problem, cfg=cfg, **kwargs)
    raise ValueError(f"未知的求解方法: {method}")
