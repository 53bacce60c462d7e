"""
原始形式求解
把 ProblemSpec（松弛化后）直接包装为盒约束 [-1,1] 上的等式约束问题，作为对照基线
"""
from __future__ import annotations

from typing import List

import numpy as np

from ..polynomial.poly_core import ProblemSpec, SparsePoly, eval_gradient, evaluate, slackify
from ..utils.exceptions import DimensionMismatchError, NumericError


class DirectNLP:
    """min p(x) s.t. g_j(x) = 0, x ∈ [-1,1]^(D+K)"""

    def __init__(self, problem: ProblemSpec):
        self.original = problem
        self.problem = slackify(problem)
        self.n_variables = self.problem.dimension
        self.n_constraints = self.problem.n_equalities
        self.bounds = (-np.ones(self.n_variables), np.ones(self.n_variables))
        self._equalities: List[SparsePoly] = list(self.problem.equalities)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_variables,):
            raise DimensionMismatchError(f"x 长度 {x.shape} 与变量数 {self.n_variables} 不一致")
        if not np.all(np.isfinite(x)):
            raise NumericError("x 含非有限值")
        return x

    def eval_objective(self, x: np.ndarray) -> float:
        return evaluate(self.problem.objective, self._check(x))

    def eval_objective_grad(self, x: np.ndarray) -> np.ndarray:
        return eval_gradient(self.problem.objective, self._check(x))

    def eval_constraints(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return np.array([evaluate(g, x) for g in self._equalities])

    def eval_constraint_jacobian_product(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = self._check(x)
        result = np.zeros(self.n_variables)
        for weight, g in zip(np.asarray(v, dtype=float), self._equalities):
            result += weight * eval_gradient(g, x)
        return result

    def initial_point(self, seed: int) -> np.ndarray:
        """盒内均匀随机起点"""
        return np.random.default_rng(seed).uniform(-1.0, 1.0, size=self.n_variables)

    def restart_point(self, seed: int) -> np.ndarray:
        return self.initial_point(seed)

    def project_location(self, x: np.ndarray) -> np.ndarray:
        """去掉松弛坐标，回到原始 D 维"""
        return np.asarray(x, dtype=float)[: self.original.dimension]
