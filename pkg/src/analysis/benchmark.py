# 修改文件：src/analysis/benchmark.py
# 修改内容：两类基准问题生成器与重构/原始两种方法的对比测试

"""
基准测试模块
椭圆环与离散格点两族问题的生成、已知最优值，以及逐实例追加写入 CSV 的对比测试
"""
from __future__ import annotations

import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..polynomial.poly_core import ProblemSpec, SparsePoly, multiply
from ..solver.nlp_solver import SolverConfig, SolveStatus
from ..utils.logger import get_logger, log_time
from .pipeline import METHOD_ORIGINAL, METHOD_REFORMULATION, solve_problem
from .recovery import relative_error, separable_minimum

logger = get_logger(__name__)

FAMILIES = ("annulus", "discrete")
METHODS = (METHOD_REFORMULATION, METHOD_ORIGINAL)
CSV_COLUMNS = [
    "family", "dimension", "instance", "seed", "method",
    "status", "objective", "rel_error", "wall_time_s", "success",
]
ORACLE_MAX_DIMENSION = 4


def gen_annulus(dimension: int) -> ProblemSpec:
    """
    椭圆环：min -(x1 - 0.1)²  s.t. (Σx_i² - 1)(Σx_i² - 0.25) = 0

    四个局部极小中只有 x* = (-1, 0, ..., 0) 是全局最优，p* = -1.21。
    """
    if dimension < 1:
        raise ValueError(f"维度必须 >= 1: {dimension}")
    x1 = SparsePoly.variable(dimension, 0)
    objective = -((x1 - 0.1) ** 2)
    radius_sq = sum((SparsePoly.variable(dimension, i, 2) for i in range(dimension)),
                    SparsePoly.zero(dimension))
    shell = multiply(radius_sq - 1.0, radius_sq - 0.25)
    return ProblemSpec(dimension, objective, (shell,))


def gen_discrete(dimension: int) -> ProblemSpec:
    """
    离散格点：min -Σ(x_i + 0.1)²  s.t. (x_i + 1/3)·x_i·(x_i - 2/3) = 0

    可行集为 3^D 个格点，p* = -(529/900)·D，位于 (2/3, ..., 2/3)。
    """
    if dimension < 1:
        raise ValueError(f"维度必须 >= 1: {dimension}")
    objective = SparsePoly.zero(dimension)
    equalities = []
    for i in range(dimension):
        xi = SparsePoly.variable(dimension, i)
        objective = objective - (xi + 0.1) ** 2
        equalities.append(multiply(multiply(xi + 1.0 / 3.0, xi), xi - 2.0 / 3.0))
    return ProblemSpec(dimension, objective, tuple(equalities))


def generate(family: str, dimension: int) -> ProblemSpec:
    if family == "annulus":
        return gen_annulus(dimension)
    if family == "discrete":
        return gen_discrete(dimension)
    raise ValueError(f"未知的基准族: {family}")


def known_optimum(family: str, dimension: int) -> Tuple[float, np.ndarray]:
    """已知全局最优 (p*, x*)"""
    if family == "annulus":
        location = np.zeros(dimension)
        location[0] = -1.0
        return -1.21, location
    if family == "discrete":
        return -(529.0 / 900.0) * dimension, np.full(dimension, 2.0 / 3.0)
    raise ValueError(f"未知的基准族: {family}")


def instance_seed(family: str, dimension: int, instance: int) -> int:
    """由 (族, 维度, 实例号) 确定的种子，跨进程稳定"""
    return zlib.crc32(f"{family}:{dimension}:{instance}".encode("utf-8"))


@dataclass
class BenchmarkRow:
    family: str
    dimension: int
    instance: int
    seed: int
    method: str
    status: str
    objective: float
    rel_error: float
    wall_time_s: float
    success: bool

    def __post_init__(self):
        # 成功必须以收敛为前提
        self.success = bool(self.success and self.status == SolveStatus.CONVERGED.value)

    def to_record(self) -> dict:
        return asdict(self)


def run_instance(family: str, dimension: int, instance: int, methods: Sequence[str],
                 cfg: SolverConfig, threshold: float, n_components: int = 2,
                 polish: bool = False, oracle_check: bool = False) -> List[BenchmarkRow]:
    """单个 (维度, 实例) 上依次运行各方法"""
    problem = generate(family, dimension)
    seed = instance_seed(family, dimension, instance)
    reference, _ = known_optimum(family, dimension)
    instance_cfg = cfg.replace(seed=seed)

    rows = []
    for method in methods:
        start = time.perf_counter()
        result = solve_problem(problem, method, instance_cfg, n_components=n_components,
                               polish=polish, reference_value=reference)
        elapsed = time.perf_counter() - start
        error = relative_error(result.value, reference) if result.location is not None else float("nan")
        rows.append(BenchmarkRow(
            family=family,
            dimension=dimension,
            instance=instance,
            seed=seed,
            method=method,
            status=result.report.status.value,
            objective=result.value,
            rel_error=error,
            wall_time_s=elapsed,
            success=result.ok and error <= threshold,
        ))
        logger.info(
            f"[{family} D={dimension} #{instance}] {method}: {result.report.status.value}, "
            f"f={result.value:.6g}, 相对误差 {error:.2e}, 用时 {elapsed:.2f}s"
        )

    if oracle_check and family == "discrete" and dimension <= ORACLE_MAX_DIMENSION:
        oracle_value, _ = separable_minimum(problem)
        for row in rows:
            if row.method == METHOD_REFORMULATION and row.status == SolveStatus.CONVERGED.value:
                gap = abs(row.objective - oracle_value)
                log = logger.info if gap <= threshold else logger.warning
                log(f"[{family} D={dimension} #{instance}] 枚举验证: 精确最优 {oracle_value:.6g}，差值 {gap:.2e}")
    return rows


def _append_rows(path: Path, rows: Iterable[BenchmarkRow]) -> None:
    frame = pd.DataFrame([row.to_record() for row in rows], columns=CSV_COLUMNS)
    frame.to_csv(path, mode="a", header=not path.exists() or path.stat().st_size == 0, index=False)


def _flag_partial(path: Path) -> None:
    marker = path.with_name(path.name + ".partial")
    try:
        marker.write_text("incomplete\n", encoding="utf-8")
    except OSError:
        pass
    logger.error(f"结果文件写入失败，已保留部分结果: {path}")


def run_benchmark(family: str, dims: Sequence[int], instances: int, methods: Sequence[str],
                  cfg: Optional[SolverConfig] = None, threshold: float = 1e-2,
                  out_path: Optional[Path] = None, jobs: int = 1, n_components: int = 2,
                  polish: bool = False, oracle_check: bool = False) -> pd.DataFrame:
    """
    基准对比测试

    Args:
        family: annulus / discrete
        dims: 维度列表
        instances: 每个维度的实例数
        methods: reformulation / original 的子集
        cfg: 求解器配置（seed 会按实例覆盖）
        threshold: 成功的相对误差阈值
        out_path: 结果 CSV；已存在时覆盖，每完成一个实例追加写入
        jobs: 并行线程数；结果按提交顺序由当前线程写入

    Returns:
        全部结果行
    """
    if family not in FAMILIES:
        raise ValueError(f"未知的基准族: {family}")
    dims = list(dims)
    if not dims:
        raise ValueError("维度列表不能为空")
    if instances < 1:
        raise ValueError(f"实例数必须 >= 1: {instances}")
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise ValueError(f"未知的求解方法: {unknown or methods}")

    cfg = cfg or SolverConfig()
    tasks = [(dimension, instance) for dimension in dims for instance in range(1, instances + 1)]
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        if out_path.exists():
            out_path.unlink()

    def task(item: Tuple[int, int]) -> List[BenchmarkRow]:
        dimension, instance = item
        with log_time(f"{family} D={dimension} 实例 {instance}", logger):
            return run_instance(family, dimension, instance, methods, cfg, threshold,
                                n_components, polish, oracle_check)

    all_rows: List[BenchmarkRow] = []
    executor = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        pending = [executor.submit(task, item) for item in tasks] if executor else None
        for k, item in enumerate(tasks):
            rows = pending[k].result() if executor else task(item)
            all_rows.extend(rows)
            if out_path is not None:
                try:
                    _append_rows(out_path, rows)
                except OSError:
                    _flag_partial(out_path)
                    raise
    finally:
        if executor is not None:
            executor.shutdown(wait=True, cancel_futures=True)

    logger.info(f"基准测试完成: {family}, {len(tasks)} 个实例, {len(all_rows)} 行")
    return pd.DataFrame([row.to_record() for row in all_rows], columns=CSV_COLUMNS)
