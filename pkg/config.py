# 修改文件：config.py
# 修改内容：改为求解器/重构/网格验证/基准测试配置

"""
配置文件
存储项目配置参数，部署时可通过环境变量（或 .env）覆盖
"""
import os
from typing import Dict, Any

from dotenv import load_dotenv

from src.utils.runtime_env import add_project_paths

load_dotenv()

# 确保项目路径可被导入
REPO_ROOT, STORAGE_ROOT = add_project_paths()

# 项目路径（可写目录，一般为当前工作目录，POLYMOMENT_ROOT 可覆盖）
PROJECT_DIR = STORAGE_ROOT


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in {"1", "true", "yes"}


def _env_optional_int(name: str):
    value = os.getenv(name)
    return int(value) if value else None


# 输出路径  全项目统一时间戳和清理时间
REPORTS_DIR = PROJECT_DIR / "reports"
REPORTS_USE_TIMESTAMP = _env_bool("REPORTS_USE_TIMESTAMP", "true")
REPORTS_CLEAN_ENABLED = _env_bool("REPORTS_CLEAN_ENABLED", "false")
REPORTS_RETENTION_DAYS = int(os.getenv("REPORTS_RETENTION_DAYS", "7"))

# ==================== 求解器配置 ====================
# 总收敛容差 ε，合理范围 1e-2 ~ 1e-1
SOLVER_TOL = float(os.getenv("SOLVER_TOL", "1e-2"))
SOLVER_MAX_OUTER = int(os.getenv("SOLVER_MAX_OUTER", "100"))
SOLVER_MAX_INNER = int(os.getenv("SOLVER_MAX_INNER", "500"))
SOLVER_INITIAL_PENALTY = float(os.getenv("SOLVER_INITIAL_PENALTY", "10"))
SOLVER_PENALTY_GROWTH = float(os.getenv("SOLVER_PENALTY_GROWTH", "10"))
# 可行性未下降到上一轮的该比例时放大罚参数
SOLVER_FEASIBILITY_RATIO = float(os.getenv("SOLVER_FEASIBILITY_RATIO", "0.25"))
SOLVER_MAX_RESTARTS = int(os.getenv("SOLVER_MAX_RESTARTS", "3"))
SOLVER_MAX_PENALTY = 1e12
SOLVER_LBFGS_MEMORY = int(os.getenv("SOLVER_LBFGS_MEMORY", "10"))

# ==================== 重构配置 ====================
# 乘积测度混合分量数 L
MIXTURE_SIZE = int(os.getenv("MIXTURE_SIZE", "2"))
# Burer-Monteiro 因子列数，None 表示满秩（X: d+1，Y: d）
FACTOR_RANK_X = _env_optional_int("FACTOR_RANK_X")
FACTOR_RANK_Y = _env_optional_int("FACTOR_RANK_Y")

# ==================== 网格验证配置 ====================
ORACLE_GRID_POINTS = int(os.getenv("ORACLE_GRID_POINTS", "801"))
ORACLE_BAND = float(os.getenv("ORACLE_BAND", "5e-3"))

# ==================== 基准测试配置 ====================
# threshold: 判定成功的相对误差阈值；tol: 该族使用的求解容差；dims: 默认维度范围（含端点）
BENCHMARK_FAMILIES: Dict[str, Dict[str, Any]] = {
    'annulus': {
        'name': '椭圆环',
        'threshold': 1e-2,
        'tol': 1e-2,
        'dims': (2, 8),
    },
    'discrete': {
        'name': '离散格点',
        'threshold': 1e-1,
        'tol': 1e-1,
        'dims': (2, 6),
    },
}

BENCHMARK_METHODS = ('reformulation', 'original')
BENCHMARK_INSTANCES = int(os.getenv("BENCHMARK_INSTANCES", "4"))
BENCHMARK_JOBS = int(os.getenv("BENCHMARK_JOBS", "1"))


def get_family_settings(family: str) -> Dict[str, Any]:
    """获取基准族配置"""
    if family not in BENCHMARK_FAMILIES:
        raise ValueError(f"未知的基准族: {family}（可选: {', '.join(BENCHMARK_FAMILIES)}）")
    return BENCHMARK_FAMILIES[family]
