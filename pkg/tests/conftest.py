"""
测试公共配置
慢速用例标记、hypothesis 配置与常用问题夹具
"""
import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

# 保证从任意目录运行 pytest 时都能导入 config 与 src
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.analysis.benchmark import gen_annulus, gen_discrete  # noqa: E402
from src.polynomial.poly_core import ProblemSpec, SparsePoly  # noqa: E402

# 数值用例单次可能超过 hypothesis 默认的 200ms 期限
hypothesis.settings.register_profile("default", deadline=None, max_examples=50)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行标记为 slow 的长时间用例")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 长时间运行的验收用例（需 --runslow）")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def annulus_2d() -> ProblemSpec:
    return gen_annulus(2)


@pytest.fixture
def discrete_2d() -> ProblemSpec:
    return gen_discrete(2)


@pytest.fixture
def discrete_3d() -> ProblemSpec:
    return gen_discrete(3)


@pytest.fixture
def half_line_problem() -> ProblemSpec:
    """min x1 s.t. x1 - 0.5 >= 0，最优点 x1 = 0.5"""
    x1 = SparsePoly.variable(1, 0)
    return ProblemSpec(1, x1, (), (x1 - 0.5,))
