#!/usr/bin/env python
# scripts/check_environment.py
# 环境检查脚本，验证依赖是否安装且版本满足 requirements.txt

import logging
import sys
from importlib import metadata
from pathlib import Path

from packaging.version import Version

# 保证脚本独立运行时能找到项目内模块
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

import config  # noqa: E402
from src.utils.logger import get_logger  # noqa: E402
from src.utils.logger_config import LogConfig  # noqa: E402

logger = get_logger(__name__)

REQUIRED_PACKAGES = {
    # 数值计算
    'numpy': '1.24.0',
    'scipy': '1.11.0',
    # 结果处理与汇总
    'pandas': '2.0.0',
    'statsmodels': '0.14.0',
    'openpyxl': '3.1.0',
    # 配置
    'python-dotenv': '1.0.0',
    # 开发工具
    'pytest': '7.4.0',
    'hypothesis': '6.80.0',
    'black': '23.9.0',
    'flake8': '6.0.0',
}


def check_package(package_name: str, min_version: str):
    """检查包是否安装且版本满足要求，返回 (是否通过, 已安装版本, 信息)"""
    try:
        installed = metadata.version(package_name)
    except metadata.PackageNotFoundError:
        return False, None, "未安装"
    if Version(installed) >= Version(min_version):
        return True, installed, None
    return False, installed, f"需要版本 >= {min_version}"


def main() -> int:
    LogConfig.setup_root_logger(
        LogConfig.resolve_log_dir('check_environment', config.REPORTS_DIR),
        level=logging.INFO,
        script_name='check_environment',
        base_dir=config.REPORTS_DIR,
    )

    logger.info("检查 polymoment 环境依赖")
    logger.info("=" * 50)
    logger.info("%s", f"{'包名称':<15} {'状态':<5} {'版本':<12} {'信息':<20}")
    logger.info("-" * 60)

    all_passed = True
    for package, min_version in REQUIRED_PACKAGES.items():
        success, version, message = check_package(package, min_version)
        all_passed = all_passed and success
        status = "OK" if success else "FAIL"
        logger.info("%s", f"{package:<15} {status:<5} {version or 'N/A':<12} {message or 'OK':<20}")

    logger.info("=" * 50)
    logger.info("Python版本: %s", ".".join(str(v) for v in sys.version_info[:3]))

    if all_passed:
        logger.info("所有依赖检查通过，运行项目: python main.py --help")
        return 0
    logger.warning("部分依赖检查失败，请参考以下建议")
    logger.info("1. 使用 conda 环境: conda activate polymoment_env")
    logger.info("2. 使用 pip 安装缺失包: pip install -r requirements.txt")
    logger.info("3. 或运行环境设置脚本: bash scripts/create_env_conda.sh")
    return 1


if __name__ == "__main__":
    sys.exit(main())
