#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
output_manager.py - 统一管理各命令的输出路径

功能：
1. 为每个命令（solve/bench/oracle/gen/summarize）创建独立的输出目录
2. 按类型（数据/Excel/报告/日志）组织文件
3. 支持时间戳目录和旧文件清理
"""

import os
import shutil
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional

from .logger import get_logger

logger = get_logger(__name__)


class OutputManager:
    """输出管理器，统一管理各命令的输出路径"""

    SCRIPT_TYPES = {
        'solve': '单问题求解',
        'bench': '基准测试',
        'oracle': '网格验证',
        'gen': '问题生成',
        'summarize': '结果汇总',
    }

    OUTPUT_TYPES = {
        'data': 'CSV/JSON 数据',
        'excel': 'Excel文件',
        'reports': '报告文件',
        'logs': '日志文件',
    }

    def __init__(self, script_type: str = 'solve',
                 base_dir: str = '.',
                 use_timestamp: bool = False,
                 clean_old: bool = False,
                 clean_days: int = 7):
        """
        初始化输出管理器

        Args:
            script_type: 命令类型（solve/bench/oracle/gen/summarize）
            base_dir: 基础目录
            use_timestamp: 是否使用时间戳子目录
            clean_old: 是否清理旧文件
            clean_days: 清理多少天前的文件
        """
        self.script_type = script_type
        self.base_dir = Path(base_dir)

        self.timestamp = None
        if use_timestamp:
            self.timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")

        self.dirs = self._build_directory_structure()

        if clean_old:
            self.clean_old_files(days=clean_days)

    def _build_directory_structure(self) -> Dict[str, Path]:
        """构建目录结构"""
        if self.timestamp:
            script_base = self.base_dir / self.script_type / self.timestamp
        else:
            script_base = self.base_dir / self.script_type

        dirs = {'base': script_base}
        for output_type in self.OUTPUT_TYPES:
            dirs[output_type] = script_base / output_type

        for dir_path in dirs.values():
            dir_path.mkdir(parents=True, exist_ok=True)

        logger.debug(f"输出目录结构已创建: {script_base}")
        return dirs

    def get_path(self, output_type: str, filename: Optional[str] = None,
                 subdir: Optional[str] = None) -> Path:
        """
        获取输出文件路径

        Args:
            output_type: 输出类型（data/excel/reports/logs，其他值在根目录下新建）
            filename: 文件名（可选）
            subdir: 子目录（可选）

        Returns:
            完整文件路径
        """
        if output_type in self.dirs:
            base_dir = self.dirs[output_type]
        else:
            base_dir = self.dirs['base'] / output_type
            base_dir.mkdir(parents=True, exist_ok=True)

        if subdir:
            base_dir = base_dir / subdir
            base_dir.mkdir(parents=True, exist_ok=True)

        if filename:
            return base_dir / self._sanitize_filename(filename)
        return base_dir

    @staticmethod
    def _sanitize_filename(filename: str) -> str:
        """清理文件名，移除特殊字符"""
        for char in '<>:"/\\|?*':
            filename = filename.replace(char, '_')
        if len(filename) > 200:
            name, ext = os.path.splitext(filename)
            filename = name[:195] + ext
        return filename

    def clean_old_files(self, days: int = 7):
        """清理指定天数前的旧时间戳目录"""
        cutoff_time = time.time() - (days * 24 * 60 * 60)
        base_root = self.base_dir / self.script_type
        if not base_root.exists():
            return

        for subdir in base_root.iterdir():
            if not subdir.is_dir() or subdir == self.dirs.get('base'):
                continue
            try:
                ts = datetime.strptime(subdir.name, "%Y%m%d_%H%M%S")
            except ValueError:
                continue
            if ts.timestamp() < cutoff_time:
                try:
                    shutil.rmtree(subdir)
                    logger.debug(f"清理旧目录: {subdir}")
                except OSError as e:
                    logger.warning(f"清理目录失败 {subdir}: {e}")

    def get_summary_info(self) -> Dict[str, str]:
        """获取输出目录摘要信息"""
        summary = {
            'script_type': self.SCRIPT_TYPES.get(self.script_type, self.script_type),
            'base_dir': str(self.dirs['base'].absolute()),
            'timestamp': self.timestamp or '无',
        }
        for name, path in self.dirs.items():
            if path.exists():
                summary[f'{name}_files'] = str(sum(1 for p in path.rglob('*') if p.is_file()))
        return summary

    def print_summary(self):
        """输出目录摘要写入日志"""
        logger.info("输出目录结构摘要")
        logger.info("=" * 60)
        for key, value in self.get_summary_info().items():
            logger.info(f"{key:20}: {value}")
        logger.info("=" * 60)


# 按命令类型缓存的输出管理器
_output_manager_cache: Dict[str, OutputManager] = {}


def get_output_manager(script_type: str = 'solve', **kwargs) -> OutputManager:
    """获取或创建输出管理器（单例模式）"""
    if script_type not in _output_manager_cache:
        _output_manager_cache[script_type] = OutputManager(script_type, **kwargs)
    return _output_manager_cache[script_type]
