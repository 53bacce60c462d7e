"""
日志工具模块
提供便捷的日志函数与耗时记录
"""
from __future__ import annotations

import functools
import inspect
import logging
import time
from contextlib import contextmanager
from typing import Any, Callable, Optional


def get_logger(name: str = __name__) -> logging.Logger:
    """获取 logger 实例"""
    return logging.getLogger(name)


def _emit_performance(message: str, caller: Optional[inspect.Traceback] = None) -> None:
    """写入 performance logger（未配置处理器时跳过）"""
    perf_logger = logging.getLogger("performance")
    if not perf_logger.handlers:
        return
    if caller is None:
        perf_logger.info(message, stacklevel=3)
        return
    # 手动设置调用者信息，跳过 contextmanager 的包装帧
    record = perf_logger.makeRecord(
        perf_logger.name, logging.INFO, caller.filename, caller.lineno,
        message, args=(), exc_info=None, func=caller.function,
    )
    perf_logger.handle(record)


def log_function_call(func: Callable) -> Callable:
    """装饰器：记录函数调用与耗时"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = logging.getLogger(func.__module__)
        logger.debug(f"开始执行: {func.__name__}()")
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as exc:
            elapsed = time.perf_counter() - start_time
            logger.error(f"执行失败: {func.__name__}()，耗时 {elapsed:.3f}s，错误: {exc}", exc_info=True)
            _emit_performance(f"函数失败 | {func.__module__}.{func.__name__} | {elapsed:.3f}s")
            raise
        elapsed = time.perf_counter() - start_time
        logger.debug(f"完成执行: {func.__name__}()，耗时 {elapsed:.3f}s")
        _emit_performance(f"函数耗时 | {func.__module__}.{func.__name__} | {elapsed:.3f}s")
        return result

    return wrapper


@contextmanager
def log_time(task_name: str, logger: Optional[logging.Logger] = None):
    """上下文管理器：记录代码块执行时间"""
    if logger is None:
        logger = logging.getLogger()

    # 调用者信息（跳过 contextmanager 和当前函数）
    caller = inspect.getframeinfo(inspect.currentframe().f_back.f_back)

    logger.info(f"开始: {task_name}")
    start_time = time.perf_counter()
    try:
        yield
    except Exception as exc:
        elapsed = time.perf_counter() - start_time
        logger.error(f"失败: {task_name}，耗时 {elapsed:.3f}s，错误: {exc}", exc_info=True)
        _emit_performance(f"任务失败 | {task_name} | {elapsed:.3f}s", caller)
        raise
    else:
        elapsed = time.perf_counter() - start_time
        logger.info(f"完成: {task_name}，耗时 {elapsed:.3f}s")
        _emit_performance(f"任务耗时 | {task_name} | {elapsed:.3f}s", caller)


def log_data_summary(label: str, data: Any, logger: Optional[logging.Logger] = None) -> None:
    """记录数据摘要（数组形状、表格行数等）"""
    if logger is None:
        logger = logging.getLogger()

    if hasattr(data, "shape"):
        logger.info(f"{label}: shape={data.shape}")
    elif isinstance(data, dict):
        logger.info(f"{label}: keys={list(data.keys())}, size={len(data)}")
    elif isinstance(data, (list, tuple)):
        elem_type = type(data[0]).__name__ if data else "empty"
        logger.info(f"{label}: length={len(data)}, type={elem_type}")
    else:
        logger.info(f"{label}: {type(data).__name__}")
