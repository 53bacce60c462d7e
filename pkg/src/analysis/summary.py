"""
结果汇总模块
按 (族, 维度, 方法) 聚合基准结果，拟合耗时-维度的对数斜率，输出 CSV / Excel / Markdown
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm
from openpyxl import Workbook
from openpyxl.utils.dataframe import dataframe_to_rows

from ..utils.excel_style_config import apply_summary_sheet_style
from ..utils.logger import get_logger, log_data_summary, log_function_call

logger = get_logger(__name__)

GROUP_KEYS = ["family", "dimension", "method"]


@dataclass
class BenchmarkSummary:
    table: pd.DataFrame        # 每个 (族, 维度, 方法) 一行
    comparison: pd.DataFrame   # 每个 (族, 维度) 一行，各方法成功率并列
    slopes: pd.DataFrame       # 每个 (族, 方法) 的 log-log 斜率


def fit_loglog_slope(dimensions: Sequence[float], times: Sequence[float]) -> Tuple[float, float]:
    """
    普通最小二乘拟合 log(t) = a + b·log(D)

    Returns:
        (斜率 b, 标准误)
    """
    dims = np.asarray(dimensions, dtype=float)
    times = np.asarray(times, dtype=float)
    mask = (dims > 0) & (times > 0) & np.isfinite(times)
    if mask.sum() < 2 or np.unique(dims[mask]).size < 2:
        raise ValueError("拟合斜率至少需要两个不同维度的正耗时")
    design = sm.add_constant(np.log(dims[mask]))
    fit = sm.OLS(np.log(times[mask]), design).fit()
    stderr = float(fit.bse[1]) if mask.sum() > 2 else float("nan")
    return float(fit.params[1]), stderr


@log_function_call
def summarize(rows: pd.DataFrame) -> BenchmarkSummary:
    """
    聚合基准结果

    Args:
        rows: 基准结果行（列同结果 CSV）

    Returns:
        BenchmarkSummary：均值/中位数相对误差与耗时、成功率、收敛率、斜率
    """
    if rows is None or rows.empty:
        raise ValueError("没有可汇总的结果行")

    frame = rows.copy()
    frame["success"] = frame["success"].astype(bool)
    frame["converged"] = frame["status"] == "Converged"

    table = (
        frame.groupby(GROUP_KEYS, sort=True)
        .agg(
            runs=("success", "size"),
            mean_rel_error=("rel_error", "mean"),
            median_rel_error=("rel_error", "median"),
            mean_wall_time_s=("wall_time_s", "mean"),
            median_wall_time_s=("wall_time_s", "median"),
            success_fraction=("success", "mean"),
            converged_fraction=("converged", "mean"),
        )
        .reset_index()
    )

    comparison = (
        table.pivot_table(index=["family", "dimension"], columns="method", values="success_fraction")
        .reset_index()
    )
    comparison.columns.name = None
    comparison = comparison.rename(columns={
        m: f"{m}_success_fraction" for m in table["method"].unique()
    })

    slope_rows: List[Dict[str, object]] = []
    for (family, method), group in table.groupby(["family", "method"], sort=True):
        try:
            slope, stderr = fit_loglog_slope(group["dimension"], group["mean_wall_time_s"])
        except ValueError:
            continue
        slope_rows.append({
            "family": family, "method": method, "slope": slope,
            "stderr": stderr, "n_points": int(group.shape[0]),
        })
    slopes = pd.DataFrame(slope_rows, columns=["family", "method", "slope", "stderr", "n_points"])

    logger.info(f"汇总完成: {table.shape[0]} 组, 斜率 {slopes.shape[0]} 条")
    return BenchmarkSummary(table=table, comparison=comparison, slopes=slopes)


def load_results(path: Path) -> pd.DataFrame:
    """读取结果 CSV"""
    frame = pd.read_csv(path)
    log_data_summary(f"读取结果 {path}", frame, logger)
    return frame


def write_summary_csv(summary: BenchmarkSummary, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary.table.to_csv(path, index=False)
    logger.info(f"汇总 CSV 已保存: {path}")
    return path


def write_summary_excel(summary: BenchmarkSummary, path: Path) -> Path:
    """三个工作表：汇总、成功率对比、耗时斜率"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    workbook = Workbook()
    sheets = [
        ("汇总", summary.table, (1, 2, 3)),
        ("成功率对比", summary.comparison, (1, 2)),
        ("耗时斜率", summary.slopes, (1, 2)),
    ]
    for k, (title, frame, label_cols) in enumerate(sheets):
        ws = workbook.active if k == 0 else workbook.create_sheet()
        ws.title = title
        cleaned = frame.astype(object).where(frame.notna(), None)
        for record in dataframe_to_rows(cleaned, index=False, header=True):
            ws.append(record)
        apply_summary_sheet_style(ws, max_row=frame.shape[0] + 1, max_col=max(frame.shape[1], 1),
                                  label_cols=label_cols)
        for col in range(1, frame.shape[1] + 1):
            ws.column_dimensions[ws.cell(row=1, column=col).column_letter].width = 18
    workbook.save(path)
    logger.info(f"汇总 Excel 已保存: {path}")
    return path


def _markdown_table(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "_无数据_\n"
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    divider = "|" + "---|" * frame.shape[1]
    lines = [header, divider]
    for record in frame.itertuples(index=False):
        cells = []
        for value in record:
            if isinstance(value, float):
                cells.append("" if np.isnan(value) else f"{value:.4g}")
            else:
                cells.append(str(value))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_markdown_report(summary: BenchmarkSummary, path: Path, parameters: Dict[str, object],
                          outputs: Optional[Dict[str, Path]] = None) -> Path:
    """生成基准测试的 Markdown 报告"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sections = [
        "# 基准测试报告\n",
        f"生成时间: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n",
        "## 运行参数\n",
        "\n".join(f"- {key}: {value}" for key, value in parameters.items()) + "\n",
        "## 各维度成功率\n",
        _markdown_table(summary.comparison),
        "## 汇总统计\n",
        _markdown_table(summary.table),
        "## 耗时-维度 log-log 斜率\n",
        _markdown_table(summary.slopes),
    ]
    if outputs:
        sections.append("## 输出文件\n")
        sections.append("\n".join(f"- {name}: `{p}`" for name, p in outputs.items()) + "\n")
    path.write_text("\n".join(sections), encoding="utf-8")
    logger.info(f"Markdown 报告已保存: {path}")
    return path
