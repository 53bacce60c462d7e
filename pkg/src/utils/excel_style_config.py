"""
Excel 样式配置
基准测试汇总表的字体、填充、对齐与数字格式
"""
from typing import Iterable

from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

# ===== 基础样式 =====
HEADER_FILL = PatternFill(patternType="solid", fgColor="FF3D5DD0")
DATA_FILL = PatternFill(patternType="solid", fgColor="FFE8EAF7")

HEADER_FONT_10 = Font(name="思源黑体 CN Regular", size=10, bold=True, color="FFFFFFFF")
DATA_FONT_10 = Font(name="思源黑体 CN Regular", size=10, bold=False, color="FF000000")

ALIGN_CENTER_WRAP = Alignment(horizontal="center", vertical="center", wrapText=True)
ALIGN_CENTER = Alignment(horizontal="center", vertical="center")

PERCENT_FORMAT = "0.00%"
SCIENTIFIC_FORMAT = "0.00E+00"
SECONDS_FORMAT = "0.000"

# 边框（细白色）
WHITE_THIN_BORDER = Border(
    left=Side(style="thin", color="FFFFFFFF"),
    right=Side(style="thin", color="FFFFFFFF"),
    top=Side(style="thin", color="FFFFFFFF"),
    bottom=Side(style="thin", color="FFFFFFFF"),
)


def _column_format(header) -> str:
    """按列名选择数字格式"""
    name = str(header or "")
    if "fraction" in name:
        return PERCENT_FORMAT
    if "rel_error" in name or name in {"slope", "stderr"}:
        return SCIENTIFIC_FORMAT
    if "time" in name:
        return SECONDS_FORMAT
    return "General"


def apply_summary_sheet_style(ws, max_row: int, max_col: int, label_cols: Iterable[int] = (1,)) -> None:
    """应用“汇总表”样式：首行表头，label_cols 为左侧行标列"""
    label_cols = set(label_cols)

    # 表头
    for col in range(1, max_col + 1):
        cell = ws.cell(row=1, column=col)
        cell.font = HEADER_FONT_10
        cell.fill = HEADER_FILL
        cell.alignment = ALIGN_CENTER_WRAP

    # 行标与数据区域
    for col in range(1, max_col + 1):
        number_format = _column_format(ws.cell(row=1, column=col).value)
        for row in range(2, max_row + 1):
            cell = ws.cell(row=row, column=col)
            cell.alignment = ALIGN_CENTER
            if col in label_cols:
                cell.font = HEADER_FONT_10
                cell.fill = HEADER_FILL
            else:
                cell.font = DATA_FONT_10
                cell.fill = DATA_FILL
                cell.number_format = number_format

    # 为表格区域统一加边框（含表头和行标）
    for row in range(1, max_row + 1):
        for col in range(1, max_col + 1):
            ws.cell(row=row, column=col).border = WHITE_THIN_BORDER
