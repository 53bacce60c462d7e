"""
问题文件读写模块
UTF-8 JSON 格式的 ProblemSpec 解析与序列化
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from ..utils.exceptions import DegeneratePolynomialError, DimensionMismatchError, ProblemParseError
from ..utils.logger import get_logger
from .poly_core import ProblemSpec, SparsePoly

logger = get_logger(__name__)


def _parse_terms(raw: Any, dimension: int, field: str) -> SparsePoly:
    """解析 [{"exponents": [...], "coeff": c}, ...] 形式的项列表"""
    if not isinstance(raw, list):
        raise ProblemParseError("项列表必须是 JSON 数组", field=field)

    terms: Dict[Tuple[int, ...], float] = {}
    for t, term in enumerate(raw):
        term_field = f"{field}[{t}]"
        if not isinstance(term, dict):
            raise ProblemParseError("项必须是 JSON 对象", field=term_field)
        if "exponents" not in term or "coeff" not in term:
            raise ProblemParseError("项缺少 exponents 或 coeff", field=term_field)

        exponents = term["exponents"]
        if not isinstance(exponents, list):
            raise ProblemParseError("exponents 必须是数组", field=f"{term_field}.exponents")
        if len(exponents) != dimension:
            raise ProblemParseError(
                f"exponents 长度 {len(exponents)} 与维度 {dimension} 不一致",
                field=f"{term_field}.exponents",
            )
        if any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in exponents):
            raise ProblemParseError("exponents 必须为非负整数", field=f"{term_field}.exponents")

        coeff = term["coeff"]
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
            raise ProblemParseError("coeff 必须是数值", field=f"{term_field}.coeff")
        try:
            value = float(coeff)
        except OverflowError as exc:
            raise ProblemParseError("系数溢出", field=f"{term_field}.coeff") from exc
        if not math.isfinite(value):
            raise ProblemParseError("系数溢出或非有限值", field=f"{term_field}.coeff")

        # 重复的指数求和
        key = tuple(exponents)
        terms[key] = terms.get(key, 0.0) + value

    return SparsePoly(dimension, terms)


def _parse_poly_list(raw: Any, dimension: int, field: str) -> List[SparsePoly]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ProblemParseError("约束列表必须是 JSON 数组", field=field)
    return [_parse_terms(item, dimension, f"{field}[{j}]") for j, item in enumerate(raw)]


def parse_problem(text: str) -> ProblemSpec:
    """
    解析问题文件文本

    Args:
        text: JSON 文本

    Returns:
        ProblemSpec

    Raises:
        ProblemParseError: 语法错误、维度不一致、系数溢出等，附带行号/字段
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"JSON 语法错误: {exc.msg}", line=exc.lineno) from exc

    if not isinstance(payload, dict):
        raise ProblemParseError("顶层必须是 JSON 对象", field="$")

    dimension = payload.get("dimension")
    if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
        raise ProblemParseError(f"dimension 必须为正整数，实际为 {dimension!r}", field="dimension")
    if "objective" not in payload:
        raise ProblemParseError("缺少 objective", field="objective")

    objective = _parse_terms(payload["objective"], dimension, "objective")
    equalities = _parse_poly_list(payload.get("equalities"), dimension, "equalities")
    inequalities = _parse_poly_list(payload.get("inequalities"), dimension, "inequalities")

    try:
        problem = ProblemSpec(dimension, objective, tuple(equalities), tuple(inequalities))
    except (DegeneratePolynomialError, DimensionMismatchError) as exc:
        raise ProblemParseError(str(exc), field="objective") from exc

    logger.debug(
        f"解析问题: D={problem.dimension}, d={problem.degree}, "
        f"J={problem.n_equalities}, K={problem.n_inequalities}"
    )
    return problem


def _dump_terms(poly: SparsePoly) -> List[Dict[str, Any]]:
    # repr(float) 即最短可往返的十进制表示
    return [{"exponents": list(index), "coeff": coeff} for index, coeff in poly.terms.items()]


def serialize_problem(problem: ProblemSpec) -> str:
    """序列化为 JSON 文本，项按分级字典序输出"""
    payload = {
        "dimension": problem.dimension,
        "objective": _dump_terms(problem.objective),
        "equalities": [_dump_terms(g) for g in problem.equalities],
        "inequalities": [_dump_terms(h) for h in problem.inequalities],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def load_problem(path: Union[str, Path]) -> ProblemSpec:
    """从文件读取问题"""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    logger.info(f"读取问题文件: {path}")
    return parse_problem(text)


def save_problem(problem: ProblemSpec, path: Union[str, Path]) -> Path:
    """写入问题文件，返回路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_problem(problem), encoding="utf-8")
    logger.info(f"问题已保存: {path}")
    return path
