"""
主程序入口
polymoment 命令行：solve / bench / oracle / gen / summarize
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from src.utils.runtime_env import add_project_paths

# 统一处理路径与导入
REPO_ROOT, STORAGE_ROOT = add_project_paths()

import config
from src.analysis.benchmark import METHODS, generate, known_optimum, run_benchmark
from src.analysis.pipeline import METHOD_REFORMULATION, solve_problem
from src.analysis.recovery import brute_force_grid, separable_minimum
from src.analysis.summary import (
    load_results,
    summarize,
    write_markdown_report,
    write_summary_csv,
    write_summary_excel,
)
from src.polynomial.problem_io import load_problem, save_problem
from src.solver.nlp_solver import SolverConfig
from src.utils.exceptions import (
    BandTooTightError,
    DegenerateSolutionError,
    NotSeparableError,
    ReformulationUsageError,
)
from src.utils.logger import get_logger, log_time
from src.utils.logger_config import LogConfig
from src.utils.output_manager import get_output_manager

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVE_FAILURE = 2
EXIT_IO_ERROR = 3


class _CliParser(argparse.ArgumentParser):
    """参数错误时以退出码 1 结束"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_dims(text: str) -> List[int]:
    """解析维度：A:B（含端点）、A,B,C 或单个整数"""
    try:
        if ":" in text:
            start, stop = (int(part) for part in text.split(":", 1))
            dims = list(range(start, stop + 1))
        else:
            dims = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"无法解析维度: {text!r}") from exc
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"维度必须为正整数且非空: {text!r}")
    return dims


def parse_methods(text: str) -> List[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"未知的求解方法: {', '.join(unknown) or text!r}")
    return methods


def _setup_command(command: str, verbose: bool):
    """初始化输出目录与日志"""
    output_manager = get_output_manager(
        command,
        base_dir=config.REPORTS_DIR,
        use_timestamp=config.REPORTS_USE_TIMESTAMP,
        clean_old=config.REPORTS_CLEAN_ENABLED,
        clean_days=config.REPORTS_RETENTION_DAYS,
    )
    LogConfig.setup_root_logger(
        LogConfig.resolve_log_dir(command, config.REPORTS_DIR),
        level=logging.DEBUG if verbose else logging.INFO,
        script_name=command,
        base_dir=config.REPORTS_DIR,
        task_log_dir=output_manager.get_path('logs'),
    )
    return output_manager


# ============================================================ 子命令
def cmd_solve(args: argparse.Namespace) -> int:
    output_manager = _setup_command('solve', args.verbose)
    problem = load_problem(args.problem)
    cfg = SolverConfig.from_config(tol=args.tol, seed=args.seed, max_restarts=args.max_restarts)

    with log_time(f"求解 {args.problem}（{args.method}）", logger):
        result = solve_problem(
            problem, args.method, cfg,
            n_components=args.L, polish=args.polish,
            rank_x=config.FACTOR_RANK_X, rank_y=config.FACTOR_RANK_Y,
        )

    out_path = Path(args.out) if args.out else output_manager.get_path('data', 'solve_report.json')
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(result.to_dict(), indent=2, ensure_ascii=False), encoding='utf-8')

    logger.info(f"状态: {result.report.status.value}, 目标值: {result.value:.10g}")
    if result.location is not None:
        logger.info(f"最优点: {[round(v, 8) for v in result.location.tolist()]}")
    logger.info(f"报告已保存: {out_path}")

    if result.error:
        raise DegenerateSolutionError(result.error)
    return EXIT_OK if result.report.converged else EXIT_SOLVE_FAILURE


def cmd_bench(args: argparse.Namespace) -> int:
    output_manager = _setup_command('bench', args.verbose)
    settings = config.get_family_settings(args.family)
    dims = args.dims or list(range(settings['dims'][0], settings['dims'][1] + 1))
    tol = args.tol if args.tol is not None else settings['tol']
    cfg = SolverConfig.from_config(tol=tol, max_restarts=args.max_restarts)
    out_path = Path(args.out) if args.out else output_manager.get_path('data', f'{args.family}_results.csv')

    with log_time(f"基准测试 {args.family} dims={dims}", logger):
        rows = run_benchmark(
            args.family, dims, args.instances, args.methods,
            cfg=cfg, threshold=settings['threshold'], out_path=out_path,
            jobs=args.jobs, n_components=args.L, polish=args.polish,
            oracle_check=args.oracle_check,
        )
    logger.info(f"结果已保存: {out_path}")

    if args.summary:
        summary = summarize(rows)
        outputs = {
            'results': out_path,
            'summary': write_summary_csv(summary, output_manager.get_path('data', f'{args.family}_summary.csv')),
        }
        if args.excel:
            outputs['excel'] = write_summary_excel(
                summary, output_manager.get_path('excel', f'{args.family}_summary.xlsx'))
        parameters = {
            'family': args.family, 'dims': dims, 'instances': args.instances,
            'methods': ','.join(args.methods), 'L': args.L, 'tol': tol,
            'threshold': settings['threshold'], 'jobs': args.jobs,
        }
        write_markdown_report(summary, output_manager.get_path('reports', f'{args.family}_report.md'),
                              parameters, outputs)
    output_manager.print_summary()
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    _setup_command('oracle', args.verbose)
    problem = load_problem(args.problem)
    with log_time(f"验证 {args.problem}", logger):
        if args.separable:
            value, location = separable_minimum(problem)
        else:
            result = brute_force_grid(problem, args.grid, args.band, jobs=args.jobs)
            value, location = result.value, result.location
    logger.info(f"验证最小值: {value:.10g}")
    logger.info(f"位置: {[round(v, 8) for v in location.tolist()]}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    _setup_command('gen', args.verbose)
    problem = generate(args.family, args.dimension)
    value, location = known_optimum(args.family, args.dimension)
    save_problem(problem, args.out)
    logger.info(f"已生成 {args.family} D={args.dimension}: 已知最优 {value:.10g} @ {location.tolist()}")
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    output_manager = _setup_command('summarize', args.verbose)
    summary = summarize(load_results(args.results))
    out_path = Path(args.out) if args.out else output_manager.get_path('data', 'summary.csv')
    write_summary_csv(summary, out_path)
    if args.excel:
        write_summary_excel(summary, out_path.with_suffix('.xlsx'))
    for record in summary.slopes.itertuples(index=False):
        logger.info(f"{record.family}/{record.method}: log-log 斜率 {record.slope:.3f} ± {record.stderr:.3f}")
    return EXIT_OK


# ============================================================ 参数解析
def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(prog='polymoment', description='基于乘积测度矩重构的多项式全局优化')
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='显示详细日志')

    solve = subparsers.add_parser('solve', parents=[common], help='求解单个问题文件')
    solve.add_argument('--problem', required=True, help='问题文件（JSON）')
    solve.add_argument('--L', type=int, default=config.MIXTURE_SIZE, help='混合分量数')
    solve.add_argument('--tol', type=float, default=None, help='收敛容差（默认取配置）')
    solve.add_argument('--seed', type=int, default=0, help='随机种子')
    solve.add_argument('--max-restarts', type=int, default=None, help='最大重启次数')
    solve.add_argument('--method', choices=METHODS, default=METHOD_REFORMULATION, help='求解方法')
    solve.add_argument('--polish', action='store_true', help='对恢复的点做至多 5 步投影梯度打磨')
    solve.add_argument('--out', help='JSON 报告输出路径')
    solve.set_defaults(handler=cmd_solve)

    bench = subparsers.add_parser('bench', parents=[common], help='基准对比测试')
    bench.add_argument('--family', required=True, choices=list(config.BENCHMARK_FAMILIES))
    bench.add_argument('--dims', type=parse_dims, default=None, help='维度范围，如 2:6')
    bench.add_argument('--instances', type=int, default=config.BENCHMARK_INSTANCES, help='每个维度的实例数')
    bench.add_argument('--methods', type=parse_methods, default=list(config.BENCHMARK_METHODS),
                       help='逗号分隔: reformulation,original')
    bench.add_argument('--jobs', type=int, default=config.BENCHMARK_JOBS, help='并行线程数')
    bench.add_argument('--L', type=int, default=config.MIXTURE_SIZE, help='混合分量数')
    bench.add_argument('--tol', type=float, default=None, help='收敛容差（默认取该族配置）')
    bench.add_argument('--max-restarts', type=int, default=None, help='最大重启次数')
    bench.add_argument('--polish', action='store_true', help='打磨恢复的点')
    bench.add_argument('--oracle-check', action='store_true', help='离散族 D<=4 时用精确枚举交叉验证')
    bench.add_argument('--summary', action='store_true', help='同时输出汇总 CSV 与 Markdown 报告')
    bench.add_argument('--excel', action='store_true', help='汇总时额外输出 Excel')
    bench.add_argument('--out', help='结果 CSV 路径')
    bench.set_defaults(handler=cmd_bench)

    oracle = subparsers.add_parser('oracle', parents=[common], help='网格 / 枚举验证')
    oracle.add_argument('--problem', required=True, help='问题文件（JSON）')
    oracle.add_argument('--grid', type=int, default=config.ORACLE_GRID_POINTS, help='每轴网格点数')
    oracle.add_argument('--band', type=float, default=config.ORACLE_BAND, help='可行带宽 τ')
    oracle.add_argument('--separable', action='store_true', help='改用逐轴求根的精确枚举')
    oracle.add_argument('--jobs', type=int, default=1, help='并行线程数')
    oracle.set_defaults(handler=cmd_oracle)

    gen = subparsers.add_parser('gen', parents=[common], help='生成基准问题文件')
    gen.add_argument('--family', required=True, choices=list(config.BENCHMARK_FAMILIES))
    gen.add_argument('--dimension', type=int, required=True)
    gen.add_argument('--out', required=True, help='输出文件')
    gen.set_defaults(handler=cmd_gen)

    summ = subparsers.add_parser('summarize', parents=[common], help='汇总基准结果 CSV')
    summ.add_argument('--results', required=True, help='结果 CSV')
    summ.add_argument('--out', help='汇总 CSV 路径')
    summ.add_argument('--excel', action='store_true', help='额外输出 Excel')
    summ.set_defaults(handler=cmd_summarize)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except OSError as exc:
        logger.error(f"读写失败: {exc}", exc_info=True)
        return EXIT_IO_ERROR
    except (DegenerateSolutionError, BandTooTightError, NotSeparableError) as exc:
        logger.error(f"求解失败: {exc}")
        return EXIT_SOLVE_FAILURE
    except (ValueError, ReformulationUsageError) as exc:
        logger.error(f"参数错误: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
