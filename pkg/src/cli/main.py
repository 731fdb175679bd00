#!/usr/bin/env python3
"""
批处理命令行入口

    python -m src.cli.main <子命令> [参数]

退出码：0 成功，2 用法错误，3 解析错误，4 超预算（结果已写出），5 内部错误
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from config import settings
from src.analogy.search import MODE_PARTIAL, MODE_STRICT, HintSet, SearchBudget, find_homomorphism
from src.composition.construal import FragmentInstance, compose
from src.composition.construal_format import write_construal
from src.domains.catalog import DomainSpec, generate
from src.errors import (
    AnalogyError,
    DomainParameterError,
    InvalidBudgetError,
    MdpValidationError,
    ParseError,
    UsageError,
)
from src.homomorphism.checks import check_homomorphism, loss_bound
from src.homomorphism.map_format import format_certificate, parse_assignments, read_map, write_map
from src.library.lifecycle import LifecycleConfig, bench_amortization, run_lifecycle, write_rows
from src.lifting.lifter import lift_policy, transfer_report
from src.mdp_core.mdp_format import read_mdp, write_mdp
from src.mdp_core.solvers import greedy_policy, optimal_values, value_iteration

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_OVER_BUDGET = 4
EXIT_INTERNAL = 5


class _Parser(argparse.ArgumentParser):
    """用法错误抛出 UsageError，由 main 统一映射退出码"""

    def error(self, message):
        raise UsageError(message)


def _emit(text: str, out: Optional[str]):
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_param(raw: str):
    if "=" not in raw:
        raise UsageError(f"--param 的格式应为 key=value: {raw!r}")
    key, value = raw.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


# ---------- 子命令 ----------
def cmd_gen(args) -> int:
    spec = DomainSpec(kind=args.kind, parameters=dict(_parse_param(p) for p in args.param), seed=args.seed)
    domain = generate(spec)
    write_mdp(domain.mdp, args.out)
    if args.map_out and domain.hom_map is not None:
        write_map(domain.hom_map, args.map_out)
    if args.abstract_out and domain.abstract is not None:
        write_mdp(domain.abstract, args.abstract_out)
    logger.info(f"已生成 {domain.mdp.describe()}")
    return EXIT_OK


def cmd_solve(args) -> int:
    mdp = read_mdp(args.mdp)
    result = value_iteration(mdp, args.tolerance, args.max_sweeps)
    policy = greedy_policy(mdp, result.values)
    lines = [f"sweeps {result.sweeps_used}", f"backups {result.backups}",
             f"converged {str(result.converged).lower()}"]
    lines.extend(f"value {s} {float(v)!r}" for s, v in enumerate(result.values.values))
    lines.extend(f"policy {s} {a}" for s, a in sorted(policy.choice.items()))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_check_hom(args) -> int:
    ground, abstract = read_mdp(args.ground), read_mdp(args.abstract)
    hom_map = read_map(args.map)
    cert = check_homomorphism(ground, abstract, hom_map, args.tol)
    text = format_certificate(cert)
    if abstract.discount < 1.0:
        text += f"loss_bound {loss_bound(cert, abstract.discount, abstract.reward_range())!r}\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_find_analogy(args) -> int:
    target, source = read_mdp(args.target), read_mdp(args.source)
    hints = None
    if args.hints:
        hints_path = Path(args.hints)
        try:
            text = hints_path.read_text(encoding="utf-8")
        except OSError as e:
            raise ParseError(f"无法读取文件: {e}", None, str(hints_path)) from e
        f, g, _, _ = parse_assignments(text, str(hints_path))
        hints = HintSet.from_pairs(f.items(), g.items())
    budget = SearchBudget(max_node_expansions=args.max_expansions, mode=args.mode,
                          partial_penalty=args.penalty, occupancy_weighted=args.occupancy)
    result = find_homomorphism(target, source, hints, budget)
    if result.found and args.out:
        write_map(result.best_map, args.out)
    row = ",".join(result.csv_row(args.instance_id)) + "\n"
    if args.csv:
        path = Path(args.csv)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("instance_id,mode,expansions_used,score,strict\n" + row, encoding="utf-8")
    sys.stdout.write(row)
    if not result.found and not result.exhausted:
        return EXIT_OVER_BUDGET
    return EXIT_OK


def cmd_transfer(args) -> int:
    ground, abstract = read_mdp(args.ground), read_mdp(args.abstract)
    hom_map = read_map(args.map)
    solution = optimal_values(abstract, args.tolerance)
    lifted = lift_policy(solution.policy, hom_map, ground)
    report = transfer_report(ground, lifted, args.tolerance, strict=args.strict)
    lines = [f"optimality_gap {report.optimality_gap!r}", f"warning {str(report.warning).lower()}"]
    lines.extend(f"excluded {s}" for s in report.excluded_states)
    lines.extend(f"return {s} {v!r}" for s, v in sorted(report.ground_return.items()))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_compose(args) -> int:
    spec_path = Path(args.spec)
    try:
        spec = json.loads(spec_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ParseError(f"无法读取文件: {e}", None, str(spec_path)) from e
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON 格式错误: {e.msg}", e.lineno, str(spec_path)) from e
    base = spec_path.parent
    try:
        instances = [
            FragmentInstance.from_fragment(read_mdp(base / item["fragment"]), item["id"], item.get("module"),
                                           item.get("entries"), item.get("exits"))
            for item in spec["instances"]
        ]
        gluings = [tuple(item) for item in spec.get("gluings", [])]
        bindings = [read_map(base / path) for path in spec.get("bindings", [])]
    except (KeyError, TypeError) as e:
        raise ParseError(f"组装规格缺少字段或类型错误: {e}", None, str(spec_path)) from e
    construal = compose(instances, gluings, bindings, spec.get("construal_id", "construal"),
                        bool(spec.get("precedence", False)))
    write_construal(construal, args.out_dir)
    return EXIT_OK


def _lifecycle_config(args) -> LifecycleConfig:
    config = LifecycleConfig.from_json_file(args.config) if args.config else LifecycleConfig()
    overrides = {}
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.variant is not None:
        overrides["variant"] = args.variant
    if getattr(args, "seeds", None):
        overrides["seeds"] = args.seeds
    elif args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.no_update:
        overrides["update_library"] = False
    return LifecycleConfig.model_validate({**config.model_dump(), **overrides})


def cmd_lifecycle(args) -> int:
    config = _lifecycle_config(args)
    out_dir = Path(args.out_dir)
    settings.create_directories(out_dir)
    rows = []
    for seed in config.seeds:
        seed_dir = out_dir if len(config.seeds) == 1 else out_dir / f"seed{seed}"
        rows.extend(run_lifecycle(config, seed, out_dir=seed_dir).rows)
    write_rows(rows, out_dir / "episodes.csv")
    return EXIT_OK if all(row.within_budget for row in rows) else EXIT_OVER_BUDGET


def cmd_bench(args) -> int:
    config = _lifecycle_config(args)
    out_dir = Path(args.out_dir)
    settings.create_directories(out_dir)
    bench = bench_amortization(config, out_dir=out_dir / "runs")
    write_rows(bench.rows, out_dir / "bench.csv")
    bench.comparison.to_csv(out_dir / "comparison.csv", index=False, lineterminator="\n")
    bench.long_table.to_csv(out_dir / "long.csv", index=False, lineterminator="\n")
    logger.info(f"摊销比较：{int(bench.comparison['holds'].sum())}/{len(bench.comparison)} 个种子成立")
    return EXIT_OK if all(row.within_budget for row in bench.rows) else EXIT_OVER_BUDGET


_SEED_IGNORED = "统一接受的种子；本命令是确定性的，结果与种子无关"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="analogy", description=settings.DESCRIPTION)
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="日志级别（默认读取 ANALOGY_LOG_LEVEL）")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="生成内置领域")
    p.add_argument("--kind", required=True, help="door-key-grid / email-password / two-room / random / ...")
    p.add_argument("--param", action="append", default=[], help="生成器参数 key=value（value 按 JSON 解析）")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="输出的 .mdp 文件")
    p.add_argument("--map-out", help="同时写出植入映射（若有）")
    p.add_argument("--abstract-out", help="同时写出抽象MDP（若有）")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("solve", help="值迭代求解，输出值与贪心策略")
    p.add_argument("mdp")
    p.add_argument("--tolerance", type=float, default=settings.TOLERANCE)
    p.add_argument("--max-sweeps", type=int, default=settings.MAX_SWEEPS)
    p.add_argument("--seed", type=int, default=0, help=_SEED_IGNORED)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("check-hom", help="检查同态映射并输出证书")
    p.add_argument("ground")
    p.add_argument("abstract")
    p.add_argument("map")
    p.add_argument("--tol", type=float, default=settings.STRICTNESS_TOL)
    p.add_argument("--seed", type=int, default=0, help=_SEED_IGNORED)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_check_hom)

    p = sub.add_parser("find-analogy", help="搜索目标到源模块的（部分）同态")
    p.add_argument("target")
    p.add_argument("source")
    p.add_argument("--hints", help="提示文件（f / g 行）")
    p.add_argument("--mode", choices=[MODE_STRICT, MODE_PARTIAL], default=MODE_STRICT)
    p.add_argument("--max-expansions", type=int, default=settings.SEARCH_EXPANSIONS)
    p.add_argument("--penalty", type=float, default=settings.PARTIAL_PENALTY)
    p.add_argument("--occupancy", action="store_true", help="按源策略占用度量加权覆盖率")
    p.add_argument("--instance-id", default="instance")
    p.add_argument("--seed", type=int, default=0, help=_SEED_IGNORED)
    p.add_argument("--out", help="找到的映射文件")
    p.add_argument("--csv", help="结果CSV文件")
    p.set_defaults(handler=cmd_find_analogy)

    p = sub.add_parser("transfer", help="把抽象最优策略提升到具体MDP并评估")
    p.add_argument("ground")
    p.add_argument("abstract")
    p.add_argument("map")
    p.add_argument("--tolerance", type=float, default=settings.TOLERANCE)
    p.add_argument("--strict", action="store_true", help="可达 gap 直接报错")
    p.add_argument("--seed", type=int, default=0, help=_SEED_IGNORED)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_transfer)

    p = sub.add_parser("compose", help="按JSON组装规格组装构念")
    p.add_argument("spec", help="JSON：instances / gluings / bindings / construal_id / precedence")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0, help=_SEED_IGNORED)
    p.set_defaults(handler=cmd_compose)

    for name, handler, help_text in (("lifecycle", cmd_lifecycle, "在门族课程上运行生命周期"),
                                     ("bench-amortization", cmd_bench, "比较有无模块库更新的累计成本")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="LifecycleConfig 的JSON文件")
        p.add_argument("--episodes", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--budget", type=int, help=f"C_max（默认 {settings.DEFAULT_BUDGET}，可由 ANALOGY_BUDGET 设置）")
        p.add_argument("--variant", choices=["repeat", "varied"])
        p.add_argument("--no-update", action="store_true", help="关闭模块库更新")
        p.add_argument("--out-dir", default=str(settings.OUTPUT_DIR / name))
        if name == "bench-amortization":
            p.add_argument("--seeds", type=int, nargs="+")
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("缺少子命令")
    except UsageError as e:
        sys.stderr.write(f"用法错误: {e}\n")
        return EXIT_USAGE

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format=settings.LOG_FORMAT, stream=sys.stderr)
    try:
        return args.handler(args)
    except (UsageError, InvalidBudgetError, DomainParameterError, ValidationError) as e:
        logger.error(f"用法错误: {e}")
        return EXIT_USAGE
    except (ParseError, MdpValidationError) as e:
        logger.error(f"解析失败: {e}")
        return EXIT_PARSE
    except AnalogyError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception(f"内部错误: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
