#!/usr/bin/env python3
"""
生命周期运行器
每个回合依次执行 构念 -> 求解 -> 评估 -> （失败时重新构念）-> 记录 -> 更新模块库，
并输出逐回合的成本与效果；bench_amortization 在同样的种子上比较有无模块库更新。
"""

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config import settings
from src.analogy.search import MODE_PARTIAL, SearchBudget
from src.composition.construal import CostLedger
from src.composition.objective import ObjectiveReport, evaluate_objective
from src.domains.catalog import door_curriculum
from src.library.inference import SolveOutcome, construe, solve
from src.library.modules import EpisodeRecord, Library
from src.library.storage import save_library
from src.library.update import update_library
from src.mdp_core.mdp import GroundMdp
from src.mdp_core.solvers import optimal_values

logger = logging.getLogger(__name__)

ARM_UPDATE = "library"
ARM_FROZEN = "no-update"


class LifecycleConfig(BaseModel):
    """课程与各阶段参数（可从JSON文件读入）"""
    model_config = ConfigDict(extra="forbid")

    episodes: int = Field(default=10, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [1])
    variant: Literal["repeat", "varied"] = "repeat"
    discount: float = Field(default=0.95, ge=0.0, lt=1.0)
    update_library: bool = True
    budget: int = Field(default=settings.DEFAULT_BUDGET, ge=1)
    search_expansions: int = Field(default=settings.SEARCH_EXPANSIONS, ge=1)
    strict_probe: int = Field(default=settings.STRICT_PROBE, ge=0)
    partial_penalty: float = Field(default=settings.PARTIAL_PENALTY, ge=0.0)
    max_modules: int = Field(default=3, ge=1)
    retrieval_k: int = Field(default=settings.RETRIEVAL_K, ge=1)
    min_coverage_gain: float = Field(default=settings.MIN_COVERAGE_GAIN, ge=0.0, le=1.0)
    extraction_threshold: int = Field(default=settings.EXTRACTION_THRESHOLD, ge=2)
    discard_ratio: float = Field(default=settings.DISCARD_RATIO, gt=0.0, le=1.0)
    min_uses: int = Field(default=settings.MIN_USES, ge=1)
    fragment_cap: int = Field(default=settings.FRAGMENT_CAP, ge=2)
    max_fragments: int = Field(default=settings.MAX_FRAGMENTS, ge=1)
    tolerance: float = Field(default=settings.TOLERANCE, gt=0.0)
    failure_gap: float = Field(default=1e-6, ge=0.0)
    max_reconstrue: int = Field(default=2, ge=0, le=2)

    def search_budget(self) -> SearchBudget:
        return SearchBudget(max_node_expansions=self.search_expansions, mode=MODE_PARTIAL,
                            partial_penalty=self.partial_penalty, strict_probe=self.strict_probe)

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "LifecycleConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class EpisodeRow:
    """逐回合结果（CSV的一行）"""
    arm: str
    seed: int
    episode: int
    task_id: str
    solve_cost: int
    construal_cost: int
    budget: int
    within_budget: bool
    coverage: float
    optimality_gap: float
    expected_return: float
    modules_used: int
    library_size: int
    reconstrues: int
    no_analogy: bool

    @property
    def total_cost(self) -> int:
        return self.solve_cost + self.construal_cost


ROW_FIELDS = [f.name for f in fields(EpisodeRow)]


def rows_to_csv(rows: Sequence[EpisodeRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        values = asdict(row)
        writer.writerow([repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v
                         for v in (values[name] for name in ROW_FIELDS)])
    return buffer.getvalue()


def write_rows(rows: Sequence[EpisodeRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    return path


@dataclass
class LifecycleResult:
    rows: List[EpisodeRow]
    library: Library
    history: List[EpisodeRecord] = field(default_factory=list)

    @property
    def over_budget(self) -> bool:
        return any(not row.within_budget for row in self.rows)


def run_episode(task: GroundMdp, library: Library, config: LifecycleConfig):
    """
    单个回合：构念、求解、评估；最优差距超过 failure_gap 时加倍搜索预算重新构念

    Returns:
        (EpisodeRecord, ObjectiveReport, 重新构念次数)；成本为所有尝试之和，结果取差距最小的一次
    """
    optimum = optimal_values(task, config.tolerance).values
    budget = config.search_budget()
    spent_solve = spent_construal = 0
    best = None
    attempts = 0
    while True:
        construal, ledger = construe(library, task, budget, config.max_modules, config.retrieval_k,
                                     config.min_coverage_gain, config.budget)
        outcome: SolveOutcome = solve(construal, library, config.tolerance, ledger)
        report: ObjectiveReport = evaluate_objective(task, construal, outcome.policy, outcome.ledger,
                                                     config.tolerance, construal_values=outcome.values,
                                                     optimum=optimum)
        spent_solve += report.ledger.solve_cost
        spent_construal += report.ledger.construal_cost
        if best is None or report.optimality_gap < best[2].optimality_gap:
            best = (construal, outcome, report)
        failed = report.optimality_gap > config.failure_gap and not construal.no_analogy
        over = spent_solve + spent_construal > config.budget
        if not failed or over or attempts >= config.max_reconstrue:
            break
        attempts += 1
        budget = budget.scaled(2)
        logger.warning(f"{task.mdp_id}: 最优差距 {report.optimality_gap:.3e}，第 {attempts} 次重新构念")

    construal, outcome, report = best
    total = CostLedger(spent_solve, spent_construal, config.budget)
    record = EpisodeRecord(task.mdp_id, task, construal, outcome.policy,
                           dict(construal.instance_bindings), total)
    return record, report, attempts


def run_lifecycle(config: LifecycleConfig,
                  seed: int,
                  update_enabled: Optional[bool] = None,
                  out_dir: Optional[Union[str, Path]] = None,
                  library: Optional[Library] = None) -> LifecycleResult:
    """
    在门族课程上运行完整生命周期

    Args:
        update_enabled: 覆盖 config.update_library
        out_dir: 给出时写出 episodes.csv 与每个回合后的模块库快照
    """
    update_enabled = config.update_library if update_enabled is None else update_enabled
    arm = ARM_UPDATE if update_enabled else ARM_FROZEN
    library = library.copy() if library is not None else Library()
    tasks = door_curriculum(config.episodes, seed, config.variant, config.discount)
    history: List[EpisodeRecord] = []
    rows: List[EpisodeRow] = []

    for episode, task in enumerate(tasks, start=1):
        record, report, attempts = run_episode(task, library, config)
        history.append(record)
        if not record.ledger.within_budget:
            logger.warning(f"[{arm}] seed={seed} 回合 {episode}: 成本 {record.ledger.total} 超过预算 {config.budget}")
        if update_enabled:
            library = update_library(library, history, config.extraction_threshold, config.discard_ratio,
                                     config.min_uses, config.fragment_cap, config.max_fragments,
                                     config.search_expansions)
        rows.append(EpisodeRow(
            arm=arm,
            seed=seed,
            episode=episode,
            task_id=task.mdp_id,
            solve_cost=record.ledger.solve_cost,
            construal_cost=record.ledger.construal_cost,
            budget=config.budget,
            within_budget=record.ledger.within_budget,
            coverage=float(record.construal.coverage),
            optimality_gap=float(report.optimality_gap),
            expected_return=float(report.ground_expected_return),
            modules_used=len(record.maps),
            library_size=len(library),
            reconstrues=attempts,
            no_analogy=record.construal.no_analogy,
        ))
        if out_dir is not None:
            save_library(library, Path(out_dir) / "library" / f"ep{episode:02d}")
        logger.info(f"[{arm}] seed={seed} 回合 {episode}: C_s={record.ledger.solve_cost} "
                    f"C_c={record.ledger.construal_cost} 覆盖={record.construal.coverage:.2f} 库={len(library)}")

    if out_dir is not None:
        write_rows(rows, Path(out_dir) / "episodes.csv")
    return LifecycleResult(rows, library, history)


@dataclass
class BenchResult:
    rows: List[EpisodeRow]
    comparison: pd.DataFrame
    long_table: pd.DataFrame

    @property
    def amortized(self) -> bool:
        return bool(self.comparison["holds"].all())


def bench_amortization(config: LifecycleConfig,
                       seeds: Optional[Sequence[int]] = None,
                       out_dir: Optional[Union[str, Path]] = None) -> BenchResult:
    """
    同样的种子分别在有、无模块库更新的条件下运行

    comparison 每个种子一行，比较第2回合起的累计 C_s + C_c；
    long_table 是按 (arm, seed, episode, metric, value) 展开的长表。
    """
    seeds = list(seeds if seeds is not None else config.seeds)
    rows: List[EpisodeRow] = []
    for seed in seeds:
        for enabled in (True, False):
            arm_dir = None if out_dir is None else Path(out_dir) / f"seed{seed}" / (ARM_UPDATE if enabled else ARM_FROZEN)
            rows.extend(run_lifecycle(config, seed, enabled, arm_dir).rows)

    frame = pd.DataFrame([asdict(row) for row in rows], columns=ROW_FIELDS)
    frame["total_cost"] = frame["solve_cost"] + frame["construal_cost"]
    later = frame[frame["episode"] >= 2]
    cumulative = later.groupby(["seed", "arm"])["total_cost"].sum().unstack("arm")
    comparison = pd.DataFrame({
        "seed": cumulative.index.astype(int),
        "cumulative_library": cumulative[ARM_UPDATE].to_numpy(),
        "cumulative_no_update": cumulative[ARM_FROZEN].to_numpy(),
    })
    comparison["holds"] = comparison["cumulative_library"] <= comparison["cumulative_no_update"]
    long_table = frame.melt(
        id_vars=["arm", "seed", "episode", "task_id"],
        value_vars=["solve_cost", "construal_cost", "total_cost", "coverage", "optimality_gap"],
        var_name="metric",
        value_name="value",
    ).sort_values(["arm", "seed", "metric", "episode"], kind="mergesort").reset_index(drop=True)
    for seed, holds in zip(comparison["seed"], comparison["holds"]):
        if not holds:
            logger.warning(f"seed={seed}: 启用模块库更新后累计成本没有降低")
    return BenchResult(rows, comparison, long_table)
