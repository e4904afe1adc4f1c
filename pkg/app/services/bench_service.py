"""
基准扫描服务
按 (扫描点, 试验) 派生种子、生成实例、在同一实例与同一噪声流上运行各算法、汇总并输出 CSV

确定性约定：
- 种子 = SeedSequence(master_seed, spawn_key=(point, trial)) 的 64 位输出，与执行顺序无关
- 实例流 stream 0，噪声流 stream 1；每个隐私算法都从新建的噪声流开始读，因此看到相同的 b′
- 多进程结果按提交顺序合并，行顺序固定为 (point, trial, algorithm)
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import InvalidParameterError, SolverInvariantError
from app.core.trace import TraceContext, get_run_id, set_run_id
from app.models.domain import Instance, Solution
from app.schemas.bench_schemas import ResultRow, SweepConfig
from app.schemas.params_schemas import ConstantClients, GeneratorConfig, SolveParams
from app.services.evaluation_service import check_capacities, normalized_cost, summarize, total_cost
from app.services.generator_service import STREAM_INSTANCE, STREAM_NOISE, generate, make_rng
from app.services.solver_service import optimal_assignment, solve, solve_optimal

_log = logger.bind(name="app.services.bench_service")

CSV_COLUMNS: Tuple[str, ...] = tuple(ResultRow.model_fields)

# 网格终点的包含容差与取整位数
_GRID_TOLERANCE = 1e-9
_GRID_DECIMALS = 12


def derive_seed(master_seed: int, point: int, trial: int) -> int:
    """由 (master_seed, 扫描点, 试验) 派生 64 位种子"""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(point), int(trial)))
    return int(ss.generate_state(1, np.uint64)[0])


def grid_values(start: float, stop: float, step: float) -> List[float]:
    """start, start+step, …，终点在 1e-9 容差内包含；按下标相乘避免累加误差"""
    if not step > 0:
        raise InvalidParameterError("grid 步长必须为正", {"step": step})
    if stop < start:
        raise InvalidParameterError("grid 需满足 stop ≥ start", {"start": start, "stop": stop})
    count = int(math.floor((stop - start) / step + _GRID_TOLERANCE)) + 1
    return [round(start + i * step, _GRID_DECIMALS) for i in range(count)]


def sweep_points(cfg: SweepConfig) -> List[float]:
    if cfg.values is not None:
        return [float(v) for v in cfg.values]
    start, stop, step = cfg.grid
    if cfg.sweep_kind == "single":
        return [start]
    return grid_values(start, stop, step)


def point_params(cfg: SweepConfig, value: float) -> Tuple[GeneratorConfig, SolveParams]:
    """把扫描值代入生成参数或求解参数"""
    gen, sp = cfg.generator, cfg.solve
    if cfg.sweep_kind == "delta":
        sp = sp.model_copy(update={"delta": value})
    elif cfg.sweep_kind == "epsilon":
        sp = sp.model_copy(update={"privacy": sp.privacy.model_copy(update={"epsilon": value})})
    elif cfg.sweep_kind == "n":
        gen = gen.model_copy(update={"n": int(round(value))})
    elif cfg.sweep_kind == "b_avg":
        gen = gen.model_copy(update={"client_model": ConstantClients(b_avg=int(round(value)))})
    return gen, sp


def _result_row(
    cfg: SweepConfig,
    value: float,
    trial: int,
    seed: int,
    inst: Instance,
    sol: Solution,
    opt: float,
    runtime_ms: Optional[float],
) -> ResultRow:
    cost = total_cost(inst, sol)
    feasibility = check_capacities(inst, sol)
    return ResultRow(
        sweep_kind=cfg.sweep_kind,
        sweep_value=value,
        trial=trial,
        seed=seed,
        algorithm=sol.algorithm,
        realized_n=inst.n,
        total_cost=cost.total,
        facility_cost=cost.facility_cost,
        connection_cost=cost.connection_cost,
        opt_cost=opt,
        normalized_cost=normalized_cost(cost.total, opt) if opt > 0 else None,
        failed=feasibility.any_failure,
        n_open_facilities=len(sol.capacities),
        runtime_ms=runtime_ms if cfg.record_runtime else None,
    )


def run_trial(cfg: SweepConfig, point: int, value: float, trial: int) -> List[ResultRow]:
    """一次试验：生成实例，最优解只算一次，隐私算法共享同一噪声流"""
    gen, sp = point_params(cfg, value)
    seed = derive_seed(cfg.master_seed, point, trial)
    inst = generate(cfg.process, gen.model_copy(update={"seed": seed}), make_rng(seed, STREAM_INSTANCE))

    with TraceContext("solve_optimal", n=inst.n) as span:
        h = optimal_assignment(inst)
        opt_sol = solve_optimal(inst, h)
    opt_runtime = span.duration_ms
    opt = total_cost(inst, opt_sol).total

    rows: List[ResultRow] = []
    shared_noise: Optional[np.ndarray] = None
    for algorithm in cfg.algorithms:
        if algorithm == "optimal":
            rows.append(_result_row(cfg, value, trial, seed, inst, opt_sol, opt, opt_runtime))
            continue
        with TraceContext(f"solve_{algorithm}", n=inst.n) as span:
            sol = solve(inst, algorithm, sp, make_rng(seed, STREAM_NOISE), assignment=h)
        if shared_noise is not None and not np.array_equal(shared_noise, sol.noisy.values):
            raise SolverInvariantError("同一试验内的隐私算法看到了不同的噪声计数", {"point": point, "trial": trial})
        shared_noise = sol.noisy.values
        rows.append(_result_row(cfg, value, trial, seed, inst, sol, opt, span.duration_ms))
    return rows


def _run_task(cfg: SweepConfig, task: Tuple[int, float, int]) -> List[ResultRow]:
    point, value, trial = task
    return run_trial(cfg, point, value, trial)


def run_sweep(cfg: SweepConfig) -> List[ResultRow]:
    """执行扫描，返回按 (point, trial, algorithm) 排序的结果行"""
    run_id = get_run_id() or set_run_id()
    points = sweep_points(cfg)
    tasks = [(p, v, t) for p, v in enumerate(points) for t in range(cfg.trials_per_point)]
    _log.info(
        f"🚀 开始扫描: run_id={run_id}, kind={cfg.sweep_kind}, 扫描点={len(points)}, "
        f"每点试验={cfg.trials_per_point}, 算法={cfg.algorithms}, workers={cfg.workers}"
    )

    with TraceContext("run_sweep", quiet=False, kind=cfg.sweep_kind):
        if cfg.workers > 1 and len(tasks) > 1:
            chunksize = max(1, len(tasks) // (cfg.workers * 4))
            # map 按提交顺序返回结果
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                chunks = list(pool.map(partial(_run_task, cfg), tasks, chunksize=chunksize))
        else:
            chunks = [_run_task(cfg, task) for task in tasks]

    rows = [row for chunk in chunks for row in chunk]
    expected = len(points) * cfg.trials_per_point * len(cfg.algorithms)
    if len(rows) != expected:
        raise SolverInvariantError("结果行数与 扫描点×试验×算法 不一致", {"rows": len(rows), "expected": expected})
    log_summary(rows)
    return rows


def log_summary(rows: Sequence[ResultRow]) -> None:
    for s in summarize(rows):
        _log.info(
            f"📊 {s.algorithm:<12} value={s.sweep_value:g} 归一化成本={s.mean_normalized_cost:.4f}±{s.se_normalized_cost:.4f} "
            f"失败率={s.failure_rate:.3f} 开放设施={s.mean_open_facilities:.1f}"
        )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_csv(rows: Iterable[ResultRow]) -> str:
    """表头 + 每行一条记录；浮点数 17 位有效数字，LF 换行"""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def emit_csv(rows: Iterable[ResultRow], path: str | Path) -> Path:
    """写出 UTF-8 CSV 文件"""
    path = Path(path)
    text = format_csv(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))
    _log.info(f"💾 结果已写入: {path}")
    return path
