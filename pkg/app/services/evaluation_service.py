"""
评估服务
成本核算（真实客户数）、容量可行性检查、归一化成本、理论上界计算器与扫描结果汇总
"""

import math
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import InvalidParameterError
from app.models.domain import Instance, Solution
from app.schemas.bench_schemas import ResultRow, SummaryRow
from app.schemas.params_schemas import PrivacyParams
from app.schemas.report_schemas import BoundReport, CostBreakdown, FeasibilityReport
from app.services.solver_service import connected_load, optimal_assignment

_log = logger.bind(name="app.services.evaluation_service")


def _check_solution(inst: Instance, sol: Solution) -> np.ndarray:
    h = sol.assignment
    if h.shape != (inst.n,):
        raise InvalidParameterError("连接函数长度与位置数不一致", {"n": inst.n, "assignment": list(h.shape)})
    image = np.unique(h)
    missing = [int(s) for s in image if int(s) not in sol.capacities]
    if missing:
        raise InvalidParameterError("连接函数指向了未开放的设施", {"facilities": missing[:20]})
    return h


def total_cost(inst: Instance, sol: Solution) -> CostBreakdown:
    """Σ_{s∈S} k_s f_s + Σ_v b_v d(v, h(v))，始终使用真实客户数 b"""
    h = _check_solution(inst, sol)
    f = inst.facility_costs
    # 按设施下标累加，结果与容量字典的插入顺序无关
    facility_cost = float(sum(k * f[s] for s, k in sorted(sol.capacities.items())))
    connection_cost = float(np.dot(inst.clients.astype(float), inst.distances[np.arange(inst.n), h]))
    return CostBreakdown(
        facility_cost=facility_cost,
        connection_cost=connection_cost,
        total=facility_cost + connection_cost,
    )


def check_capacities(inst: Instance, sol: Solution) -> FeasibilityReport:
    """逐个设施比较真实连接负载 Σ_{u∈L_v} b_u 与容量 k_v"""
    h = _check_solution(inst, sol)
    loads = connected_load(h, inst.clients, inst.n)
    failed: List[int] = []
    worst = 0.0
    for v, k in sorted(sol.capacities.items()):
        over = float(loads[v]) - k
        if over > 0:
            failed.append(v)
            worst = max(worst, over)
    if failed:
        _log.debug(f"🚨 容量不足: 算法={sol.algorithm}, 超载设施={len(failed)}, 最大超载={worst:.3f}")
    return FeasibilityReport(failed_facilities=failed, any_failure=bool(failed), worst_overload=worst)


def normalized_cost(cost: float, opt: float) -> float:
    if not opt > 0:
        raise InvalidParameterError("归一化基准 OPT 必须为正", {"opt": opt})
    return cost / opt


def _noise_term(n: int, params: PrivacyParams) -> float:
    """(2/ε)·ln(2n/α)"""
    if n < 1:
        raise InvalidParameterError("n 必须 ≥ 1", {"n": n})
    return (2.0 / params.epsilon) * math.log(2.0 * n / params.alpha)


def _check_opt(opt: float) -> None:
    if not (opt >= 0 and math.isfinite(opt)):
        raise InvalidParameterError("OPT 必须是非负有限值", {"opt": opt})


def margin_factor(n: int, params: PrivacyParams) -> float:
    return 1.0 + _noise_term(n, params)


def reconnection_factor(n: int, params: PrivacyParams, gamma: float) -> float:
    if n < 2:
        raise InvalidParameterError("n 必须 ≥ 2（ln n > 0）", {"n": n})
    if not gamma >= 1:
        raise InvalidParameterError("γ 必须 ≥ 1", {"gamma": gamma})
    return 1.0 + _noise_term(n, params) / (gamma * math.log(n))


def bound_margin(n: int, params: PrivacyParams, opt: float) -> float:
    """余量算法（无失败时）的成本上界 (1 + (2/ε)ln(2n/α))·OPT"""
    _check_opt(opt)
    return margin_factor(n, params) * opt


def bound_reconnection(
    n: int,
    params: PrivacyParams,
    gamma: float,
    delta: float,
    b_avg: float,
    opt: float,
) -> Tuple[float, float]:
    """重连算法的成本上界，返回 (乘性项, 加性项)

    乘性项 (1 + (2/ε)ln(2n/α)/(γ ln n))·OPT
    加性项 δ·n·(4·b_avg + (2/ε)ln(2n/α)/(γ ln n))
    """
    _check_opt(opt)
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    if not b_avg >= 0:
        raise InvalidParameterError("b_avg 必须非负", {"b_avg": b_avg})
    factor = reconnection_factor(n, params, gamma)
    additive = delta * n * (4.0 * b_avg + (factor - 1.0))
    return factor * opt, additive


def bound_bernoulli(n: int, params: PrivacyParams, delta: float, b_avg: float, opt: float) -> Tuple[float, float]:
    """伯努利存在模型（允许 b_v = 0）下的上界，返回 (乘性项, 加性项)

    (1 + (2/ε)ln(2n/α)/ln n)·OPT + n·δ·b_avg·((2/ε)ln(2n/α)/ln n + 4)
    """
    _check_opt(opt)
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    if not b_avg >= 0:
        raise InvalidParameterError("b_avg 必须非负", {"b_avg": b_avg})
    ratio = reconnection_factor(n, params, 1.0) - 1.0
    return (1.0 + ratio) * opt, n * delta * b_avg * (ratio + 4.0)


def tight_cost(inst: Instance, assignment: np.ndarray, clients: np.ndarray | None = None) -> float:
    """容量取紧时的成本 Σ_u b_u (f_{h(u)} + d(u, h(u)))"""
    b = inst.clients if clients is None else clients
    per_unit = inst.facility_costs[assignment] + inst.distances[np.arange(inst.n), assignment]
    return float(np.dot(np.asarray(b, dtype=float), per_unit))


def reconnection_overhead(inst: Instance, reconn: Solution, opt: float) -> float:
    """重连带来的额外成本 Σ b_u(f_ĥ(u) + d(u,ĥ(u))) − OPT（容量取紧、不含噪声）"""
    _check_solution(inst, reconn)
    return tight_cost(inst, reconn.assignment) - opt


def unit_facility_sum(inst: Instance, reconn: Solution, delta: float) -> Tuple[float, float]:
    """返回 (Σ_{v∈I} |L̂_v| f_v, OPT₁ + δn)，OPT₁ 为每个位置恰有一个客户时的最优成本"""
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    _check_solution(inst, reconn)
    counts = np.bincount(reconn.assignment, minlength=inst.n)
    lhs = float(sum(counts[v] * inst.facility_costs[v] for v in reconn.capacities))
    opt_one = tight_cost(inst, optimal_assignment(inst), np.ones(inst.n))
    return lhs, opt_one + delta * inst.n


def bound_report(inst: Instance, params: PrivacyParams, gamma: float, delta: float, opt: float) -> BoundReport:
    """汇总一个实例上的各项理论界（乘性项以系数形式给出）"""
    n = inst.n
    _, additive = bound_reconnection(n, params, gamma, delta, inst.b_avg, opt)
    _, additive_bern = bound_bernoulli(n, params, delta, inst.b_avg, opt)
    return BoundReport(
        n=n,
        b_avg=inst.b_avg,
        mult_margin_bound=margin_factor(n, params),
        mult_reconn_bound=reconnection_factor(n, params, gamma),
        additive_reconn_bound=additive,
        mult_bernoulli_bound=reconnection_factor(n, params, 1.0),
        additive_bernoulli_bound=additive_bern,
    )


def _mean_se(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def summarize(rows: Sequence[ResultRow]) -> List[SummaryRow]:
    """按 (sweep_value, algorithm) 分组：均值 ± 标准误、失败率、平均开放设施数"""
    groups: "OrderedDict[Tuple[float, str], List[ResultRow]]" = OrderedDict()
    for row in rows:
        groups.setdefault((row.sweep_value, row.algorithm), []).append(row)

    summary: List[SummaryRow] = []
    for (value, algorithm), members in groups.items():
        norm = [r.normalized_cost for r in members if r.normalized_cost is not None]
        mean_norm, se_norm = _mean_se(norm)
        mean_total, se_total = _mean_se([r.total_cost for r in members])
        summary.append(
            SummaryRow(
                sweep_value=value,
                algorithm=algorithm,
                trials=len(members),
                mean_normalized_cost=mean_norm,
                se_normalized_cost=se_norm,
                mean_total_cost=mean_total,
                se_total_cost=se_total,
                failure_rate=sum(r.failed for r in members) / len(members),
                mean_open_facilities=float(np.mean([r.n_open_facilities for r in members])),
            )
        )
    return summary


def summary_by_algorithm(summary: Sequence[SummaryRow]) -> Dict[str, List[SummaryRow]]:
    """按算法拆分汇总行，保持扫描值顺序"""
    out: Dict[str, List[SummaryRow]] = {}
    for row in summary:
        out.setdefault(row.algorithm, []).append(row)
    return out
