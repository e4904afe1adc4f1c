"""
求解服务
非隐私最优算法、拉普拉斯机制+余量算法、重连算法，以及小规模暴力枚举验证器

平局规则：argmin 一律按 (值, 下标) 字典序取最小；计算 h(v) 时自连接在平局中优先，
保证 h(v) 指向的位置一定自连接（即属于标记集合）。
"""

from typing import Dict, Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.exceptions import InvalidParameterError, OracleLimitError, SolverInvariantError
from app.models.domain import (
    ConflictGraph,
    FacilityTrace,
    IndependentSetResult,
    Instance,
    NoisyCounts,
    Solution,
)
from app.schemas.params_schemas import PrivacyParams, SolveParams
from app.schemas.report_schemas import CostBreakdown
from app.services.privacy_service import margin, perturb_counts

_log = logger.bind(name="app.services.solver_service")

# optimal_assignment 分块处理的行数，避免大实例一次性物化 n×n 的成本矩阵副本
_ROW_BLOCK = 1024


def optimal_assignment(inst: Instance) -> np.ndarray:
    """h(v) = argmin_u f_u + d(u,v)"""
    n = inst.n
    f = inst.facility_costs
    d = inst.distances
    h = np.empty(n, dtype=np.int64)
    for start in range(0, n, _ROW_BLOCK):
        rows = np.arange(start, min(start + _ROW_BLOCK, n))
        cost = d[rows] + f[None, :]
        best = np.argmin(cost, axis=1)
        best_val = cost[np.arange(rows.size), best]
        # d(v,v) = 0，所以 cost[v,v] 与 f_v 逐位相等
        self_wins = f[rows] <= best_val
        h[rows] = np.where(self_wins, rows, best)

    # 浮点舍入可能让目标位置本身指向别处，沿指针压缩到不动点
    for _ in range(n):
        nxt = h[h]
        if np.array_equal(nxt, h):
            break
        h = nxt
    else:
        raise SolverInvariantError("连接函数未收敛到自连接的设施")
    return h


def marked_set(assignment: np.ndarray) -> np.ndarray:
    """标记集合 {v : h(v) = v}，升序"""
    return np.flatnonzero(assignment == np.arange(assignment.shape[0]))


def connected_load(assignment: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    """每个设施的连接量 Σ_{u∈L_v} w_u"""
    return np.bincount(assignment, weights=np.asarray(weights, dtype=float), minlength=n)


def _connected_count(assignment: np.ndarray, n: int) -> np.ndarray:
    counts = np.bincount(assignment, minlength=n)
    if int(counts.sum()) != n:
        raise SolverInvariantError("Σ|L_v| ≠ n", {"sum": int(counts.sum()), "n": n})
    return counts


def _check_noise_budget(noisy: NoisyCounts, n: int) -> None:
    if noisy.values.shape != (n,):
        raise SolverInvariantError("噪声抽样次数与位置数不一致", {"draws": list(noisy.values.shape), "n": n})


def solve_optimal(inst: Instance, assignment: Optional[np.ndarray] = None) -> Solution:
    """非隐私最优算法：容量恰好等于连接的真实客户数"""
    h = optimal_assignment(inst) if assignment is None else assignment
    counts = _connected_count(h, inst.n)
    loads = connected_load(h, inst.clients, inst.n)
    marked = marked_set(h)
    capacities = {int(v): float(loads[v]) for v in marked}
    trace = [FacilityTrace(facility=int(v), connected=int(counts[v]), noisy_load=float(loads[v]), margin=0.0) for v in marked]
    _log.debug(f"🏭 最优解: n={inst.n}, 开放设施={len(capacities)}")
    return Solution(algorithm="optimal", assignment=h, capacities=capacities, trace=trace, marked=marked.tolist())


def brute_force_oracle(inst: Instance) -> CostBreakdown:
    """枚举全部 n^n 个连接函数（容量取紧），返回精确最优成本；仅用于验证"""
    n = inst.n
    if n > settings.BRUTE_FORCE_MAX_N:
        raise OracleLimitError("暴力枚举仅支持小规模实例", {"n": n, "max_n": settings.BRUTE_FORCE_MAX_N})
    b = inst.clients.astype(float)
    fac = b[:, None] * inst.facility_costs[None, :]
    conn = b[:, None] * inst.distances
    per_choice = fac + conn

    if n == 1:
        best = np.zeros(1, dtype=np.int64)
    else:
        # head[i] 为前 n-1 个位置所有连接组合的成本，i 按 n 进制展开即各位置的选择
        head = per_choice[0]
        for v in range(1, n - 1):
            head = np.add.outer(head, per_choice[v]).ravel()
        best_val, best_idx, best_last = np.inf, -1, -1
        for u in range(n):
            totals = head + per_choice[n - 1, u]
            i = int(np.argmin(totals))
            if totals[i] < best_val:
                best_val, best_idx, best_last = float(totals[i]), i, u
        prefix = np.unravel_index(best_idx, (n,) * (n - 1))
        best = np.array([int(p) for p in prefix] + [best_last], dtype=np.int64)

    rows = np.arange(n)
    facility_cost = float(fac[rows, best].sum())
    connection_cost = float(conn[rows, best].sum())
    return CostBreakdown(facility_cost=facility_cost, connection_cost=connection_cost, total=facility_cost + connection_cost)


def _provision(
    inst: Instance,
    assignment: np.ndarray,
    facilities: Iterable[int],
    noisy: NoisyCounts,
    params: PrivacyParams,
) -> tuple[Dict[int, float], List[FacilityTrace]]:
    """按噪声负载 + 余量为开放设施分配容量，容量截断到 ≥ 0"""
    n = inst.n
    counts = _connected_count(assignment, n)
    noisy_loads = connected_load(assignment, noisy.values, n)
    capacities: Dict[int, float] = {}
    trace: List[FacilityTrace] = []
    for v in facilities:
        v = int(v)
        m = margin(int(counts[v]), params, n)
        raw = float(noisy_loads[v]) + m
        clamped = raw < 0
        capacities[v] = max(0.0, raw)
        trace.append(FacilityTrace(facility=v, connected=int(counts[v]), noisy_load=float(noisy_loads[v]), margin=m, clamped=clamped))
    clamps = sum(t.clamped for t in trace)
    if clamps:
        _log.warning(f"⚠️ {clamps} 个设施的容量被截断到 0")
    return capacities, trace


def solve_ldp_margin(
    inst: Instance,
    params: PrivacyParams,
    rng: np.random.Generator,
    assignment: Optional[np.ndarray] = None,
) -> Solution:
    """ε-LDP 拉普拉斯机制 + 余量：连接函数与最优算法相同，容量 = N′_v + 余量"""
    noisy = perturb_counts(inst.clients, params, rng)
    _check_noise_budget(noisy, inst.n)
    h = optimal_assignment(inst) if assignment is None else assignment
    marked = marked_set(h)
    capacities, trace = _provision(inst, h, marked, noisy, params)
    _log.debug(f"🔐 余量算法: n={inst.n}, 开放设施={len(capacities)}, ε={params.epsilon}")
    return Solution(
        algorithm="margin",
        assignment=h,
        capacities=capacities,
        trace=trace,
        noisy=noisy,
        marked=marked.tolist(),
    )


def build_conflict_graph(inst: Instance, marked: Iterable[int], delta: float) -> ConflictGraph:
    """冲突图：标记位置之间 d(u,v) ≤ 2δ 的点对连边"""
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    idx = np.array(sorted(int(v) for v in marked), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= inst.n):
        raise InvalidParameterError("标记位置下标越界", {"n": inst.n})
    g = nx.Graph()
    g.add_nodes_from(idx.tolist())
    if idx.size > 1:
        sub = inst.distances[np.ix_(idx, idx)]
        iu, ju = np.triu_indices(idx.size, k=1)
        close = sub[iu, ju] <= 2.0 * delta
        g.add_edges_from(zip(idx[iu[close]].tolist(), idx[ju[close]].tolist()))
    return ConflictGraph(graph=g, delta=delta)


def greedy_mis(g: ConflictGraph, f: Sequence[float] | np.ndarray) -> IndependentSetResult:
    """按 (f, 下标) 升序扫描，邻居未被选中即选入，得到极大独立集"""
    nodes = g.nodes
    if not nodes:
        raise InvalidParameterError("冲突图为空")
    order = sorted(nodes, key=lambda v: (float(f[v]), v))
    chosen: List[int] = []
    blocked = set()
    for v in order:
        if v in blocked:
            continue
        chosen.append(v)
        blocked.add(v)
        blocked.update(g.neighbors(v))
    _assert_mis(g, chosen)
    return IndependentSetResult(chosen=chosen, order=order)


def _assert_mis(g: ConflictGraph, chosen: List[int]) -> None:
    picked = set(chosen)
    for v in chosen:
        if any(u in picked for u in g.neighbors(v)):
            raise SolverInvariantError("独立集内部存在边", {"node": v})
    for v in g.nodes:
        if v not in picked and not any(u in picked for u in g.neighbors(v)):
            raise SolverInvariantError("独立集不是极大的", {"node": v})


def reconnect(inst: Instance, independent: Sequence[int], delta: float) -> np.ndarray:
    """重连：球 B(v,δ) 内的位置连到 v（先选中的中心优先），其余连到 argmin_{v∈I} f_v + d(u,v)"""
    if len(independent) == 0:
        raise InvalidParameterError("独立集为空，无法重连")
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    d = inst.distances
    h = np.full(inst.n, -1, dtype=np.int64)
    for v in independent:
        h[(d[v] <= delta) & (h < 0)] = v

    uncovered = np.flatnonzero(h < 0)
    if uncovered.size:
        centers = np.sort(np.asarray(independent, dtype=np.int64))
        cost = d[np.ix_(uncovered, centers)] + inst.facility_costs[centers][None, :]
        h[uncovered] = centers[np.argmin(cost, axis=1)]

    if np.any(h[np.asarray(independent)] != np.asarray(independent)):
        raise SolverInvariantError("独立集中的设施未连接到自身")
    return h


def _exclusive_ball_sizes(inst: Instance, independent: Sequence[int], delta: float) -> Dict[int, int]:
    """按选取顺序统计每个中心球内未被更早中心占用的位置数"""
    claimed = np.zeros(inst.n, dtype=bool)
    sizes: Dict[int, int] = {}
    for v in independent:
        inside = inst.distances[v] <= delta
        sizes[int(v)] = int(np.count_nonzero(inside & ~claimed))
        claimed |= inside
    return sizes


def solve_ldp_reconnection(
    inst: Instance,
    sp: SolveParams,
    rng: np.random.Generator,
    assignment: Optional[np.ndarray] = None,
) -> Solution:
    """ε-LDP 重连算法

    加噪 → 最优连接 → 标记集合 → 2δ 冲突图 → 贪心极大独立集 → 重连 → 容量 = N̂_v + 余量
    """
    params = sp.privacy
    noisy = perturb_counts(inst.clients, params, rng)
    _check_noise_budget(noisy, inst.n)
    h0 = optimal_assignment(inst) if assignment is None else assignment
    marked = marked_set(h0)
    graph = build_conflict_graph(inst, marked, sp.delta)
    mis = greedy_mis(graph, inst.facility_costs)
    h = reconnect(inst, mis.chosen, sp.delta)
    capacities, trace = _provision(inst, h, mis.chosen, noisy, params)

    # 球互不相交时即 |L̂_v| ≥ |B(v,δ)|；度量容差下的边界重叠按选取顺序归属
    exclusive = _exclusive_ball_sizes(inst, mis.chosen, sp.delta)
    for t in trace:
        if t.connected < exclusive[t.facility]:
            raise SolverInvariantError(
                "重连后连接数小于球内位置数",
                {"facility": t.facility, "connected": t.connected, "ball": exclusive[t.facility]},
            )

    _log.debug(
        f"🔁 重连算法: n={inst.n}, 标记={marked.size}, 冲突边={graph.edge_count}, "
        f"开放设施={len(capacities)}, δ={sp.delta}"
    )
    return Solution(
        algorithm="reconnection",
        assignment=h,
        capacities=capacities,
        trace=trace,
        noisy=noisy,
        marked=marked.tolist(),
        independent_set=list(mis.chosen),
        conflict_edges=graph.edge_count,
    )


def solve(
    inst: Instance,
    algorithm: str,
    sp: SolveParams,
    rng: np.random.Generator,
    assignment: Optional[np.ndarray] = None,
) -> Solution:
    """按算法名分发"""
    if algorithm == "optimal":
        return solve_optimal(inst, assignment)
    if algorithm == "margin":
        return solve_ldp_margin(inst, sp.privacy, rng, assignment)
    if algorithm == "reconnection":
        return solve_ldp_reconnection(inst, sp, rng, assignment)
    raise InvalidParameterError(f"未知算法: {algorithm}", {"allowed": ["optimal", "margin", "reconnection"]})
