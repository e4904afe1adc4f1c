"""
领域模型定义
实例（V, d, f, b）、度量空间、解、噪声计数、冲突图与独立集
构造后全部只读，可在并行进程间安全共享
"""

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import networkx as nx
import numpy as np

MetricKind = Literal["euclidean-2d", "matrix"]
AlgorithmName = Literal["optimal", "margin", "reconnection"]


def _frozen(arr: np.ndarray) -> np.ndarray:
    """只读副本，调用方的数组不受影响"""
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MetricSpace:
    """度量空间：稠密 n×n 距离矩阵；平面实例同时保存坐标"""
    kind: MetricKind
    distances: np.ndarray
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "distances", _frozen(self.distances))
        if self.points is not None:
            object.__setattr__(self, "points", _frozen(self.points))

    @property
    def size(self) -> int:
        return int(self.distances.shape[0])


@dataclass(frozen=True)
class Instance:
    """FL-Linear 实例：度量、单位容量设施成本 f、每个位置的客户数 b"""
    metric: MetricSpace
    facility_costs: np.ndarray
    clients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "facility_costs", _frozen(self.facility_costs))
        object.__setattr__(self, "clients", _frozen(self.clients))

    @property
    def n(self) -> int:
        return self.metric.size

    @property
    def distances(self) -> np.ndarray:
        return self.metric.distances

    @property
    def b_avg(self) -> float:
        return float(self.clients.mean()) if self.n else 0.0


@dataclass(frozen=True)
class NoisyCounts:
    """每个位置上报的加噪客户数 b′ 及所用的 ε"""
    values: np.ndarray
    epsilon_used: float

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class FacilityTrace:
    """单个开放设施的求解记录：|L_v|、噪声负载 N_v、余量 m_v"""
    facility: int
    connected: int
    noisy_load: float
    margin: float
    clamped: bool = False


@dataclass(frozen=True)
class Solution:
    """解：连接函数 h、开放设施容量 k，以及可选的求解轨迹"""
    algorithm: AlgorithmName
    assignment: np.ndarray
    capacities: Dict[int, float]
    trace: Optional[List[FacilityTrace]] = None
    noisy: Optional[NoisyCounts] = None
    marked: Optional[List[int]] = None
    independent_set: Optional[List[int]] = None
    conflict_edges: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "assignment", _frozen(self.assignment))

    @property
    def open_facilities(self) -> List[int]:
        return sorted(self.capacities)

    @property
    def clamp_events(self) -> int:
        return sum(1 for t in self.trace or [] if t.clamped)


@dataclass(frozen=True)
class ConflictGraph:
    """冲突图：标记位置之间距离 ≤ 2δ 的点对连边"""
    graph: nx.Graph
    delta: float

    @property
    def nodes(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    def neighbors(self, v: int):
        return self.graph.neighbors(v)


@dataclass(frozen=True)
class IndependentSetResult:
    """贪心极大独立集：chosen 按选取顺序排列"""
    chosen: List[int]
    order: List[int] = field(default_factory=list)
