"""
度量空间构造与查询
平面坐标 → 稠密欧氏距离矩阵；显式矩阵校验；闭球查询
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from app.core.config import settings
from app.core.exceptions import InstanceFormatError, InvalidParameterError
from app.models.domain import MetricSpace


def build_metric(points: Sequence[Sequence[float]] | np.ndarray) -> MetricSpace:
    """由平面坐标构造欧氏度量，完整距离矩阵一次性物化"""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != 2:
        raise InvalidParameterError("至少需要一个二维坐标点", {"shape": list(pts.shape)})
    if not np.all(np.isfinite(pts)):
        bad = np.argwhere(~np.isfinite(pts))[:, 0].tolist()
        raise InvalidParameterError("坐标包含非有限值", {"rows": sorted(set(bad))})
    # cdist 对 (i,j) 与 (j,i) 的计算逐位一致，对角线严格为 0
    distances = cdist(pts, pts)
    return MetricSpace(kind="euclidean-2d", distances=distances, points=pts.copy())


def validate_metric(distances: np.ndarray) -> None:
    """校验矩阵是度量：方阵、有限、非负、对角为零、对称、三角不等式"""
    diagnostics: List[Dict[str, Any]] = []
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise InstanceFormatError("距离矩阵必须是非空方阵", [{"loc": ["metric", "distances"], "msg": f"shape={list(d.shape)}"}])
    if not np.all(np.isfinite(d)):
        diagnostics.append({"loc": ["metric", "distances"], "msg": "包含非有限值"})
    elif np.any(d < 0):
        i, j = np.argwhere(d < 0)[0].tolist()
        diagnostics.append({"loc": ["metric", "distances", i, j], "msg": "距离为负"})
    if np.any(np.diag(d) != 0):
        i = int(np.flatnonzero(np.diag(d) != 0)[0])
        diagnostics.append({"loc": ["metric", "distances", i, i], "msg": "d(v,v) 必须为 0"})
    asym = np.argwhere(d != d.T)
    if asym.size:
        i, j = asym[0].tolist()
        diagnostics.append({"loc": ["metric", "distances", i, j], "msg": f"不对称: d({i},{j}) ≠ d({j},{i})"})
    if diagnostics:
        raise InstanceFormatError("距离矩阵不是合法度量", diagnostics)

    violation = _find_triangle_violation(d)
    if violation is not None:
        u, v, w = violation
        raise InstanceFormatError(
            "距离矩阵违反三角不等式",
            [{"loc": ["metric", "distances", u, w], "msg": f"d({u},{w}) > d({u},{v}) + d({v},{w})"}],
        )


def _find_triangle_violation(d: np.ndarray) -> Optional[tuple[int, int, int]]:
    n = d.shape[0]
    tol = settings.TRIANGLE_TOLERANCE * max(1.0, float(d.max(initial=0.0)))
    if n <= settings.TRIANGLE_EXHAUSTIVE_MAX_N:
        # 对每个中间点 v 检查 d(u,w) ≤ d(u,v) + d(v,w)
        for v in range(n):
            bad = d > d[:, v][:, None] + d[v, :][None, :] + tol
            if bad.any():
                u, w = np.argwhere(bad)[0].tolist()
                return u, v, w
        return None
    rng = np.random.default_rng(0)
    u, v, w = rng.integers(0, n, size=(3, settings.TRIANGLE_SAMPLE_SIZE))
    bad = d[u, w] > d[u, v] + d[v, w] + tol
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        return int(u[k]), int(v[k]), int(w[k])
    return None


def metric_from_matrix(distances: Sequence[Sequence[float]] | np.ndarray) -> MetricSpace:
    """由显式距离矩阵构造度量（先校验）"""
    d = np.array(distances, dtype=float)
    validate_metric(d)
    return MetricSpace(kind="matrix", distances=d)


def ball(m: MetricSpace, center: int, delta: float) -> np.ndarray:
    """闭球 B(center, δ) = {u : d(center,u) ≤ δ}，返回升序下标"""
    if not 0 <= center < m.size:
        raise InvalidParameterError("中心下标越界", {"center": center, "n": m.size})
    if not delta >= 0:
        raise InvalidParameterError("半径 δ 必须非负", {"delta": delta})
    return np.flatnonzero(m.distances[center] <= delta)


def ball_sizes(m: MetricSpace, delta: float) -> np.ndarray:
    """所有位置的 |B(v, δ)|"""
    if not delta >= 0:
        raise InvalidParameterError("半径 δ 必须非负", {"delta": delta})
    return (m.distances <= delta).sum(axis=1)


def diameter(m: MetricSpace, subset: Optional[Iterable[int]] = None) -> float:
    """子集内最大两两距离；子集为空时为 0"""
    idx = np.arange(m.size) if subset is None else np.fromiter(subset, dtype=int)
    if idx.size == 0:
        return 0.0
    return float(m.distances[np.ix_(idx, idx)].max())
