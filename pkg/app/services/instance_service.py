"""
实例读写服务
实例文件 ⇄ 领域模型转换、求解结果导出、真实世界点表（id,x,y,clients）加载
"""

import csv
import io
import json
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.core.exceptions import InstanceFormatError, InvalidParameterError
from app.core.metric import build_metric, metric_from_matrix
from app.models.domain import Instance, MetricSpace, Solution
from app.schemas.instance_schemas import (
    EuclideanMetricDoc,
    FacilityTraceDoc,
    InstanceDocument,
    MatrixMetricDoc,
    SolutionDocument,
)

_log = logger.bind(name="app.services.instance_service")

REALWORLD_COLUMNS = ("id", "x", "y", "clients")


def _diagnostics(exc: ValidationError) -> List[Dict[str, Any]]:
    return [{"loc": list(err["loc"]), "msg": err["msg"]} for err in exc.errors()]


def make_instance(
    metric: MetricSpace,
    facility_costs: Sequence[float] | np.ndarray,
    clients: Sequence[int] | np.ndarray,
) -> Instance:
    """组装实例并校验长度、非负性"""
    f = np.array(facility_costs, dtype=float)
    b = np.array(clients, dtype=np.int64)
    n = metric.size
    if f.shape != (n,) or b.shape != (n,):
        raise InvalidParameterError(
            "facility_costs / clients 长度必须等于位置数",
            {"n": n, "facility_costs": list(f.shape), "clients": list(b.shape)},
        )
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise InvalidParameterError("设施成本必须是非负有限值")
    if np.any(b < 0):
        raise InvalidParameterError("客户数必须是非负整数")
    return Instance(metric=metric, facility_costs=f, clients=b)


def instance_from_document(doc: InstanceDocument) -> Instance:
    """文档 → 实例"""
    if isinstance(doc.metric, EuclideanMetricDoc):
        metric = build_metric(doc.metric.points)
    else:
        metric = metric_from_matrix(doc.metric.distances)
    return make_instance(metric, doc.facility_costs, doc.clients)


def instance_to_document(inst: Instance) -> InstanceDocument:
    """实例 → 文档；平面实例只存坐标"""
    if inst.metric.kind == "euclidean-2d" and inst.metric.points is not None:
        metric_doc = EuclideanMetricDoc(points=[tuple(p) for p in inst.metric.points.tolist()])
    else:
        metric_doc = MatrixMetricDoc(distances=inst.metric.distances.tolist())
    return InstanceDocument(
        metric=metric_doc,
        facility_costs=inst.facility_costs.tolist(),
        clients=inst.clients.tolist(),
    )


def load_instance(data: bytes | str) -> Instance:
    """解析实例文件；任何格式问题都转为带字段诊断的 InstanceFormatError"""
    try:
        doc = InstanceDocument.model_validate_json(data)
    except ValidationError as e:
        diagnostics = _diagnostics(e)
        _log.error(f"❌ 实例文件校验失败: {len(diagnostics)} 处错误")
        raise InstanceFormatError("实例文件不合法", diagnostics) from e
    inst = instance_from_document(doc)
    _log.debug(f"📥 实例已加载: n={inst.n}, kind={inst.metric.kind}")
    return inst


def save_instance(inst: Instance) -> bytes:
    """序列化实例；浮点数使用最短可逐位还原的十进制表示"""
    doc = instance_to_document(inst)
    return _dump(doc.model_dump(mode="json"))


def _dump(payload: Dict[str, Any]) -> bytes:
    return (json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def solution_to_document(sol: Solution) -> SolutionDocument:
    trace = None
    if sol.trace is not None:
        trace = [
            FacilityTraceDoc(
                facility=t.facility,
                connected=t.connected,
                noisy_load=t.noisy_load,
                margin=t.margin,
                clamped=t.clamped,
            )
            for t in sol.trace
        ]
    return SolutionDocument(
        algorithm=sol.algorithm,
        assignment=sol.assignment.tolist(),
        capacities={str(v): float(k) for v, k in sorted(sol.capacities.items())},
        trace=trace,
        independent_set=sol.independent_set,
    )


def save_solution(sol: Solution) -> bytes:
    """导出求解结果文档"""
    return _dump(solution_to_document(sol).model_dump(mode="json", exclude_none=True))


def _parse_realworld_rows(text: str) -> List[Tuple[float, float, int]]:
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(c.strip() for c in (reader.fieldnames or ()))
    missing = [c for c in REALWORLD_COLUMNS if c not in header]
    if missing:
        raise InstanceFormatError("点表缺少必需列", [{"loc": ["header"], "msg": f"缺少列: {missing}"}])

    rows: List[Tuple[float, float, int]] = []
    diagnostics: List[Dict[str, Any]] = []
    for line_no, raw in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        try:
            x, y = float(row["x"]), float(row["y"])
            clients = int(row["clients"])
        except (TypeError, ValueError):
            diagnostics.append({"loc": ["row", line_no], "msg": f"无法解析: {raw}"})
            continue
        if not (math.isfinite(x) and math.isfinite(y)) or clients < 0:
            diagnostics.append({"loc": ["row", line_no], "msg": "坐标非有限或客户数为负"})
            continue
        rows.append((x, y, clients))
    if diagnostics:
        raise InstanceFormatError("点表存在格式错误的行", diagnostics)
    if not rows:
        raise InstanceFormatError("点表为空", [{"loc": ["rows"], "msg": "没有数据行"}])
    return rows


def normalize_to_unit_window(points: np.ndarray) -> np.ndarray:
    """保持长宽比、居中地把包围盒缩放进 [0,1]²；退化包围盒全部放到 (0.5, 0.5)"""
    lo = points.min(axis=0)
    extent = points.max(axis=0) - lo
    span = float(extent.max())
    if span == 0.0:
        return np.full_like(points, 0.5)
    offset = (1.0 - extent / span) / 2.0
    return (points - lo) / span + offset


def load_realworld(
    data: bytes | str,
    cost_range: Tuple[float, float] = (0.1, 0.3),
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> Instance:
    """加载真实世界点表：坐标归一化到单位窗口，设施成本按种子均匀采样，客户数原样保留"""
    from app.services.generator_service import make_rng, sample_facility_costs

    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rows = _parse_realworld_rows(text)
    pts = normalize_to_unit_window(np.array([(x, y) for x, y, _ in rows], dtype=float))
    rng = rng or make_rng(seed, 0)
    costs = sample_facility_costs(len(rows), cost_range, rng)
    inst = make_instance(build_metric(pts), costs, [c for _, _, c in rows])
    _log.info(f"🗺️ 真实世界点表已加载: n={inst.n}, b_avg={inst.b_avg:.3f}")
    return inst
