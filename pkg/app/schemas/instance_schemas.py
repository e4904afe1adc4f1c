"""
实例与解的文档模型
实例文件格式（version 1）以及求解结果导出格式
"""

from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, NonNegativeInt, model_validator

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
NonNegFloat = Annotated[float, Field(ge=0, allow_inf_nan=False)]


class EuclideanMetricDoc(BaseModel):
    """平面欧氏度量：只存坐标，加载时重建距离矩阵"""
    kind: Literal["euclidean-2d"] = "euclidean-2d"
    points: List[Tuple[FiniteFloat, FiniteFloat]] = Field(..., min_length=1, description="平面坐标")

    @property
    def size(self) -> int:
        return len(self.points)


class MatrixMetricDoc(BaseModel):
    """显式距离矩阵"""
    kind: Literal["matrix"] = "matrix"
    distances: List[List[NonNegFloat]] = Field(..., min_length=1, description="n×n 距离矩阵")

    @property
    def size(self) -> int:
        return len(self.distances)

    @model_validator(mode="after")
    def _check_square(self):
        n = len(self.distances)
        for i, row in enumerate(self.distances):
            if len(row) != n:
                raise ValueError(f"第 {i} 行长度为 {len(row)}，期望 {n}")
        return self


MetricDoc = Annotated[Union[EuclideanMetricDoc, MatrixMetricDoc], Field(discriminator="kind")]


class InstanceDocument(BaseModel):
    """实例文件"""
    version: Literal[1] = Field(default=1, description="格式版本")
    metric: MetricDoc
    facility_costs: List[NonNegFloat] = Field(..., description="单位容量设施成本 f")
    clients: List[NonNegativeInt] = Field(..., description="每个位置的客户数 b")

    @model_validator(mode="after")
    def _check_lengths(self):
        n = self.metric.size
        if len(self.facility_costs) != n:
            raise ValueError(f"facility_costs 长度 {len(self.facility_costs)} 与位置数 {n} 不一致")
        if len(self.clients) != n:
            raise ValueError(f"clients 长度 {len(self.clients)} 与位置数 {n} 不一致")
        return self


class FacilityTraceDoc(BaseModel):
    """单个设施的求解记录"""
    facility: int = Field(..., description="设施下标")
    connected: int = Field(..., description="|L_v|")
    noisy_load: float = Field(..., description="N_v")
    margin: float = Field(..., description="m_v")
    clamped: bool = Field(default=False, description="容量是否被截断到 0")


class SolutionDocument(BaseModel):
    """求解结果导出（调试与跨实现比对）"""
    algorithm: str = Field(..., description="算法名称")
    assignment: List[int] = Field(..., description="连接函数 h(0..n-1)")
    capacities: Dict[str, float] = Field(..., description="开放设施容量 {v: k_v}")
    trace: Optional[List[FacilityTraceDoc]] = Field(default=None, description="求解轨迹")
    independent_set: Optional[List[int]] = Field(default=None, description="重连算法选出的独立集（选取顺序）")
