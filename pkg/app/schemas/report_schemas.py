"""
评估报告相关的Pydantic模型
成本拆分、容量可行性、理论界、密度检查
"""

from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class CostBreakdown(BaseModel):
    """成本拆分：设施成本 Σ k_s f_s + 连接成本 Σ b_v d(v,h(v))"""
    facility_cost: float = Field(..., description="设施成本")
    connection_cost: float = Field(..., description="连接成本")
    total: float = Field(..., description="总成本")


class FeasibilityReport(BaseModel):
    """容量可行性：真实连接负载是否超过容量"""
    failed_facilities: List[int] = Field(default_factory=list, description="超载设施")
    any_failure: bool = Field(default=False, description="是否存在超载")
    worst_overload: float = Field(default=0.0, description="最大超载量（无超载时为 0）")

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.any_failure != bool(self.failed_facilities):
            raise ValueError("any_failure 必须与 failed_facilities 是否为空一致")
        return self


class BoundReport(BaseModel):
    """理论上界（乘性系数与加性项）"""
    n: int = Field(..., description="位置数")
    b_avg: float = Field(..., description="平均客户数")
    mult_margin_bound: float = Field(..., description="余量算法的乘性系数")
    mult_reconn_bound: float = Field(..., description="重连算法的乘性系数")
    additive_reconn_bound: float = Field(..., description="重连算法的加性项")
    mult_bernoulli_bound: Optional[float] = Field(default=None, description="伯努利存在模型下的乘性系数")
    additive_bernoulli_bound: Optional[float] = Field(default=None, description="伯努利存在模型下的加性项")


class DensityReport(BaseModel):
    """密度前提检查：|B(v,δ)| ≥ γ² ln² n"""
    delta: float = Field(..., description="球半径 δ")
    gamma: float = Field(..., description="缩放参数 γ")
    threshold: float = Field(..., description="γ² ln² n")
    ball_sizes: List[int] = Field(..., description="每个位置的 |B(v,δ)|")
    holds: List[bool] = Field(..., description="每个位置是否满足前提")
    fraction: float = Field(..., description="满足前提的位置比例")

    @property
    def all_hold(self) -> bool:
        return all(self.holds)
