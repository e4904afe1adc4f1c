"""
HTTP 接口相关的Pydantic模型
统一响应包装、实例生成/求解/密度检查请求与求解响应
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from app.models.domain import AlgorithmName
from app.schemas.instance_schemas import InstanceDocument, SolutionDocument
from app.schemas.params_schemas import GeneratorConfig
from app.schemas.report_schemas import CostBreakdown, FeasibilityReport


class ApiResponse(BaseModel):
    """统一响应格式"""
    code: int = Field(default=0, description="业务码，0 表示成功")
    message: str = Field(default="success", description="响应消息")
    data: Optional[Any] = Field(default=None, description="响应数据")


class GenerateRequest(BaseModel):
    """实例生成请求"""
    process: Literal["matern", "poisson"] = Field(default="matern", description="点过程")
    config: GeneratorConfig = Field(default_factory=GeneratorConfig, description="生成参数")


class SolveRequest(BaseModel):
    """求解请求"""
    instance: InstanceDocument = Field(..., description="实例文档")
    algorithm: AlgorithmName = Field(..., description="算法")
    epsilon: float = Field(default=0.1, gt=0, allow_inf_nan=False, description="隐私预算 ε")
    alpha: float = Field(default=0.1, gt=0, lt=1, description="总失败概率 α")
    delta: float = Field(default=0.2, ge=0, allow_inf_nan=False, description="重连半径 δ")
    seed: int = Field(default=0, ge=0, lt=2**64, description="噪声种子")


class SolveResult(BaseModel):
    """求解响应：解文档 + 成本 + 可行性 + 相对非隐私最优的归一化成本"""
    solution: SolutionDocument
    cost: CostBreakdown
    feasibility: FeasibilityReport
    opt_cost: float = Field(..., description="非隐私最优成本")
    normalized_cost: Optional[float] = Field(default=None, description="total / opt（opt = 0 时为空）")


class DensityRequest(BaseModel):
    """密度检查请求"""
    instance: InstanceDocument = Field(..., description="实例文档")
    delta: float = Field(..., ge=0, allow_inf_nan=False, description="球半径 δ")
    gamma: float = Field(default=2.0, ge=1, allow_inf_nan=False, description="缩放参数 γ")
