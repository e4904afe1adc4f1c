"""
基准扫描相关的Pydantic模型
扫描配置、结果行与汇总行
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.domain import AlgorithmName
from app.schemas.params_schemas import GeneratorConfig, PrivacyParams, SolveParams

SweepKind = Literal["delta", "epsilon", "n", "b_avg", "single"]
ProcessName = Literal["matern", "poisson"]

# 同一试验内各算法的输出顺序
ALGORITHM_ORDER: Tuple[AlgorithmName, ...] = ("optimal", "margin", "reconnection")


def _default_solve() -> SolveParams:
    return SolveParams(privacy=PrivacyParams(epsilon=0.1, alpha=0.1), delta=0.2)


class SweepConfig(BaseModel):
    """参数扫描配置"""
    sweep_kind: SweepKind = Field(default="single", description="扫描的参数")
    grid: Tuple[float, float, float] = Field(default=(0.0, 0.0, 1.0), description="(start, stop, step)，包含 stop")
    values: Optional[List[float]] = Field(default=None, description="显式扫描值列表，给出时覆盖 grid")
    trials_per_point: int = Field(default=100, ge=1, description="每个扫描点的试验次数")
    process: ProcessName = Field(default="matern", description="实例生成过程")
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig, description="实例生成参数")
    solve: SolveParams = Field(default_factory=_default_solve, description="隐私与重连参数")
    algorithms: List[AlgorithmName] = Field(
        default_factory=lambda: list(ALGORITHM_ORDER), min_length=1, description="参与比较的算法"
    )
    master_seed: int = Field(default=20240601, ge=0, lt=2**64, description="主种子")
    output_path: Optional[str] = Field(default=None, description="CSV 输出路径")
    workers: int = Field(default=1, ge=1, description="并行进程数")
    record_runtime: bool = Field(default=False, description="是否记录墙钟耗时（开启后输出不再逐字节可复现）")

    @field_validator("algorithms")
    @classmethod
    def _order_algorithms(cls, v: List[AlgorithmName]) -> List[AlgorithmName]:
        if len(set(v)) != len(v):
            raise ValueError("algorithms 不能重复")
        return [a for a in ALGORITHM_ORDER if a in v]

    @model_validator(mode="after")
    def _check_grid(self):
        start, stop, step = self.grid
        if not step > 0:
            raise ValueError(f"grid 步长必须为正，当前为 {step}")
        if stop < start:
            raise ValueError(f"grid 需满足 stop ≥ start，当前为 {self.grid}")
        if self.values is not None and not self.values:
            raise ValueError("values 不能为空列表")
        lowest = min(self.values) if self.values else start
        if self.sweep_kind == "epsilon" and not lowest > 0:
            raise ValueError("ε 扫描值必须为正")
        if self.sweep_kind in ("delta", "b_avg") and lowest < 0:
            raise ValueError(f"{self.sweep_kind} 扫描值必须非负")
        if self.sweep_kind == "n" and lowest < 2:
            raise ValueError("n 扫描值必须 ≥ 2")
        return self


class ResultRow(BaseModel):
    """一次（扫描点, 试验, 算法）的结果，字段顺序即 CSV 列顺序"""
    sweep_kind: SweepKind = Field(..., description="扫描的参数")
    sweep_value: float = Field(..., description="扫描值")
    trial: int = Field(..., ge=0, description="试验序号")
    seed: int = Field(..., description="该试验派生的 64 位种子")
    algorithm: AlgorithmName = Field(..., description="算法")
    realized_n: int = Field(..., description="实际位置数")
    total_cost: float = Field(..., description="总成本")
    facility_cost: float = Field(..., description="设施成本")
    connection_cost: float = Field(..., description="连接成本")
    opt_cost: float = Field(..., description="非隐私最优成本")
    normalized_cost: Optional[float] = Field(default=None, description="total_cost / opt_cost（opt_cost = 0 时为空）")
    failed: bool = Field(..., description="是否存在容量不足的设施")
    n_open_facilities: int = Field(..., description="开放设施数")
    runtime_ms: Optional[float] = Field(default=None, description="求解耗时（毫秒）")

    @model_validator(mode="after")
    def _check_normalized(self):
        if self.opt_cost > 0 and self.normalized_cost is None:
            raise ValueError("opt_cost > 0 时必须给出 normalized_cost")
        return self


class SummaryRow(BaseModel):
    """按 (扫描值, 算法) 汇总的统计量"""
    sweep_value: float
    algorithm: AlgorithmName
    trials: int
    mean_normalized_cost: float
    se_normalized_cost: float
    mean_total_cost: float
    se_total_cost: float
    failure_rate: float
    mean_open_facilities: float
