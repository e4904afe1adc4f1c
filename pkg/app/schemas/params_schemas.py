"""
参数相关的Pydantic模型
实例生成参数、客户数模型、隐私参数与求解参数
"""

from typing import Annotated, Literal, Tuple, Union

from pydantic import BaseModel, Field, model_validator


class TruncatedGaussianClients(BaseModel):
    """截断高斯客户数：Normal(mean, sd) 四舍五入后夹到 [lo, hi]"""
    kind: Literal["truncated-gaussian"] = "truncated-gaussian"
    mean: float = Field(default=2.5, allow_inf_nan=False, description="均值")
    sd: float = Field(default=1.5, ge=0, allow_inf_nan=False, description="标准差")
    lo: int = Field(default=0, ge=0, description="下界")
    hi: int = Field(default=8, ge=0, description="上界")
    min_one: bool = Field(default=False, description="是否额外夹到 ≥1（验证 b_v ≥ 1 前提下的界）")

    @model_validator(mode="after")
    def _check_range(self):
        if self.hi < self.lo:
            raise ValueError(f"hi({self.hi}) 必须 ≥ lo({self.lo})")
        return self


class ConstantClients(BaseModel):
    """常数客户数：每个位置都是 b_avg"""
    kind: Literal["constant"] = "constant"
    b_avg: int = Field(..., ge=0, description="每个位置的客户数")


DemandModel = Annotated[Union[TruncatedGaussianClients, ConstantClients], Field(discriminator="kind")]

# 客户存在概率 p ∈ (0, 1]，Pr[b_v ≥ 1] 的下界
PresenceProb = Annotated[float, Field(gt=0, le=1)]


class BernoulliPresenceClients(BaseModel):
    """伯努利存在模型：以 1−p 概率为 0，否则从 demand 中条件于 ≥1 抽取"""
    kind: Literal["bernoulli-presence"] = "bernoulli-presence"
    p: PresenceProb = Field(..., description="Pr[b_v ≥ 1] 的下界")
    demand: DemandModel = Field(default_factory=TruncatedGaussianClients, description="存在时的需求模型")


ClientModel = Annotated[
    Union[TruncatedGaussianClients, ConstantClients, BernoulliPresenceClients],
    Field(discriminator="kind"),
]


class GeneratorConfig(BaseModel):
    """合成实例生成参数 (n, γ, δ_gen) + 客户数/成本采样参数"""
    n: int = Field(default=1000, ge=1, description="期望位置总数")
    gamma: float = Field(default=2.0, ge=1, allow_inf_nan=False, description="缩放参数 γ")
    delta_gen: float = Field(default=0.2, ge=0, allow_inf_nan=False, description="聚类半径 δ_gen")
    client_model: ClientModel = Field(default_factory=TruncatedGaussianClients, description="客户数模型")
    cost_range: Tuple[float, float] = Field(default=(0.1, 0.3), description="设施成本区间 [f_lo, f_hi]")
    seed: int = Field(default=0, ge=0, lt=2**64, description="64 位随机种子")

    @model_validator(mode="after")
    def _check_cost_range(self):
        lo, hi = self.cost_range
        if not (0 <= lo <= hi) or hi == float("inf"):
            raise ValueError(f"cost_range 需满足 0 ≤ f_lo ≤ f_hi < ∞，当前为 {self.cost_range}")
        return self


class PrivacyParams(BaseModel):
    """隐私参数：预算 ε 与总失败概率 α"""
    epsilon: float = Field(..., gt=0, allow_inf_nan=False, description="隐私预算 ε")
    alpha: float = Field(..., gt=0, lt=1, description="总失败概率 α")


class SolveParams(BaseModel):
    """重连算法参数：隐私参数 + 重连半径 δ"""
    privacy: PrivacyParams
    delta: float = Field(default=0.0, ge=0, allow_inf_nan=False, description="重连半径 δ")
