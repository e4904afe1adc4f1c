"""
合成实例生成服务
Matérn 聚类点过程、泊松点过程、客户数与设施成本采样、密度前提检查

随机数约定：所有采样都从调用方传入的 numpy Generator 读取；
make_rng(seed, stream) 基于 Philox（计数器型）+ SeedSequence 派生互相独立的流，
stream 0 用于实例生成，stream 1 用于拉普拉斯噪声。
泊松采样直接使用 numpy Generator.poisson（精确分布：小 λ 逆变换、大 λ PTRS 拒绝采样）。
"""

import csv
import io
import math
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.exceptions import GenerationError, InvalidParameterError
from app.core.metric import ball_sizes, build_metric
from app.models.domain import Instance
from app.schemas.params_schemas import (
    BernoulliPresenceClients,
    ClientModel,
    ConstantClients,
    GeneratorConfig,
    TruncatedGaussianClients,
)
from app.schemas.report_schemas import DensityReport
from app.services.instance_service import make_instance

_log = logger.bind(name="app.services.generator_service")

STREAM_INSTANCE = 0
STREAM_NOISE = 1

# 条件 ≥1 的拒绝采样轮数上限
_MAX_REJECTION_ROUNDS = 10_000


def make_rng(seed: int, stream: int = STREAM_INSTANCE) -> np.random.Generator:
    """由 (seed, stream) 派生独立的 Philox 随机流"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))))


def daughter_rate(n: int, gamma: float) -> float:
    """每个中心的期望子点数 λ_daughter = γ² ln² n"""
    return gamma**2 * math.log(n) ** 2


def center_rate(n: int, gamma: float) -> float:
    """中心数的泊松参数 λ_centers = n / λ_daughter"""
    return n / daughter_rate(n, gamma)


def sample_matern_points(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Matérn 聚类过程的一次抽样（可能为空）

    中心 ~ Poisson(λ_centers) 均匀分布在单位正方形；每个中心子点数 ~ Poisson(λ_daughter)，
    半径在 [0, δ_gen] 上均匀（不是面积均匀），角度在 [0, 2π) 上均匀。
    """
    if cfg.n < 2:
        raise InvalidParameterError("Matérn 过程要求 n ≥ 2（ln n > 0）", {"n": cfg.n})
    lam_d = daughter_rate(cfg.n, cfg.gamma)
    n_centers = int(rng.poisson(center_rate(cfg.n, cfg.gamma)))
    centers = rng.random((n_centers, 2))
    counts = rng.poisson(lam_d, size=n_centers)
    total = int(counts.sum())
    radius = rng.uniform(0.0, cfg.delta_gen, size=total)
    angle = rng.uniform(0.0, 2.0 * math.pi, size=total)
    parents = np.repeat(centers, counts, axis=0)
    points = parents + radius[:, None] * np.column_stack((np.cos(angle), np.sin(angle)))
    # 每个子点距其中心不超过 δ_gen
    assert np.all(np.hypot(*(points - parents).T) <= cfg.delta_gen + 1e-12)
    return points


def sample_poisson_points(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """泊松点过程的一次抽样：Poisson(n) 个点均匀分布在单位正方形"""
    count = int(rng.poisson(cfg.n))
    return rng.random((count, 2))


def sample_clients(count: int, model: ClientModel, rng: np.random.Generator) -> np.ndarray:
    """按客户数模型采样 count 个非负整数"""
    if count < 0:
        raise InvalidParameterError("count 必须非负", {"count": count})
    if isinstance(model, TruncatedGaussianClients):
        raw = np.rint(rng.normal(model.mean, model.sd, size=count))
        values = np.clip(raw, model.lo, model.hi)
        if model.min_one:
            values = np.maximum(values, 1)
        return values.astype(np.int64)
    if isinstance(model, ConstantClients):
        return np.full(count, model.b_avg, dtype=np.int64)
    if isinstance(model, BernoulliPresenceClients):
        return _sample_bernoulli_presence(count, model, rng)
    raise InvalidParameterError(f"未知客户数模型: {type(model).__name__}")


def _sample_bernoulli_presence(count: int, model: BernoulliPresenceClients, rng: np.random.Generator) -> np.ndarray:
    demand = model.demand
    if isinstance(demand, ConstantClients) and demand.b_avg < 1:
        raise InvalidParameterError("需求模型无法产生 ≥1 的客户数", {"b_avg": demand.b_avg})
    if isinstance(demand, TruncatedGaussianClients) and demand.hi < 1:
        raise InvalidParameterError("需求模型无法产生 ≥1 的客户数", {"hi": demand.hi})

    present = rng.random(count) < model.p
    values = np.zeros(count, dtype=np.int64)
    pending = np.flatnonzero(present)
    for _ in range(_MAX_REJECTION_ROUNDS):
        if pending.size == 0:
            return values
        draws = sample_clients(pending.size, demand, rng)
        accepted = draws >= 1
        values[pending[accepted]] = draws[accepted]
        pending = pending[~accepted]
    raise GenerationError("条件 ≥1 的需求采样未能在轮数上限内完成", {"pending": int(pending.size)})


def sample_facility_costs(count: int, cost_range: Tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """设施成本 i.i.d. ~ Uniform[f_lo, f_hi]"""
    lo, hi = cost_range
    if not (0 <= lo <= hi) or not math.isfinite(hi):
        raise InvalidParameterError("设施成本区间需满足 0 ≤ f_lo ≤ f_hi", {"cost_range": [lo, hi]})
    if count < 0:
        raise InvalidParameterError("count 必须非负", {"count": count})
    return rng.uniform(lo, hi, size=count)


def _generate(cfg: GeneratorConfig, rng: Optional[np.random.Generator], sampler, process: str) -> Instance:
    rng = rng or make_rng(cfg.seed, STREAM_INSTANCE)
    for attempt in range(1, settings.GEN_RETRY_BUDGET + 1):
        points = sampler(cfg, rng)
        if len(points):
            costs = sample_facility_costs(len(points), cfg.cost_range, rng)
            clients = sample_clients(len(points), cfg.client_model, rng)
            inst = make_instance(build_metric(points), costs, clients)
            _log.debug(f"🏙️ {process} 实例生成完成: 期望 n={cfg.n}, 实际 n={inst.n}, 尝试次数={attempt}")
            return inst
        _log.warning(f"⚠️ {process} 过程抽到空实例，重采样 ({attempt}/{settings.GEN_RETRY_BUDGET})")
    _log.error(f"❌ {process} 实例生成失败: 连续 {settings.GEN_RETRY_BUDGET} 次为空")
    raise GenerationError("重采样预算耗尽仍为空实例", {"process": process, "n": cfg.n})


def generate_matern(cfg: GeneratorConfig, rng: Optional[np.random.Generator] = None) -> Instance:
    """Matérn 聚类实例；点落在扩展窗口 [−δ_gen, 1+δ_gen]² 内"""
    if cfg.n < 2:
        raise InvalidParameterError("Matérn 过程要求 n ≥ 2（ln n > 0）", {"n": cfg.n})
    return _generate(cfg, rng, sample_matern_points, "matern")


def generate_poisson(cfg: GeneratorConfig, rng: Optional[np.random.Generator] = None) -> Instance:
    """泊松点过程实例；点落在 [0,1]² 内"""
    return _generate(cfg, rng, sample_poisson_points, "poisson")


def generate(process: str, cfg: GeneratorConfig, rng: Optional[np.random.Generator] = None) -> Instance:
    if process == "matern":
        return generate_matern(cfg, rng)
    if process == "poisson":
        return generate_poisson(cfg, rng)
    raise InvalidParameterError(f"未知生成过程: {process}", {"allowed": ["matern", "poisson"]})


def density_threshold(n: int, gamma: float) -> float:
    return gamma**2 * math.log(n) ** 2


def density_check(inst: Instance, delta: float, gamma: float) -> DensityReport:
    """检查密度前提 |B(v,δ)| ≥ γ² ln² n（仅供参考，求解器不依赖）"""
    if not delta >= 0:
        raise InvalidParameterError("δ 必须非负", {"delta": delta})
    if not gamma >= 1:
        raise InvalidParameterError("γ 必须 ≥ 1", {"gamma": gamma})
    threshold = density_threshold(inst.n, gamma)
    sizes = ball_sizes(inst.metric, delta)
    holds = sizes >= threshold
    fraction = float(holds.mean())
    if fraction < 1.0:
        _log.info(f"📏 密度前提未完全满足: δ={delta}, γ={gamma}, 阈值={threshold:.2f}, 满足比例={fraction:.3f}")
    return DensityReport(
        delta=delta,
        gamma=gamma,
        threshold=threshold,
        ball_sizes=sizes.tolist(),
        holds=holds.tolist(),
        fraction=fraction,
    )


def realworld_standin(seed: int = 0, size: Optional[int] = None) -> bytes:
    """生成真实世界点表格式（id,x,y,clients）的聚类替身数据，坐标以米为单位、不在单位窗口内"""
    size = size or settings.REALWORLD_SIZE
    rng = make_rng(seed, STREAM_INSTANCE)
    n_districts = 12
    districts = rng.uniform((0.0, 0.0), (8000.0, 6000.0), size=(n_districts, 2))
    weights = rng.dirichlet(np.full(n_districts, 2.0))
    labels = rng.choice(n_districts, size=size, p=weights)
    coords = districts[labels] + rng.normal(0.0, 350.0, size=(size, 2))
    clients = sample_clients(size, TruncatedGaussianClients(), rng)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "x", "y", "clients"])
    for i, ((x, y), c) in enumerate(zip(coords.tolist(), clients.tolist())):
        writer.writerow([i, repr(x), repr(y), c])
    return buf.getvalue().encode("utf-8")
