"""
本地差分隐私服务
拉普拉斯机制（逆 CDF 采样）、客户数加噪、容量余量公式、拉普拉斯和的尾部蒙特卡洛检验
"""

import math
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from app.core.exceptions import InvalidParameterError
from app.models.domain import NoisyCounts
from app.schemas.params_schemas import PrivacyParams

_log = logger.bind(name="app.services.privacy_service")

# |u| 取到 ½ 时 ln(0) 发散，截到 ½ 的前一个浮点数
_HALF_BELOW = np.nextafter(0.5, 0.0)

# 尾部检验时单块最多的拉普拉斯抽样数
_TAIL_CHUNK = 2_000_000


def _check_scale(scale: float) -> None:
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidParameterError("拉普拉斯尺度必须为正的有限值", {"scale": scale})


def laplace_noise(scale: float, size: Optional[int | tuple], rng: np.random.Generator) -> np.ndarray:
    """向量化拉普拉斯采样：每个样本恰好消耗一个均匀数

    u ∈ (−½, ½]，x = −s·sign(u)·ln(1 − 2|u|)
    """
    _check_scale(scale)
    u = 0.5 - rng.random(size)
    a = np.minimum(np.abs(u), _HALF_BELOW)
    return -scale * np.sign(u) * np.log1p(-2.0 * a)


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    """单次拉普拉斯抽样 Lap(0, scale)"""
    return float(laplace_noise(scale, None, rng))


def perturb_counts(b: Sequence[int] | np.ndarray, params: PrivacyParams, rng: np.random.Generator) -> NoisyCounts:
    """位置侧加噪：b′_v = b_v + Lap(1/ε)，每个位置恰好一次抽样

    计数查询的敏感度为 1（一个人的出现与否最多改变 b_v 1），因此每个位置满足 ε-LDP。
    """
    counts = np.asarray(b, dtype=float)
    noise = laplace_noise(1.0 / params.epsilon, counts.shape[0], rng)
    values = counts + noise
    _log.debug(f"🔒 客户数已加噪: n={counts.shape[0]}, ε={params.epsilon}")
    return NoisyCounts(values=values, epsilon_used=params.epsilon)


def margin(k: int, params: PrivacyParams, n: int) -> float:
    """容量余量 (2/ε)·√k·ln(2n/α)"""
    if k < 0:
        raise InvalidParameterError("连接位置数 k 必须非负", {"k": k})
    if n < 1:
        raise InvalidParameterError("位置数 n 必须 ≥ 1", {"n": n})
    return (2.0 / params.epsilon) * math.sqrt(k) * math.log(2.0 * n / params.alpha)


def margin_threshold(k: int, scale: float, beta: float) -> float:
    """k 个独立 Lap(scale) 之和的尾部阈值 t = 2·scale·√k·ln(2k/β)"""
    if k < 1:
        raise InvalidParameterError("k 必须 ≥ 1", {"k": k})
    if not 0 < beta < 1:
        raise InvalidParameterError("β 必须在 (0,1) 内", {"beta": beta})
    _check_scale(scale)
    return 2.0 * scale * math.sqrt(k) * math.log(2.0 * k / beta)


def laplace_sum_tail_check(k: int, scale: float, beta: float, trials: int, rng: np.random.Generator) -> float:
    """蒙特卡洛估计 Pr[|Σ_{i≤k} X_i| > t]，t 取 margin_threshold(k, scale, β)"""
    if trials < 1:
        raise InvalidParameterError("trials 必须 ≥ 1", {"trials": trials})
    t = margin_threshold(k, scale, beta)
    rows_per_chunk = max(1, _TAIL_CHUNK // k)
    exceed = 0
    done = 0
    while done < trials:
        rows = min(rows_per_chunk, trials - done)
        sums = laplace_noise(scale, (rows, k), rng).sum(axis=1)
        exceed += int(np.count_nonzero(np.abs(sums) > t))
        done += rows
    estimate = exceed / trials
    _log.debug(f"📐 拉普拉斯和尾部检验: k={k}, scale={scale}, β={beta}, t={t:.4f}, 估计={estimate:.5f}")
    return estimate
