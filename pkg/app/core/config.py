"""
配置管理
支持环境变量配置和默认值
"""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用配置"""

    # 应用基础配置
    APP_NAME: str = "FL-Linear 本地差分隐私选址求解器"
    VERSION: str = "0.1.0"
    DEBUG: bool = False
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # 实例生成默认参数（Matérn 聚类过程 / 泊松过程）
    GEN_N: int = 1000
    GEN_GAMMA: float = 2.0
    GEN_DELTA_GEN: float = 0.2
    GEN_CLIENT_MEAN: float = 2.5
    GEN_CLIENT_SD: float = 1.5
    GEN_CLIENT_LO: int = 0
    GEN_CLIENT_HI: int = 8
    GEN_COST_LO: float = 0.1
    GEN_COST_HI: float = 0.3
    GEN_RETRY_BUDGET: int = 16  # 空实例重采样次数上限
    REALWORLD_SIZE: int = 431

    # 隐私与求解默认参数
    EPSILON: float = 0.1
    ALPHA: float = 0.1
    DELTA: float = 0.2

    # 求解器限制
    BRUTE_FORCE_MAX_N: int = 8
    TRIANGLE_EXHAUSTIVE_MAX_N: int = 200
    TRIANGLE_SAMPLE_SIZE: int = 10_000
    TRIANGLE_TOLERANCE: float = 1e-9

    # 基准测试默认参数
    BENCH_TRIALS: int = 100
    BENCH_WORKERS: int = 1
    BENCH_MASTER_SEED: int = 20240601

    # 日志配置
    LOG_LEVEL: str = "INFO"
    LOG_RETENTION: str = "30 days"
    LOG_ROTATION: str = "100 MB"
    LOG_DIR: str = "logs"               # 日志目录
    LOG_COMPRESSION: str = "zip"         # 可选："zip" | "gz" | None
    LOG_TO_FILE: bool = True

    class Config:
        env_file = ".env"
        case_sensitive = True


# 全局设置实例
settings = Settings()
