"""
日志配置
基于 loguru，实现：
- 控制台彩色输出（stderr，避免污染 CLI 的 stdout 输出）
- 多文件拆分（总日志、错误、生成器、隐私、求解器、评估、基准、API）
- 文件轮转、保留、压缩
- 模块级过滤，避免日志串扰
"""

import os
import sys
from typing import Callable

from loguru import logger

from app.core.config import settings

_FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} | {message}"


def _ensure_log_dir() -> str:
    log_dir = settings.LOG_DIR or "logs"
    if not os.path.exists(log_dir):
        os.makedirs(log_dir, exist_ok=True)
    return log_dir


def _build_path(log_dir: str, name: str) -> str:
    return os.path.join(log_dir, name)


def _module_filter(module_prefixes: tuple[str, ...]) -> Callable[[dict], bool]:
    """返回一个过滤器：仅保留指定模块前缀的日志。
    说明：record["name"] 为模块名；服务层通过 logger.bind(name=...) 绑定的名字存放在 extra 中，两者都参与匹配。
    """
    def _filter(record: dict) -> bool:
        names = (record.get("name") or "", record["extra"].get("name", ""))
        return any(n.startswith(prefix) for n in names for prefix in module_prefixes)
    return _filter


def _add_file_sink(log_dir: str, filename: str, level: str, filter=None) -> None:
    logger.add(
        _build_path(log_dir, filename),
        level=level,
        format=_FILE_FORMAT,
        rotation=settings.LOG_ROTATION,
        retention=settings.LOG_RETENTION,
        encoding="utf-8",
        compression=settings.LOG_COMPRESSION,
        filter=filter,
    )


# 按关注点拆分的日志文件，值为 logger 名前缀
_CONCERN_FILES = {
    "generators": ("app.services.generator_service", "app.services.instance_service"),
    "privacy": ("app.services.privacy_service",),
    "solvers": ("app.services.solver_service",),
    "evaluation": ("app.services.evaluation_service",),
    "bench": ("app.services.bench_service", "app.cli", "app.core.trace"),
    "api": ("app.api.routes", "app.main"),
}


def setup_logging(level: str | None = None, to_file: bool | None = None):
    """设置全局日志：stderr 彩色输出；to_file 时追加汇总、错误与分模块文件"""
    logger.remove()

    level = level or settings.LOG_LEVEL
    to_file = settings.LOG_TO_FILE if to_file is None else to_file

    logger.add(
        sys.stderr,
        level=level,
        format=(
            "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
            "<level>{level: <8}</level> | "
            "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
            "<level>{message}</level>"
        ),
        colorize=True,
        backtrace=False,
        diagnose=False,
    )

    if not to_file:
        logger.debug("日志系统初始化完成（仅控制台）")
        return

    log_dir = _ensure_log_dir()
    _add_file_sink(log_dir, "app_{time:YYYYMMDD}.log", level)
    _add_file_sink(log_dir, "error_{time:YYYYMMDD}.log", "ERROR")
    for tag, prefixes in _CONCERN_FILES.items():
        _add_file_sink(log_dir, f"{tag}_{{time:YYYYMMDD}}.log", level, _module_filter(prefixes))

    logger.info(f"✅ 日志系统初始化完成: 目录={log_dir}, 级别={level}")
