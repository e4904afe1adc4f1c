"""运行追踪
为一次 CLI 运行 / 基准扫描生成 run ID，并以 Span 的形式记录各求解步骤的耗时
"""

import time
from contextvars import ContextVar
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

from loguru import logger
from uuid6 import uuid7


class TraceStatus(str, Enum):
    """Span 状态"""
    RUNNING = "running"
    SUCCESS = "success"
    ERROR = "error"


def generate_run_id() -> str:
    """生成运行 ID（UUID v7，按时间有序）"""
    return str(uuid7())


@dataclass
class SpanInfo:
    """单个步骤的耗时记录"""
    operation_name: str
    run_id: Optional[str] = None
    started_at: datetime = field(default_factory=datetime.now)
    _t0: float = field(default_factory=time.perf_counter, repr=False)
    duration_ms: Optional[float] = None
    status: TraceStatus = TraceStatus.RUNNING
    tags: Dict[str, Any] = field(default_factory=dict)
    error_message: Optional[str] = None

    def finish(self, status: TraceStatus = TraceStatus.SUCCESS, error_message: Optional[str] = None):
        """结束Span"""
        self.duration_ms = (time.perf_counter() - self._t0) * 1000.0
        self.status = status
        if error_message:
            self.error_message = error_message


# 当前运行 ID，基准扫描和 CLI 子命令在入口处设置
_current_run_id: ContextVar[Optional[str]] = ContextVar("current_run_id", default=None)


def set_run_id(run_id: Optional[str] = None) -> str:
    run_id = run_id or generate_run_id()
    _current_run_id.set(run_id)
    return run_id


def get_run_id() -> Optional[str]:
    return _current_run_id.get()


class TraceContext:
    """计时上下文管理器

    with TraceContext("solve_ldp_margin", n=1000) as span:
        ...
    span.duration_ms  # 退出后可读
    """

    def __init__(self, operation_name: str, quiet: bool = True, **tags):
        self.operation_name = operation_name
        self.quiet = quiet
        self.tags = tags
        self.span: Optional[SpanInfo] = None

    def __enter__(self) -> SpanInfo:
        self.span = SpanInfo(operation_name=self.operation_name, run_id=get_run_id(), tags=dict(self.tags))
        return self.span

    def __exit__(self, exc_type, exc_val, exc_tb):
        if not self.span:
            return
        status = TraceStatus.ERROR if exc_type else TraceStatus.SUCCESS
        self.span.finish(status, str(exc_val) if exc_val else None)
        log = logger.bind(name="app.core.trace", run_id=self.span.run_id)
        if status is TraceStatus.ERROR:
            log.error(f"❌ 步骤失败: {self.operation_name}, 耗时: {self.span.duration_ms:.1f}ms, 错误: {exc_val}")
        elif not self.quiet:
            log.info(f"✅ 步骤完成: {self.operation_name}, 耗时: {self.span.duration_ms:.1f}ms")

