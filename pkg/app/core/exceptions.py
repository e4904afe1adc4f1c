"""
统一异常定义
每类错误带业务码，CLI 映射为退出码，HTTP 接口映射为响应体
"""

from typing import Any, Dict, List, Optional


class FacilityLocationError(Exception):
    """业务异常基类"""

    code: int = 1000
    exit_code: int = 1
    http_status: int = 400

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "error": self.details}


class InvalidParameterError(FacilityLocationError):
    """参数越界（ε ≤ 0、α ∉ (0,1)、δ < 0、区间倒置、下标越界等）"""

    code = 1001
    exit_code = 2


class InstanceFormatError(InvalidParameterError):
    """实例文档不合法，details 为字段级诊断列表"""

    code = 1002

    def __init__(self, message: str, diagnostics: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message, diagnostics or [])
        self.diagnostics = diagnostics or []


class OracleLimitError(InvalidParameterError):
    """暴力枚举规模超限"""

    code = 1003


class GenerationError(FacilityLocationError):
    """重采样预算耗尽仍生成空实例"""

    code = 1004
    exit_code = 4


class SolverInvariantError(FacilityLocationError):
    """求解过程中的运行时不变量被破坏（属于程序缺陷）"""

    code = 1005
    exit_code = 1
    http_status = 500
