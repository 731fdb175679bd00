"""
异常定义模块
所有模块共享的异常层次结构，CLI 根据异常类型映射退出码
"""
from typing import Iterable, Optional, Tuple


class AnalogyError(Exception):
    """工具箱所有异常的基类"""


class MdpValidationError(AnalogyError, ValueError):
    """MDP 不满足不变量（概率和、终止状态、奖励有限等）"""


class NumericFailureError(AnalogyError, ArithmeticError):
    """求解过程中出现非有限值"""

    def __init__(self, message: str, state: Optional[int] = None):
        super().__init__(message)
        self.state = state


class PairingMismatchError(AnalogyError, ValueError):
    """值函数与 MDP 不配对"""


class CoverageGapError(AnalogyError):
    """策略在可达状态上未定义"""

    def __init__(self, message: str, states: Iterable[int] = ()):
        self.states = tuple(sorted(states))
        super().__init__(f"{message}: {list(self.states)}")


class UnmappedMassError(AnalogyError, ValueError):
    """推前分布时有正概率落在映射定义域之外"""

    def __init__(self, message: str, states: Iterable[int] = ()):
        self.states = tuple(sorted(states))
        super().__init__(f"{message}: {list(self.states)}")


class EndpointMismatchError(AnalogyError, ValueError):
    """同态映射的端点与给定 MDP 不一致"""


class EmptyScopeError(AnalogyError, ValueError):
    """同态映射的作用域为空"""


class InconsistentInterfaceError(AnalogyError, ValueError):
    """商构造中同一块内成员的动作集合不一致"""

    def __init__(self, message: str, block: Tuple[int, ...] = ()):
        super().__init__(message)
        self.block = block


class MissingAbstractChoiceError(AnalogyError, ValueError):
    """抽象策略在作用域涉及的抽象状态上未定义"""


class HintConflictError(AnalogyError, ValueError):
    """提示赋值自相矛盾或违反动作可用性"""


class InvalidBudgetError(AnalogyError, ValueError):
    """搜索预算配置非法"""


class DanglingEndpointError(AnalogyError, ValueError):
    """拼接端点不存在或不是接口状态"""


class CompositionConflictError(AnalogyError, ValueError):
    """两个片段在同一个合并状态上都定义了动力学"""


class DomainParameterError(AnalogyError, ValueError):
    """领域生成器参数越界"""


class ParseError(AnalogyError, ValueError):
    """文本格式解析失败，带行号"""

    def __init__(self, message: str, line_no: Optional[int] = None, source: str = ""):
        self.line_no = line_no
        self.source = source
        where = f"{source}:" if source else ""
        if line_no is not None:
            message = f"{where}第{line_no}行: {message}"
        elif where:
            message = f"{where} {message}"
        super().__init__(message)


class UsageError(AnalogyError):
    """命令行用法错误"""
