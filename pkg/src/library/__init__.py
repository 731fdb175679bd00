"""
模块库：模块与回合记录、三阶段推断、库更新、目录存储与生命周期运行器
"""
from .modules import Module, Library, EpisodeRecord
from .inference import construe, solve, afford, SolveOutcome
from .update import update_library, extract_fragments, refine_module, strict_bihomomorphism
from .storage import save_library, load_library
from .lifecycle import LifecycleConfig, EpisodeRow, run_lifecycle, bench_amortization
