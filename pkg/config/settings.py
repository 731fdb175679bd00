# config/settings.py
import os
from pathlib import Path
from dotenv import load_dotenv

# 加载环境变量
load_dotenv()

# 项目根目录
BASE_DIR = Path(__file__).resolve().parent.parent

# ==================== 基础配置 ====================
PROJECT_NAME = "类比构念工具箱"
VERSION = "1.0.0"
DESCRIPTION = "基于部分MDP同态的类比迁移、模块库与按需构念工具箱"

# ==================== 求解器配置 ====================
TOLERANCE = float(os.getenv("ANALOGY_TOLERANCE", "1e-8"))
MAX_SWEEPS = int(os.getenv("ANALOGY_MAX_SWEEPS", "10000"))

# ==================== 同态配置 ====================
STRICTNESS_TOL = float(os.getenv("ANALOGY_STRICTNESS_TOL", "1e-9"))

# ==================== 预算配置 ====================
# C_max 的默认值，CLI 的 --budget 未给出时使用
DEFAULT_BUDGET = int(os.getenv("ANALOGY_BUDGET", "1000000"))

# ==================== 类比搜索配置 ====================
SEARCH_EXPANSIONS = int(os.getenv("ANALOGY_SEARCH_EXPANSIONS", "100000"))
PARTIAL_PENALTY = float(os.getenv("ANALOGY_PARTIAL_PENALTY", "1.0"))
PARTIAL_TOLERANCE = float(os.getenv("ANALOGY_PARTIAL_TOLERANCE", "0.5"))
STRICT_PROBE = int(os.getenv("ANALOGY_STRICT_PROBE", "2000"))
SIGNATURE_HORIZON = int(os.getenv("ANALOGY_SIGNATURE_HORIZON", "1"))
RETRIEVAL_K = int(os.getenv("ANALOGY_RETRIEVAL_K", "3"))
MIN_COVERAGE_GAIN = float(os.getenv("ANALOGY_MIN_COVERAGE_GAIN", "0.05"))

# ==================== 模块库配置 ====================
EXTRACTION_THRESHOLD = int(os.getenv("ANALOGY_EXTRACTION_THRESHOLD", "2"))
DISCARD_RATIO = float(os.getenv("ANALOGY_DISCARD_RATIO", "0.5"))
MIN_USES = int(os.getenv("ANALOGY_MIN_USES", "3"))
FRAGMENT_CAP = int(os.getenv("ANALOGY_FRAGMENT_CAP", "12"))
MAX_FRAGMENTS = int(os.getenv("ANALOGY_MAX_FRAGMENTS", "8"))

# ==================== 日志与输出 ====================
LOG_LEVEL = os.getenv("ANALOGY_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
OUTPUT_DIR = Path(os.getenv("ANALOGY_OUTPUT_DIR", str(BASE_DIR / "data")))


# ==================== 函数定义 ====================
def create_directories(*extra: Path):
    """创建输出目录（由CLI在写出结果前显式调用）"""
    directories = [OUTPUT_DIR, *extra]

    for directory in directories:
        Path(directory).mkdir(exist_ok=True, parents=True)

    return True


def summary() -> dict:
    """返回当前配置摘要"""
    return {
        "project": f"{PROJECT_NAME} v{VERSION}",
        "tolerance": TOLERANCE,
        "max_sweeps": MAX_SWEEPS,
        "strictness_tol": STRICTNESS_TOL,
        "budget": DEFAULT_BUDGET,
        "search_expansions": SEARCH_EXPANSIONS,
        "output_dir": str(OUTPUT_DIR),
    }
