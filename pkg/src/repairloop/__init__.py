"""Interactive two-agent code repair engine.

Generate or ingest candidate code, execute it against test suites in a
sandboxed child process, classify the failure, and drive a learner/teacher
repair loop on compiler feedback; evaluate batches with pass@k and build
repair benchmarks from failing generations.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CodeErrorEntry,
    CodeErrorSet,
    ErrorMessage,
    ErrorType,
    Task,
    TaskSet,
    TestStyle,
    TestSuite,
)
from .sandbox import ExecLimits, ExecutionReport, RunnerConfig, Verdict  # noqa: F401
from .repair import RepairConfig, RepairMode, Trajectory, run_batch, run_episode  # noqa: F401
from .metrics import EvalReport, aggregate, pass_at_k  # noqa: F401
