"""Fault-tolerant analysis-job orchestration with a simulated backend."""

from .core import AnalysisJob, Orchestrator, PoolConfig, WorkerState
from .cuckoo import CuckooClient, SandboxEndpoints
from .sim import SimulationResult, run_simulation

__all__ = [
    "AnalysisJob",
    "CuckooClient",
    "Orchestrator",
    "PoolConfig",
    "SandboxEndpoints",
    "SimulationResult",
    "WorkerState",
    "run_simulation",
]
