"""Analysis-job orchestration: submission, bounded resubmission, worker
health monitoring, and automatic worker replacement.

The orchestrator is a single-owner state machine advanced by messages
(submit, heartbeat, completion, tick). A worker whose heartbeat goes
stale past the crash timeout is marked crashed: its in-flight job returns
to the queue while resubmission budget remains, and the worker is
replaced after a fixed re-instantiation delay. ``attempts`` counts
executions started, so a job ends ``failed_permanent`` exactly when
1 + max_resubmit executions have all been lost.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

JOB_STATES = ("queued", "running", "succeeded", "failed_permanent")
WORKER_STATES = ("up", "crashed", "replacing")

DEFAULT_MAX_RESUBMIT = 3
DEFAULT_WORKERS = 12


@dataclass
class AnalysisJob:
    job_id: str
    sample_id: str
    status: str = "queued"
    attempts: int = 0
    max_resubmit: int = DEFAULT_MAX_RESUBMIT
    result_path: str | None = None
    worker_id: str | None = None

    @property
    def terminal(self):
        return self.status in ("succeeded", "failed_permanent")

    @property
    def budget(self):
        return 1 + self.max_resubmit


@dataclass
class WorkerState:
    worker_id: str
    health: str = "up"
    last_heartbeat: float = 0.0
    job_id: str | None = None
    ready_at: float | None = None


@dataclass
class PoolConfig:
    n_workers: int = DEFAULT_WORKERS
    heartbeat_interval: float = 1.0
    crash_timeout: float = 3.0
    replacement_delay: float = 2.0
    max_resubmit: int = DEFAULT_MAX_RESUBMIT

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError(f"n_workers must be >= 1, got {self.n_workers}")
        if not self.crash_timeout > self.heartbeat_interval:
            raise ValueError(
                f"crash_timeout ({self.crash_timeout}) must exceed "
                f"heartbeat_interval ({self.heartbeat_interval})"
            )
        if self.max_resubmit < 0:
            raise ValueError(f"max_resubmit must be >= 0, got {self.max_resubmit}")

    def to_dict(self):
        return {
            "n_workers": self.n_workers,
            "heartbeat_interval": self.heartbeat_interval,
            "crash_timeout": self.crash_timeout,
            "replacement_delay": self.replacement_delay,
            "max_resubmit": self.max_resubmit,
        }


class Orchestrator:
    """Job table, FIFO queue, and worker pool under one monitor loop."""

    def __init__(self, pool: PoolConfig, now=0.0):
        self.pool = pool
        self.jobs = {}
        self._by_sample = {}
        self.queue = deque()
        self.workers = {
            f"worker-{i:02d}": WorkerState(f"worker-{i:02d}", last_heartbeat=now)
            for i in range(pool.n_workers)
        }
        self.events = []
        self._next_job = 1

    def _emit(self, t, entity, transition, **extra):
        event = {"t": t, "entity": entity, "transition": transition, **extra}
        self.events.append(event)
        return event

    def submit(self, sample_id, now=0.0):
        """Queue a sample; duplicate submissions return the existing job id."""
        existing = self._by_sample.get(sample_id)
        if existing is not None:
            return existing, False
        job_id = f"job-{self._next_job:06d}"
        self._next_job += 1
        job = AnalysisJob(job_id=job_id, sample_id=sample_id,
                          max_resubmit=self.pool.max_resubmit)
        self.jobs[job_id] = job
        self._by_sample[sample_id] = job_id
        self.queue.append(job_id)
        self._emit(now, job_id, "submitted", sample=sample_id)
        return job_id, True

    def heartbeat(self, worker_id, now):
        worker = self.workers[worker_id]
        if worker.health == "up":
            worker.last_heartbeat = now

    def complete(self, worker_id, now, result_path=None):
        """Backend reports the worker finished its job successfully."""
        worker = self.workers[worker_id]
        if worker.job_id is None:
            raise ValueError(f"{worker_id} has no job to complete")
        job = self.jobs[worker.job_id]
        job.status = "succeeded"
        job.result_path = result_path
        job.worker_id = None
        worker.job_id = None
        worker.last_heartbeat = now
        self._emit(now, job.job_id, "succeeded", worker=worker_id,
                   attempts=job.attempts)

    def report_crash(self, worker_id, now):
        """Backend reports an explicit crash; handled like a stale heartbeat."""
        worker = self.workers[worker_id]
        if worker.health == "up":
            self._crash_worker(worker, now)

    def _crash_worker(self, worker, now):
        worker.health = "crashed"
        self._emit(now, worker.worker_id, "crashed")
        job_id = worker.job_id
        worker.job_id = None
        if job_id is not None:
            job = self.jobs[job_id]
            job.worker_id = None
            if job.attempts < job.budget:
                job.status = "queued"
                self.queue.append(job_id)
                self._emit(now, job_id, "requeued", attempts=job.attempts)
            else:
                job.status = "failed_permanent"
                self._emit(now, job_id, "failed_permanent", attempts=job.attempts)
        worker.health = "replacing"
        worker.ready_at = now + self.pool.replacement_delay
        self._emit(now, worker.worker_id, "replacing", ready_at=worker.ready_at)

    def monitor_tick(self, now):
        """One monitoring pass; returns the actions taken.

        Detects stale workers, finishes due replacements, and assigns
        queued jobs to idle healthy workers.
        """
        actions = []
        before = len(self.events)
        for worker_id in sorted(self.workers):
            worker = self.workers[worker_id]
            if worker.health == "up" and now - worker.last_heartbeat > self.pool.crash_timeout:
                self._crash_worker(worker, now)
        for worker_id in sorted(self.workers):
            worker = self.workers[worker_id]
            if worker.health == "replacing" and worker.ready_at is not None and now >= worker.ready_at:
                worker.health = "up"
                worker.ready_at = None
                worker.last_heartbeat = now
                self._emit(now, worker_id, "up")
        for worker_id in sorted(self.workers):
            worker = self.workers[worker_id]
            if worker.health != "up" or worker.job_id is not None:
                continue
            job = self._next_queued()
            if job is None:
                break
            job.status = "running"
            job.attempts += 1
            job.worker_id = worker_id
            worker.job_id = job.job_id
            self._emit(now, job.job_id, "assigned", worker=worker_id,
                       attempts=job.attempts)
        actions.extend(self.events[before:])
        return actions

    def _next_queued(self):
        while self.queue:
            job = self.jobs[self.queue.popleft()]
            if job.status == "queued":
                return job
        return None

    def all_terminal(self):
        return all(job.terminal for job in self.jobs.values())

    def job_locations(self):
        """Where every job lives right now: queue, one worker, or terminal.

        Used to check conservation: each job appears exactly once.
        """
        locations = {}
        for job_id in self.queue:
            if self.jobs[job_id].status == "queued":
                locations.setdefault(job_id, []).append("queue")
        for worker in self.workers.values():
            if worker.job_id is not None:
                locations.setdefault(worker.job_id, []).append(worker.worker_id)
        for job in self.jobs.values():
            if job.terminal:
                locations.setdefault(job.job_id, []).append(job.status)
        return locations
