"""Seeded discrete-event simulation of the analysis pool.

Time advances in integer ticks. Live workers heartbeat every tick; an
execution either completes after a fixed number of ticks or its worker
falls silent mid-run (per-execution coin flip, or an injected schedule),
after which the monitor detects the stale heartbeat, requeues the job,
and replaces the worker. Identical seeds produce identical event logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..util import MaldistillError
from .core import Orchestrator, PoolConfig


@dataclass
class SimulationResult:
    jobs: dict
    events: list
    ticks: int

    def attempts_histogram(self):
        hist = {}
        for job in self.jobs.values():
            key = (job.status, job.attempts)
            hist[key] = hist.get(key, 0) + 1
        return hist


def run_simulation(pool: PoolConfig, sample_ids, crash_prob, seed,
                   exec_ticks=4, crash_schedule=None, max_ticks=None):
    """Drive jobs to terminal states under crash injection.

    ``crash_schedule`` maps a sample id to a list of per-execution crash
    outcomes, overriding the coin flip (executions beyond the list
    succeed). Returns the final job table and event log.
    """
    if not 0.0 <= crash_prob < 1.0:
        raise ValueError(f"crash_prob must be in [0, 1), got {crash_prob}")
    if exec_ticks < 1:
        raise ValueError(f"exec_ticks must be >= 1, got {exec_ticks}")
    sample_ids = list(sample_ids)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    orch = Orchestrator(pool, now=0.0)
    for sid in sample_ids:
        orch.submit(sid, now=0.0)
    if max_ticks is None:
        per_exec = exec_ticks + pool.crash_timeout + pool.replacement_delay + 4
        total_exec = max(1, len(sample_ids)) * (1 + pool.max_resubmit)
        max_ticks = int(total_exec * per_exec / pool.n_workers) + 200
    plans = {}
    exec_counts = {}
    t = 0
    while not orch.all_terminal():
        if t > max_ticks:
            raise MaldistillError(f"simulation did not terminate within {max_ticks} ticks")
        for worker_id in sorted(orch.workers):
            worker = orch.workers[worker_id]
            if worker.health != "up":
                continue
            plan = plans.get(worker_id)
            if worker.job_id is None or plan is None:
                orch.heartbeat(worker_id, t)
                continue
            finish_t, crash_t = plan
            if crash_t is not None and t >= crash_t:
                continue  # silent: mid-execution crash, awaiting detection
            if t >= finish_t:
                sample = orch.jobs[worker.job_id].sample_id
                orch.complete(worker_id, t, result_path=f"results/{sample}.json")
                plans.pop(worker_id, None)
            else:
                orch.heartbeat(worker_id, t)
        for event in orch.monitor_tick(t):
            if event["transition"] == "crashed":
                plans.pop(event["entity"], None)
            elif event["transition"] == "assigned":
                worker_id = event["worker"]
                job = orch.jobs[event["entity"]]
                k = exec_counts.get(job.sample_id, 0)
                exec_counts[job.sample_id] = k + 1
                if crash_schedule is not None and job.sample_id in crash_schedule:
                    sched = crash_schedule[job.sample_id]
                    crashes = bool(sched[k]) if k < len(sched) else False
                else:
                    crashes = bool(rng.random() < crash_prob)
                crash_t = t + max(1, exec_ticks // 2) if crashes else None
                plans[worker_id] = (t + exec_ticks, crash_t)
        t += 1
    return SimulationResult(jobs=dict(orch.jobs), events=list(orch.events), ticks=t)
