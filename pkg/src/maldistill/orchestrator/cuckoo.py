"""Client contract for a real sandbox backend over its REST submission API.

A backend drives the orchestrator through three events: heartbeat,
completed(result), and crashed. This client maps that contract onto the
HTTP endpoints of a sandbox host: the sample goes up as a multipart file,
task status is polled, and the finished report is fetched as JSON.
Endpoint paths are configurable to track deployment differences. The
class is an integration surface only; nothing in the test suite calls
the network.
"""

from __future__ import annotations

import json
import urllib.request
import uuid
from dataclasses import dataclass


@dataclass
class SandboxEndpoints:
    base_url: str
    submit_path: str = "/tasks/create/file"
    status_path: str = "/tasks/view/{task_id}"
    report_path: str = "/tasks/report/{task_id}"


class CuckooClient:
    """start(job) -> ack; poll() -> orchestrator events for outstanding tasks."""

    def __init__(self, endpoints: SandboxEndpoints, timeout=30.0):
        self.endpoints = endpoints
        self.timeout = timeout
        self.tasks = {}

    def start(self, job, sample_bytes):
        """Upload the sample; returns the backend task id as the ack."""
        boundary = uuid.uuid4().hex
        body = (
            f"--{boundary}\r\n"
            f'Content-Disposition: form-data; name="file"; filename="{job.sample_id}"\r\n'
            "Content-Type: application/octet-stream\r\n\r\n"
        ).encode() + sample_bytes + f"\r\n--{boundary}--\r\n".encode()
        req = urllib.request.Request(
            self.endpoints.base_url + self.endpoints.submit_path,
            data=body,
            headers={"Content-Type": f"multipart/form-data; boundary={boundary}"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            ack = json.loads(resp.read())
        task_id = ack["task_id"]
        self.tasks[job.job_id] = task_id
        return task_id

    def poll(self):
        """One status sweep; yields (job_id, event, payload) tuples.

        Event is "heartbeat" while a task is pending or running,
        "completed" with the report JSON once finished, and "crashed" when
        the backend reports failure or becomes unreachable.
        """
        events = []
        for job_id, task_id in list(self.tasks.items()):
            url = self.endpoints.base_url + self.endpoints.status_path.format(task_id=task_id)
            try:
                with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                    status = json.loads(resp.read())["task"]["status"]
            except Exception:
                events.append((job_id, "crashed", None))
                del self.tasks[job_id]
                continue
            if status in ("pending", "running", "processing"):
                events.append((job_id, "heartbeat", None))
            elif status == "reported":
                events.append((job_id, "completed", self.fetch_report(task_id)))
                del self.tasks[job_id]
            else:
                events.append((job_id, "crashed", None))
                del self.tasks[job_id]
        return events

    def fetch_report(self, task_id):
        url = self.endpoints.base_url + self.endpoints.report_path.format(task_id=task_id)
        with urllib.request.urlopen(url, timeout=self.timeout) as resp:
            return json.loads(resp.read())
