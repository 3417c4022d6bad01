"""
Simple in-memory job pool for replicate runs.
"""

import logging
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from tqdm import tqdm

logger = logging.getLogger(__name__)


class JobStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ReplicateJob:
    id: str
    payload: Dict[str, Any]
    status: JobStatus
    created_at: float
    started_at: Optional[float] = None
    completed_at: Optional[float] = None
    result: Any = None
    error: Optional[str] = None
    exception: Optional[BaseException] = None


class ReplicatePool:
    """Runs independent jobs on a thread pool and returns them in submission order."""

    def __init__(self, max_workers: Optional[int] = None, progress: bool = False, desc: str = "replicates"):
        self.max_workers = max_workers
        self.progress = progress
        self.desc = desc
        self.jobs: Dict[str, ReplicateJob] = {}

    def submit_job(self, payload: Dict[str, Any]) -> str:
        """
        Register a job with the pool.

        Args:
            payload: Keyword data handed to the job function

        Returns:
            Job ID
        """
        job_id = str(uuid.uuid4())
        self.jobs[job_id] = ReplicateJob(
            id=job_id,
            payload=payload,
            status=JobStatus.PENDING,
            created_at=time.time(),
        )
        return job_id

    def _process(self, job: ReplicateJob, fn: Callable[[Dict[str, Any]], Any]) -> ReplicateJob:
        job.status = JobStatus.RUNNING
        job.started_at = time.time()
        try:
            job.result = fn(job.payload)
            job.status = JobStatus.COMPLETED
        except Exception as e:
            job.status = JobStatus.FAILED
            job.error = str(e)
            job.exception = e
            logger.warning("job %s failed: %s", job.id, e)
        job.completed_at = time.time()
        return job

    def run_all(self, payloads: List[Dict[str, Any]], fn: Callable[[Dict[str, Any]], Any]) -> List[ReplicateJob]:
        """
        Run ``fn`` on every payload.

        Failures are captured on the job rather than raised. The returned list
        follows the order of ``payloads`` whatever the completion order.
        """
        ids = [self.submit_job(payload) for payload in payloads]
        ordered = [self.jobs[i] for i in ids]
        bar = tqdm(total=len(ordered), desc=self.desc, disable=not self.progress, leave=False)

        if self.max_workers == 1:
            for job in ordered:
                self._process(job, fn)
                bar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                futures = [executor.submit(self._process, job, fn) for job in ordered]
                for future in futures:
                    future.result()
                    bar.update(1)
        bar.close()
        return ordered
