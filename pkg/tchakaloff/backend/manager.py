"""
JobManager: lifecycle owner for the independent jobs of one CLI invocation.

Each input file becomes one Job. Jobs never share state and each writes its
own report path, so they may run in a thread pool without interleaving.

Singleton-of-one: ``JobManager(jobs=...)`` registers itself;
``JobManager.get()`` returns the same instance from anywhere.
``reset()`` is the test escape hatch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, ClassVar, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class Job:
    name: str
    fn: Callable[[], Any]


@dataclass
class JobResult:
    name: str
    value: Any = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class JobManager:
    """
    Singleton holding the job list. run() executes every attached job and
    returns one JobResult per job in attach order; a job's exception is
    captured in its result rather than raised.
    """

    _instance: ClassVar["JobManager | None"] = None

    def __init__(self, jobs: int = 1):
        if JobManager._instance is not None:
            raise RuntimeError(
                "JobManager already initialised; call reset() first or "
                "use JobManager.get() to retrieve the existing instance"
            )
        if jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {jobs}")
        self.jobs = jobs
        self._jobs: List[Job] = []
        JobManager._instance = self

    @classmethod
    def get(cls) -> "JobManager":
        """Return the singleton. Raises if no manager has been initialised."""
        if cls._instance is None:
            raise RuntimeError("JobManager not initialised; construct one before attaching jobs")
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        cls._instance = None

    def attach(self, job: Job) -> None:
        self._jobs.append(job)

    def __len__(self) -> int:
        return len(self._jobs)

    def _execute(self, job: Job) -> JobResult:
        logger.debug(f"Job {job.name}: start")
        try:
            return JobResult(job.name, value=job.fn())
        except Exception as e:
            logger.debug(f"Job {job.name}: {type(e).__name__}: {e}")
            return JobResult(job.name, error=e)

    def run(self) -> List[JobResult]:
        if self.jobs == 1 or len(self._jobs) <= 1:
            return [self._execute(job) for job in self._jobs]
        workers = min(self.jobs, len(self._jobs))
        logger.debug(f"Running {len(self._jobs)} job(s) on {workers} worker(s)")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order
            return list(pool.map(self._execute, self._jobs))
