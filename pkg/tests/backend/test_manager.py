"""
Tests for JobManager, the singleton that runs the per-input jobs of one
CLI invocation.
"""

import threading
import time

import pytest

from tchakaloff.backend.manager import Job, JobManager, JobResult


def test_double_init_raises():
    """Constructing a second manager without resetting raises."""
    JobManager()
    with pytest.raises(RuntimeError, match="already initialised"):
        JobManager()


def test_get_without_init_raises():
    with pytest.raises(RuntimeError, match="not initialised"):
        JobManager.get()


def test_get_returns_singleton():
    mgr = JobManager(jobs=2)
    assert JobManager.get() is mgr


def test_reset_allows_a_fresh_manager():
    first = JobManager()
    JobManager.reset()
    assert JobManager() is not first


@pytest.mark.parametrize("jobs", [0, -3])
def test_invalid_worker_count(jobs):
    with pytest.raises(ValueError, match="jobs must be >= 1"):
        JobManager(jobs=jobs)
    # a failed constructor never registers itself
    with pytest.raises(RuntimeError):
        JobManager.get()


def test_sequential_run_keeps_attach_order():
    mgr = JobManager()
    for name in ("a", "b", "c"):
        mgr.attach(Job(name, lambda name=name: name.upper()))
    assert len(mgr) == 3
    results = mgr.run()
    assert [r.name for r in results] == ["a", "b", "c"]
    assert [r.value for r in results] == ["A", "B", "C"]
    assert all(r.ok for r in results)


def test_errors_are_captured_per_job():
    """A failing job leaves the others untouched"""
    mgr = JobManager()

    def boom():
        raise ValueError("bad input")

    mgr.attach(Job("good", lambda: 1))
    mgr.attach(Job("bad", boom))
    good, bad = mgr.run()
    assert good.ok and good.value == 1
    assert not bad.ok
    assert isinstance(bad.error, ValueError)
    assert str(bad.error) == "bad input"


def test_pool_results_in_submission_order():
    """Later jobs finish first but results come back in attach order"""
    mgr = JobManager(jobs=3)
    for k, delay in enumerate([0.05, 0.02, 0.0]):
        mgr.attach(Job(f"job{k}", lambda k=k, delay=delay: time.sleep(delay) or k))
    assert [r.value for r in mgr.run()] == [0, 1, 2]


def test_pool_uses_worker_threads():
    mgr = JobManager(jobs=2)
    seen = set()
    barrier = threading.Barrier(2, timeout=5)

    def work():
        barrier.wait()
        seen.add(threading.get_ident())

    mgr.attach(Job("x", work))
    mgr.attach(Job("y", work))
    results = mgr.run()
    assert all(r.ok for r in results)
    assert len(seen) == 2


def test_empty_run():
    assert JobManager(jobs=4).run() == []


def test_job_result_default_is_ok():
    assert JobResult("x").ok
