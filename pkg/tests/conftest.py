"""
Pytest configuration for all tests.

Shared fixtures live in tests/_utilities.py and are re-exported here so
every test directory sees them. The JobManager singleton is dropped
around each test so runs never leak into one another.
"""

import pytest

from tests._utilities import four_atoms, rng  # noqa: F401


@pytest.fixture(autouse=True)
def _job_manager():
    """Fresh JobManager state for every test."""
    from tchakaloff.backend.manager import JobManager

    JobManager.reset()
    try:
        yield
    finally:
        JobManager.reset()


@pytest.fixture
def write_text(tmp_path):
    """Write `text` to tmp_path/name and return the path as a string."""

    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write
