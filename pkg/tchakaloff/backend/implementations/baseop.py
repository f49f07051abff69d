from __future__ import annotations

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Union

from tchakaloff.backend.measure import (
    ComplexMomentSequence,
    DiscreteMeasure,
    MomentVector,
    read_measure,
)

if TYPE_CHECKING:
    from tchakaloff.cli import RunConfig


@dataclass
class OpResult:
    """
    Outcome of one op on one source. `rule` is written as measure CSV and
    `moments` as moment JSON when the CLI has somewhere to put them.
    """

    report: Dict[str, Any]
    summary: str
    exit_code: int = 0
    rule: Optional[DiscreteMeasure] = None
    moments: Optional[Union[MomentVector, ComplexMomentSequence]] = None


class BaseOp(ABC):
    """
    Abstract base class for subcommand implementations.

    An op is built once per invocation from the resolved RunConfig; run() is
    then called once per source, possibly from several worker threads, so
    implementations keep no per-source state on self.
    """

    config: "RunConfig"

    def __init__(self, config: "RunConfig"):
        self.config = config

    def sources(self) -> List[str]:
        """The independent work items, one job each. Defaults to the --input files."""
        if not self.config.inputs:
            raise ValueError(f"{self.name} needs at least one --input file")
        return list(self.config.inputs)

    @abstractmethod
    def run(self, source: str) -> OpResult:
        """
        Process one source.
        :param source: an input path (or a named item for ops without input files)
        """

    @property
    @abstractmethod
    def name(self) -> str:
        """
        Return the subcommand name.
        """

    def cleanup(self):
        """Hook for implementation-specific cleanup after every source has run."""

    @staticmethod
    def read_measure_file(path: str) -> DiscreteMeasure:
        """Read a measure, choosing JSON or CSV by file extension."""
        fmt = "json" if os.path.splitext(str(path))[1].lower() == ".json" else "csv"
        return read_measure(path, format=fmt)

    @staticmethod
    def stem(source: str) -> str:
        """File-name stem used for per-source output paths."""
        return os.path.splitext(os.path.basename(str(source)))[0]
