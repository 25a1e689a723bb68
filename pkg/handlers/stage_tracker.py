"""
Stage Tracker - Per-Stage Timing, Errors and Compile Budget
===========================================================

Compiles run as a list of stages (program stages, slice steps).
This module keeps:
- a wall-clock budget for the whole compile (TimeoutManager)
- status, error estimate and elapsed time per stage (StageTracker)
so reports can list per-stage errors and wall time.
"""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional
import logging

from config import get_config
from core.errors import CompileTimeoutError

logger = logging.getLogger(__name__)


class TimeoutManager:
    """
    Tracks elapsed time against a compile budget.

    Long loops call check() between units of work; once the budget is
    spent it raises CompileTimeoutError instead of running on.
    """

    def __init__(self, max_seconds: Optional[float] = None, warning_fraction: float = 0.8):
        """
        Args:
            max_seconds: Budget in seconds (default from NARROWFORGE_COMPILE_TIMEOUT)
            warning_fraction: Fraction of the budget after which a warning is logged once
        """
        self.max_seconds = float(max_seconds if max_seconds is not None
                                 else get_config().compile_timeout_seconds)
        self.warning_at = warning_fraction * self.max_seconds
        self.start_time: Optional[datetime] = None
        self._warned = False

    def start(self) -> 'TimeoutManager':
        self.start_time = datetime.now()
        self._warned = False
        logger.debug(f"Compile timer started: {self.max_seconds:.0f}s limit")
        return self

    def elapsed(self) -> float:
        if not self.start_time:
            return 0.0
        return (datetime.now() - self.start_time).total_seconds()

    def remaining(self) -> float:
        return max(0.0, self.max_seconds - self.elapsed())

    def is_expired(self) -> bool:
        return self.elapsed() >= self.max_seconds

    def check(self, context: str = "") -> None:
        """Raise CompileTimeoutError once the budget is spent."""
        elapsed = self.elapsed()
        if not self._warned and elapsed >= self.warning_at:
            self._warned = True
            logger.warning(f"Compile at {elapsed:.0f}s of {self.max_seconds:.0f}s budget {context}")
        if elapsed >= self.max_seconds:
            raise CompileTimeoutError(
                f"compile exceeded {self.max_seconds:.0f}s budget {context}".strip())

    def get_status(self) -> Dict[str, Any]:
        return {
            "elapsed_seconds": self.elapsed(),
            "remaining_seconds": self.remaining(),
            "is_expired": self.is_expired(),
        }


class StageStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class StageRecord:
    name: str
    status: StageStatus = StageStatus.PENDING
    error_estimate: Optional[float] = None
    budget: Optional[float] = None
    message: Optional[str] = None
    started: Optional[datetime] = None
    seconds: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "error_estimate": self.error_estimate,
            "budget": self.budget,
            "message": self.message,
            "seconds": round(self.seconds, 6),
            "details": self.details,
        }


class StageTracker:
    """
    Track multi-stage compilation with a shared wall-clock budget.
    """

    def __init__(self, max_seconds: Optional[float] = None):
        self.stages: List[StageRecord] = []
        self._index: Dict[str, StageRecord] = {}
        self.timeout = TimeoutManager(max_seconds=max_seconds)

    def start(self) -> 'StageTracker':
        self.timeout.start()
        return self

    def begin_stage(self, name: str, budget: Optional[float] = None) -> StageRecord:
        """Mark a stage as running (creates it on first use)."""
        if self.timeout.start_time is None:
            self.timeout.start()
        self.timeout.check(f"before stage '{name}'")
        record = self._index.get(name)
        if record is None:
            record = StageRecord(name)
            self.stages.append(record)
            self._index[name] = record
        record.status = StageStatus.RUNNING
        record.budget = budget
        record.started = datetime.now()
        logger.info(f"Starting stage: {name}")
        return record

    def complete_stage(self, name: str, error_estimate: Optional[float] = None, **details: Any) -> None:
        record = self._index[name]
        record.status = StageStatus.COMPLETED
        record.error_estimate = error_estimate
        record.details.update(details)
        record.seconds = (datetime.now() - record.started).total_seconds() if record.started else 0.0
        logger.info(f"Completed stage: {name} ({record.seconds:.2f}s)")

    def fail_stage(self, name: str, error: str) -> None:
        record = self._index[name]
        record.status = StageStatus.FAILED
        record.message = error
        record.seconds = (datetime.now() - record.started).total_seconds() if record.started else 0.0
        logger.error(f"Failed stage {name}: {error}")

    def check(self, context: str = "") -> None:
        self.timeout.check(context)

    def per_stage_errors(self) -> List[Optional[float]]:
        return [record.error_estimate for record in self.stages]

    def get_status(self) -> Dict[str, Any]:
        return {
            "stages": [record.to_dict() for record in self.stages],
            "timeout_status": self.timeout.get_status(),
        }
