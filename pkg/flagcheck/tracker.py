"""Evaluation counting and timing for measure calls."""

import time
from typing import Callable, TypeVar

T = TypeVar("T")


class EvaluationTracker:
    """Track how many measure evaluations ran and how long they took, per measure id."""

    def __init__(self, budget: int | None = None):
        self.budget = budget
        self.call_count: int = 0
        self.total_ms: float = 0.0
        self.max_ms: float = 0.0
        self.per_measure: dict[str, int] = {}

    @property
    def exhausted(self) -> bool:
        return self.budget is not None and self.call_count >= self.budget

    @property
    def remaining(self) -> int | None:
        if self.budget is None:
            return None
        return max(0, self.budget - self.call_count)

    def timed(self, measure_id: str, fn: Callable[[], T]) -> T:
        """Run fn, counting it as one evaluation of measure_id."""
        start = time.perf_counter()
        result = fn()
        elapsed_ms = (time.perf_counter() - start) * 1000

        self.call_count += 1
        self.total_ms += elapsed_ms
        self.max_ms = max(self.max_ms, elapsed_ms)
        self.per_measure[measure_id] = self.per_measure.get(measure_id, 0) + 1
        return result

    def summary(self) -> dict:
        """Counts plus timing stats, avg included."""
        return {
            "call_count": self.call_count,
            "per_measure": dict(sorted(self.per_measure.items())),
            "total_ms": round(self.total_ms, 2),
            "max_ms": round(self.max_ms, 2),
            "avg_ms": round(self.total_ms / self.call_count, 2) if self.call_count else 0.0,
        }
