"""Per-item phase timing (analysis / inference / retrieval)."""

from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager

PHASES = ("analysis", "inference", "retrieval")


class Timings:
    """Accumulates wall-clock seconds per phase.

    Spans must not nest, so the phase totals are disjoint and their sum
    never exceeds the item's total time.
    """

    def __init__(self):
        self.spans: dict[str, float] = defaultdict(float)
        self._open: str | None = None

    @contextmanager
    def span(self, name: str):
        if self._open is not None:
            # Already inside a phase: charge the time there.
            yield
            return
        self._open = name
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.spans[name] += time.perf_counter() - t0
            self._open = None

    def get(self, name: str) -> float:
        return self.spans.get(name, 0.0)

    def as_dict(self) -> dict[str, float]:
        return {p: self.get(p) for p in PHASES}
