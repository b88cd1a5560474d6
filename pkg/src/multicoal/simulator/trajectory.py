"""Piecewise-constant sample paths."""
from __future__ import annotations

import bisect
import dataclasses
from typing import Any, NamedTuple

from .partition import TypedPartition

COLOUR_CHANGE = "colour_change"
MERGER = "merger"
KILL = "kill"


class Event(NamedTuple):
    """
    One effective transition. ``k`` counts the participating blocks per
    colour (for killing events: blocks removed); ``state`` is the state
    right after the event. ``target`` is -1 for killing events.
    """

    time: float
    kind: str
    target: int
    k: tuple[int, ...]
    state: Any


def lump(state) -> tuple[int, ...]:
    if isinstance(state, TypedPartition):
        return state.counts()
    return tuple(state)


@dataclasses.dataclass
class Trajectory:
    initial: Any
    events: list[Event]
    t_max: float

    @property
    def times(self) -> list[float]:
        return [e.time for e in self.events]

    @property
    def final(self):
        return self.events[-1].state if self.events else self.initial

    def state_at(self, t: float):
        """State at time ``t`` (right-continuous)."""
        if t < 0 or t > self.t_max:
            raise ValueError(f"t={t} outside [0, {self.t_max}]")
        idx = bisect.bisect_right(self.times, t)
        return self.events[idx - 1].state if idx else self.initial

    def counts_at(self, t: float) -> tuple[int, ...]:
        return lump(self.state_at(t))

    def validate(self) -> None:
        """Check time ordering and the per-event count bookkeeping."""
        prev_t = 0.0
        prev = lump(self.initial)
        for e in self.events:
            if not (e.time > prev_t or (prev_t == 0.0 and e.time >= 0)) or e.time > self.t_max:
                raise AssertionError(f"event times not increasing at {e.time}")
            cur = lump(e.state)
            if sum(cur) > sum(prev):
                raise AssertionError("total block count increased")
            if e.kind == KILL:
                expected = prev[0] - e.k[0]
                if cur != (expected,):
                    raise AssertionError("killing bookkeeping mismatch")
            else:
                expected = [p - kj for p, kj in zip(prev, e.k)]
                expected[e.target] += 1
                if tuple(expected) != cur:
                    raise AssertionError(f"event {e} does not map {prev} to {cur}")
                if e.kind == MERGER and sum(prev) - sum(cur) != sum(e.k) - 1:
                    raise AssertionError("merger changed total by the wrong amount")
            prev_t, prev = e.time, cur
