"""Lumped jump-chain engine over block-count vectors (Gillespie direct method)."""
from __future__ import annotations

import bisect
import math
import weakref

from ..measures import MergerMeasureSet
from ..rates import DEFAULT_CAP, as_counts, transition_table
from .rng import as_generator
from .trajectory import COLOUR_CHANGE, MERGER, Event, Trajectory

_BUF = 64


class JumpChain:
    """
    Jump chain of ``m`` with a per-state cache of transition tables.

    A table is built the first time a state is visited and reused for every
    later visit, in this run or any other run of the same instance.
    """

    def __init__(self, m: MergerMeasureSet, cap: int = DEFAULT_CAP):
        self.m = m
        self.cap = cap
        self._cache: dict[tuple[int, ...], tuple] = {}

    def entry(self, n: tuple[int, ...]):
        """``(total, cumulative rates, next states, (kind, target, k) per class)``."""
        hit = self._cache.get(n)
        if hit is not None:
            return hit
        if sum(n) == 0:
            hit = (0.0, [], [], [])
        else:
            tab = transition_table(self.m, n, self.cap)
            cum = []
            acc = 0.0
            for r in tab.class_rates.tolist():
                acc += r
                cum.append(acc)
            nxt = [tuple(row) for row in tab.next_states().tolist()]
            info = [
                (COLOUR_CHANGE if sum(k) == 1 else MERGER, i, tuple(k))
                for k, i in zip(tab.ks.tolist(), tab.targets.tolist())
            ]
            hit = (acc, cum, nxt, info)
        self._cache[n] = hit
        return hit

    def run(self, n0, t_max: float, rng) -> Trajectory:
        n = as_counts(n0, self.m.d)
        if sum(n) < 1:
            raise ValueError("need at least one initial block")
        if not t_max >= 0:
            raise ValueError("t_max must be non-negative")
        gen = as_generator(rng)
        buf = gen.random(_BUF).tolist()
        pos = 0
        events = []
        t = 0.0
        initial = n
        while True:
            total, cum, nxt, info = self.entry(n)
            if total <= 0.0:
                break
            if pos + 2 > _BUF:
                buf = gen.random(_BUF).tolist()
                pos = 0
            u1, u2 = buf[pos], buf[pos + 1]
            pos += 2
            t += -math.log1p(-u1) / total
            if t > t_max:
                break
            c = bisect.bisect_right(cum, u2 * total)
            if c >= len(cum):
                c = len(cum) - 1
            n = nxt[c]
            kind, target, k = info[c]
            events.append(Event(t, kind, target, k, n))
        return Trajectory(initial, events, t_max)

    def simulator(self, n0, t_max: float):
        """A picklable ``rng -> Trajectory`` callable for :func:`ensemble`."""
        return _Bound(self, as_counts(n0, self.m.d), t_max)


class _Bound:
    def __init__(self, engine, n0, t_max):
        self.engine, self.n0, self.t_max = engine, n0, t_max

    def __call__(self, rng):
        return self.engine.run(self.n0, self.t_max, rng)


_chains: "weakref.WeakKeyDictionary[MergerMeasureSet, dict[int, JumpChain]]" = (
    weakref.WeakKeyDictionary()
)


def chain_for(m: MergerMeasureSet, cap: int = DEFAULT_CAP) -> JumpChain:
    per = _chains.setdefault(m, {})
    if cap not in per:
        per[cap] = JumpChain(m, cap)
    return per[cap]


def simulate_jump_chain(m: MergerMeasureSet, n0, t_max: float, rng,
                        cap: int = DEFAULT_CAP) -> Trajectory:
    """Simulate the lumped chain from ``n0`` up to ``t_max`` or absorption."""
    return chain_for(m, cap).run(n0, t_max, rng)
