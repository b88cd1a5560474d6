"""The type-i projected coalescent with killing, on single-type counts."""
from __future__ import annotations

import bisect
import math

import numpy as np

from ..measures import MergerMeasureSet, kill_measure, project_measure
from .rng import as_generator
from .trajectory import KILL, MERGER, Event, Trajectory


class KilledProjected:
    """
    Type-``i`` blocks coalesce under ``(rho_{ii->i}, Qbar_{->i})``; with
    ``killing=True`` each block is also removed at rate
    ``sum_{j != i} rho_{i->j}`` and every atom ``(w, u)`` of ``W_i`` rings
    at rate ``w`` and removes each block independently with probability ``u``.

    With ``killing=False`` this is the plain single-type coalescent
    ``kappa``.
    """

    def __init__(self, m: MergerMeasureSet, i: int, killing: bool = True):
        proj = project_measure(m, i)
        self.i = i
        self.killing = killing
        self.rho = proj.rho
        self.qw = proj.q.weights
        self.qs = proj.q.points[:, 0]
        r, w = kill_measure(m, i)
        self.r = r
        self.single_kill = m.out_rate(i) if killing else 0.0
        self.ww = w.weights if killing else np.zeros(0)
        self.wu = w.points[:, 0] if killing else np.zeros(0)
        self._cache: dict[int, tuple] = {}

    @staticmethod
    def _binom_mix(n: int, ks: np.ndarray, w: np.ndarray, s: np.ndarray) -> np.ndarray:
        """``binom(n, k) sum_a w_a s_a^k (1 - s_a)^(n - k)`` for each ``k``."""
        if len(w) == 0:
            return np.zeros(len(ks))
        comb = np.array([math.comb(n, int(k)) for k in ks], dtype=float)
        per = s[None, :] ** ks[:, None] * (1.0 - s[None, :]) ** (n - ks)[:, None]
        return comb * (per @ w)

    def entry(self, n: int):
        hit = self._cache.get(n)
        if hit is not None:
            return hit
        rates, nxt, info = [], [], []
        if n >= 2:
            ks = np.arange(2, n + 1)
            merge = self._binom_mix(n, ks, self.qw, self.qs)
            merge[0] += self.rho * n * (n - 1) / 2
            for k, r in zip(ks.tolist(), merge.tolist()):
                if r > 0:
                    rates.append(r)
                    nxt.append((n - k + 1,))
                    info.append((MERGER, 0, (k,)))
        if n >= 1:
            ks = np.arange(1, n + 1)
            kill = self._binom_mix(n, ks, self.ww, self.wu)
            kill[0] += self.single_kill * n
            for k, r in zip(ks.tolist(), kill.tolist()):
                if r > 0:
                    rates.append(r)
                    nxt.append((n - k,))
                    info.append((KILL, -1, (k,)))
        cum = np.cumsum(rates).tolist() if rates else []
        hit = (cum[-1] if cum else 0.0, cum, nxt, info)
        self._cache[n] = hit
        return hit

    def run(self, n_i: int, t_max: float, rng) -> Trajectory:
        if int(n_i) != n_i or n_i < 1:
            raise ValueError("need a positive integer number of blocks")
        gen = as_generator(rng)
        n = (int(n_i),)
        events = []
        t = 0.0
        while True:
            total, cum, nxt, info = self.entry(n[0])
            if total <= 0.0:
                break
            u1, u2 = gen.random(2).tolist()
            t += -math.log1p(-u1) / total
            if t > t_max:
                break
            c = min(bisect.bisect_right(cum, u2 * total), len(cum) - 1)
            n = nxt[c]
            kind, target, k = info[c]
            events.append(Event(t, kind, target, k, n))
        return Trajectory((int(n_i),), events, t_max)

    def simulator(self, n_i: int, t_max: float):
        return _Bound(self, n_i, t_max)


class _Bound:
    def __init__(self, engine, n_i, t_max):
        self.engine, self.n_i, self.t_max = engine, n_i, t_max

    def __call__(self, rng):
        return self.engine.run(self.n_i, self.t_max, rng)


def simulate_projected_with_killing(m: MergerMeasureSet, i: int, n_i: int, t_max: float,
                                    rng, killing: bool = True) -> Trajectory:
    """Simulate the killed projected coalescent of type ``i`` (0-based)."""
    return KilledProjected(m, i, killing).run(n_i, t_max, rng)
