"""Independent replicas with one random stream each, and their summary."""
from __future__ import annotations

import collections
import concurrent.futures
import dataclasses
from typing import Callable

import numpy as np
from scipy import stats

from .rng import RngSpec
from .trajectory import Trajectory, lump


@dataclasses.dataclass(frozen=True)
class EnsembleSummary:
    """
    Per-replica statistic values plus summaries.

    ``values`` has shape ``(replicas,)`` for scalar statistics and
    ``(replicas, m)`` for vector ones; summaries are taken along axis 0.
    """

    values: np.ndarray
    seed: int

    @property
    def replicas(self) -> int:
        return len(self.values)

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def var(self):
        if self.replicas < 2:
            return np.zeros_like(self.mean, dtype=float)
        return self.values.var(axis=0, ddof=1)

    @property
    def se(self):
        return np.sqrt(self.var / self.replicas)

    def ci(self, level: float = 0.95):
        z = stats.norm.ppf(0.5 + level / 2)
        return self.mean - z * self.se, self.mean + z * self.se

    def distribution(self) -> collections.Counter:
        """Empirical counts of each distinct value (rows for vector statistics)."""
        if self.values.ndim == 1:
            return collections.Counter(self.values.tolist())
        return collections.Counter(tuple(r) for r in self.values.tolist())


def _run_range(simulate, statistic, seed, lo, hi):
    return [statistic(simulate(RngSpec(seed, r))) for r in range(lo, hi)]


def ensemble(simulate: Callable[[RngSpec], Trajectory], replicas: int,
             statistic: Callable[[Trajectory], object], seed: int = 0,
             workers: int = 1) -> EnsembleSummary:
    """
    Run ``replicas`` independent copies; replica ``r`` uses ``RngSpec(seed, r)``.

    Results depend only on ``seed`` and the replica index, never on
    ``workers``. With ``workers > 1`` both callables must be picklable.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    if workers <= 1:
        vals = _run_range(simulate, statistic, seed, 0, replicas)
    else:
        bounds = np.linspace(0, replicas, workers + 1).astype(int)
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_run_range, simulate, statistic, seed, int(a), int(b))
                    for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            vals = [v for f in futs for v in f.result()]
    return EnsembleSummary(np.asarray(vals, dtype=float), seed)


@dataclasses.dataclass(frozen=True)
class CountsAt:
    """Lumped count vector at time ``t``."""

    t: float

    def __call__(self, traj: Trajectory):
        return lump(traj.state_at(self.t))


@dataclasses.dataclass(frozen=True)
class TotalsAt:
    """Total number of blocks at each of ``times``."""

    times: tuple[float, ...]

    def __call__(self, traj: Trajectory):
        return [sum(lump(traj.state_at(t))) for t in self.times]


@dataclasses.dataclass(frozen=True)
class FirstEventTime:
    """Time of the first event, or ``t_max`` if none occurred."""

    def __call__(self, traj: Trajectory):
        return traj.events[0].time if traj.events else traj.t_max
