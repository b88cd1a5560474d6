"""
Merger rates ``lambda_{b,k->i}`` and the jump-chain transition table.

``lambda_{b,k->i}`` is the rate at which one specific collection of ``k``
blocks (``k_j`` of type ``j``) out of ``b`` blocks merges into a single
type ``i`` block::

    lambda_{b,k->i} = sum_{j != i} 1{k = e_j} rho_{j->i}
                      + 1{k = 2 e_i} rho_{ii->i}
                      + int s^k (1 - s)^(b - k) Q_{->i}(ds)

with ``0^0 = 1`` in the product.
"""
from __future__ import annotations

import dataclasses
import math
import numpy as np

from .measures import MergerMeasureSet

BlockCounts = tuple[int, ...]

DEFAULT_CAP = 10 ** 6
_CHUNK = 1 << 20


class TableTooLarge(RuntimeError):
    """The exact transition enumeration would exceed its size cap."""


def as_counts(n, d: int | None = None) -> BlockCounts:
    """Normalize to a tuple of non-negative ints."""
    out = tuple(int(x) for x in n)
    if any(x < 0 for x in out) or any(int(x) != x for x in n):
        raise ValueError(f"block counts must be non-negative integers, got {n!r}")
    if d is not None and len(out) != d:
        raise ValueError(f"expected {d} block counts, got {len(out)}")
    return out


def _validate(m: MergerMeasureSet, b, k, i) -> tuple[BlockCounts, BlockCounts]:
    b = as_counts(b, m.d)
    k = as_counts(k, m.d)
    if not (0 <= i < m.d):
        raise IndexError(f"type {i} out of range for d={m.d}")
    if any(kj > bj for kj, bj in zip(k, b)):
        raise ValueError(f"k={k} is not dominated by b={b}")
    if sum(k) == 0 or (sum(k) == 1 and k[i] == 1):
        raise ValueError(f"k={k} is 0 or e_{i}; no transition")
    return b, k


def merger_rate(m: MergerMeasureSet, b, k, i: int) -> float:
    """Exact ``lambda_{b,k->i}`` for atomic merger measures."""
    b, k = _validate(m, b, k, i)
    total = 0.0
    if sum(k) == 1:
        j = k.index(1)
        total += float(m.rho_change[j, i])
    if sum(k) == 2 and k[i] == 2:
        total += float(m.rho_pair[i])
    q = m.q_measures[i]
    for w, s in zip(q.weights, q.points):
        term = float(w)
        for sj, kj, bj in zip(s, k, b):
            term *= float(sj) ** kj * (1.0 - float(sj)) ** (bj - kj)
        total += term
    return total


def merger_rates(m: MergerMeasureSet, b: np.ndarray, k: np.ndarray, i: int) -> np.ndarray:
    """
    Vectorized :func:`merger_rate` over rows of ``(N, d)`` integer arrays.

    Rows must satisfy the same preconditions; they are not re-checked.
    """
    b = np.asarray(b, dtype=np.int64).reshape(-1, m.d)
    k = np.asarray(k, dtype=np.int64).reshape(-1, m.d)
    size = k.sum(axis=1)
    out = np.zeros(len(b))
    single = size == 1
    if np.any(single):
        j = np.argmax(k[single], axis=1)
        out[single] += m.rho_change[j, i]
    out[(size == 2) & (k[:, i] == 2)] += m.rho_pair[i]
    q = m.q_measures[i]
    if len(q):
        s = q.points[None, :, :]
        step = max(1, _CHUNK // (len(q) * m.d))
        for lo in range(0, len(b), step):
            kk = k[lo:lo + step, None, :]
            rest = (b[lo:lo + step] - k[lo:lo + step])[:, None, :]
            out[lo:lo + step] += np.prod(s ** kk * (1.0 - s) ** rest, axis=2) @ q.weights
    return out


def recursion_residual(m: MergerMeasureSet, b, k, i: int, j: int) -> float:
    """``lambda_{b,k->i} - lambda_{b+e_j,k->i} - lambda_{b+e_j,k+e_j->i}``."""
    b = list(as_counts(b, m.d))
    k = list(as_counts(k, m.d))
    if not (0 <= j < m.d):
        raise IndexError(f"type {j} out of range for d={m.d}")
    b1 = b.copy()
    b1[j] += 1
    k1 = k.copy()
    k1[j] += 1
    return merger_rate(m, b, k, i) - merger_rate(m, b1, k, i) - merger_rate(m, b1, k1, i)


@dataclasses.dataclass(frozen=True)
class TransitionTable:
    """
    All transition classes ``(k, i)`` out of state ``n`` with positive rate.

    Row ``c`` says: any of ``multiplicity[c]`` distinct collections of
    ``ks[c]`` blocks merges into one block of type ``targets[c]``, each at
    ``rates[c]``; so the class fires at ``class_rates[c]``.
    """

    n: BlockCounts
    ks: np.ndarray
    targets: np.ndarray
    rates: np.ndarray
    class_rates: np.ndarray

    def __len__(self):
        return len(self.targets)

    @property
    def multiplicity(self) -> tuple[int, ...]:
        """Exact ``prod_j binom(n_j, k_j)`` per class."""
        return tuple(
            math.prod(math.comb(nj, int(kj)) for nj, kj in zip(self.n, row))
            for row in self.ks
        )

    @property
    def total_rate(self) -> float:
        return float(self.class_rates.sum())

    def next_states(self) -> np.ndarray:
        """State after each class fires: ``n - k + e_i``."""
        nxt = np.asarray(self.n)[None, :] - self.ks
        nxt[np.arange(len(self)), self.targets] += 1
        return nxt

    def is_colour_change(self) -> np.ndarray:
        return self.ks.sum(axis=1) == 1


def _comb_row(n: int) -> np.ndarray:
    return np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)


def transition_table(m: MergerMeasureSet, n, cap: int = DEFAULT_CAP) -> TransitionTable:
    """Enumerate the jump-chain classes out of state ``n``."""
    n = as_counts(n, m.d)
    if sum(n) < 1:
        raise ValueError("need at least one block")
    size = math.prod(x + 1 for x in n) * m.d
    if size > cap:
        raise TableTooLarge(
            f"{size} candidate classes exceed cap {cap}; use the atomic-event engine"
        )
    d = m.d
    ks = np.indices([x + 1 for x in n]).reshape(d, -1).T
    combs = [_comb_row(x) for x in n]
    mult = np.ones(len(ks))
    for j in range(d):
        mult *= combs[j][ks[:, j]]
    b = np.broadcast_to(np.asarray(n), ks.shape)
    size_k = ks.sum(axis=1)
    out_k, out_i, out_mult, out_rate = [], [], [], []
    for i in range(d):
        valid = (size_k > 0) & ~((size_k == 1) & (ks[:, i] == 1))
        kk = ks[valid]
        rates = merger_rates(m, b[valid], kk, i)
        pos = rates > 0
        out_k.append(kk[pos])
        out_i.append(np.full(pos.sum(), i))
        out_mult.append(mult[valid][pos])
        out_rate.append(rates[pos])
    kk = np.concatenate(out_k).astype(np.int64)
    targets = np.concatenate(out_i).astype(np.int64)
    rates = np.concatenate(out_rate)
    mult_f = np.concatenate(out_mult)
    return TransitionTable(n, kk, targets, rates, mult_f * rates)
