"""
Independent reference computations used as test oracles.

Nothing here imports the package's numerical code: rates use exact
rational arithmetic, laws use hand-built generators, and minima use brute
force.
"""
from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import numpy as np
from scipy import linalg


def rate_fraction(rho_change, rho_pair, atoms_by_target, b, k, i) -> Fraction:
    """Exact merger rate from rational inputs.

    ``atoms_by_target[i]`` is a list of ``(w, s)`` with rational entries.
    """
    total = Fraction(0)
    if sum(k) == 1:
        j = k.index(1)
        total += Fraction(rho_change[j][i])
    if sum(k) == 2 and k[i] == 2:
        total += Fraction(rho_pair[i])
    for w, s in atoms_by_target[i]:
        term = Fraction(w)
        for sj, kj, bj in zip(s, k, b):
            term *= Fraction(sj) ** kj * (1 - Fraction(sj)) ** (bj - kj)
        total += term
    return total


def kingman_death_law(n0: int, rho: float, t: float) -> np.ndarray:
    """Law of the single-type Kingman block count at ``t`` (index = count)."""
    gen = np.zeros((n0 + 1, n0 + 1))
    for n in range(2, n0 + 1):
        r = rho * n * (n - 1) / 2
        gen[n, n - 1] = r
        gen[n, n] = -r
    return linalg.expm(gen * t)[n0]


def kingman_reference_mean(n0: int, rho: float, t: float, replicas: int, seed: int):
    """Plain-Python Monte Carlo of the Kingman count (own RNG, own loop)."""
    rnd = random.Random(seed)
    vals = []
    for _ in range(replicas):
        n, clock = n0, 0.0
        while n > 1:
            clock += rnd.expovariate(rho * n * (n - 1) / 2)
            if clock > t:
                break
            n -= 1
        vals.append(n)
    vals = np.array(vals, dtype=float)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(replicas)


def psi_total_bruteforce(rho_pair, atoms_by_target, x):
    """Drift form of the total processing speed by direct loops."""
    val = 0.0
    for r, xi in zip(rho_pair, x):
        val += r * xi * (xi - 1) / 2
    for atoms in atoms_by_target:
        for w, s in atoms:
            prod = 1.0
            for sj, xj in zip(s, x):
                prod *= 1.0 if xj == 0 else (1 - sj) ** xj
            val += w * (sum(a * b for a, b in zip(x, s)) - 1 + prod)
    return val


def omega_grid(f, total: float, d: int, points: int = 2001) -> float:
    """Brute-force minimum of ``f`` over a grid of the scaled simplex."""
    if d == 1:
        return f(np.array([total]))
    if d == 2:
        xs = np.linspace(0.0, total, points)
        return min(f(np.array([a, total - a])) for a in xs)
    best = math.inf
    m = int(round(points ** 0.5))
    for a in np.linspace(0, total, m):
        for b in np.linspace(0, total - a, m):
            best = min(best, f(np.array([a, b, total - a - b])))
    return best


def kingman_drift_w_inf(t):
    """Closed form for ``t = int_w^inf 2 dq / (q (q - 1))``."""
    return 1.0 / (1.0 - np.exp(-np.asarray(t) / 2.0))


def lumped_law(rho_change, rho_pair, atoms_by_target, n0, t):
    """
    Exact law of the lumped block counts at ``t`` from a generator built by
    direct enumeration of every ``(k, i)``; returns ``{state: probability}``.
    """
    d = len(n0)
    states, frontier = {tuple(n0): 0}, [tuple(n0)]
    edges = []
    while frontier:
        n = frontier.pop()
        for k in itertools.product(*[range(x + 1) for x in n]):
            for i in range(d):
                if sum(k) == 0 or (sum(k) == 1 and k[i] == 1):
                    continue
                r = float(rate_fraction(rho_change, rho_pair, atoms_by_target, n, k, i))
                if r == 0:
                    continue
                mult = math.prod(math.comb(a, b) for a, b in zip(n, k))
                nxt = list(a - b for a, b in zip(n, k))
                nxt[i] += 1
                nxt = tuple(nxt)
                if nxt not in states:
                    states[nxt] = len(states)
                    frontier.append(nxt)
                edges.append((n, nxt, mult * r))
    gen = np.zeros((len(states), len(states)))
    for a, b, r in edges:
        gen[states[a], states[b]] += r
        gen[states[a], states[a]] -= r
    row = linalg.expm(gen * t)[states[tuple(n0)]]
    return {s: float(row[idx]) for s, idx in states.items()}
