"""Event-driven engine on labelled typed partitions."""
from __future__ import annotations

import bisect
import math
import weakref

from ..measures import MergerMeasureSet
from .partition import TypedPartition
from .rng import as_generator
from .trajectory import COLOUR_CHANGE, MERGER, Event, Trajectory


class _Plan:
    """Per-measure-set constants used by every labelled run."""

    def __init__(self, m: MergerMeasureSet):
        d = m.d
        self.d = d
        self.out = [m.out_rate(c) for c in range(d)]
        self.change_cum = []
        for c in range(d):
            row = m.rho_change[c].tolist()
            acc, cum = 0.0, []
            for r in row:
                acc += r
                cum.append(acc)
            self.change_cum.append(cum)
        self.pair = m.rho_pair.tolist()
        w, pts, tgt = [], [], []
        for i, q in enumerate(m.q_measures):
            w += q.weights.tolist()
            pts += q.points.tolist()
            tgt += [i] * len(q)
        self.atom_points = pts
        self.atom_targets = tgt
        acc, cum = 0.0, []
        for x in w:
            acc += x
            cum.append(acc)
        self.atom_weights = w
        self._effective: dict[tuple[int, ...], list[float]] = {}
        # A lone block of colour c can still move iff it can change colour,
        # directly or through an atom targeting another colour.
        self.lone_active = [
            self.out[c] > 0 or any(t != c and p[c] > 0 for p, t in zip(pts, tgt))
            for c in range(d)
        ]


    def effective_atoms(self, sizes: tuple[int, ...]) -> list[float]:
        """Cumulative effective ring rates of all atoms at block counts ``sizes``."""
        hit = self._effective.get(sizes)
        if hit is None:
            acc, hit = 0.0, []
            for w, s, i in zip(self.atom_weights, self.atom_points, self.atom_targets):
                acc += w * _effective_prob(_split(sizes, s), i)
                hit.append(acc)
            self._effective[sizes] = hit
        return hit


def _colour_split(n: int, s: float) -> tuple[float, float, float]:
    """``P(K = 0), P(K = 1), P(K >= 2)`` for ``K ~ Binomial(n, s)``."""
    if n == 0 or s == 0.0:
        return 1.0, 0.0, 0.0
    if s == 1.0:
        return 0.0, float(n == 1), float(n >= 2)
    l1p = math.log1p(-s)
    p0 = math.exp(n * l1p)
    p1 = n * s * math.exp((n - 1) * l1p)
    p2 = max(-math.expm1(n * l1p) - p1, 0.0) if n >= 2 else 0.0
    return p0, p1, p2


def _split(sizes, s):
    return [_colour_split(n, sc) for n, sc in zip(sizes, s)]


def _suffix_tables(split, target):
    """
    For each ``c``, the probabilities over colours ``c, c+1, ...`` that
    nobody joins, exactly one target-colour block joins, exactly one other
    block joins, or at least two join. Entry ``d`` is the empty suffix.
    """
    out = [(1.0, 0.0, 0.0, 0.0)]
    for c in range(len(split) - 1, -1, -1):
        p0, p1, p2 = split[c]
        z, ot, on, g = out[-1]
        many = p2 * (z + ot + on + g) + p1 * (ot + on + g) + p0 * g
        if c == target:
            out.append((p0 * z, p1 * z + p0 * ot, p0 * on, many))
        else:
            out.append((p0 * z, p0 * ot, p1 * z + p0 * on, many))
    return out[::-1]


def _effective_prob(split, target) -> float:
    _, _, on, g = _suffix_tables(split, target)[0]
    return on + g


def _binomial_at_least_two(gen, n: int, s: float, p2: float) -> int:
    if s == 1.0:
        return n
    if p2 > 0.25:
        while True:
            k = int(gen.binomial(n, s))
            if k >= 2:
                return k
    u = gen.random() * p2
    ratio = s / (1.0 - s)
    k = 2
    pmf = math.comb(n, 2) * s * s * (1.0 - s) ** (n - 2)
    acc = pmf
    while acc < u and k < n:
        pmf *= (n - k) / (k + 1) * ratio
        k += 1
        acc += pmf
    return k


def _sample_joiners(gen, sizes, s, target) -> list[int]:
    """Per-colour joiner counts of one ring, conditioned on the ring being effective."""
    split = _split(sizes, s)
    suffix = _suffix_tables(split, target)
    k = [0] * len(sizes)
    total, lone_target = 0, False
    for c, (p0, p1, p2) in enumerate(split):
        z, ot, on, g = suffix[c + 1]
        rest = z + ot + on + g

        def weight(add):
            tot = min(total + add, 2)
            if tot == 2:
                return rest
            if tot == 1:
                is_target = lone_target if total == 1 else c == target
                return ot + on + g if is_target else rest
            return on + g

        w = [p0 * weight(0), p1 * weight(1), p2 * weight(2)]
        u = gen.random() * (w[0] + w[1] + w[2])
        choice = 0 if u < w[0] else 1 if u < w[0] + w[1] or w[2] == 0.0 else 2
        if choice == 1:
            k[c] = 1
            if total == 0:
                lone_target = c == target
        elif choice == 2:
            k[c] = _binomial_at_least_two(gen, sizes[c], s[c], p2)
        total = min(total + k[c], 2)
    return k


_plans: "weakref.WeakKeyDictionary[MergerMeasureSet, _Plan]" = weakref.WeakKeyDictionary()


def _plan(m: MergerMeasureSet) -> _Plan:
    p = _plans.get(m)
    if p is None:
        p = _plans[m] = _Plan(m)
    return p


def _pick(cum: list[float], u: float) -> int:
    c = bisect.bisect_right(cum, u * cum[-1])
    return min(c, len(cum) - 1)


def _snapshot(by_colour) -> TypedPartition:
    return TypedPartition(tuple(frozenset(lst) for lst in by_colour))


def simulate_labelled(m: MergerMeasureSet, p0, t_max: float, rng) -> Trajectory:
    """
    Simulate the labelled process from ``p0`` (a :class:`TypedPartition`, or
    a count vector meaning singletons) up to ``t_max`` or absorption.

    All clocks are merged into one competing-exponential race: colour
    changes at ``n_c * sum_i rho_{c->i}``, pair mergers at
    ``rho_{cc->c} * binom(n_c, 2)``, and atom rings. At a ring of atom
    ``(w, s)`` each block joins independently with probability
    ``s_colour``; rings that would leave the partition unchanged (nobody
    joins, or one block of the target colour alone) are thinned away, so
    atom ``a`` fires at ``w_a * P(effective)`` and the joiners are drawn
    from their law conditioned on being effective.
    """
    if not isinstance(p0, TypedPartition):
        p0 = TypedPartition.singletons(p0)
    if p0.d != m.d:
        raise ValueError(f"partition has {p0.d} colours, measure set has {m.d}")
    if not t_max >= 0:
        raise ValueError("t_max must be non-negative")
    plan = _plan(m)
    d = plan.d
    gen = as_generator(rng)
    by_colour = [sorted(c, key=sorted) for c in p0.classes]
    if sum(len(c) for c in by_colour) < 1:
        raise ValueError("need at least one initial block")
    events = []
    t = 0.0
    while True:
        sizes = [len(c) for c in by_colour]
        total_blocks = sum(sizes)
        if total_blocks == 1:
            c = next(j for j in range(d) if sizes[j])
            if not plan.lone_active[c]:
                break
        cum, acc = [], 0.0
        for c in range(d):
            acc += sizes[c] * plan.out[c]
            cum.append(acc)
        for c in range(d):
            acc += plan.pair[c] * sizes[c] * (sizes[c] - 1) / 2
            cum.append(acc)
        atom_cum = plan.effective_atoms(tuple(sizes))
        acc += atom_cum[-1] if atom_cum else 0.0
        cum.append(acc)
        if acc <= 0.0:
            break
        u = gen.random(3)
        t += -math.log1p(-u[0]) / acc
        if t > t_max:
            break
        kind = _pick(cum, float(u[1]))
        if kind < d:
            c = kind
            lst = by_colour[c]
            idx = int(u[2] * len(lst))
            block = lst[idx]
            lst[idx] = lst[-1]
            lst.pop()
            target = _pick(plan.change_cum[c], float(gen.random()))
            by_colour[target].append(block)
            k = [0] * d
            k[c] = 1
            events.append(Event(t, COLOUR_CHANGE, target, tuple(k), _snapshot(by_colour)))
        elif kind < 2 * d:
            c = kind - d
            lst = by_colour[c]
            a, b = gen.choice(len(lst), size=2, replace=False).tolist()
            merged = lst[a] | lst[b]
            for idx in sorted((a, b), reverse=True):
                lst[idx] = lst[-1]
                lst.pop()
            lst.append(merged)
            k = [0] * d
            k[c] = 2
            events.append(Event(t, MERGER, c, tuple(k), _snapshot(by_colour)))
        else:
            a = _pick(atom_cum, float(u[2]))
            s = plan.atom_points[a]
            target = plan.atom_targets[a]
            k = _sample_joiners(gen, sizes, s, target)
            chosen = []
            for c in range(d):
                if not k[c]:
                    continue
                lst = by_colour[c]
                if k[c] == len(lst):
                    picked = set(range(len(lst)))
                else:
                    picked = set(gen.choice(len(lst), size=k[c], replace=False).tolist())
                chosen.extend(lst[j] for j in picked)
                by_colour[c] = [b for j, b in enumerate(lst) if j not in picked]
            by_colour[target].append(frozenset().union(*chosen))
            events.append(Event(t, COLOUR_CHANGE if len(chosen) == 1 else MERGER, target,
                                tuple(k), _snapshot(by_colour)))
    return Trajectory(p0, events, t_max)


class LabelledSimulator:
    """Picklable ``rng -> Trajectory`` callable for ensembles."""

    def __init__(self, m: MergerMeasureSet, p0, t_max: float):
        self.m, self.p0, self.t_max = m, p0, t_max

    def __call__(self, rng):
        return simulate_labelled(self.m, self.p0, self.t_max, rng)

