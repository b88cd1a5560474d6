"""
Statistical and exact checks tying simulations to the analytic functionals.

Every check returns a :class:`TestReport`; every random quantity derives
from the report's ``seed``, so a failing report is reproduced by re-running
the same call.
"""
from __future__ import annotations

import dataclasses
import math
from collections import Counter, deque
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from . import analysis
from .measures import FiniteMeasureOnCube, MergerMeasureSet, kill_measure
from .rates import as_counts, merger_rates, transition_table
from .simulator import (
    CountsAt, JumpChain, KilledProjected, LabelledSimulator, RngSpec, TotalsAt,
    TypedPartition, derive_seed, ensemble, project_partition,
)

DEFAULT_REPLICAS = 100_000
CHI2_ALPHA = 1e-3


@dataclasses.dataclass(frozen=True)
class TestReport:
    """
    ``sense`` is ``"le"`` when the check passes iff ``statistic <= threshold``
    and ``"gt"`` when it passes iff ``statistic > threshold`` (p-values).
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    passed: bool
    replicas: int
    seed: int | None
    sense: str = "le"
    details: dict = dataclasses.field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name, "statistic": _num(self.statistic),
            "threshold": _num(self.threshold), "passed": bool(self.passed),
            "replicas": self.replicas, "seed": self.seed, "sense": self.sense,
            "details": _jsonable(self.details),
        }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _report(name, statistic, threshold, replicas, seed, sense="le", **details) -> TestReport:
    statistic = float(statistic)
    passed = statistic <= threshold if sense == "le" else statistic > threshold
    return TestReport(name, statistic, float(threshold), bool(passed), replicas, seed, sense,
                      details)


# -- exact laws ---------------------------------------------------------------

def reachable_generator(m: MergerMeasureSet, n0, max_states: int = 5000):
    """Reachable count states from ``n0`` and the generator matrix on them."""
    n0 = as_counts(n0, m.d)
    states = {n0: 0}
    order = [n0]
    rows, cols, vals = [], [], []
    queue = deque([n0])
    while queue:
        n = queue.popleft()
        a = states[n]
        tab = transition_table(m, n)
        for nxt, r in zip(tab.next_states().tolist(), tab.class_rates.tolist()):
            nxt = tuple(nxt)
            if nxt not in states:
                if len(states) >= max_states:
                    raise RuntimeError("reachable state space too large")
                states[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            rows.append(a)
            cols.append(states[nxt])
            vals.append(r)
    gen = np.zeros((len(order), len(order)))
    for a, b, r in zip(rows, cols, vals):
        gen[a, b] += r
        gen[a, a] -= r
    return order, gen


def count_law(m: MergerMeasureSet, n0, t: float) -> dict[tuple[int, ...], float]:
    """Exact law of the block counts at time ``t`` (matrix exponential)."""
    order, gen = reachable_generator(m, n0)
    p = linalg.expm(gen * t)[0]
    return {s: float(v) for s, v in zip(order, p) if v > 0}


def exact_total_drift(m: MergerMeasureSet, n, h: float) -> float:
    """``E[sum_j (N_j(h) - N_j(0))] / h`` computed exactly."""
    n = as_counts(n, m.d)
    law = count_law(m, n, h)
    return sum(p * (sum(s) - sum(n)) for s, p in law.items()) / h


def _second_order_bias(m: MergerMeasureSet, n, h: float) -> float:
    """``(h / 2) |L^2 f(n)|`` with ``f`` the total count, ``Lf = -Psi``."""
    tab = transition_table(m, n)
    lf_n = -analysis.big_psi(m, n)
    l2 = sum(r * (-analysis.big_psi(m, nxt) - lf_n)
             for nxt, r in zip(tab.next_states().tolist(), tab.class_rates.tolist()))
    return 0.5 * h * abs(l2)


# -- two-sample tests ------------------------------------------------------------

def two_sample_chi2(a: Counter, b: Counter, min_expected: float = 5.0) -> tuple[float, float, int]:
    """
    Chi-square homogeneity test of two categorical samples. Categories whose
    expected count falls below ``min_expected`` in either sample are pooled.
    Returns ``(statistic, p_value, dof)``.
    """
    cats = sorted(set(a) | set(b))
    table = np.array([[a.get(c, 0) for c in cats], [b.get(c, 0) for c in cats]], dtype=float)
    tot = table.sum(axis=0)
    exp_min = np.outer(table.sum(axis=1), tot).min(axis=0) / table.sum()
    keep = exp_min >= min_expected
    cols = [table[:, keep]]
    if np.any(~keep):
        cols.append(table[:, ~keep].sum(axis=1, keepdims=True))
    pooled = np.concatenate(cols, axis=1)
    pooled = pooled[:, pooled.sum(axis=0) > 0]
    if pooled.shape[1] < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = stats.chi2_contingency(pooled, correction=False)
    return float(stat), float(p), int(dof)


def _chi2_report(name, a, b, replicas, seed, **details) -> TestReport:
    stat, p, dof = two_sample_chi2(a.distribution(), b.distribution())
    return _report(name, p, CHI2_ALPHA, replicas, seed, sense="gt", chi2=stat, dof=dof,
                   **details)


# -- Monte Carlo checks ----------------------------------------------------------

def mc_drift_check(m: MergerMeasureSet, n, h: float | None = None,
                   replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """
    Compare the Monte Carlo drift ``E[sum_j (N_j(h) - N_j(0))] / h`` with
    ``-Psi(n)``; the allowance is 4 standard errors plus the finite-``h``
    bias (exact when the reachable state space is small).
    """
    n = as_counts(n, m.d)
    if sum(n) < 1:
        raise ValueError("degenerate initial state")
    tab = transition_table(m, n)
    total = tab.total_rate
    if h is None:
        h = 0.05 / total if total > 0 else 1.0
    target = -analysis.big_psi(m, n)
    chain = JumpChain(m)
    ens = ensemble(chain.simulator(n, h), replicas, TotalsAt((h,)), seed=seed)
    est = float(ens.mean[0] - sum(n)) / h
    se = float(ens.se[0]) / h
    try:
        bias = abs(exact_total_drift(m, n, h) - target)
        bias_kind = "exact"
    except RuntimeError:
        bias = _second_order_bias(m, n, h)
        bias_kind = "second_order"
    diff = abs(est - target)
    return _report("drift", diff, 4 * se + bias, replicas, seed, estimate=est,
                   target=target, se=se, bias=bias, bias_kind=bias_kind, h=h, n=list(n))


def engine_equivalence_check(m: MergerMeasureSet, n0, t: float,
                             replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """Chi-square between jump-chain and labelled count laws at ``t``."""
    n0 = as_counts(n0, m.d)
    s1, s2 = derive_seed(seed, 1), derive_seed(seed, 2)
    a = ensemble(JumpChain(m).simulator(n0, t), replicas, CountsAt(t), seed=s1)
    b = ensemble(LabelledSimulator(m, n0, t), replicas, CountsAt(t), seed=s2)
    return _chi2_report("engine_equivalence", a, b, replicas, seed, n0=list(n0), t=t,
                        seeds=[s1, s2])


class _ProjectedCountsAt:
    def __init__(self, subset, t):
        self.subset, self.t = frozenset(subset), t

    def __call__(self, traj):
        return project_partition(traj.state_at(self.t), self.subset).counts()


def consistency_check(m: MergerMeasureSet, p0, subset, t: float,
                      replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """
    Chi-square between the counts of the full process projected onto
    ``subset`` and the counts of the process started from the projected
    initial partition.
    """
    if not isinstance(p0, TypedPartition):
        p0 = TypedPartition.singletons(p0)
    subset = frozenset(tuple(x) for x in subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    if not subset <= p0.ground:
        raise ValueError("subset is not contained in the ground set")
    s1, s2 = derive_seed(seed, 3), derive_seed(seed, 4)
    a = ensemble(LabelledSimulator(m, p0, t), replicas, _ProjectedCountsAt(subset, t), seed=s1)
    b = ensemble(LabelledSimulator(m, project_partition(p0, subset), t), replicas,
                 CountsAt(t), seed=s2)
    return _chi2_report("consistency", a, b, replicas, seed, subset=sorted(subset), t=t,
                        seeds=[s1, s2])


def exchangeability_check(m: MergerMeasureSet, p0: TypedPartition, sigma, t: float,
                          replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """Chi-square between count laws started from ``p0`` and ``sigma p0``."""
    permuted = p0.permute(sigma)  # rejects type-mixing permutations
    s1, s2 = derive_seed(seed, 5), derive_seed(seed, 6)
    a = ensemble(LabelledSimulator(m, p0, t), replicas, CountsAt(t), seed=s1)
    b = ensemble(LabelledSimulator(m, permuted, t), replicas, CountsAt(t), seed=s2)
    return _chi2_report("exchangeability", a, b, replicas, seed, t=t, seeds=[s1, s2])


def jensen_bound_check(m: MergerMeasureSet, n0, times: Sequence[float],
                       replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """
    Ensemble mean of the total block count must not exceed ``w_{|n0|}(t)``
    by more than 3 standard errors at any grid time. The statistic is the
    largest ``(mean - w) / se`` over the grid (``-inf`` where the bound
    holds with zero variance).
    """
    n0 = as_counts(n0, m.d)
    times = tuple(float(t) for t in times)
    w = analysis.descent_profile(m, times, sum(n0))
    ens = ensemble(JumpChain(m).simulator(n0, max(times)), replicas, TotalsAt(times), seed=seed)
    mean, se = np.atleast_1d(ens.mean), np.atleast_1d(ens.se)
    excess = mean - w
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, excess / np.where(se > 0, se, 1.0),
                     np.where(excess > 1e-9 * np.maximum(w, 1.0), math.inf, -math.inf))
    return _report("jensen", float(np.max(z)), 3.0, replicas, seed, times=times,
                   mean=mean, se=se, w=w, n0=list(n0))


def coupling_bound_check(m: MergerMeasureSet, i: int, n_i: int, t: float,
                         replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> TestReport:
    """
    ``E[# alive at t] >= exp(-r_i t) E[# kappa(t)]`` for the killed projected
    coalescent of type ``i`` against its unkilled version ``kappa``. The
    statistic is the shortfall in combined standard errors.
    """
    r, _ = kill_measure(m, i)
    s1, s2 = derive_seed(seed, 7), derive_seed(seed, 8)
    alive = ensemble(KilledProjected(m, i, True).simulator(n_i, t), replicas,
                     TotalsAt((t,)), seed=s1)
    kappa = ensemble(KilledProjected(m, i, False).simulator(n_i, t), replicas,
                     TotalsAt((t,)), seed=s2)
    factor = math.exp(-r * t)
    lhs, rhs = float(alive.mean[0]), factor * float(kappa.mean[0])
    sigma = math.hypot(float(alive.se[0]), factor * float(kappa.se[0]))
    shortfall = (rhs - lhs) / sigma if sigma > 0 else (math.inf if rhs > lhs else -math.inf)
    return _report("coupling", shortfall, 3.0, replicas, seed, alive=lhs, bound=rhs,
                   r=r, sigma=sigma, seeds=[s1, s2])


# -- random instances ---------------------------------------------------------

def _random_point(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        s = rng.random(d)
        # exercise the 0^0 and (1 - 1)^0 conventions
        s[rng.random(d) < 0.15] = 0.0
        s[rng.random(d) < 0.1] = 1.0
        if np.any(s > 0):
            return s


def random_measure_set(rng: np.random.Generator, d: int | None = None,
                       max_atoms: int = 4) -> MergerMeasureSet:
    """A random atomic measure set with some exact zeros and ones."""
    if d is None:
        d = int(rng.integers(1, 4))
    rc = rng.exponential(1.0, (d, d)) * (rng.random((d, d)) < 0.6)
    rp = rng.exponential(1.0, d) * (rng.random(d) < 0.6)
    qs = []
    for _ in range(d):
        k = int(rng.integers(0, max_atoms + 1))
        atoms = [(float(rng.exponential(1.0)), tuple(_random_point(rng, d))) for _ in range(k)]
        qs.append(FiniteMeasureOnCube.from_atoms(d, atoms))
    return MergerMeasureSet(d, rc, rp, tuple(qs))


def random_representation(rng: np.random.Generator, d: int | None = None,
                          max_atoms: int = 4, max_mass: float = 2.0):
    """
    Random ``(ell, rho, J)`` with ``prod_j (1 - s_j) <= 1/2`` on every atom
    and total ``J`` mass at most ``max_mass``, so the ``rho`` limit is
    reached geometrically fast.
    """
    if d is None:
        d = int(rng.integers(1, 4))
    ell = tuple(int(x) for x in rng.integers(0, 3, d))
    rho = rng.random(d) * (rng.random(d) < 0.8)
    k = int(rng.integers(0, max_atoms + 1))
    w = rng.random(k)
    if k:
        w *= max_mass * rng.random() / max(w.sum(), 1e-300)
    pts = []
    for _ in range(k):
        while True:
            s = rng.random(d)
            s[rng.random(d) < 0.2] = 0.0
            if np.prod(1.0 - s) <= 0.5:
                break
        pts.append(s)
    J = FiniteMeasureOnCube(d, w, np.array(pts).reshape(k, d))
    return ell, rho, J


# -- exact suites -------------------------------------------------------------

def _all_bk(d: int, max_total: int):
    """Every ``(b, k)`` with ``k <= b`` and ``|b| <= max_total``."""
    from itertools import product
    bs = [b for b in product(range(max_total + 1), repeat=d) if sum(b) <= max_total]
    rows_b, rows_k = [], []
    for b in bs:
        for k in product(*[range(x + 1) for x in b]):
            rows_b.append(b)
            rows_k.append(k)
    return np.array(rows_b, dtype=np.int64).reshape(-1, d), np.array(rows_k, dtype=np.int64).reshape(-1, d)


def recursion_max_residual(m: MergerMeasureSet, max_total: int = 10) -> float:
    """
    Largest relative residual of the rate recursion over every valid
    ``(b, k, i, j)`` with ``|b| <= max_total``.
    """
    b, k = _all_bk(m.d, max_total)
    size = k.sum(axis=1)
    worst = 0.0
    for i in range(m.d):
        ok = (size > 0) & ~((size == 1) & (k[:, i] == 1))
        bb, kk = b[ok], k[ok]
        base = merger_rates(m, bb, kk, i)
        for j in range(m.d):
            e = np.zeros(m.d, dtype=np.int64)
            e[j] = 1
            r = base - merger_rates(m, bb + e, kk, i) - merger_rates(m, bb + e, kk + e, i)
            scale = np.where(base > 0, base, 1.0)
            worst = max(worst, float(np.max(np.abs(r) / scale, initial=0.0)))
    return worst


def recursion_suite(measure_sets: Sequence[MergerMeasureSet], max_total: int = 10,
                    tol: float = 1e-12, seed: int | None = None) -> TestReport:
    worst = max(recursion_max_residual(m, max_total) for m in measure_sets)
    return _report("recursion", worst, tol, 0, seed, instances=len(measure_sets),
                   max_total=max_total)


def _sample_x(rng, d: int, low: float = 1.0, high: float = 30.0) -> np.ndarray:
    x = rng.uniform(low, high, d)
    x[rng.random(d) < 0.2] = 0.0
    return x


def inequality_suite(seed: int = 0, pairs: int = 1000, tol: float = 1e-10,
                     measure_sets: Sequence[MergerMeasureSet] | None = None) -> list[TestReport]:
    """
    The processing-speed inequalities, each on ``pairs`` random
    (measure set, point) pairs. Violations are measured relative to
    ``max(1, |values|)``.

    Points for the lower bound on Psi have coordinates in ``{0} u [1, inf)``;
    the bound can fail for fractional coordinates.
    """
    rng = RngSpec(seed, 0).generator()

    def pick():
        if measure_sets:
            return measure_sets[int(rng.integers(len(measure_sets)))]
        return random_measure_set(rng)

    worst = {k: 0.0 for k in ("psi_tilde_le_psi", "half_psi_le_psi_tilde", "psi_lower_bound",
                              "convexity_psi", "convexity_omega", "flow_identity")}

    def bump(key, violation, scale):
        worst[key] = max(worst[key], violation / max(1.0, abs(scale)))

    for _ in range(pairs):
        m = pick()
        i = int(rng.integers(m.d))
        q = float(rng.uniform(0, 50))
        p, pt = analysis.psi(m, i, q), analysis.psi_tilde(m, i, q)
        bump("psi_tilde_le_psi", pt - p, p)
        q2 = float(rng.uniform(2, 50))
        p2, pt2 = analysis.psi(m, i, q2), analysis.psi_tilde(m, i, q2)
        bump("half_psi_le_psi_tilde", p2 - 2 * pt2, p2)
        x = _sample_x(rng, m.d)
        big = analysis.big_psi(m, x)
        lower = sum(analysis.psi_tilde(m, j, x[j]) for j in range(m.d))
        bump("psi_lower_bound", lower - big, big)
        y = rng.uniform(0, 30, m.d)
        xr = rng.uniform(0, 30, m.d)
        lam = float(rng.random())
        mid = analysis.big_psi(m, lam * xr + (1 - lam) * y)
        chord = lam * analysis.big_psi(m, xr) + (1 - lam) * analysis.big_psi(m, y)
        bump("convexity_psi", mid - chord, chord)
        a, b = rng.uniform(0, 30, 2)
        om_mid = analysis.omega(m, lam * a + (1 - lam) * b)
        om_chord = lam * analysis.omega(m, a) + (1 - lam) * analysis.omega(m, b)
        bump("convexity_omega", om_mid - om_chord, om_chord)
        z = rng.uniform(0, 30, m.d)
        ps = analysis.big_psi(m, z)
        bump("flow_identity", abs(ps + float(np.sum(analysis.phi_flow(m, z)))), ps)
    return [_report(k, v, tol, 0, seed, pairs=pairs) for k, v in worst.items()]
