"""
End-to-end acceptance checks at full scale.

Each test records one PASS/FAIL line, printed in the terminal summary
(``pytest tests/test_acceptance.py``). Wall-clock budgets are part of the
pass condition.
"""
import itertools
import math
import time

import numpy as np
import pytest

from multicoal.analysis import Verdict, classify_cdi, descent_profile
from multicoal.arrays import array_from_representation, check_recursion_array, recover_representation
from multicoal.builtin import example
from multicoal.measures import MergerMeasureSet, build_measure_set
from multicoal.simulator import TypedPartition
from multicoal.verification import (
    consistency_check, coupling_bound_check, engine_equivalence_check, inequality_suite,
    jensen_bound_check, mc_drift_check, random_measure_set, random_representation,
    recursion_suite,
)

pytestmark = pytest.mark.acceptance

REPLICAS = 100_000

ATOM_CFG = {"d": 2, "rho_change": [[1, 2, 0.4]], "rho_pair": [0.5, 0.0],
            "q": [{"target": 2, "atoms": [[1.5, [0.5, 0.5]]]},
                  {"target": 1, "atoms": [[0.5, [1.0, 0.25]]]}]}


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def cube_moment(atoms, b, k):
    total = 0.0
    for w, s in atoms:
        term = w
        for sj, bj, kj in zip(s, b, k):
            term *= (sj ** kj if kj else 1.0) * ((1 - sj) ** (bj - kj) if bj > kj else 1.0)
        total += term
    return total


def test_recursion_identity(acceptance_log):
    rng = np.random.default_rng(101)
    with Clock() as c:
        sets = [random_measure_set(rng) for _ in range(100)]
        rep = recursion_suite(sets, max_total=10, tol=1e-12)
    ok = rep.passed and max(m.d for m in sets) <= 3 and c.elapsed <= 60
    acceptance_log(1, "recursion identity", ok,
                   f"max relative residual {rep.statistic:.2e} over 100 sets ({c.elapsed:.1f} s)")
    assert ok, rep


def test_array_round_trip(acceptance_log):
    rng = np.random.default_rng(202)
    worst_rec = worst_rho = worst_mom = 0.0
    checked = 0
    with Clock() as c:
        for _ in range(100):
            ell, rho, J = random_representation(rng)
            a = array_from_representation(ell, 16, rho, J)
            worst_rec = max(worst_rec, check_recursion_array(a).max_residual)
            rep = recover_representation(a)
            worst_rho = max(worst_rho, float(np.max(np.abs(rep.rho - rho))))
            idx = a.index
            atoms = list(J.atoms)
            for b in itertools.product(range(11), repeat=idx.d):
                if sum(b) > 10:
                    continue
                for k in itertools.product(*[range(x + 1) for x in b]):
                    flat = idx.flat(b, k)
                    if idx.outside_box(k) and rep.exact[flat]:
                        err = abs(rep.moments[flat] - cube_moment(atoms, b, k))
                        worst_mom = max(worst_mom, err)
                        checked += 1
    ok = worst_rec <= 1e-12 and worst_rho <= 2.0 ** -12 and worst_mom <= 1e-10 and c.elapsed <= 60
    acceptance_log(2, "array forward/round trip", ok,
                   f"recursion {worst_rec:.1e}, rho {worst_rho:.1e}, moments {worst_mom:.1e} "
                   f"on {checked} entries ({c.elapsed:.1f} s)")
    assert ok


DRIFT_CASES = [
    ("kingman d=1", MergerMeasureSet.kingman([1.0]), (4,), 6.0),
    ("colour change", build_measure_set({"d": 2, "rho_change": [[1, 2, 1.0], [2, 1, 2.0]]}),
     (3, 1), 0.0),
    ("full atom", build_measure_set({"d": 2, "q": [{"target": 1, "atoms": [[1.0, [1.0, 1.0]]]}]}),
     (2, 2), 3.0),
]


def test_drift(acceptance_log):
    parts, ok = [], True
    with Clock() as c:
        for seed, (label, m, n, psi) in enumerate(DRIFT_CASES):
            rep = mc_drift_check(m, n, replicas=REPLICAS, seed=seed)
            ok &= rep.passed and rep.details["target"] == -psi
            parts.append(f"{label} |err| {rep.statistic:.3g} <= {rep.threshold:.3g}")
    ok &= c.elapsed <= 120
    acceptance_log(3, "drift", ok, "; ".join(parts) + f" ({c.elapsed:.1f} s)")
    assert ok


def test_cdi(acceptance_log):
    cases = [
        ("multitype kingman", example("multitype-kingman"), Verdict.COMES_DOWN),
        ("rho_22 = 0, finite Q", build_measure_set(
            {"d": 2, "rho_pair": [1.0, 0.0], "rho_change": [[1, 2, 0.5]],
             "q": [{"target": 2, "atoms": [[2.0, [0.3, 0.6]], [0.5, [0.0, 1.0]]]}]}),
         Verdict.STAYS_INFINITE),
        ("seed bank", example("seed-bank"), Verdict.STAYS_INFINITE),
    ]
    got = []
    with Clock() as c:
        for _, m, _ in cases:
            got.append(classify_cdi(m))
    ok = all(r.overall is want for r, (_, _, want) in zip(got, cases))
    ok &= all(t.shortcut is not None for r in got for t in r.per_type)
    ok &= c.elapsed <= 1.0
    acceptance_log(4, "coming down from infinity", ok,
                   ", ".join(f"{label} -> {r.overall.value}" for r, (label, _, _) in zip(got, cases))
                   + f" ({c.elapsed * 1e3:.0f} ms)")
    assert ok


def test_descent_kingman(acceptance_log):
    times = np.array([0.1, 0.5, 1.0, 2.0])
    with Clock() as c:
        w = descent_profile(MergerMeasureSet.kingman([1.0]), times, math.inf, form="quadratic")
    err = float(np.max(np.abs(w - 2.0 / times)))
    ok = err <= 1e-6 and c.elapsed <= 1.0
    acceptance_log(5, "descent profile", ok,
                   f"max |w - 2/t| {err:.1e} ({c.elapsed * 1e3:.0f} ms)")
    assert ok


def test_inequalities(acceptance_log):
    with Clock() as c:
        reps = inequality_suite(seed=606, pairs=1000, tol=1e-10)
    ok = len(reps) == 6 and all(r.passed for r in reps) and c.elapsed <= 30
    worst = max(r.statistic for r in reps)
    acceptance_log(6, "inequality suite", ok,
                   f"{sum(r.passed for r in reps)}/6 passed, worst violation {worst:.1e} "
                   f"({c.elapsed:.1f} s)")
    assert ok, reps


ENGINE_CASES = [
    ("multitype-kingman", example("multitype-kingman"), (4, 4), 0.5),
    ("atoms", build_measure_set(ATOM_CFG), (4, 3), 0.7),
    ("seed-bank", example("seed-bank"), (4, 4), 1.0),
]


def test_engines_and_consistency(acceptance_log):
    parts, ok = [], True
    with Clock() as c:
        for seed, (label, m, n0, t) in enumerate(ENGINE_CASES):
            eng = engine_equivalence_check(m, n0, t, replicas=REPLICAS, seed=seed)
            p0 = TypedPartition.singletons(n0)
            subset = p0.ground - {(0, 0), (1, 0)}
            cons = consistency_check(m, p0, subset, t, replicas=REPLICAS, seed=seed)
            ok &= eng.passed and cons.passed and sum(n0) <= 8
            parts.append(f"{label} p={eng.statistic:.3f}/{cons.statistic:.3f}")
    ok &= c.elapsed <= 300
    acceptance_log(7, "engines and consistency", ok, "; ".join(parts) + f" ({c.elapsed:.0f} s)")
    assert ok


def test_jensen(acceptance_log):
    cases = [(MergerMeasureSet.kingman([1.0]), (10,)), (MergerMeasureSet.kingman([1.0]), (20,)),
             (example("multitype-kingman"), (5, 5)), (example("multitype-kingman"), (10, 10))]
    worst, ok = -math.inf, True
    with Clock() as c:
        for seed, (m, n0) in enumerate(cases):
            rep = jensen_bound_check(m, n0, (0.25, 1.0), replicas=REPLICAS, seed=seed)
            ok &= rep.passed
            worst = max(worst, rep.statistic)
    ok &= c.elapsed <= 120
    acceptance_log(8, "jensen bound", ok, f"max (mean - w)/se {worst:.2f} <= 3 ({c.elapsed:.1f} s)")
    assert ok


def test_coupling(acceptance_log):
    m = example("seed-bank")
    worst, ok = -math.inf, True
    with Clock() as c:
        for seed, (i, t) in enumerate(itertools.product((0, 1), (0.5, 1.0))):
            rep = coupling_bound_check(m, i, 10, t, replicas=REPLICAS, seed=seed)
            ok &= rep.passed
            worst = max(worst, rep.statistic)
    ok &= c.elapsed <= 120
    acceptance_log(9, "coupling bound", ok,
                   f"max shortfall {worst:.2f} sigma <= 3 ({c.elapsed:.1f} s)")
    assert ok
