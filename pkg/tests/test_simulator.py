import collections
import itertools
import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from multicoal.builtin import example
from multicoal.measures import MergerMeasureSet, build_measure_set
from multicoal.simulator import (
    COLOUR_CHANGE, KILL, MERGER, CountsAt, FirstEventTime, JumpChain, KilledProjected,
    LabelledSimulator, RngSpec, TotalsAt, Trajectory, TypedPartition, derive_seed, ensemble,
    project_partition, simulate_jump_chain, simulate_labelled, simulate_projected_with_killing,
)

from oracles import kingman_death_law, kingman_reference_mean, lumped_law


def gof_pvalue(samples, law):
    """Chi-square goodness of fit, pooling cells with expected count < 5."""
    n = len(samples)
    seen = collections.Counter(samples)
    assert set(seen) <= {s for s, p in law.items() if p > 0}, "impossible state sampled"
    cells = sorted(law, key=lambda s: -law[s])
    obs, exp, acc_o, acc_e = [], [], 0, 0.0
    for s in cells:
        acc_o += seen.get(s, 0)
        acc_e += n * law[s]
        if acc_e >= 5:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o, acc_e = 0, 0.0
    if acc_e > 0 and exp:
        obs[-1] += acc_o
        exp[-1] += acc_e
    if len(obs) < 2:
        return 1.0
    exp = np.array(exp) * sum(obs) / sum(exp)
    return stats.chisquare(obs, exp).pvalue


ATOM_CFG = {"d": 2, "rho_change": [[1, 2, 0.4]], "rho_pair": [0.5, 0.0],
            "q": [{"target": 2, "atoms": [[1.5, [0.5, 0.5]]]},
                  {"target": 1, "atoms": [[0.5, [1.0, 0.25]]]}]}
ATOM_ORACLE = ([[0, 0.4], [0, 0]], [0.5, 0.0],
               [[(0.5, (1.0, 0.25))], [(1.5, (0.5, 0.5))]])


# -- partitions -----------------------------------------------------------------

def test_singletons():
    p = TypedPartition.singletons((2, 1))
    assert p.counts() == (2, 1)
    assert p.ground == {(0, 0), (0, 1), (1, 0)}


def test_from_blocks_validates():
    with pytest.raises(ValueError):
        TypedPartition.from_blocks(2, [([(0, 0), (0, 1)], 0), ([(0, 1)], 1)])
    with pytest.raises(ValueError):
        TypedPartition.from_blocks(2, [([(0, 0)], 2)])


def test_projection_drops_empty_blocks_and_keeps_colours():
    p = TypedPartition.from_blocks(2, [([(0, 0), (1, 0)], 1), ([(0, 1)], 0)])
    q = project_partition(p, [(0, 0)])
    assert q.classes == (frozenset(), frozenset([frozenset([(0, 0)])]))
    with pytest.raises(ValueError):
        p.project([])


def test_permute():
    p = TypedPartition.from_blocks(2, [([(0, 0), (0, 1)], 0), ([(0, 2)], 1)])
    q = p.permute({(0, 1): (0, 2), (0, 2): (0, 1)})
    assert q.classes[1] == frozenset([frozenset([(0, 1)])])
    with pytest.raises(ValueError):
        p.permute({(0, 0): (1, 0)})
    with pytest.raises(ValueError):
        p.permute({(0, 0): (0, 1)})


@given(st.lists(st.integers(0, 4), min_size=1, max_size=3).filter(lambda n: sum(n) > 0),
       st.data())
def test_projection_is_compatible_with_restriction(n, data):
    p = TypedPartition.singletons(n)
    ground = sorted(p.ground)
    a = data.draw(st.sets(st.sampled_from(ground), min_size=1))
    b = data.draw(st.sets(st.sampled_from(sorted(a)), min_size=1))
    assert p.project(a).project(b) == p.project(b)


# -- rng ---------------------------------------------------------------------------

def test_streams_are_reproducible_and_distinct():
    a = RngSpec(7, 3).generator().random(4)
    assert np.array_equal(a, RngSpec(7, 3).generator().random(4))
    assert not np.array_equal(a, RngSpec(7, 4).generator().random(4))
    assert not np.array_equal(a, RngSpec(8, 3).generator().random(4))
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)


def test_same_seed_same_trajectory():
    m = example("multitype-kingman")
    t1 = simulate_jump_chain(m, (4, 3), 2.0, RngSpec(11, 0))
    t2 = simulate_jump_chain(m, (4, 3), 2.0, RngSpec(11, 0))
    assert t1.events == t2.events
    l1 = simulate_labelled(m, (4, 3), 2.0, 5)
    l2 = simulate_labelled(m, (4, 3), 2.0, 5)
    assert l1.events == l2.events


# -- trajectories ------------------------------------------------------------------

@pytest.mark.parametrize("name", ["multitype-kingman", "seed-bank", "limic-sturm"])
def test_trajectories_validate(name):
    m = example(name)
    for r in range(30):
        simulate_jump_chain(m, (5, 4), 3.0, RngSpec(1, r)).validate()
        traj = simulate_labelled(m, (5, 4), 3.0, RngSpec(2, r))
        traj.validate()
        for e in traj.events:
            e.state.validate()
            assert e.state.ground == traj.initial.ground


def test_state_at_is_right_continuous():
    m = MergerMeasureSet.kingman([1.0])
    traj = simulate_jump_chain(m, (5,), 10.0, 3)
    e = traj.events[0]
    assert traj.state_at(e.time) == e.state
    assert traj.state_at(e.time * (1 - 1e-12)) == (5,)
    with pytest.raises(ValueError):
        traj.state_at(10.5)


def test_kingman_absorbs_at_one_block():
    traj = simulate_jump_chain(MergerMeasureSet.kingman([1.0]), (6,), math.inf, 0)
    assert traj.final == (1,)
    assert len(traj.events) == 5
    assert all(e.kind == MERGER for e in traj.events)


def test_lone_inactive_block_stops_labelled_run():
    m = build_measure_set({"d": 2, "rho_pair": [1.0, 1.0], "rho_change": [[1, 2, 1.0]]})
    traj = simulate_labelled(m, (0, 3), math.inf, 0)
    assert traj.final.counts() == (0, 1)


def test_atom_with_single_participant_is_a_colour_change():
    m = build_measure_set({"d": 2, "q": [{"target": 2, "atoms": [[1.0, [1.0, 0.0]]]}]})
    traj = simulate_labelled(m, (1, 0), 5.0, 0)
    assert [e.kind for e in traj.events] == [COLOUR_CHANGE]
    assert traj.final.counts() == (0, 1)


def test_engine_argument_errors():
    m = example("seed-bank")
    with pytest.raises(ValueError):
        simulate_jump_chain(m, (0, 0), 1.0, 0)
    with pytest.raises(ValueError):
        simulate_labelled(m, (1, 1, 1), 1.0, 0)
    with pytest.raises(ValueError):
        simulate_projected_with_killing(m, 0, 0, 1.0, 0)
    with pytest.raises(TypeError):
        simulate_jump_chain(m, (1, 1), 1.0, "seed")


# -- laws against exact oracles --------------------------------------------------------

def test_kingman_count_law():
    m = MergerMeasureSet.kingman([1.0])
    vals = [simulate_jump_chain(m, (8,), 0.5, RngSpec(3, r)).counts_at(0.5)[0]
            for r in range(20000)]
    law = dict(enumerate(kingman_death_law(8, 1.0, 0.5)))
    assert gof_pvalue(vals, law) > 1e-3


def test_kingman_mean_matches_plain_python_reference():
    m = MergerMeasureSet.kingman([1.0])
    s = ensemble(JumpChain(m).simulator((10,), 1.0), 20000, CountsAt(1.0), seed=4)
    ref, ref_se = kingman_reference_mean(10, 1.0, 1.0, 20000, seed=4)
    z = abs(s.mean[0] - ref) / math.hypot(s.se[0], ref_se)
    assert z < 4


@pytest.mark.parametrize("engine", ["jump", "labelled"])
def test_atomic_set_count_law(engine):
    m = build_measure_set(ATOM_CFG)
    n0, t = (3, 2), 0.7
    if engine == "jump":
        sim = JumpChain(m).simulator(n0, t)
    else:
        sim = LabelledSimulator(m, n0, t)
    s = ensemble(sim, 15000, CountsAt(t), seed=9)
    samples = [tuple(int(x) for x in row) for row in s.values]
    law = lumped_law(*ATOM_ORACLE, n0, t)
    assert math.isclose(sum(law.values()), 1.0, abs_tol=1e-12)
    assert gof_pvalue(samples, law) > 1e-3


def test_first_event_time_is_exponential():
    m = example("multitype-kingman")
    total = 3 * 1.0 + 1 * 0.5 + 3 * 0.3 + 2 * 0.7
    s = ensemble(JumpChain(m).simulator((3, 2), 50.0), 20000, FirstEventTime(), seed=2)
    assert abs(s.mean - 1 / total) < 4 * s.se
    assert stats.kstest(s.values, "expon", args=(0, 1 / total)).pvalue > 1e-3


# -- killed projection -------------------------------------------------------------------

def test_killed_projection_without_killing_is_kingman():
    m = example("seed-bank")
    eng = KilledProjected(m, 0, killing=False)
    vals = [eng.run(6, 0.8, RngSpec(5, r)).counts_at(0.8)[0] for r in range(20000)]
    law = dict(enumerate(kingman_death_law(6, 1.0, 0.8)))
    assert gof_pvalue(vals, law) > 1e-3


def test_killed_projection_kills_every_block_eventually():
    m = example("seed-bank")
    traj = simulate_projected_with_killing(m, 0, 5, math.inf, 0)
    assert traj.final == (0,)
    assert any(e.kind == KILL for e in traj.events)
    traj.validate()


def test_killed_projection_lone_block_survival():
    # a single seed-bank type-1 block is killed at rate 1
    m = example("seed-bank")
    s = ensemble(KilledProjected(m, 0).simulator(1, 1.0), 20000, CountsAt(1.0), seed=6)
    assert abs(s.mean[0] - math.exp(-1)) < 4 * s.se[0]


def test_binomial_kills():
    m = build_measure_set({"d": 2, "q": [{"target": 2, "atoms": [[2.0, [0.5, 0.0]]]}]})
    eng = KilledProjected(m, 0)
    total, cum, nxt, info = eng.entry(3)
    # the atom removes k of 3 blocks with probability binom(3, k) / 8
    assert math.isclose(total, 2.0 * 7 / 8)
    kills = {k[0]: r for (kind, _, k), r in zip(info, np.diff([0.0] + cum)) if kind == KILL}
    assert np.allclose([kills[1], kills[2], kills[3]], [0.75, 0.75, 0.25])


# -- ensembles ---------------------------------------------------------------------------

def test_ensemble_is_independent_of_workers():
    m = example("multitype-kingman")
    sim = JumpChain(m).simulator((4, 4), 1.0)
    a = ensemble(sim, 200, TotalsAt((0.2, 1.0)), seed=3, workers=1)
    b = ensemble(sim, 200, TotalsAt((0.2, 1.0)), seed=3, workers=2)
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (200, 2)


def test_simulators_are_picklable():
    m = example("limic-sturm")
    for sim in (JumpChain(m).simulator((2, 2), 1.0), LabelledSimulator(m, (2, 2), 1.0),
                KilledProjected(m, 0).simulator(3, 1.0)):
        assert isinstance(pickle.loads(pickle.dumps(sim))(RngSpec(0, 0)), Trajectory)


def test_summary_statistics():
    m = MergerMeasureSet.kingman([1.0])
    s = ensemble(JumpChain(m).simulator((5,), 0.3), 500, CountsAt(0.3), seed=1)
    lo, hi = s.ci(0.95)
    assert lo[0] < s.mean[0] < hi[0]
    assert sum(s.distribution().values()) == 500
    with pytest.raises(ValueError):
        ensemble(JumpChain(m).simulator((5,), 0.3), 0, CountsAt(0.3))


@pytest.mark.parametrize("sizes, s, target", [
    ((3, 2), (0.5, 0.25), 0),
    ((1, 2, 2), (0.3, 1.0, 0.0), 2),
    ((4, 1), (6e-4, 0.9), 1),
    ((5,), (0.02,), 0),
])
def test_thinned_atom_rings_match_brute_force(sizes, s, target):
    from multicoal.simulator import labelled

    law = {}
    for k in itertools.product(*[range(n + 1) for n in sizes]):
        if sum(k) == 0 or (sum(k) == 1 and k[target] == 1):
            continue
        pr = math.prod(math.comb(n, kk) * sc ** kk * (1 - sc) ** (n - kk)
                       for n, kk, sc in zip(sizes, k, s))
        if pr > 0:
            law[k] = pr
    effective = sum(law.values())
    split = labelled._split(sizes, s)
    assert math.isclose(labelled._effective_prob(split, target), effective, rel_tol=1e-12)
    gen = np.random.default_rng(17)
    samples = [tuple(labelled._sample_joiners(gen, sizes, s, target)) for _ in range(20000)]
    assert gof_pvalue(samples, {k: p / effective for k, p in law.items()}) > 1e-3
