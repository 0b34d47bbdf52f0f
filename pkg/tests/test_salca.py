import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsalca.behavior import (ExternalBehavior, LSequence, all_input_sequences, check_asr,
                              check_sr, split_windows, toy_ts, ts_behaviors)
from ddsalca.keys import KeyCodec
from ddsalca.salca import (WindowSet, build_salca, ces_relation, collect_windows, exact_salca,
                           graph_accepts, reachable_states, tracker_init, tracker_step)
from ddsalca.sampler import Dataset

from oracles import random_ts, windows_of

Y, U = ("y1", "y2"), ("ua", "ub")

# drawn by hand from the example machines: (state, output) and (src, input, dst)
FIG_ELL0_STATES = {("y1", "y1"), ("y2", "y2")}
FIG_ELL0_EDGES = {("y1", "ua", "y2"), ("y1", "ub", "y2"), ("y2", "ua", "y1"),
                  ("y2", "ua", "y2"), ("y2", "ub", "y2")}
FIG_ELL1_STATES = {("◇◇y1", "y1"), ("y1uay2", "y2"), ("y1uby2", "y2"), ("y2uay2", "y2"),
                   ("y2uay1", "y1"), ("y2uby2", "y2")}
FIG_ELL1_EDGES = {
    ("◇◇y1", "ua", "y1uay2"), ("◇◇y1", "ub", "y1uby2"),
    ("y1uay2", "ua", "y2uay2"), ("y1uay2", "ub", "y2uby2"),
    ("y1uby2", "ua", "y2uay1"), ("y1uby2", "ub", "y2uby2"),
    ("y2uay2", "ua", "y2uay2"), ("y2uay2", "ub", "y2uby2"),
    ("y2uay1", "ua", "y1uay2"), ("y2uay1", "ub", "y1uby2"),
    ("y2uby2", "ub", "y2uby2"), ("y2uby2", "ua", "y2uay2"), ("y2uby2", "ua", "y2uay1"),
}


def labeled_graph(states, edges, initial):
    g = nx.DiGraph()
    for name, out in states:
        g.add_node(name, out=out, init=name in initial)
    for s, u, t in edges:
        if g.has_edge(s, t):
            g[s][t]["inputs"] = g[s][t]["inputs"] | {u}
        else:
            g.add_edge(s, t, inputs=frozenset({u}))
    return g


def salca_graph(a):
    states = {(z.format(Y, U), Y[z.last]) for z in a.states()}
    edges = {(s.format(Y, U), U[u], t.format(Y, U)) for s, u, t in a.edges()}
    initial = {z.format(Y, U) for z in a.initial_states()}
    return labeled_graph(states, edges, initial)


def same_machine(g1, g2):
    nm = lambda p, q: p == q
    return nx.is_isomorphic(g1, g2, node_match=nm, edge_match=nm) and set(g1) == set(g2)


@pytest.mark.parametrize("ell,states,edges,init", [
    (0, FIG_ELL0_STATES, FIG_ELL0_EDGES, {"y1"}),
    (1, FIG_ELL1_STATES, FIG_ELL1_EDGES, {"◇◇y1"}),
])
def test_exact_abstraction_matches_example_machines(ell, states, edges, init):
    a = exact_salca(toy_ts(), ell, H=4)
    assert same_machine(salca_graph(a), labeled_graph(states, edges, init))


def example_dataset(H=4):
    ts = toy_ts()
    bs = sorted({b for us in all_input_sequences(2, H) for b in ts_behaviors(ts, "x1", us)},
                key=lambda b: (b.outputs, b.inputs))
    return Dataset.from_behaviors(bs, Y, U, system="example")


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_dataset_route_equals_exact(ell):
    d = example_dataset()
    a = build_salca(collect_windows(d, ell))
    b = exact_salca(toy_ts(), ell, H=4)
    assert a.edges() == b.edges()
    assert a.initial_states() == b.initial_states()


def test_spurious_behaviors_depend_on_ell():
    a0 = exact_salca(toy_ts(), 0, H=4)
    a1 = exact_salca(toy_ts(), 1, H=4)
    spurious = ExternalBehavior((0, 1, 1, 0), (0, 1, 0))  # y1 ua y2 ub y2 ua y1
    assert graph_accepts(a0, spurious) and graph_accepts(a1, spurious)
    assert spurious not in ts_behaviors(toy_ts(), "x1", (0, 1, 0))
    # the ell=0 machine lets y2 follow ua ua from y1 ua y2 into y1, ell=1 does not
    b = ExternalBehavior((0, 1, 0), (0, 0))
    assert graph_accepts(a0, b) and not graph_accepts(a1, b)


def test_collect_windows_counts_and_provenance():
    g = ExternalBehavior((0, 1, 1, 1), (0, 1, 0))
    d = Dataset.from_behaviors([g, g, ExternalBehavior((0, 1, 1, 1), (1, 1, 1))], Y, U)
    w = collect_windows(d, 0)  # windows of one step
    assert {z.format(Y, U) for z in w.windows()} == {"◇◇y1", "y1uay2", "y2uby2", "y2uay2", "y1uby2"}
    assert w.incidence.shape == (2, 4)  # duplicate records collapse
    assert sorted(w.behavior_first_id.tolist()) == [0, 2]
    i = [z.format(Y, U) for z in (w.window(j) for j in range(len(w)))].index("y2uay2")
    assert sorted(w.contributors(i).tolist()) == [0, 1]


def test_collect_windows_rejects_bad_ell():
    d = example_dataset(3)
    with pytest.raises(ValueError):
        collect_windows(d, 3)
    with pytest.raises(ValueError):
        collect_windows(d, -1)


def test_ell_zero_degenerate_run():
    d = Dataset.from_behaviors([ExternalBehavior((0, 0, 0), (0, 0))], Y, U)
    a = build_salca(collect_windows(d, 0))
    assert a.n_states == 1 and a.n_transitions == 1
    with pytest.raises(ValueError):
        build_salca(WindowSet.from_windows([], 1, Y, U))


@st.composite
def small_dataset(draw):
    ny, nu = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    H = draw(st.integers(1, 5))
    n = draw(st.integers(1, 12))
    rows = [ExternalBehavior(tuple(draw(st.lists(st.integers(0, ny - 1), min_size=H + 1, max_size=H + 1))),
                             tuple(draw(st.lists(st.integers(0, nu - 1), min_size=H, max_size=H))))
            for _ in range(n)]
    ylab = tuple(f"y{i}" for i in range(ny))
    ulab = tuple(f"u{i}" for i in range(nu))
    return Dataset.from_behaviors(rows, ylab, ulab), rows


@settings(max_examples=120, deadline=None)
@given(small_dataset(), st.data())
def test_window_set_matches_string_oracle(ds, data):
    d, rows = ds
    ell = data.draw(st.integers(0, d.H - 1))
    w = collect_windows(d, ell)
    expected = set()
    for b in rows:
        expected |= windows_of(b.outputs, b.inputs, ell + 1, d.output_labels, d.input_labels)
    assert {z.format(d.output_labels, d.input_labels) for z in w.windows()} == expected


@settings(max_examples=120, deadline=None)
@given(small_dataset(), st.data())
def test_membership_iff_path_exists(ds, data):
    """All windows witnessed <=> the domino graph has a matching path from an initial state."""
    d, rows = ds
    ell = data.draw(st.integers(0, d.H - 1))
    a = build_salca(collect_windows(d, ell))
    ny, nu = len(d.output_labels), len(d.input_labels)
    probes = list(rows)
    for _ in range(10):
        H = data.draw(st.integers(1, d.H + 2))
        if data.draw(st.booleans()) and rows:
            base = data.draw(st.sampled_from(rows))
            ys, us = list(base.outputs[:H + 1]), list(base.inputs[:H])
            while len(us) < H:
                us.append(data.draw(st.integers(0, nu - 1)))
                ys.append(data.draw(st.integers(0, ny - 1)))
        else:
            ys = data.draw(st.lists(st.integers(0, ny - 1), min_size=H + 1, max_size=H + 1))
            us = data.draw(st.lists(st.integers(0, nu - 1), min_size=H, max_size=H))
        probes.append(ExternalBehavior(tuple(ys), tuple(us)))
    for g in probes:
        assert a.contains_behavior(g) == graph_accepts(a, g)
    for g in rows:
        assert a.contains_behavior(g)


@settings(max_examples=60, deadline=None)
@given(small_dataset())
def test_abstraction_structure(ds):
    d, _ = ds
    for ell in range(d.H):
        a = build_salca(collect_windows(d, ell))
        assert len(a.initial) >= 1
        # source and target overlap on all but one step
        for s, u, t in a.edges():
            if s.ell:
                assert s.window(1, s.ell) == t.window(0, t.ell - 1)
            assert t.inputs[-1:] in ((u,), ())
        assert reachable_states(a) == set(range(a.n_states))


def test_hash_mode_agrees_with_sets():
    rng = np.random.default_rng(3)
    H, n = 40, 300
    outs = rng.integers(0, 30, size=(n, H + 1))
    ins = rng.integers(0, 5, size=(n, H))
    ylab = tuple(f"y{i}" for i in range(30))
    ulab = tuple(f"u{i}" for i in range(5))
    d = Dataset("hash", H, ylab, ulab, np.arange(n), np.zeros((n, 1)), ins, outs)
    ell = 25
    assert not KeyCodec(30, 5, 2 * (ell + 1) + 1).exact
    w = collect_windows(d, ell)
    expected = set()
    for r in range(n):
        expected |= set(ExternalBehavior(tuple(outs[r]), tuple(ins[r])).windows(ell + 1))
    assert len(w) == len(expected)
    assert set(w.windows()) == expected
    a = build_salca(w)
    assert a.contains_batch(outs, ins).all()


def test_tracker_flags_unseen_windows():
    a = exact_salca(toy_ts(), 1, H=4)
    t = tracker_init(a, 0)
    assert t.state.format(Y, U) == "◇◇y1" and not t.violated
    t = tracker_step(t, 0, 1)
    assert t.state.format(Y, U) == "y1uay2" and t.state_id is not None
    t2 = tracker_step(t, 0, 0)  # y1 ua y2 ua y1 never happens
    assert t2.violated
    assert tracker_step(t2, 1, 1).violated  # sticky


def test_exact_salca_rejects_short_horizon():
    with pytest.raises(ValueError):
        exact_salca(toy_ts(), 2, H=2)


def test_from_windows_round_trip():
    ws = split_windows(ExternalBehavior((0, 1, 1, 1), (0, 1, 0)), 1)
    w = WindowSet.from_windows(ws, 0, Y, U)
    assert set(w.windows()) == set(ws)
    assert all(z in w for z in ws)
    assert LSequence((0,), ()) not in w


@pytest.mark.parametrize("seed", range(50))
def test_ces_relations_on_random_free_input_systems(seed):
    """The CES relation simulates the system by its abstraction, and its inverse alternates."""
    rng = random.Random(seed)
    ts = random_ts(rng, rng.randint(1, 6), rng.randint(1, 3), rng.randint(1, 3),
                   deterministic=True, free=True, all_initial=True)
    assert ts.is_deterministic() and ts.has_free_input()
    ell = rng.randint(0, 3)
    a = exact_salca(ts, ell).to_finite_ts()
    R = ces_relation(ts, ell)
    assert {z for _, z in R} == set(a.states)
    assert check_sr(ts, a, R)
    assert check_asr(a, ts, {(z, x) for x, z in R})
