import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsalca.behavior import ExternalBehavior, toy_ts
from ddsalca.salca import build_salca, collect_windows, exact_salca
from ddsalca.sampler import Dataset, SampleConfig, sample_dataset
from ddsalca.synthesis import (OUTCOMES, ReachAvoidSpec, refine_and_run, run_many,
                               solve_reach_avoid)
from ddsalca.systems import MountainCar, ZeroOrderHold

Y, U = ("y1", "y2"), ("ua", "ub")


def attractor_ranks(ts, goal, avoid, max_steps=None):
    """Plain set-based reach-avoid fixpoint on an explicit transition system."""
    rank = {x: 0 for x in ts.states if ts.output[x] in goal and ts.output[x] not in avoid}
    i = 0
    while max_steps is None or i < max_steps:
        i += 1
        new = {x for x in ts.states if x not in rank and ts.output[x] not in avoid
               and any(ts.post(x, u) and all(t in rank for t in ts.post(x, u))
                       for u in range(ts.n_inputs))}
        if not new:
            break
        rank.update({x: i for x in new})
    return rank


def test_example_reach_y1():
    a = exact_salca(toy_ts(), 1, H=4)
    ctrl = solve_reach_avoid(a, ReachAvoidSpec({"y1"}))
    win = {a.state(int(s)).format(Y, U): int(ctrl.rank[s]) for s in ctrl.winning}
    assert win == {"◇◇y1": 0, "y2uay1": 0, "y1uby2": 1}
    s = a.index(next(z for z in a.states() if z.format(Y, U) == "y1uby2"))
    assert ctrl.allowed[s] == (0,) and ctrl.choice[s] == 0


def test_goal_everything_and_empty_goal():
    a = exact_salca(toy_ts(), 1, H=4)
    assert len(solve_reach_avoid(a, ReachAvoidSpec({"y1", "y2"})).winning) == a.n_states
    d = Dataset.from_behaviors([ExternalBehavior((1, 1), (0,))], Y, U)
    b = build_salca(collect_windows(d, 0))
    assert len(solve_reach_avoid(b, ReachAvoidSpec({"y1"})).winning) == 0


def test_spec_validation():
    with pytest.raises(ValueError):
        ReachAvoidSpec({"a"}, {"a"})
    with pytest.raises(ValueError):
        ReachAvoidSpec({"zz"}).resolve(Y)
    with pytest.raises(ValueError):
        ReachAvoidSpec({5}).resolve(Y)
    assert ReachAvoidSpec({1}).resolve(Y) == ({1}, set())


@st.composite
def game(draw):
    ny, nu, H = draw(st.integers(2, 3)), draw(st.integers(1, 3)), draw(st.integers(1, 4))
    rows = [ExternalBehavior(tuple(draw(st.lists(st.integers(0, ny - 1), min_size=H + 1, max_size=H + 1))),
                             tuple(draw(st.lists(st.integers(0, nu - 1), min_size=H, max_size=H))))
            for _ in range(draw(st.integers(1, 10)))]
    d = Dataset.from_behaviors(rows, tuple(f"y{i}" for i in range(ny)), tuple(f"u{i}" for i in range(nu)))
    ell = draw(st.integers(0, H - 1))
    goal = draw(st.sets(st.integers(0, ny - 1), min_size=1, max_size=ny - 1))
    avoid = draw(st.sets(st.integers(0, ny - 1).filter(lambda y: y not in goal), max_size=1))
    steps = draw(st.one_of(st.none(), st.integers(0, 4)))
    return build_salca(collect_windows(d, ell)), goal, avoid, steps


@settings(max_examples=150, deadline=None)
@given(game())
def test_fixpoint_matches_set_oracle(g):
    a, goal, avoid, steps = g
    ctrl = solve_reach_avoid(a, ReachAvoidSpec(goal, avoid, steps))
    ts = a.to_finite_ts()
    ref = attractor_ranks(ts, goal, avoid, steps)
    got = {a.state(int(s)): int(ctrl.rank[s]) for s in ctrl.winning}
    assert got == ref
    for s in ctrl.winning.tolist():
        if ctrl.rank[s] > 0:
            u = int(ctrl.choice[s])
            assert u in ctrl.allowed[s]
            assert all(ctrl.rank[t] >= 0 and ctrl.rank[t] < ctrl.rank[s] for t in a.post(s, u))


@pytest.fixture(scope="module")
def car_game():
    car = MountainCar()
    d = sample_dataset(ZeroOrderHold(car, 50), SampleConfig(30000, 5, 4))
    a = build_salca(collect_windows(d, 2))
    return car, a, solve_reach_avoid(a, ReachAvoidSpec({"G"}, max_steps=5))


def test_run_single_and_batch_agree(car_game):
    car, a, ctrl = car_game
    rng = np.random.default_rng(0)
    X0 = car.lower + rng.random((40, 2)) * (car.upper - car.lower)
    code, steps = run_many(car, a, ctrl, X0, 50, step_cap=250)
    for i, x0 in enumerate(X0):
        rep = refine_and_run(car, a, ctrl, x0, 50, 250)
        assert OUTCOMES[code[i]] == rep.outcome
        assert steps[i] == rep.steps
    assert (code == 0).mean() >= 0.5  # small game: some start bands still unsolved


def test_run_special_starts(car_game):
    car, a, ctrl = car_game
    rep = refine_and_run(car, a, ctrl, [0.55, 0.0], 50)
    assert rep.outcome == "goal" and rep.steps == 0 and rep.success
    code, _ = run_many(car, a, ctrl, np.zeros((0, 2)), 50)
    assert len(code) == 0
    # an abstraction that never saw the start label cannot control it
    d = Dataset.from_behaviors([ExternalBehavior((5, 5), (0,))], car.output_labels, car.input_labels)
    tiny = build_salca(collect_windows(d, 0))
    c2 = solve_reach_avoid(tiny, ReachAvoidSpec({"G"}))
    assert refine_and_run(car, tiny, c2, [-0.5, 0.0], 50).outcome == "uncontrolled_start"


def test_step_cap(car_game):
    car, a, ctrl = car_game
    rng = np.random.default_rng(1)
    X0 = car.lower + rng.random((40, 2)) * (car.upper - car.lower)
    code, steps = run_many(car, a, ctrl, X0, 50)
    i = int(np.flatnonzero((code == 0) & (steps > 60))[0])
    rep = refine_and_run(car, a, ctrl, X0[i], 50, step_cap=30)
    assert rep.outcome == "cap" and rep.steps == 30
    # a cap inside a hold interval stops before the tracker moves
    assert len(rep.trace) == 1
