"""Reach-avoid games on an abstraction and their refinement into concrete runs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .salca import Salca, tracker_init, tracker_step
from .systems import System


@dataclass(frozen=True)
class ReachAvoidSpec:
    goal: frozenset
    avoid: frozenset = frozenset()
    max_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "goal", frozenset(self.goal))
        object.__setattr__(self, "avoid", frozenset(self.avoid))
        if self.goal & self.avoid:
            raise ValueError("goal and avoid labels overlap")

    def resolve(self, labels) -> tuple[set[int], set[int]]:
        labels = list(labels)

        def idx(lab):
            if isinstance(lab, (int, np.integer)):
                if not 0 <= lab < len(labels):
                    raise ValueError(f"label index {lab} out of range")
                return int(lab)
            if lab not in labels:
                raise ValueError(f"unknown label {lab!r}")
            return labels.index(lab)

        return {idx(g) for g in self.goal}, {idx(a) for a in self.avoid}


@dataclass
class AbstractController:
    """Winning states (ids into the abstraction) with ranks and allowed inputs."""

    spec: ReachAvoidSpec
    rank: np.ndarray  # -1 for losing states
    allowed: dict  # state id -> tuple of inputs
    choice: np.ndarray  # preferred input per state, -1 if none
    goal_idx: frozenset = frozenset()

    @property
    def winning(self) -> np.ndarray:
        return np.flatnonzero(self.rank >= 0)

    def is_winning(self, s) -> bool:
        return s is not None and self.rank[s] >= 0


def solve_reach_avoid(a: Salca, spec: ReachAvoidSpec) -> AbstractController:
    """Controllable-predecessor fixpoint, at most ``spec.max_steps`` rounds (``None``: to convergence).

    A state enters at round ``i`` if some input has a non-empty successor set
    entirely inside the round ``i-1`` winning set. Avoid-labelled states never
    enter and are never traversed.
    """
    goal, avoid = spec.resolve(a.output_labels)
    out = a.state_output.astype(np.int64)
    blocked = np.isin(out, list(avoid)) if avoid else np.zeros(a.n_states, bool)
    rank = np.full(a.n_states, -1, dtype=np.int64)
    rank[np.isin(out, list(goal)) & ~blocked] = 0
    nU = a.n_inputs
    pair = a.src * nU + a.inp
    n_pairs = a.n_states * nU
    nonempty = np.bincount(pair, minlength=n_pairs) > 0
    allowed: dict[int, tuple] = {}
    i = 0
    while spec.max_steps is None or i < spec.max_steps:
        i += 1
        bad = np.bincount(pair, weights=(rank[a.dst] < 0), minlength=n_pairs) > 0
        good = (nonempty & ~bad).reshape(a.n_states, nU)
        new = good.any(axis=1) & (rank < 0) & ~blocked
        if not new.any():
            break
        rank[new] = i
        for s in np.flatnonzero(new).tolist():
            allowed[s] = tuple(np.flatnonzero(good[s]).tolist())
    choice = np.full(a.n_states, -1, dtype=np.int64)
    for s, us in allowed.items():
        worst = [int(rank[a.post(s, u)].max()) for u in us]
        choice[s] = us[int(np.argmin(worst))]  # argmin keeps the lowest input on ties
    return AbstractController(spec, rank, allowed, choice, frozenset(goal))


@dataclass
class RunReport:
    outcome: str  # goal | violation | cap | uncontrolled_start
    steps: int
    x0: list
    trace: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outcome == "goal"


def refine_and_run(sys: System, a: Salca, ctrl: AbstractController, x0, T: int,
                   step_cap: int = 250) -> RunReport:
    """Execute the abstract strategy on the concrete system with a ``T``-step hold.

    The goal is checked after every concrete step; the abstract tracker only
    advances at hold boundaries.
    """
    x = np.asarray(x0, dtype=float)
    y = sys.output(x)
    trk = tracker_init(a, y)
    rep = RunReport("goal", 0, x.tolist())
    if y in ctrl.goal_idx:
        return rep
    if trk.violated or not ctrl.is_winning(trk.state_id):
        rep.outcome = "uncontrolled_start"
        return rep
    steps = 0
    while True:
        s = trk.state_id
        u = int(ctrl.choice[s])
        for _ in range(T):
            x = sys.step(x, u)
            steps += 1
            y = sys.output(x)
            if y in ctrl.goal_idx:
                rep.trace.append({"step": steps, "u": u, "y": y, "state": s})
                rep.steps = steps
                return rep
            if steps >= step_cap:
                break
        rep.trace.append({"step": steps, "u": u, "y": y, "state": s})
        rep.steps = steps
        if steps >= step_cap:
            rep.outcome = "cap"
            return rep
        trk = tracker_step(trk, u, y)
        if trk.violated:
            rep.outcome = "violation"
            return rep
        if not ctrl.is_winning(trk.state_id):
            rep.outcome = "violation"
            return rep


def run_many(sys: System, a: Salca, ctrl: AbstractController, X0: np.ndarray, T: int,
             step_cap: int = 250) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`refine_and_run`: (outcome codes, step counts).

    Codes: 0 goal, 1 violation, 2 cap, 3 uncontrolled start.
    """
    X = np.array(X0, dtype=float)
    n = len(X)
    code = np.full(n, -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    goal = np.array(sorted(ctrl.goal_idx), dtype=np.int64)
    y = sys.output_batch(X)
    trks = [None] * n
    for j in range(n):
        if y[j] in ctrl.goal_idx:
            code[j] = 0
            continue
        t = tracker_init(a, int(y[j]))
        if t.violated or not ctrl.is_winning(t.state_id):
            code[j] = 3
        trks[j] = t
    while True:
        act = np.flatnonzero(code < 0)
        if not len(act):
            break
        sid = [trks[j].state_id for j in act.tolist()]
        U = ctrl.choice[np.array(sid)]
        Xa = X[act]
        done = np.zeros(len(act), dtype=bool)
        for _ in range(T):
            live = ~done
            Xa[live] = sys.step_batch(Xa[live], U[live])
            steps[act[live]] += 1
            ya = sys.output_batch(Xa)
            hit = live & np.isin(ya, goal)
            code[act[hit]] = 0
            done |= hit | (steps[act] >= step_cap)
        X[act] = Xa
        for jj, j in enumerate(act.tolist()):
            if code[j] >= 0:
                continue
            if steps[j] >= step_cap:
                code[j] = 2
                continue
            t = tracker_step(trks[j], int(U[jj]), int(ya[jj]))
            trks[j] = t
            if t.violated:
                code[j] = 1
            elif not ctrl.is_winning(t.state_id):
                code[j] = 1
    return code, steps


OUTCOMES = ("goal", "violation", "cap", "uncontrolled_start")
