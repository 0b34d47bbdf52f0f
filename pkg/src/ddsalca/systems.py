"""Concrete black-box systems, output labelers and wrappers.

Every system is stateless: the state is an ``(n, d)`` float array passed in and
returned, so batches of trajectories advance together.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np

from .behavior import ABS, ExternalBehavior


class GridLabeler:
    """Axis-aligned grid partition with optional override boxes.

    ``breakpoints[a]`` are the cell edges along axis ``a``; cells are closed on
    the left and the last one also on the right. Override boxes are checked
    first. Points outside ``domain`` map to ``ABS``.
    """

    def __init__(self, breakpoints: Sequence[Sequence[float]], cell_labels=None,
                 overrides=(), domain=None):
        self.breakpoints = [np.asarray(b, dtype=float) for b in breakpoints]
        for b in self.breakpoints:
            if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
                raise ValueError("breakpoints must be strictly increasing with at least two entries")
        self.counts = [len(b) - 1 for b in self.breakpoints]
        n_cells = int(np.prod(self.counts))
        if cell_labels is None:
            cell_labels = [f"cell{i}" for i in range(n_cells)]
        cell_labels = list(cell_labels)
        if len(cell_labels) != n_cells:
            raise ValueError("one label per cell required")
        labels = list(dict.fromkeys(cell_labels))
        if len(labels) != len(cell_labels):
            raise ValueError("cell labels must be unique")
        self._cell_index = np.arange(n_cells, dtype=np.int16)
        self.overrides = []
        for lo, hi, lab in overrides:
            if lab not in labels:
                labels.append(lab)
            self.overrides.append((np.asarray(lo, float), np.asarray(hi, float), labels.index(lab)))
        self.labels = tuple(labels)
        if domain is None:
            domain = ([b[0] for b in self.breakpoints], [b[-1] for b in self.breakpoints])
        self.lower = np.asarray(domain[0], dtype=float)
        self.upper = np.asarray(domain[1], dtype=float)

    @classmethod
    def uniform(cls, lower, upper, counts, **kw):
        bps = [np.linspace(lo, hi, c + 1) for lo, hi, c in zip(lower, upper, counts)]
        return cls(bps, **kw)

    def label_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        flat = np.zeros(len(X), dtype=np.int64)
        for a, b in enumerate(self.breakpoints):
            idx = np.searchsorted(b[1:-1], X[:, a], side="right")
            flat = flat * self.counts[a] + idx
        out = self._cell_index[flat]
        for lo, hi, lab in self.overrides:
            hit = np.all((X >= lo) & (X <= hi), axis=1)
            out = np.where(hit, np.int16(lab), out)
        inside = np.all((X >= self.lower) & (X <= self.upper), axis=1)
        return np.where(inside, out, np.int16(ABS)).astype(np.int16)

    def label(self, x) -> int:
        return int(self.label_batch(np.asarray(x, dtype=float)[None, :])[0])


class System(ABC):
    """Deterministic discrete-time system with free finite input and a labeler."""

    name = "system"

    @property
    @abstractmethod
    def lower(self) -> np.ndarray: ...

    @property
    @abstractmethod
    def upper(self) -> np.ndarray: ...

    @property
    @abstractmethod
    def input_values(self) -> np.ndarray: ...

    @property
    @abstractmethod
    def output_labels(self) -> tuple: ...

    @property
    def input_labels(self) -> tuple:
        return tuple(str(v.tolist() if v.size > 1 else v.item()) for v in self.input_values)

    @property
    def n_inputs(self) -> int:
        return len(self.input_values)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @abstractmethod
    def step_batch(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Advance every row of ``X`` by one step under input indices ``U``."""

    @abstractmethod
    def output_batch(self, X: np.ndarray) -> np.ndarray: ...

    def in_domain(self, X: np.ndarray) -> np.ndarray:
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def advance(self, X: np.ndarray, U: np.ndarray):
        """One observed step; also reports rows that left the domain on the way."""
        X2 = self.step_batch(X, U)
        return X2, ~self.in_domain(X2)

    def step(self, x, u: int) -> np.ndarray:
        return self.step_batch(np.asarray(x, float)[None, :], np.array([u]))[0]

    def output(self, x) -> int:
        return int(self.output_batch(np.asarray(x, float)[None, :])[0])

    def from_unit(self, F: np.ndarray) -> np.ndarray:
        """Map points of the unit cube to the domain box (uniform sampling)."""
        return self.lower + F * (self.upper - self.lower)

    def params(self) -> dict:
        return {}


class LinearSystem(System):
    name = "linear"

    def __init__(self, A, B, inputs, lower, upper, labeler: GridLabeler):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float).reshape(len(self.A), -1)
        self._u = np.asarray(inputs, dtype=float).reshape(-1, self.B.shape[1])
        self._lo = np.asarray(lower, float)
        self._hi = np.asarray(upper, float)
        self.labeler = labeler

    lower = property(lambda self: self._lo)
    upper = property(lambda self: self._hi)
    input_values = property(lambda self: self._u)
    output_labels = property(lambda self: self.labeler.labels)

    def step_batch(self, X, U):
        return X @ self.A.T + self._u[np.asarray(U)] @ self.B.T

    def output_batch(self, X):
        return self.labeler.label_batch(X)


def linear_benchmark() -> LinearSystem:
    """2-D contracting linear system on [-3, 3]^2 with a 3x3 label grid."""
    A = 0.25 * np.array([[1.0, 2.0], [-1.8, 1.0]])
    B = np.array([[0.0], [1.0]])
    lo, hi = [-3.0, -3.0], [3.0, 3.0]
    names = [f"C{i}{j}" for i in range(3) for j in range(3)]
    lab = GridLabeler.uniform(lo, hi, [3, 3], cell_labels=names)
    return LinearSystem(A, B, [-0.3, 0.0, 0.3], lo, hi, lab)


class MountainCar(System):
    name = "mountaincar"
    force = 0.001
    gravity = 0.0025
    max_speed = 0.07
    min_position = -1.2
    max_position = 0.6
    goal_position = 0.5

    def __init__(self, actions=(-1.0, 1.0), labeler: GridLabeler | None = None):
        self._u = np.asarray(actions, dtype=float).reshape(-1, 1)
        self.labeler = labeler or mountain_car_labeler()

    lower = property(lambda self: np.array([self.min_position, -self.max_speed]))
    upper = property(lambda self: np.array([self.max_position, self.max_speed]))
    input_values = property(lambda self: self._u)
    output_labels = property(lambda self: self.labeler.labels)

    def step_batch(self, X, U):
        pos, vel = X[:, 0], X[:, 1]
        a = self._u[np.asarray(U), 0]
        vel = np.clip(vel + self.force * a - self.gravity * np.cos(3 * pos),
                      -self.max_speed, self.max_speed)
        pos = np.clip(pos + vel, self.min_position, self.max_position)
        vel = np.where((pos <= self.min_position) & (vel < 0), 0.0, vel)
        return np.stack([pos, vel], axis=1)

    def output_batch(self, X):
        return self.labeler.label_batch(X)

    def in_goal(self, X) -> np.ndarray:
        return np.asarray(X)[:, 0] >= self.goal_position


def mountain_car_labeler() -> GridLabeler:
    """Five equal position bands R1..R5 on [-1.2, 0.5) and G on [0.5, 0.6]."""
    pos = np.append(np.linspace(-1.2, 0.5, 6), 0.6)
    return GridLabeler([pos, [-0.07, 0.07]], cell_labels=["R1", "R2", "R3", "R4", "R5", "G"])


def rl_grid_labeler(counts=(32, 32)) -> GridLabeler:
    """Uniform grid on [-1.2, 0.5] x [-0.07, 0.07]; everything with position >= 0.5 is G."""
    lab = GridLabeler.uniform(
        [-1.2, -0.07], [0.5, 0.07], counts,
        cell_labels=[f"q{i}_{j}" for i in range(counts[0]) for j in range(counts[1])],
        overrides=[([0.5, -0.07], [0.6, 0.07], "G")],
        domain=([-1.2, -0.07], [0.6, 0.07]),
    )
    return lab


class Wrapper(System):
    def __init__(self, inner: System):
        self.inner = inner

    lower = property(lambda self: self.inner.lower)
    upper = property(lambda self: self.inner.upper)
    input_values = property(lambda self: self.inner.input_values)
    output_labels = property(lambda self: self.inner.output_labels)

    @property
    def input_labels(self):
        return self.inner.input_labels

    def output_batch(self, X):
        return self.inner.output_batch(X)

    def in_goal(self, X):
        return self.inner.in_goal(X)


class ZeroOrderHold(Wrapper):
    """Each step applies the same input ``T`` times to the inner system."""

    def __init__(self, inner: System, T: int):
        super().__init__(inner)
        if T < 1:
            raise ValueError("hold length must be positive")
        self.T = int(T)
        self.name = inner.name

    def params(self):
        return {**self.inner.params(), "hold": self.T}

    def step_batch(self, X, U):
        for _ in range(self.T):
            X = self.inner.step_batch(X, U)
        return X

    def advance(self, X, U):
        left = np.zeros(len(X), dtype=bool)
        for _ in range(self.T):
            X, out = self.inner.advance(X, U)
            left |= out
        return X, left


class ClosedLoop(Wrapper):
    """Autonomous system obtained by closing the loop with a state-feedback policy."""

    def __init__(self, inner: System, policy: Callable[[np.ndarray], np.ndarray], label="pi"):
        super().__init__(inner)
        self.policy = policy
        self._label = label
        self.name = f"{inner.name}-closed"

    input_values = property(lambda self: np.zeros((1, 1)))

    @property
    def input_labels(self):
        return (self._label,)

    def step_batch(self, X, U):
        return self.inner.step_batch(X, self.policy(X))

    def advance(self, X, U):
        return self.inner.advance(X, self.policy(X))


class GoalAbsorbing(Wrapper):
    """Freezes the state once the inner system's goal test holds."""

    def __init__(self, inner: System, goal: Callable[[np.ndarray], np.ndarray] | None = None):
        super().__init__(inner)
        self.goal = goal or inner.in_goal
        self.name = f"{inner.name}-absorbing"

    def step_batch(self, X, U):
        X2 = self.inner.step_batch(X, U)
        return np.where(self.goal(X)[:, None], X, X2)

    def advance(self, X, U):
        X2, left = self.inner.advance(X, U)
        done = self.goal(X)
        return np.where(done[:, None], X, X2), left & ~done


def simulate_batch(sys: System, X0: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Outputs ``(n, H+1)`` of trajectories from ``X0`` under input rows ``U``.

    After a trajectory leaves the domain every later output is ``ABS``.
    """
    X = np.asarray(X0, dtype=float)
    U = np.asarray(U)
    n, H = U.shape
    out = np.empty((n, H + 1), dtype=np.int16)
    absorbed = ~sys.in_domain(X)
    out[:, 0] = np.where(absorbed, ABS, sys.output_batch(X))
    for k in range(H):
        X, left = sys.advance(X, U[:, k])
        absorbed |= left
        out[:, k + 1] = np.where(absorbed, ABS, sys.output_batch(X))
    return out


def simulate(sys: System, x0, u_seq: Sequence[int]) -> ExternalBehavior:
    x0 = np.asarray(x0, dtype=float)
    if not sys.in_domain(x0[None, :])[0]:
        raise ValueError("initial state outside the domain")
    u = np.asarray(u_seq, dtype=np.int64).reshape(1, -1)
    if u.shape[1] < 1:
        raise ValueError("need at least one input")
    if u.min() < 0 or u.max() >= sys.n_inputs:
        raise ValueError("input index out of range")
    outs = simulate_batch(sys, x0[None, :], u)[0]
    return ExternalBehavior(tuple(outs.tolist()), tuple(u[0].tolist()))


def make_system(name: str, **params) -> System:
    """Benchmark factory by name; ``hold`` wraps the result in a zero-order hold."""
    hold = int(params.pop("hold", 1))
    if name == "linear":
        sys = linear_benchmark()
    elif name == "mountaincar":
        labeler = params.pop("labeler", "bands")
        lab = rl_grid_labeler() if labeler == "grid" else mountain_car_labeler()
        sys = MountainCar(labeler=lab)
    else:
        raise ValueError(f"unknown system {name!r}")
    if params:
        raise ValueError(f"unknown system parameters {sorted(params)}")
    return ZeroOrderHold(sys, hold) if hold > 1 else sys
