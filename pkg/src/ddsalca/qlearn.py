"""Tabular Q-learning on mountain car and closed-loop certification of the learned policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pac import PacCertificate, certify
from .salca import collect_windows
from .sampler import SampleConfig, bits_to_index, bits_to_unit, counter_bits, sample_dataset
from .systems import ClosedLoop, GoalAbsorbing, MountainCar, System


@dataclass(frozen=True)
class QLearnConfig:
    counts: tuple = (32, 32)
    lower: tuple = (-1.2, -0.07)
    upper: tuple = (0.5, 0.07)
    learning_rate: float = 0.1
    exploration: float = 0.01
    reward: float = -1.0
    discount: float = 1.0
    episodes: int = 50_000
    episode_cap: int = 250

    def __post_init__(self):
        if not 0 <= self.learning_rate <= 1 or not 0 <= self.exploration <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")


@dataclass
class QTable:
    """Values per (grid cell, action); cells are row-major over (position, velocity)."""

    values: np.ndarray
    cfg: QLearnConfig = field(default_factory=QLearnConfig)

    def cells(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        idx = np.zeros(len(X), dtype=np.int64)
        for a, (lo, hi, c) in enumerate(zip(self.cfg.lower, self.cfg.upper, self.cfg.counts)):
            i = np.floor((X[:, a] - lo) / (hi - lo) * c).astype(np.int64)
            idx = idx * c + np.clip(i, 0, c - 1)
        return idx

    def greedy(self, X: np.ndarray) -> np.ndarray:
        """Greedy action per row; ``argmax`` returns the lowest index on ties."""
        return np.argmax(self.values[self.cells(X)], axis=1).astype(np.int16)


def _cell(pos, vel, cfg, span_p, span_v):
    i = int((pos - cfg.lower[0]) / span_p)
    j = int((vel - cfg.lower[1]) / span_v)
    ci, cj = cfg.counts
    i = 0 if i < 0 else (ci - 1 if i >= ci else i)
    j = 0 if j < 0 else (cj - 1 if j >= cj else j)
    return i * cj + j


def train(sys: MountainCar, cfg: QLearnConfig = QLearnConfig(), seed: int = 0) -> QTable:
    """Epsilon-greedy one-step Q-learning, one counter-seeded random stream per episode."""
    n_cells = int(np.prod(cfg.counts))
    nA = sys.n_inputs
    Q = [[0.0] * nA for _ in range(n_cells)]
    span_p = (cfg.upper[0] - cfg.lower[0]) / cfg.counts[0]
    span_v = (cfg.upper[1] - cfg.lower[1]) / cfg.counts[1]
    forces = [float(v) for v in sys.input_values[:, 0]]
    f, g, vmax = sys.force, sys.gravity, sys.max_speed
    pmin, pmax, goal = sys.min_position, sys.max_position, sys.goal_position
    alpha, eps, r, gamma = cfg.learning_rate, cfg.exploration, cfg.reward, cfg.discount
    cos = math.cos
    for ep in range(cfg.episodes):
        bits = counter_bits(seed, np.array([ep]), 2 + 2 * cfg.episode_cap)[0]
        unit = bits_to_unit(bits).tolist()
        pos = cfg.lower[0] + unit[0] * (cfg.upper[0] - cfg.lower[0])
        vel = cfg.lower[1] + unit[1] * (cfg.upper[1] - cfg.lower[1])
        if pos >= goal:
            continue
        s = _cell(pos, vel, cfg, span_p, span_v)
        for t in range(cfg.episode_cap):
            qs = Q[s]
            if unit[2 + 2 * t] < eps:
                a = int(unit[3 + 2 * t] * nA)
            else:
                a = max(range(nA), key=qs.__getitem__)
            vel += f * forces[a] - g * cos(3 * pos)
            vel = vmax if vel > vmax else (-vmax if vel < -vmax else vel)
            pos += vel
            if pos <= pmin:
                pos = pmin
                if vel < 0:
                    vel = 0.0
            elif pos > pmax:
                pos = pmax
            if pos >= goal:
                qs[a] += alpha * (r - qs[a])
                break
            s2 = _cell(pos, vel, cfg, span_p, span_v)
            qs[a] += alpha * (r + gamma * max(Q[s2]) - qs[a])
            s = s2
    return QTable(np.array(Q, dtype=np.float64), cfg)


def q_policy(sys: MountainCar, q: QTable):
    return lambda X: q.greedy(X)


def rollout_steps(sys: MountainCar, q: QTable, X0: np.ndarray, cap: int = 250) -> np.ndarray:
    """Steps until the goal under the greedy policy; ``-1`` if not reached within ``cap``."""
    X = np.array(X0, dtype=float)
    steps = np.full(len(X), -1, dtype=np.int64)
    steps[sys.in_goal(X)] = 0
    for t in range(1, cap + 1):
        act = steps < 0
        if not act.any():
            break
        Xa = sys.step_batch(X[act], q.greedy(X[act]))
        X[act] = Xa
        idx = np.flatnonzero(act)
        steps[idx[sys.in_goal(Xa)]] = t
    return steps


def closed_loop_system(sys: MountainCar, q: QTable) -> System:
    """Autonomous mountain car under the greedy policy, frozen once the goal is reached."""
    return GoalAbsorbing(ClosedLoop(sys, q_policy(sys, q)))


def verify_closed_loop(sys: MountainCar, q: QTable, M: int, ell: int, H: int, beta: float,
                       seed: int = 0, workers: int = 1) -> PacCertificate:
    cl = closed_loop_system(sys, q)
    d = sample_dataset(cl, SampleConfig(M, H, seed, workers))
    w = collect_windows(d, ell, store_symbols=False)
    cert = certify(w, d.N, beta, u_card=1, H=H)
    cert.provenance.update(windows=len(w), closed_loop=True)
    return cert


def start_states(n: int, seed: int, lower=(-1.2, -0.07), upper=(0.5, 0.07)) -> np.ndarray:
    lo, hi = np.asarray(lower), np.asarray(upper)
    return lo + bits_to_unit(counter_bits(seed, np.arange(n), 2)) * (hi - lo)


def compare_controllers(run_abstract, q: QTable, sys: MountainCar, trials: int, seed: int,
                        cap: int = 250):
    """Steps to goal of both controllers from shared starts.

    ``run_abstract(X0)`` returns per-trial steps (``-1`` for failures). Returns
    rows ``(trial, steps_abstract, steps_rl, diff)`` (diff ``None`` unless both
    succeed) and the mean difference over trials where both succeed.
    """
    if trials == 0:
        return [], float("nan")
    X0 = start_states(trials, seed)
    sa = np.asarray(run_abstract(X0))
    sr = rollout_steps(sys, q, X0, cap)
    rows = []
    for i, (a, b) in enumerate(zip(sa.tolist(), sr.tolist())):
        rows.append((i, a, b, a - b if a >= 0 and b >= 0 else None))
    diffs = [r[3] for r in rows if r[3] is not None]
    return rows, float(np.mean(diffs)) if diffs else float("nan")


__all__ = ["QLearnConfig", "QTable", "train", "rollout_steps", "verify_closed_loop",
           "compare_controllers", "closed_loop_system", "start_states", "bits_to_index"]
