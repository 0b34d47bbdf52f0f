import numpy as np
import pytest

from ddsalca.qlearn import (QLearnConfig, QTable, closed_loop_system, compare_controllers,
                            rollout_steps, start_states, train, verify_closed_loop)
from ddsalca.systems import MountainCar


def test_cells_and_greedy_ties():
    q = QTable(np.zeros((32 * 32, 2)))
    X = np.array([[-1.2, -0.07], [0.5, 0.07], [0.6, 0.0], [-0.35, 0.0]])
    assert q.cells(X).tolist() == [0, 32 * 32 - 1, 31 * 32 + 16, 16 * 32 + 16]
    assert q.greedy(X).tolist() == [0, 0, 0, 0]
    q.values[16 * 32 + 16, 1] = 1.0
    assert q.greedy(X).tolist()[-1] == 1


def test_config_validation():
    with pytest.raises(ValueError):
        QLearnConfig(learning_rate=1.5)
    with pytest.raises(ValueError):
        QLearnConfig(discount=0)


def test_training_is_seeded():
    car = MountainCar()
    cfg = QLearnConfig(episodes=30)
    a, b = train(car, cfg, 1), train(car, cfg, 1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, train(car, cfg, 2).values)
    assert (a.values <= 0).all() and a.values.min() < 0


def test_rollout_with_hand_policy():
    car = MountainCar()
    q = QTable(np.zeros((32 * 32, 2)))
    # push in the direction of the velocity: energy pumping reaches the goal
    for i in range(32):
        for j in range(32):
            q.values[i * 32 + j, 1 if j >= 16 else 0] = 1.0
    steps = rollout_steps(car, q, start_states(200, 0), 250)
    assert (steps >= 0).mean() > 0.95
    assert rollout_steps(car, q, np.array([[0.55, 0.0]]), 250).tolist() == [0]
    lazy = QTable(np.zeros((32 * 32, 2)))
    assert rollout_steps(car, lazy, np.array([[-0.5, 0.0]]), 20).tolist() == [-1]


def test_closed_loop_verification_small():
    car = MountainCar()
    q = QTable(np.zeros((32 * 32, 2)))
    cl = closed_loop_system(car, q)
    assert cl.n_inputs == 1
    cert = verify_closed_loop(car, q, 2000, 5, 20, 1e-3, seed=0)
    assert cert.u_card == 1 and cert.eps_bar == cert.eps
    assert cert.provenance["windows"] > 0


def test_compare_controllers_rows():
    car = MountainCar()
    q = QTable(np.zeros((32 * 32, 2)))
    rows, diff = compare_controllers(lambda X: np.full(len(X), 100), q, car, 5, 0, 20)
    assert len(rows) == 5 and all(r[3] is None for r in rows) and np.isnan(diff)
    rows, diff = compare_controllers(lambda X: X, q, car, 0, 0)
    assert rows == [] and np.isnan(diff)
