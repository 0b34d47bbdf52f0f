"""End-to-end benchmark pipelines shared by the CLI and the acceptance tests."""
from __future__ import annotations

import time

import numpy as np

from .pac import (LipschitzConstants, certify, complexity_greedy, contraction_offset, epsilon,
                  extend_contracting, inflate, lambda_of, nu_factor)
from .qlearn import (QLearnConfig, compare_controllers, rollout_steps, start_states, train,
                     verify_closed_loop)
from .salca import build_salca, collect_windows
from .sampler import SampleConfig, sample_dataset
from .synthesis import OUTCOMES, ReachAvoidSpec, run_many, solve_reach_avoid
from .systems import MountainCar, ZeroOrderHold, linear_benchmark


def linear(N=2_000_000, H=4, ell=2, beta=1e-6, seed=0, workers=1, resample_N=1_000_000,
           r=1.0, T=1) -> dict:
    """Certificate, contracting horizon and extension factor for the 2-D linear system."""
    t0 = time.perf_counter()
    sys = linear_benchmark()
    d = sample_dataset(sys, SampleConfig(N, H, seed, workers))
    w = collect_windows(d, ell)
    cert = certify(w, N, beta, sys.n_inputs, H)
    consts = LipschitzConstants.linear(sys.A, sys.B)
    u_sup = float(np.abs(sys.input_values).max())
    psi = float(np.linalg.norm(sys.upper))  # farthest domain point from the origin
    _, kbar = extend_contracting(cert, consts, psi, r, u_sup)
    lam = lambda_of(consts, sys.n_inputs)
    nu = nu_factor(lam, H, T)
    out = {"windows": len(w), "s_star": cert.s_star, "eps": cert.eps, "eps_bar": cert.eps_bar,
           "kbar": kbar, "rho": contraction_offset(consts.l_X, consts.l_U, u_sup), "psi": psi,
           "lambda": lam, "nu": nu, "eps_bar_nu": min(1.0, nu * cert.eps_bar),
           "seconds": time.perf_counter() - t0}
    if resample_N and kbar > H:
        d2 = sample_dataset(sys, SampleConfig(resample_N, kbar, seed + 1, workers))
        w2 = collect_windows(d2, ell)
        c2 = certify(w2, resample_N, beta, sys.n_inputs, kbar)
        out.update(resample_H=kbar, resample_s_star=c2.s_star, resample_eps_bar=c2.eps_bar)
    return out


def mountaincar_pipeline(N=1_000_000, H=5, T=50, ell=2, beta=1e-3, seed=0, workers=1):
    """Sample, abstract, certify and solve the reach-G game; returns intermediate objects."""
    car = MountainCar()
    d = sample_dataset(ZeroOrderHold(car, T), SampleConfig(N, H, seed, workers))
    w = collect_windows(d, ell)
    a = build_salca(w)
    cert = certify(w, N, beta, car.n_inputs, H)
    ctrl = solve_reach_avoid(a, ReachAvoidSpec({"G"}, max_steps=H))
    return {"system": car, "dataset": d, "windows": w, "salca": a, "cert": cert, "ctrl": ctrl}


def mountaincar(N=1_000_000, H=5, T=50, ell=2, beta=1e-3, seed=0, trials=10_000, workers=1) -> dict:
    t0 = time.perf_counter()
    p = mountaincar_pipeline(N, H, T, ell, beta, seed, workers)
    a, ctrl, cert = p["salca"], p["ctrl"], p["cert"]
    init = {a.state(i).format(a.output_labels): int(ctrl.rank[i]) for i in a.initial.tolist()}
    X0 = start_states(trials, seed + 1000, p["system"].lower, p["system"].upper)
    code, steps = run_many(p["system"], a, ctrl, X0, T, step_cap=H * T)
    counts = np.bincount(code, minlength=len(OUTCOMES))
    return {"windows": len(p["windows"]), "states": a.n_states, "transitions": a.n_transitions,
            "s_star": cert.s_star, "eps": cert.eps, "eps_bar": cert.eps_bar,
            "initial_ranks": init,
            # initial states that need control to win (goal starts have rank 0)
            "winning_initial": sum(r > 0 for r in init.values()),
            "outcomes": dict(zip(OUTCOMES, counts.tolist())),
            "success_rate": float(counts[0] / max(trials, 1)),
            "mean_steps": float(steps[code == 0].mean()) if counts[0] else float("nan"),
            "seconds": time.perf_counter() - t0}


def rl_compare(N=1_000_000, H=5, T=50, ell=2, beta=1e-3, seed=0, trials=10_000,
               episodes=50_000, M=950_000, ell_cl=100, H_cl=250, workers=1) -> dict:
    t0 = time.perf_counter()
    p = mountaincar_pipeline(N, H, T, ell, beta, seed, workers)
    car = p["system"]
    q = train(car, QLearnConfig(episodes=episodes), seed)
    X0 = start_states(trials, seed + 2000)
    rl_steps = rollout_steps(car, q, X0, H * T)
    cert = verify_closed_loop(car, q, M, ell_cl, H_cl, beta, seed + 3000, workers)

    def run_abstract(X):
        code, steps = run_many(car, p["salca"], p["ctrl"], X, T, step_cap=H * T)
        return np.where(code == 0, steps, -1)

    rows, mean_diff = compare_controllers(run_abstract, q, car, trials, seed + 2000, H * T)
    return {"rl_success_rate": float((rl_steps >= 0).mean()),
            "closed_loop_s_star": cert.s_star, "closed_loop_eps_bar": cert.eps_bar,
            "abstract_eps_bar": p["cert"].eps_bar, "mean_diff": mean_diff, "rows": rows,
            "qtable": q, "seconds": time.perf_counter() - t0}


def param_study(system, N_list, ell_list, H, beta, u_card, seed=0, workers=1) -> list[tuple]:
    """Rows ``(N, ell, windows, states, transitions, s_star, eps, eps_bar)`` on prefixes of one dataset."""
    N_list = sorted(int(n) for n in N_list)
    d = sample_dataset(system, SampleConfig(N_list[-1], H, seed, workers))
    rows = []
    for N in N_list:
        sub = d.head(N)
        for ell in ell_list:
            w = collect_windows(sub, ell, store_symbols=False)
            a = build_salca(w)
            s = complexity_greedy(w, N)
            e = epsilon(s, beta, N)
            rows.append((N, ell, len(w), a.n_states, a.n_transitions, s, e, inflate(e, u_card, H)))
    return rows
