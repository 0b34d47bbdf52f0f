"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 provenance mismatch, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from . import io as fio
from .pac import (LipschitzConstants, NumericError, certify, extend_contracting, extend_nu,
                  lambda_of)
from .qlearn import start_states
from .salca import build_salca, collect_windows
from .sampler import SampleConfig, sample_dataset
from .synthesis import OUTCOMES, ReachAvoidSpec, refine_and_run, solve_reach_avoid
from .systems import make_system

EXIT_CONFIG, EXIT_PROVENANCE, EXIT_NUMERIC = 2, 3, 4

DEFAULTS = {
    "system": {"name": "mountaincar", "hold": 50},
    "N": 1_000_000, "H": 5, "ell": 2, "beta": 1e-3, "seed": 0, "out": "run",
    "spec": {"goal": ["G"], "avoid": []},
    "trials": 1000, "step_cap": 250,
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None, args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(user)
    if "DDSALCA_SEED" in os.environ:
        try:
            cfg["seed"] = int(os.environ["DDSALCA_SEED"])
        except ValueError as e:
            raise ConfigError("DDSALCA_SEED must be an integer") from e
    if "DDSALCA_OUT" in os.environ:
        cfg["out"] = os.environ["DDSALCA_OUT"]
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    cfg["threads"] = args.threads
    validate(cfg)
    return cfg


def validate(cfg: dict):
    for key in ("N", "H", "ell", "seed"):
        if not isinstance(cfg.get(key), int):
            raise ConfigError(f"{key} must be an integer")
    if cfg["N"] < 1 or cfg["H"] < 1:
        raise ConfigError("N and H must be positive")
    if not 0 <= cfg["ell"] < cfg["H"]:
        raise ConfigError("ell must satisfy 0 <= ell < H")
    if not 0 < cfg["beta"] < 1:
        raise ConfigError("beta must lie in (0, 1)")
    if not isinstance(cfg.get("system"), dict) or "name" not in cfg["system"]:
        raise ConfigError("system block with a name is required")
    if not isinstance(cfg.get("spec", {}), dict):
        raise ConfigError("spec must be an object")


def system_of(cfg):
    params = dict(cfg["system"])
    try:
        sys_ = make_system(params.pop("name"), **params)
        _spec_of(cfg, None).resolve(sys_.output_labels)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return sys_


def _spec_of(cfg, max_steps) -> ReachAvoidSpec:
    spec = cfg.get("spec", {})
    try:
        return ReachAvoidSpec(spec.get("goal", []), spec.get("avoid", []),
                              spec.get("max_steps", max_steps))
    except ValueError as e:
        raise ConfigError(f"spec: {e}") from e


def out_dir(cfg) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _path(arg, cfg, name):
    return Path(arg) if arg else Path(cfg["out"]) / name


def cmd_sample(cfg, args):
    sys_ = system_of(cfg)
    d = sample_dataset(sys_, SampleConfig(cfg["N"], cfg["H"], cfg["seed"], cfg["threads"]))
    path = _path(args.dataset, cfg, "dataset.jsonl")
    out_dir(cfg)
    h = fio.save_dataset(d, path)
    print(json.dumps({"dataset": str(path), "records": d.N, "sha256": h}))


def cmd_build(cfg, args):
    dpath = _path(args.dataset, cfg, "dataset.jsonl")
    d = fio.load_dataset(dpath)
    ell = cfg["ell"] if args.ell is None else args.ell
    if not 0 <= ell < d.H:
        raise ConfigError(f"ell={ell} must be below the dataset horizon {d.H}")
    w = collect_windows(d, ell, store_symbols=True)
    a = build_salca(w)
    stats = {"windows": len(w), "states": a.n_states, "transitions": a.n_transitions}
    path = _path(args.abstraction, cfg, "abstraction.json")
    fio.save_abstraction(w, path, fio.file_sha256(dpath), stats)
    print(json.dumps({"abstraction": str(path), **stats}))


def _check(recorded, actual, what):
    if recorded != actual:
        raise fio.ProvenanceError(f"{what} hash mismatch: recorded {recorded}, found {actual}")


def cmd_certify(cfg, args):
    dpath = _path(args.dataset, cfg, "dataset.jsonl")
    apath = _path(args.abstraction, cfg, "abstraction.json")
    a, doc = fio.load_abstraction(apath)
    _check(doc["dataset_sha256"], fio.file_sha256(dpath), "dataset")
    d = fio.load_dataset(dpath)
    w = collect_windows(d, doc["ell"])
    if not np.array_equal(w.keys, a.windows.keys):
        raise fio.ProvenanceError("abstraction windows differ from the dataset's windows")
    cert = certify(w, d.N, cfg["beta"], len(d.input_labels), d.H)
    cert.provenance.update(dataset_sha256=doc["dataset_sha256"],
                           abstraction_sha256=fio.file_sha256(apath))
    path = _path(args.certificate, cfg, "certificate.json")
    fio.save_certificate(cert, path)
    print(json.dumps({"certificate": str(path), "s_star": cert.s_star, "eps": cert.eps,
                      "eps_bar": cert.eps_bar}))


def _constants(cfg, sys_) -> LipschitzConstants:
    block = cfg.get("lipschitz")
    if not block:
        raise ConfigError("extend needs a 'lipschitz' block")
    if block.get("from_linear"):
        if not hasattr(sys_, "A"):
            raise ConfigError("from_linear requires a linear system")
        return LipschitzConstants.linear(sys_.A, sys_.B)
    try:
        return LipschitzConstants(**block)
    except TypeError as e:
        raise ConfigError(f"lipschitz block: {e}") from e


def cmd_extend(cfg, args):
    sys_ = system_of(cfg)
    consts = _constants(cfg, sys_)
    cpath = _path(args.certificate, cfg, "certificate.json")
    cert = fio.load_certificate(cpath)
    ext = cfg.get("extend", {})
    mode = args.mode or ext.get("mode", "nu")
    if mode == "nu":
        lam = lambda_of(consts, cert.u_card)
        new = extend_nu(cert, lam, int(ext.get("T", args.T or 1)))
        info = {"nu": new.horizon["nu"], "eps_bar": new.eps_bar}
    elif mode == "contracting":
        try:
            psi = float(ext.get("psi", np.linalg.norm(sys_.upper)))
            u_sup = float(ext.get("u_sup", np.abs(sys_.input_values).max()))
            new, kbar = extend_contracting(cert, consts, psi, float(ext.get("r", 1.0)), u_sup)
        except ValueError as e:
            raise NumericError(str(e)) from e
        info = {"kbar": kbar, **new.horizon}
    else:
        raise ConfigError(f"unknown extend mode {mode!r}")
    new.provenance["certificate_sha256"] = fio.file_sha256(cpath)
    path = Path(cfg["out"]) / f"certificate_{mode}.json"
    fio.save_certificate(new, path)
    print(json.dumps({"certificate": str(path), **info}))


def cmd_synthesize(cfg, args):
    apath = _path(args.abstraction, cfg, "abstraction.json")
    cpath = _path(args.certificate, cfg, "certificate.json")
    a, _ = fio.load_abstraction(apath)
    cert = fio.load_certificate(cpath)
    _check(cert.provenance.get("abstraction_sha256"), fio.file_sha256(apath), "abstraction")
    spec = _spec_of(cfg, cert.H)
    try:
        spec.resolve(a.output_labels)
    except ValueError as e:
        raise ConfigError(f"spec: {e}") from e
    ctrl = solve_reach_avoid(a, spec)
    path = _path(args.controller, cfg, "controller.json")
    fio.save_controller(ctrl, a, path, {"abstraction_sha256": fio.file_sha256(apath),
                                        "certificate_sha256": fio.file_sha256(cpath)})
    init = [a.state(i).format(a.output_labels) for i in a.initial.tolist() if ctrl.rank[i] >= 0]
    print(json.dumps({"controller": str(path), "winning": int(len(ctrl.winning)),
                      "winning_initial": init}))


def cmd_run(cfg, args):
    apath = _path(args.abstraction, cfg, "abstraction.json")
    kpath = _path(args.controller, cfg, "controller.json")
    a, _ = fio.load_abstraction(apath)
    ctrl, doc = fio.load_controller(kpath, a)
    _check(doc["provenance"].get("abstraction_sha256"), fio.file_sha256(apath), "abstraction")
    T = int(cfg["system"].get("hold", 1))
    inner = system_of({**cfg, "system": {**cfg["system"], "hold": 1}})
    trials = cfg["trials"] if args.trials is None else args.trials
    X0 = start_states(trials, cfg["seed"], inner.lower, inner.upper) if trials else np.zeros((0, inner.dim))
    rows, counts = [], dict.fromkeys(OUTCOMES, 0)
    for i, x0 in enumerate(X0):
        rep = refine_and_run(inner, a, ctrl, x0, T, cfg["step_cap"])
        counts[rep.outcome] += 1
        rows.append({"trial": i, "x0": rep.x0, "outcome": rep.outcome, "steps": rep.steps,
                     "trace": rep.trace})
    path = Path(cfg["out"]) / "runs.jsonl"
    fio.write_jsonl(rows, path)
    print(json.dumps({"runs": str(path), "trials": trials, **counts}))


def cmd_param_study(cfg, args):
    ps = cfg.get("param_study", {})
    N_list = ps.get("N", [10**3, 10**4, 10**5])
    ell_list = ps.get("ell", [1, 2, 3, 4])
    if any(not 0 <= ell < cfg["H"] for ell in ell_list):
        raise ConfigError("every ell must be below H")
    sys_ = system_of(cfg)
    rows = bench.param_study(sys_, N_list, ell_list, cfg["H"], cfg["beta"], sys_.n_inputs,
                             cfg["seed"], cfg["threads"])
    path = Path(cfg["out"]) / "param_study.csv"
    fio.write_csv(rows, fio.PARAM_COLUMNS, path)
    print(json.dumps({"csv": str(path), "rows": len(rows)}))


def cmd_bench(cfg, args):
    name = args.name
    kw = dict(cfg.get("bench", {}).get(name, {}))
    kw.setdefault("seed", cfg["seed"])
    kw.setdefault("workers", cfg["threads"])
    out = out_dir(cfg)
    if name == "linear":
        res = bench.linear(**kw)
    elif name == "mountaincar":
        res = bench.mountaincar(**kw)
    elif name == "rl-compare":
        res = bench.rl_compare(**kw)
        fio.write_csv(res.pop("rows"), fio.COMPARE_COLUMNS, out / "compare.csv")
        fio.save_qtable(res.pop("qtable"), out / "qtable.json")
    else:
        raise ConfigError(f"unknown benchmark {name!r}")
    (out / f"bench_{name}.json").write_text(json.dumps(res, indent=1))
    print(json.dumps(res))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--threads", type=int, default=1)
    p = argparse.ArgumentParser(prog="ddsalca", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sample", parents=[common])
    s.add_argument("--dataset")
    s = sub.add_parser("build", parents=[common])
    s.add_argument("--dataset")
    s.add_argument("--abstraction")
    s.add_argument("--ell", type=int)
    s = sub.add_parser("certify", parents=[common])
    s.add_argument("--dataset")
    s.add_argument("--abstraction")
    s.add_argument("--certificate")
    s = sub.add_parser("extend", parents=[common])
    s.add_argument("--certificate")
    s.add_argument("--mode", choices=["nu", "contracting"])
    s.add_argument("--T", type=int)
    s = sub.add_parser("synthesize", parents=[common])
    s.add_argument("--abstraction")
    s.add_argument("--certificate")
    s.add_argument("--controller")
    s = sub.add_parser("run", parents=[common])
    s.add_argument("--abstraction")
    s.add_argument("--controller")
    s.add_argument("--trials", type=int)
    sub.add_parser("param-study", parents=[common])
    s = sub.add_parser("bench", parents=[common])
    s.add_argument("name", choices=["linear", "mountaincar", "rl-compare"])
    return p


COMMANDS = {"sample": cmd_sample, "build": cmd_build, "certify": cmd_certify,
            "extend": cmd_extend, "synthesize": cmd_synthesize, "run": cmd_run,
            "param-study": cmd_param_study, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = load_config(args.config, args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except fio.ProvenanceError as e:
        print(f"provenance mismatch: {e}", file=sys.stderr)
        return EXIT_PROVENANCE
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as e:
        print(f"config error: cannot use input: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
