"""Command-line experiment driver.

Every subcommand takes a network (an INP file, a canonical JSON export or
``synthetic``), optional INI config (section ``[experiment]``, keys named
like the long flags with dashes or underscores) and writes plain CSV/JSON
into ``--out``.  Flags override the config file.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, NumericalError, ParseError, RecoveryError, StructuralError
from .experiment import (FLOW_BASES, band, flow_experiment, flow_setup, make_scenario,
                         pressure_experiment, sample_budget)
from .hydraulics import HeadLossModel, normalize_law, solve_steady_state
from .network import (ACTIVE_EDGE_KINDS, Network, SignalTable, generate_synthetic, read_inp,
                      write_table)
from .recon import ScaConfig
from .sampling import maxdet_place, write_sampling
from .spectral import eig_sym, write_eigenvalues, write_eigenvectors
from .sparsify import write_selected
from .topology import build_complex, write_triplets

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SWEEP_HEADER = ["basis", "samples", "seed", "param", "nmse", "fit_term", "conservation_term"]
LAPLACIANS = ("L0", "L1_down", "L1_up", "L1", "L2")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- parsing


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(";", ",").split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    out = []
    for tok in str(text).replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok:
            a, b = tok.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(tok))
    return out


def _samples(text: str) -> list:
    """Sample sizes: tokens with a decimal point are fractions, others counts."""
    out = []
    for tok in str(text).replace(";", ",").split(","):
        tok = tok.strip()
        if tok:
            out.append(float(tok) if "." in tok else int(tok))
    return out


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with an [experiment] section")
    common.add_argument("--network", help="INP path, JSON export, or 'synthetic'")
    common.add_argument("--seed", help="seed or list (e.g. 0-9 or 1,3,5)")
    common.add_argument("--nodes", type=int, help="synthetic network size")
    common.add_argument("--loop-fraction", type=float, help="synthetic chord fraction")
    common.add_argument("--law", help="hazen-williams or darcy-weisbach")
    common.add_argument("--p-max", type=int, help="longest cell boundary (default 30)")
    common.add_argument("--epsilon", type=float,
                        help="basis pursuit tolerance as a fraction of ||X||_F")
    common.add_argument("--samples", help="sample sizes; 0.2 = 20%%, 14 = 14 elements")
    common.add_argument("--lambda", dest="lam", help="conservation weight(s) for pressures")
    common.add_argument("--beta", help="conservation weight(s) for flows")
    common.add_argument("--jobs", type=int, help="parallel sweep workers")
    common.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(prog="wdntsp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("inspect", parents=[common], help="summarise a network")
    sub.add_parser("simulate", parents=[common], help="steady-state heads and flows")
    sub.add_parser("complex", parents=[common], help="incidence matrices of the cell complex")
    p = sub.add_parser("basis", parents=[common], help="Laplacian eigenbasis and sparse band")
    p.add_argument("--laplacian", choices=LAPLACIANS)
    p = sub.add_parser("place", parents=[common], help="Max-Det sensor placement")
    p.add_argument("--orientation", choices=("node", "edge"))
    p.add_argument("--basis", choices=FLOW_BASES)
    sub.add_parser("recon-pressure", parents=[common], help="SCA pressure reconstruction")
    p = sub.add_parser("recon-flow", parents=[common], help="closed-form flow reconstruction")
    p.add_argument("--basis", choices=FLOW_BASES)
    p = sub.add_parser("sweep", parents=[common], help="grid of reconstructions to CSV")
    p.add_argument("--estimator", choices=("flow", "pressure"))
    p.add_argument("--bases", help="comma list of flow bases (default L1_down,L1)")
    return parser


DEFAULTS = {
    "network": "synthetic", "seed": "0", "nodes": 50, "loop_fraction": 0.4,
    "law": "hazen-williams", "p_max": 30, "epsilon": 0.05, "samples": "0.2,0.4,0.6",
    "lam": "1.0", "beta": "0.3", "jobs": 1, "out": ".", "laplacian": "L1",
    "orientation": "node", "basis": "L1", "estimator": "flow", "bases": "L1_down,L1",
}
_CASTS = {"nodes": int, "loop_fraction": float, "p_max": int, "epsilon": float, "jobs": int}
_ALIASES = {"lambda": "lam", "p-max": "p_max", "loop-fraction": "loop_fraction"}


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        ini = configparser.ConfigParser()
        ini.read(path)
        if not ini.has_section("experiment"):
            raise ConfigError(f"{path} has no [experiment] section")
        for key, value in ini.items("experiment"):
            key = _ALIASES.get(key, key.replace("-", "_"))
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                cfg[key] = _CASTS.get(key, str)(value)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: {exc}") from None
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    try:
        cfg["law"] = normalize_law(cfg["law"])
        cfg["seeds"] = _ints(cfg["seed"])
        cfg["sample_list"] = _samples(cfg["samples"])
        cfg["lam_list"] = _floats(cfg["lam"])
        cfg["beta_list"] = _floats(cfg["beta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for name in ("seeds", "sample_list", "lam_list", "beta_list"):
        if not cfg[name]:
            raise ConfigError(f"{name} must not be empty")
    if cfg["p_max"] < 3:
        raise ConfigError("--p-max must be >= 3")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    if not 0 <= cfg["epsilon"] < 1:
        raise ConfigError("--epsilon must lie in [0, 1)")
    if any(v < 0 for v in cfg["lam_list"] + cfg["beta_list"]):
        raise ConfigError("lambda and beta must be >= 0")
    if cfg["network"] != "synthetic" and not Path(cfg["network"]).is_file():
        raise ConfigError(f"network file {cfg['network']} does not exist")
    return cfg


def load_network(cfg: dict, seed: int) -> Network:
    src = cfg["network"]
    if src == "synthetic":
        return generate_synthetic(seed, cfg["nodes"], cfg["loop_fraction"])
    if src.lower().endswith(".json"):
        return Network.from_json(Path(src).read_text())
    return read_inp(src)


def _out(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_inspect(cfg):
    net = load_network(cfg, cfg["seeds"][0])
    kinds = {}
    for item in list(net.nodes) + list(net.edges):
        kinds[item.kind] = kinds.get(item.kind, 0) + 1
    info = {
        "name": net.metadata.get("name"), "nodes": net.n_nodes, "edges": net.n_edges,
        "kinds": kinds, "cyclomatic_number": net.cyclomatic_number(),
        "components": net.n_components(), "passive_connected": net.passive_connected(),
        "active_edges": [net.edges[k].id for k in net.active_edges()],
        "warnings": list(net.warnings),
    }
    _dump(_out(cfg) / "inspect.json", info)
    print(json.dumps(info, indent=1, sort_keys=True))


def cmd_simulate(cfg):
    net = load_network(cfg, cfg["seeds"][0])
    model = HeadLossModel.from_network(net, cfg["law"])
    state = solve_steady_state(net, model)
    out = _out(cfg)
    passive = [e.id for e in net.edges if e.kind not in ACTIVE_EDGE_KINDS]
    write_table(SignalTable("node", tuple(net.node_ids), state.heads, "heads"), out / "heads.csv")
    write_table(SignalTable("edge", tuple(passive), state.flows, "flows"), out / "flows.csv")
    meta = {"law": state.law, "alpha": state.alpha, "iterations": state.iterations,
            "residual_mass": state.residual_mass, "residual_energy": state.residual_energy,
            "network": net.metadata.get("name")}
    _dump(out / "simulate.json", meta)
    print(f"converged in {state.iterations} iterations; mass residual "
          f"{state.residual_mass:.3e}, energy residual {state.residual_energy:.3e}")


def cmd_complex(cfg):
    net = load_network(cfg, cfg["seeds"][0])
    cx = build_complex(net, cfg["p_max"])
    out = _out(cfg)
    write_triplets(cx.b1, out / "B1.txt")
    write_triplets(cx.b2, out / "B2.txt")
    lengths = [len(c) for c in cx.b2.cycles]
    info = {"nodes": cx.b1.rows, "edges": cx.b1.cols, "cells": cx.b2.cols,
            "cell_lengths": {str(k): lengths.count(k) for k in sorted(set(lengths))},
            "harmonic_dimension": cx.harmonic_dimension, "p_max": cfg["p_max"]}
    _dump(out / "complex.json", info)
    print(json.dumps(info, sort_keys=True))


def cmd_basis(cfg):
    seed = cfg["seeds"][0]
    net = load_network(cfg, seed)
    scn = make_scenario(net, cfg["law"], seed=seed)
    cx = build_complex(net, cfg["p_max"])
    kind = cfg["laplacian"]
    basis = eig_sym(getattr(cx.laplacians, kind), kind)
    out = _out(cfg)
    write_eigenvalues(basis, out / f"{kind}_eigenvalues.csv")
    write_eigenvectors(basis, out / f"{kind}_eigenvectors.csv")
    if kind in ("L0", "L1_down", "L1_up", "L1"):
        X = np.column_stack([s.heads if kind == "L0" else s.flows for s in scn.snapshots])
        sel = band(X, basis, cfg["epsilon"]).selected
        write_selected(sel, out / f"{kind}_selected.csv")
        print(f"{kind}: {basis.size} eigenpairs, band of {len(sel)} at epsilon={cfg['epsilon']}")
    else:
        print(f"{kind}: {basis.size} eigenpairs")


def cmd_place(cfg):
    seed = cfg["seeds"][0]
    net = load_network(cfg, seed)
    scn = make_scenario(net, cfg["law"], seed=seed)
    out = _out(cfg)
    if cfg["orientation"] == "node":
        cx = build_complex(net, cfg["p_max"])
        full = eig_sym(cx.laplacians.L0, "L0")
        X = np.column_stack([s.heads for s in scn.snapshots])
        ids = net.node_ids
    else:
        cx, _, _, full, X = flow_setup(scn, cfg["basis"], cfg["p_max"])
        ids = [net.edges[k].id for k in cx.b1.edge_index]
    m = sample_budget(cfg["sample_list"][0], full.size)
    basis = band(X, full, cfg["epsilon"], budget=m)
    S = maxdet_place(basis.U_sel, m, cfg["orientation"], basis.selected)
    write_sampling(S, ids, out / "sampling.csv")
    print(f"placed {len(S)} {cfg['orientation']} sensors over a band of {len(basis.selected)}")


def cmd_recon_pressure(cfg):
    seed = cfg["seeds"][0]
    net = load_network(cfg, seed)
    scn = make_scenario(net, cfg["law"], seed=seed)
    res = pressure_experiment(scn, cfg["sample_list"][0], cfg["lam_list"][0], cfg["epsilon"],
                              cfg["p_max"], ScaConfig(seed=seed))
    out = _out(cfg)
    write_table(SignalTable("node", tuple(net.node_ids), res.estimate, "estimate"),
                out / "pressure_estimate.csv")
    with open(out / "pressure_trace.csv", "w") as fh:
        fh.write("iteration,cost\n")
        for i, v in enumerate(res.cost_trace):
            fh.write(f"{i},{format(v, '.17g')}\n")
    _dump(out / "pressure_report.json", {
        "nmse": res.nmse, "iterations": res.iterations, "converged": res.converged,
        "samples": res.n_samples, "band": res.band_size, "lambda": cfg["lam_list"][0],
        "fit_term": res.fit_term, "conservation_term": res.conservation_term,
        "sampling": [net.node_ids[i] for i in res.sampling]})
    print(f"NMSE {res.nmse:.4e} after {res.iterations} SCA iterations "
          f"({res.n_samples} sensors, band {res.band_size})")


def cmd_recon_flow(cfg):
    seed = cfg["seeds"][0]
    net = load_network(cfg, seed)
    scn = make_scenario(net, cfg["law"], seed=seed)
    setup = flow_setup(scn, cfg["basis"], cfg["p_max"])
    res = flow_experiment(scn, cfg["sample_list"][0], cfg["basis"], cfg["beta_list"][0],
                          cfg["epsilon"], cfg["p_max"], setup=setup)
    out = _out(cfg)
    ids = tuple(net.edges[k].id for k in setup[0].b1.edge_index)
    write_table(SignalTable("edge", ids, res.estimate, "estimate"), out / "flow_estimate.csv")
    _dump(out / "flow_report.json", {
        "nmse": res.nmse, "samples": res.n_samples, "band": res.band_size,
        "beta": cfg["beta_list"][0], "basis": cfg["basis"], "clamped": res.clamped,
        "fit_term": res.fit_term, "conservation_term": res.conservation_term,
        "sampling": [ids[i] for i in res.sampling]})
    print(f"NMSE {res.nmse:.4e} ({res.n_samples} sensors, band {res.band_size}, "
          f"{res.clamped} clamped)")


def _sweep_cell(task):
    """All rows for one (seed, basis); failures become NaN rows plus a message."""
    cfg, seed, basis = task
    params = cfg["beta_list"] if cfg["estimator"] == "flow" else cfg["lam_list"]
    rows, errors = [], []
    try:
        net = load_network(cfg, seed)
        scn = make_scenario(net, cfg["law"], seed=seed)
        setup = flow_setup(scn, basis, cfg["p_max"]) if cfg["estimator"] == "flow" else None
    except Exception as exc:  # recorded per row, the sweep continues
        scn, setup = None, None
        setup_error = f"{type(exc).__name__}: {exc}"
    for samples in cfg["sample_list"]:
        for param in params:
            key = [basis, samples, seed, param]
            try:
                if scn is None:
                    raise RuntimeError(setup_error)
                if cfg["estimator"] == "flow":
                    r = flow_experiment(scn, samples, basis, param, cfg["epsilon"],
                                        cfg["p_max"], setup=setup)
                else:
                    r = pressure_experiment(scn, samples, param, cfg["epsilon"], cfg["p_max"],
                                            ScaConfig(seed=seed))
                rows.append(key + [r.nmse, r.fit_term, r.conservation_term])
            except Exception as exc:
                rows.append(key + [math.nan] * 3)
                errors.append(key + [f"{type(exc).__name__}: {exc}"])
    return rows, errors


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)  # shortest exact form


def cmd_sweep(cfg):
    bases = [b.strip() for b in cfg["bases"].split(",") if b.strip()]
    if cfg["estimator"] == "pressure":
        bases = ["L0"]
    elif not bases or any(b not in FLOW_BASES for b in bases):
        raise ConfigError(f"--bases must be drawn from {FLOW_BASES}")
    tasks = [(cfg, seed, basis) for basis in bases for seed in cfg["seeds"]]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    out = _out(cfg)
    rows = [r for res in results for r in res[0]]
    errors = [e for res in results for e in res[1]]
    rows.sort(key=lambda r: (bases.index(r[0]), cfg["sample_list"].index(r[1]), r[2], r[3]))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    with open(out / "sweep_errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["basis", "samples", "seed", "param", "error"])
        for e in errors:
            w.writerow([_fmt(v) for v in e])
    print(f"{len(rows)} rows written to {out / 'sweep.csv'} ({len(errors)} failed)")


COMMANDS = {
    "inspect": cmd_inspect, "simulate": cmd_simulate, "complex": cmd_complex,
    "basis": cmd_basis, "place": cmd_place, "recon-pressure": cmd_recon_pressure,
    "recon-flow": cmd_recon_flow, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](cfg)
    except (ConfigError, ParseError, StructuralError, FormatError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, RecoveryError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
