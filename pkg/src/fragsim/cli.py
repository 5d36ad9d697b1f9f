"""Command-line front end.

Exit codes: 0 success (all verdicts pass), 1 verdict failure, 2 usage or
configuration error.  Reports go to JSON, traces to CSV, and figures to PNG
files next to the outputs; nothing opens a window.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import limits
from .config import SCHEMA_HINT, apply_overrides, load_config
from .engine import (events_to_jsonl, first_passage_sigma, simulate_stopped,
                     state_to_csv)
from .errors import ConfigError, FragsimError
from .experiments import (TRACE_COLUMNS, ExperimentConfig, run_experiment,
                          truncation_sweep)
from .functionals import build_characteristic, build_f, build_psi, lambda_mart
from .measures import model_from_config, solve_malthusian
from .renewal import renewal_oracle


def _model_flags(sub):
    sub.add_argument("--family", required=True,
                     choices=["dirac_binary", "uniform_binary",
                              "dissipative_uniform_binary", "beta_binary"])
    sub.add_argument("--b", type=float, help="dirac_binary larger fraction")
    sub.add_argument("--b2", type=float, help="dirac_binary smaller fraction")
    sub.add_argument("--kappa", type=float,
                     help="dissipative_uniform_binary loss factor")
    sub.add_argument("--gamma", type=float, help="beta_binary tail index")
    sub.add_argument("--eps", type=float, help="beta_binary truncation")


def _model_from_flags(args) -> dict:
    params = {}
    if args.family == "dirac_binary":
        params = {"b": args.b, "b2": args.b2}
    elif args.family == "dissipative_uniform_binary":
        params = {"kappa": args.kappa}
    elif args.family == "beta_binary":
        params = {"gamma": args.gamma}
    if any(v is None for v in params.values()):
        raise ConfigError(f"missing parameters for {args.family}: "
                          f"{[k for k, v in params.items() if v is None]}")
    cfg = {"family": args.family, "params": params}
    if args.family == "beta_binary":
        if args.eps is None:
            raise ConfigError("beta_binary requires --eps")
        cfg["eps"] = args.eps
    return cfg


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trace_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def _cmd_phi(args) -> int:
    model = model_from_config(_model_from_flags(args))
    val = model.phi(args.p)
    print(f"{val:.12g}")
    return 0


def _cmd_malthus(args) -> int:
    model = model_from_config(_model_from_flags(args))
    mdata = solve_malthusian(model)
    print(f"{mdata.p_star:.12g}")
    print(f"phi_prime(p*) = {mdata.phi_prime_at_star:.12g}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    model = model_from_config(_model_from_flags(args))
    log, state = simulate_stopped(model, args.alpha, args.eta, args.seed,
                                  event_budget=args.budget)
    mdata = solve_malthusian(model)
    lam_sum = float(np.sum(state.masses))
    print(f"events={len(log)} frozen_blocks={len(state)} "
          f"sum_lambda={lam_sum:.12g} "
          f"lambda_mart(p*)={lambda_mart(state, mdata.p_star):.12g} "
          f"sigma_eta={first_passage_sigma(log, args.eta):.6g} "
          f"dissipated={state.dissipated_total:.12g}")
    if args.state_csv:
        state_to_csv(state, args.state_csv)
    if args.dump_events:
        events_to_jsonl(log, args.dump_events)
    return 0


def _load_experiment_config(args) -> dict:
    cfg = load_config(args.config)
    if getattr(args, "set", None):
        cfg = apply_overrides(cfg, args.set)
    return cfg


def _cmd_limits(args) -> int:
    raw = _load_experiment_config(args)
    cfg = ExperimentConfig.from_dict(raw)
    model = model_from_config(cfg.model)
    mdata = solve_malthusian(model)
    out = []
    for spec in cfg.functionals:
        if spec["kind"] == "energy":
            lc = limits.energy_limit(model, mdata.p_star,
                                     mdata.phi_prime_at_star,
                                     build_psi(spec["psi"]), float(spec["p"]))
        elif spec["kind"] == "empirical":
            lc = limits.empirical_limit(model, mdata.p_star,
                                        mdata.phi_prime_at_star,
                                        build_f(spec["f"]))
        else:
            continue
        entry = {"functional": spec, "theorem": lc.theorem, "value": lc.value,
                 "method": lc.method, "error_estimate": lc.error_estimate}
        out.append(entry)
        print(f"{lc.theorem:10s} {lc.value:.10g}  "
              f"[{lc.method}, err<={lc.error_estimate:.2g}]")
    payload = {"model": cfg.model, "p_star": mdata.p_star,
               "phi_prime_at_star": mdata.phi_prime_at_star, "limits": out}
    if args.out:
        _write_json(args.out, payload)
    return 0


def _cmd_verify(args) -> int:
    raw = _load_experiment_config(args)
    report = run_experiment(raw)
    d = report.to_dict()
    if args.out:
        _write_json(args.out, d)
    if args.csv:
        _write_trace_csv(args.csv, report.trace)
    figdir = args.figdir or (os.path.dirname(os.path.abspath(args.out))
                             if args.out else None)
    if figdir:
        from .plots import report_figures
        report_figures(d, figdir)
    for v in report.verdicts():
        print(f"[{'PASS' if v['passed'] else 'FAIL'}] {v['id']}: {v['detail']}")
    if report.quarantined:
        print(f"quarantined replicas: {report.quarantined}")
    print(f"verdict: {'PASS' if report.passed else 'FAIL'} "
          f"({report.runtime_seconds:.1f}s)")
    return 0 if report.passed else 1


def _cmd_sweep(args) -> int:
    raw = _load_experiment_config(args)
    eps_list = [float(x) for x in args.eps.split(",")]
    sweep = truncation_sweep(raw, eps_list)
    if args.out:
        _write_json(args.out, sweep)
    if args.figdir:
        from .plots import sweep_figure
        sweep_figure(sweep, args.figdir)
    for chk in sweep["drift_checks"]:
        status = "PASS" if chk["passed"] else "FAIL"
        print(f"[{status}] {chk['functional']} eps {chk['eps_pair']}: "
              f"drift={chk['drift']:.4g} vs 2*pooled_se="
              f"{2 * chk['pooled_se']:.4g}")
    print(f"verdict: {'PASS' if sweep['passed'] else 'FAIL'}")
    return 0 if sweep["passed"] else 1


def _cmd_renewal(args) -> int:
    raw = load_config(args.config)
    unknown = set(raw) - {"model", "characteristic", "t_max", "h",
                          "mc_budget", "seed"}
    if unknown:
        raise ConfigError(f"unknown renewal config keys: {sorted(unknown)}")
    model = model_from_config(raw["model"])
    mdata = solve_malthusian(model)
    phi = build_characteristic(raw["characteristic"], mdata.p_star)
    t_max = float(raw.get("t_max", 12.0))
    h = float(raw.get("h", 0.01))
    t_grid = np.arange(0.0, t_max + h / 2, h)
    sol = renewal_oracle(model, mdata.p_star, phi, t_grid,
                         mc_budget=int(raw.get("mc_budget", 10_000)),
                         seed=int(raw.get("seed", 0)))
    constant = None
    try:
        constant = limits.theorem_constant(
            model, mdata.p_star, mdata.phi_prime_at_star, phi).value
    except FragsimError:
        pass
    print(f"g(t_max)={sol.g_final:.6g} +- {sol.g_final_se:.3g} "
          f"(3-SE CI {sol.g_final_ci()})")
    print(f"mu_tilted={sol.mu_tilted:.6g} +- {sol.mu_tilted_se:.3g} "
          f"phi_prime(p*)={mdata.phi_prime_at_star:.6g}")
    if constant is not None:
        print(f"theorem constant={constant:.6g} "
              f"covered={sol.covers(constant)}")
    if sol.lattice:
        print("lattice step distribution detected; limit not applicable")
    if args.out:
        _write_json(args.out, {
            "g_final": sol.g_final, "g_final_se": sol.g_final_se,
            "mu_tilted": sol.mu_tilted, "mu_tilted_se": sol.mu_tilted_se,
            "mu_binned": sol.mu_binned, "f_integral": sol.f_integral,
            "internal_limit": sol.limit_value, "lattice": sol.lattice,
            "ess": sol.ess, "n_paths": sol.n_paths,
            "theorem_constant": constant,
        })
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "g", "g_se", "f_hat", "rho"])
            for i in range(sol.t.size):
                writer.writerow([sol.t[i], sol.g[i], sol.g_se[i],
                                 sol.f_hat[i], sol.rho[i]])
    if args.figdir:
        from .plots import renewal_figure
        renewal_figure(sol, args.figdir, constant)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragsim",
        description="fragmentation-chain simulation and SLLN verification")
    subs = parser.add_subparsers(dest="command", required=True)

    p_phi = subs.add_parser("phi", help="evaluate the Laplace exponent")
    _model_flags(p_phi)
    p_phi.add_argument("--p", type=float, required=True)
    p_phi.set_defaults(func=_cmd_phi)

    p_mal = subs.add_parser("malthus", help="solve for the Malthusian root")
    _model_flags(p_mal)
    p_mal.set_defaults(func=_cmd_malthus)

    p_sim = subs.add_parser("simulate", help="simulate one stopped path")
    _model_flags(p_sim)
    p_sim.add_argument("--alpha", type=float, default=0.0)
    p_sim.add_argument("--eta", type=float, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--budget", type=int, default=10**8)
    p_sim.add_argument("--state-csv", help="write stopping line (k, lambda_k)")
    p_sim.add_argument("--dump-events", help="write event log as JSONL")
    p_sim.set_defaults(func=_cmd_simulate)

    p_lim = subs.add_parser("limits", help="theoretical limit constants")
    p_lim.add_argument("--config", required=True)
    p_lim.add_argument("--out")
    p_lim.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_lim.set_defaults(func=_cmd_limits)

    p_ver = subs.add_parser("verify", help="run the replicated experiment")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--out", help="report JSON path")
    p_ver.add_argument("--csv", help="trace CSV path")
    p_ver.add_argument("--figdir", help="directory for PNG figures")
    p_ver.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_ver.set_defaults(func=_cmd_verify)

    p_swp = subs.add_parser("sweep", help="truncation stability sweep")
    p_swp.add_argument("--config", required=True)
    p_swp.add_argument("--eps", required=True,
                       help="comma-separated truncation levels")
    p_swp.add_argument("--out")
    p_swp.add_argument("--figdir")
    p_swp.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_swp.set_defaults(func=_cmd_sweep)

    p_ren = subs.add_parser("renewal", help="renewal-equation oracle")
    p_ren.add_argument("--config", required=True)
    p_ren.add_argument("--out")
    p_ren.add_argument("--csv")
    p_ren.add_argument("--figdir")
    p_ren.set_defaults(func=_cmd_renewal)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}\n\n{SCHEMA_HINT}", file=sys.stderr)
        return 2
    except FragsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
