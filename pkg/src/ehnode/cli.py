"""Command line entry point: ``ehnode {solve,evaluate,simulate,sweep-weight,sweep-arrival}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import csvio, experiments, plotting
from .config import ConfigError, ExperimentConfig, load_config
from .evaluation import ConvergenceError, Metrics, evaluate_policy, static_policy
from .model import build_model
from .simulator import TRACE_COLUMNS, SimConfig, simulate
from .solver import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

log = logging.getLogger("ehnode")


def default_config_path() -> Path:
    return Path(str(resources.files("ehnode") / "configs" / "paper.cfg"))


def metrics_row(label: str, m: Metrics) -> dict[str, object]:
    row: dict[str, object] = {"policy": label}
    row.update({col: getattr(m, f) for col, f in csvio.METRIC_FIELDS.items()})
    return row


def run_solve(cfg: ExperimentConfig, out: Path, plot: bool = True) -> int:
    res = experiments.solve_params(cfg.params, evaluate=False)
    rep = res.solution.report
    p = cfg.params
    log.info("solve: %s objective=%.9g iterations=%d wall=%.3fs",
             rep.status, rep.objective, rep.iterations, rep.wall_time)
    row = {"status": rep.status, "objective": rep.objective, "cost_lp": rep.cost_lp,
           "cost_hp": rep.cost_hp, "loss_limit_lp": p.loss_limit_lp,
           "loss_limit_hp": p.loss_limit_hp, "iterations": rep.iterations,
           "flow_residual": res.flow_residual, "n_states": res.model.n_states,
           "n_vars": res.model.n_states * 3}
    csvio.write_rows(out / "report.csv", csvio.REPORT_COLUMNS, [row])
    if not rep.feasible:
        log.error("loss requirements cannot be met; no policy written")
        return EXIT_INFEASIBLE
    space = res.model.space
    policy = res.solution.policy
    csvio.write_policy(out / "policy.csv", space, policy)
    e = cfg.heatmap_energy
    csvio.write_heatmap(out / f"policy_heatmap_e{e}.csv", space, policy, e)
    if plot:
        plotting.plot_policy_heatmap(space, policy, e, out / f"policy_heatmap_e{e}.png")
    return EXIT_OK


def _resolve_policy(cfg: ExperimentConfig, model, spec: str | None) -> tuple[str, np.ndarray] | None:
    """``None``/"optimal" solves, "static" is the equal-probability baseline,
    anything else is a policy file."""
    if spec in (None, "optimal"):
        res = experiments.solve_params(cfg.params, evaluate=False)
        if not res.feasible:
            return None
        return "optimal", res.solution.policy
    if spec == "static":
        return "static", static_policy(model.n_states)
    return spec, csvio.read_policy(spec, model.space)


def run_evaluate(cfg: ExperimentConfig, out: Path, policy: str | None) -> int:
    model = build_model(cfg.params)
    labels = [policy] if policy else ["optimal", "static"]
    rows = []
    for spec in labels:
        resolved = _resolve_policy(cfg, model, spec)
        if resolved is None:
            log.error("loss requirements cannot be met")
            return EXIT_INFEASIBLE
        label, pol = resolved
        rows.append(metrics_row(label, evaluate_policy(model, pol)))
    csvio.write_rows(out / "metrics.csv", csvio.METRICS_COLUMNS, rows)
    return EXIT_OK


def run_simulate(cfg: ExperimentConfig, out: Path, policy: str | None, trace: bool) -> int:
    model = build_model(cfg.params)
    resolved = _resolve_policy(cfg, model, policy)
    if resolved is None:
        log.error("loss requirements cannot be met")
        return EXIT_INFEASIBLE
    label, pol = resolved
    sim_cfg = SimConfig(slots=cfg.slots, seed=cfg.seed, warmup_slots=cfg.warmup_slots)
    tr = simulate(cfg.params, pol, sim_cfg)
    row: dict[str, object] = {"policy": label, "generator": tr.generator, "seed": cfg.seed,
                              "slots": cfg.slots, "warmup_slots": cfg.warmup_slots}
    for col, f in csvio.METRIC_FIELDS.items():
        row[col] = getattr(tr.metrics, f)
        row[f"{col}_se"] = tr.stderr[f]
    row.update({k: tr.counts[k] for k in ("arrived_lp", "dropped_lp", "arrived_hp", "dropped_hp")})
    csvio.write_rows(out / "sim_metrics.csv", csvio.SIM_COLUMNS, [row])
    if trace:
        write_trace(out / "trace.csv", tr)
    return EXIT_OK


def write_trace(path: Path, tr) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = np.column_stack([tr.column(c) for c in TRACE_COLUMNS]).astype(np.int64)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        np.savetxt(fh, cols, fmt="%d", delimiter=",")
    return path


def run_sweep_weight(cfg: ExperimentConfig, out: Path, jobs: int = 1, plot: bool = True,
                     weights=None) -> int:
    rows = experiments.sweep_weight(cfg.params, weights or cfg.weight_sweep, jobs)
    csvio.write_rows(out / "weight_sweep.csv", csvio.WEIGHT_SWEEP_COLUMNS, rows)
    if plot:
        plotting.plot_weight_sweep(rows, out / "weight_sweep.png")
    return EXIT_OK


def run_sweep_arrival(cfg: ExperimentConfig, out: Path, jobs: int = 1, plot: bool = True,
                      rates=None) -> int:
    rows = experiments.sweep_arrival(cfg.params, rates or cfg.arrival_sweep, jobs)
    csvio.write_rows(out / "arrival_sweep.csv", csvio.ARRIVAL_SWEEP_COLUMNS, rows)
    if plot:
        plotting.plot_arrival_sweep(rows, out / "arrival_sweep.png", cfg.params.loss_limit_hp)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehnode", description="Solve, evaluate and simulate the energy harvesting node CMDP.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None,
                       help="configuration file (default: bundled paper.cfg)")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        # also accepted after the subcommand; SUPPRESS keeps the top-level value
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("solve", help="solve the constrained MDP and export the policy")
    common(p)
    p.add_argument("--no-plot", action="store_true")

    for name, helptext in (("evaluate", "exact long-run metrics of a policy"),
                           ("simulate", "Monte-Carlo simulation of a policy")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--policy", default=None,
                       help="'optimal', 'static' or a policy.csv path")
        if name == "simulate":
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--slots", type=int, default=None,
                           help="total slots including the warmup")
            p.add_argument("--trace", action="store_true", help="also write trace.csv")

    for name in ("sweep-weight", "sweep-arrival"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} sweep")
        common(p)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--no-plot", action="store_true")
        p.add_argument("--points", type=float, nargs="+", default=None,
                       help="override the sweep grid from the config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config or default_config_path())
        if getattr(args, "seed", None) is not None:
            cfg = _with(cfg, seed=args.seed)
        if getattr(args, "slots", None) is not None:
            cfg = _with(cfg, slots=args.slots)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(cfg.out_dir)

    try:
        if args.command == "solve":
            return run_solve(cfg, out, plot=not args.no_plot)
        if args.command == "evaluate":
            return run_evaluate(cfg, out, args.policy)
        if args.command == "simulate":
            return run_simulate(cfg, out, args.policy, args.trace)
        if args.command == "sweep-weight":
            return run_sweep_weight(cfg, out, args.jobs, not args.no_plot, args.points)
        return run_sweep_arrival(cfg, out, args.jobs, not args.no_plot, args.points)
    except csvio.PolicyFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _with(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    new = replace(cfg, **changes)
    if not 0 <= new.warmup_slots < new.slots:
        raise ConfigError("warmup_slots must satisfy 0 <= warmup_slots < slots")
    return new


if __name__ == "__main__":
    sys.exit(main())
