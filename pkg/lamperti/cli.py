"""
cli.py
======
Command-line front end: design, build, classify, hitting, qsd, simulate and
report runs with machine-readable artifacts.

Every artifact starts with the resolved configuration, so a run can be
repeated exactly. Exit status: 0 success, 1 usage error, 2 numerical
validation failure, 3 runtime cap breached.

Usage:
  python -m lamperti design --family geometric --p 0.5 --jmax 20 --method both
  python -m lamperti classify --family counting-design
  python -m lamperti build --family geometric --p 0.5 --N 1
  python -m lamperti report --config run.json --out output/geometric
"""

import argparse
import logging
import sys
import traceback
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from lamperti.artifacts import Artifacts, read_vector
from lamperti.chain import (
    TransitionMatrix,
    build_transition,
    classify,
    is_stochastically_monotone,
    is_tp2,
    kirchhoff_vector,
    stationary_distribution,
    truncate_target,
    worst_state_stats,
)
from lamperti.config import (
    COMMANDS,
    FORMATS,
    KIRCHHOFF_MAX_N,
    METHODS,
    ROUND_TRIP_TOL,
    SERIES_N_MAX,
    TOOL_NAME,
    TOOL_VERSION,
    TRUNCATIONS,
    RunConfig,
    load_config_file,
    resolve_config,
)
from lamperti.design import DesignTable, branching_law, design_branching, design_branching_finite
from lamperti.errors import LampertiError, ParameterError, ValidationError
from lamperti.hitting import hitting_report, initial_vector, qsd, tail_ratio_limit, tilted_start
from lamperti.laws import DiscreteLaw, make_target
from lamperti.montecarlo import SimConfig, simulate

logger = logging.getLogger(__name__)


class LampertiArgumentParser(argparse.ArgumentParser):
    """argparse reports usage errors through ParameterError (exit 1)."""

    def error(self, message):
        raise ParameterError(f"{self.prog}: {message}")


def _weights(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"weights must be comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = LampertiArgumentParser(prog=TOOL_NAME, description="Lamperti maximal branching process lab")
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", help="flat JSON document with the same keys as the long flags")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    parser.add_argument("-v", "--verbose", action="count", default=0)

    family = parser.add_argument_group("family")
    family.add_argument("--family")
    family.add_argument("--p", type=float)
    family.add_argument("--q", type=float)
    family.add_argument("--alpha", type=float)
    family.add_argument("--beta", type=float)
    family.add_argument("--lambda", dest="lam", type=float)
    family.add_argument("--size", type=int)
    family.add_argument("--weights", type=_weights)

    run = parser.add_argument_group("run")
    run.add_argument("--N", type=int)
    run.add_argument("--jmax", type=int)
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--truncation", choices=sorted(TRUNCATIONS))
    run.add_argument("--pi0", help="delta<k>, geometric-tilt:<z>, pi, restricted or file:<path>")
    run.add_argument("--n-max", dest="n_max", type=int)
    run.add_argument("--forced", action="store_const", const=True, default=None)
    run.add_argument("--time-reversed", dest="time_reversed", action="store_const", const=True, default=None)

    sim = parser.add_argument_group("simulation")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--burn-in", dest="burn_in", type=int)
    sim.add_argument("--replicas", type=int)

    output = parser.add_argument_group("output")
    output.add_argument("--out")
    output.add_argument("--format", choices=FORMATS)
    return parser


# ──────────────────────────────────────────────
# Helpers
# ──────────────────────────────────────────────
def _family_params(cfg: RunConfig) -> dict:
    params = dict(cfg.params)
    if "q" in params and "p" not in params:
        params["p"] = 1.0 - float(params["q"])
    params.pop("q", None)
    return params


def _banner(title: str) -> None:
    print(f"\n--- {title} ---")


def _check(ok: bool, message: str, cfg: RunConfig, diagnostics: List[str]) -> None:
    if ok:
        return
    if not cfg.forced:
        raise ValidationError(message)
    logger.warning("forced: %s", message)
    diagnostics.append(message)


def _initial(cfg: RunConfig, pi: np.ndarray) -> np.ndarray:
    spec = cfg.pi0
    if spec.startswith("file:"):
        v = read_vector(spec[len("file:"):])
        if v.size != pi.size:
            raise ParameterError(f"pi0 file holds {v.size} values, the chain has {pi.size} states")
        return v / v.sum()
    if spec.startswith("geometric-tilt:"):
        return tilted_start(pi, float(spec.split(":", 1)[1]))
    return initial_vector(spec, pi)


def _truncated_design(cfg: RunConfig) -> DesignTable:
    target = make_target(cfg.family, _family_params(cfg))
    pi_N = truncate_target(target, cfg.N, cfg.truncation)
    return design_branching_finite(pi_N, cfg.method, cfg.n_max or SERIES_N_MAX)


# ──────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────
def cmd_design(cfg: RunConfig, out: Artifacts) -> DesignTable:
    _banner(f"Designing branching law for {cfg.family}")
    target = make_target(cfg.family, _family_params(cfg))
    table = design_branching(target, cfg.jmax, cfg.method, cfg.n_max or SERIES_N_MAX)
    if table.discrepancy is not None:
        print(f"  max |F_series - F_bisection| = {table.discrepancy:.3g}")
    out.table("design", table.to_frame())
    return table


def cmd_build(cfg: RunConfig, out: Artifacts) -> TransitionMatrix:
    _banner(f"Building truncated chain N={cfg.N} for {cfg.family}")
    table = _truncated_design(cfg)
    chain = build_transition(table)
    pi = stationary_distribution(chain, method="gth")
    diagnostics: List[str] = []
    target_pi = np.diff(np.concatenate(([0.0], table.F_inf)))
    round_trip = float(np.max(np.abs(pi - target_pi)))
    _check(round_trip <= ROUND_TRIP_TOL, f"stationary vector misses the target by {round_trip:.3g}", cfg, diagnostics)
    sm, tp2 = is_stochastically_monotone(chain), is_tp2(chain)
    _check(sm, "chain is not stochastically monotone", cfg, diagnostics)
    _check(tp2, "cumulated matrix is not TP2", cfg, diagnostics)

    states = pd.DataFrame({"state": np.arange(1, chain.N + 1), "pi": pi, "target": target_pi, "F": table.F})
    checks = {"N": chain.N, "stochastically_monotone": sm, "tp2": tp2,
              "row_sum_deviation": float(np.max(np.abs(chain.P.sum(axis=1) - 1.0))),
              "stationarity_residual": float(np.max(np.abs(pi @ chain.P - pi))),
              "target_round_trip": round_trip}
    if chain.N <= KIRCHHOFF_MAX_N:
        minors = kirchhoff_vector(chain)
        states["kirchhoff"] = minors
        checks["kirchhoff_gap"] = float(np.max(np.abs(minors - pi)))
    stats = worst_state_stats(chain, pi)
    checks.update({"mean_return": stats.mean_return, "mean_positive_excursion": stats.mean_positive_excursion,
                   "occupation_rho": stats.occupation_rho, "diagnostics": diagnostics})
    out.matrix("transition", chain.P)
    out.table("stationary", states)
    out.scalars("build_checks", checks)
    return chain.with_pi(pi)


def cmd_classify(cfg: RunConfig, out: Artifacts):
    _banner(f"Classifying the chain driven by {cfg.family}")
    nu = branching_law(cfg.family, _family_params(cfg))
    if nu.is_finite:
        raise ParameterError(f"family {cfg.family!r} is finite; classification needs countable support")
    verdict = classify(nu)
    print(f"  verdict: {verdict.verdict} (L = {verdict.limit_estimate:.12g})")
    out.scalars("classification", verdict.to_dict())
    out.table("classification_sequence", pd.DataFrame({"i": verdict.i_values, "log_i": np.log(verdict.i_values),
                                                        "i_tail": verdict.a_values}))
    return verdict


def cmd_hitting(cfg: RunConfig, out: Artifacts, chain: Optional[TransitionMatrix] = None):
    if chain is None:
        chain = build_transition(_truncated_design(cfg))
    _banner(f"Hitting times of state N={chain.N}")
    pi = chain.pi if chain.pi is not None else stationary_distribution(chain, method="gth")
    pi0 = _initial(cfg, pi)
    report = hitting_report(chain, pi0, pi, n_max=cfg.n_max, forced=cfg.forced, time_reversed=cfg.time_reversed)
    print(f"  E(T) = {report.mean_T:.10g}, rho_N = {report.rho_N:.12g}, horizon {report.T_cdf.size - 1}")
    out.table("hitting", report.to_frame())
    out.table("qsd", report.qsd_frame())
    out.scalars("hitting_scalars", report.scalars())
    return report


def cmd_qsd(cfg: RunConfig, out: Artifacts):
    chain = build_transition(_truncated_design(cfg))
    _banner(f"Quasi-stationary distribution on 1..{chain.N - 1}")
    pi = stationary_distribution(chain, method="gth")
    triple = qsd(chain)
    diagnostics: List[str] = []
    u_limit = tail_ratio_limit(chain, _initial(cfg, pi), pi, forced=cfg.forced, diagnostics=diagnostics,
                               triple=triple)
    through_top = float(triple.mu @ np.power(chain.F[chain.N - 1], np.arange(1, chain.N)))
    print(f"  rho_N = {triple.rho:.15g}")
    out.table("qsd", pd.DataFrame({"state": np.arange(1, chain.N), "mu": triple.mu, "phi": triple.phi}))
    out.scalars("qsd_scalars", {"N": chain.N, "rho_N": triple.rho, "rho_via_pgf": through_top,
                                "u_limit": u_limit, "diagnostics": diagnostics})
    return triple


def cmd_simulate(cfg: RunConfig, out: Artifacts):
    sim_cfg = SimConfig(seed=cfg.seed, steps=cfg.steps, burn_in=cfg.burn_in, replicas=cfg.replicas)
    pi = None
    if cfg.N is not None:
        chain = build_transition(_truncated_design(cfg))
        pi = stationary_distribution(chain, method="gth")
        source = chain
    else:
        source = branching_law(cfg.family, _family_params(cfg))
    _banner(f"Simulating {cfg.replicas} replica(s) of {cfg.steps} steps")
    summary = simulate(source, sim_cfg)
    frame = summary.to_frame()
    if pi is not None:
        frame["pi"] = pi
        with np.errstate(divide="ignore", invalid="ignore"):
            frame["z_score"] = (frame["occupation"] - pi) / frame["stderr"]
    out.table("simulation", frame)
    out.scalars("simulation_scalars", summary.scalars())
    return summary


def cmd_report(cfg: RunConfig, out: Artifacts) -> None:
    table = cmd_design(cfg, out)
    chain = cmd_build(cfg, out)
    report = cmd_hitting(cfg, out, chain)
    target = make_target(cfg.family, _family_params(cfg))
    verdict = None
    if not (isinstance(target, DiscreteLaw) and target.is_finite):
        verdict = cmd_classify(cfg, out)
    cmd_simulate(cfg, out)

    _banner("Writing plot-ready columns")
    out.table("plot_design", pd.DataFrame({"j": table.j, "F": table.F, "F_inf": table.F_inf}))
    out.table("plot_hitting", pd.DataFrame({"n": np.arange(report.sep.size), "sep": report.sep,
                                            "tau_tail_pi0": report.tau_tail_pi0,
                                            "tau_tail_piN": report.tau_tail_piN}))
    if verdict is not None:
        out.table("plot_classification", pd.DataFrame({"log_i": np.log(verdict.i_values),
                                                       "i_tail": verdict.a_values}))


HANDLERS = {
    "design": cmd_design,
    "build": cmd_build,
    "classify": cmd_classify,
    "hitting": cmd_hitting,
    "qsd": cmd_qsd,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def run(cfg: RunConfig) -> List[str]:
    """Dispatch one validated configuration; returns the saved artifact paths."""
    out = Artifacts(cfg.out, cfg.to_dict(), seed=cfg.seed, fmt=cfg.format)
    print(f"Running {cfg.command} for {cfg.family} -> {cfg.out}")
    HANDLERS[cfg.command](cfg, out)
    print("\n--- Done ---")
    return out.saved


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
                            format="%(levelname)s %(name)s: %(message)s")
        file_data = load_config_file(args.config) if args.config else None
        flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
        cfg = resolve_config(flags, file_data)
        run(cfg)
    except LampertiError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        traceback.print_exc()
        return 1
    return 0
