"""Command-line front end.

Subcommands: simulate | map | risk | avail | anomaly.  Exit codes are part
of the contract: 0 success, 1 usage or configuration error, 2 a safety
violation was detected (simulate only) — so CI scripts can gate on the
safety verdict directly.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .anomaly import NormalizationBounds, build_profile, detect, normalize
from .availability import availability_breakdown
from .config import ScenarioError, load_scenario
from .policy import RestartTimeMap, restart_time_map
from .risk import cdf_of, expected_damage_time, restarted_cdf, restarted_density
from .simulator import availability_of, run

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="restartguard",
        description="Restart-based protection analysis for safety-critical "
                    "control loops.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--deterministic", action="store_true",
                       help="iteration-capped window search (ignore any "
                            "wall-clock budget in the scenario)")

    p = sub.add_parser("simulate", help="run the restart protocol under the "
                                        "scenario's attack; write a trace CSV")
    common(p)

    p = sub.add_parser("map", help="restart-time map over the scenario grid")
    common(p)
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for grid columns")

    p = sub.add_parser("risk", help="restart-risk tables for each delta_r")
    common(p)
    p.add_argument("--sweep", default=None,
                   help="comma-separated delta_r list overriding the scenario")

    p = sub.add_parser("avail", help="weighted availability from a restart map")
    common(p)
    p.add_argument("--map", dest="map_csv", default=None,
                   help="existing map CSV (computed from the grid otherwise)")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("anomaly", help="build a T2 profile from training "
                                       "rows and score observations")
    p.add_argument("--train", required=True, help="training CSV, one row per sample")
    p.add_argument("--observe", required=True, help="observation CSV")
    p.add_argument("--out", required=True, help="result JSON")
    p.add_argument("--profile-out", default=None, help="also save the profile JSON")
    p.add_argument("--lambda", dest="lambda_conf", type=float, default=3.0)
    p.add_argument("--raw", action="store_true",
                   help="skip min-max normalization of the signals")
    return ap


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg = scenario.build_sim(seed=args.seed, deterministic=args.deterministic)
    trace = run(cfg)
    trace.to_csv(args.out)
    n_viol = trace.violation_count
    print(f"simulate: horizon {cfg.horizon} s, availability "
          f"{availability_of(trace):.4f}, safety violations {n_viol}, "
          f"trace -> {args.out}")
    return 2 if n_viol else 0


def _cmd_map(args) -> int:
    scenario = load_scenario(args.scenario)
    model = scenario.build_plant()
    sc = scenario.build_controller(model)
    pol = scenario.build_policy(args.deterministic)
    grid = scenario.build_grid()
    rmap = restart_time_map(model, sc, pol, grid, workers=max(1, args.threads))
    rmap.to_csv(args.out)
    safe = int((rmap.kind == 2).sum())
    print(f"map: {rmap.kind.size} cells ({safe} safe), max delta_safe "
          f"{rmap.max_delta:.6g}, csv -> {args.out}")
    return 0


def _cmd_risk(args) -> int:
    scenario = load_scenario(args.scenario)
    pdf = scenario.build_pdf()
    periods = scenario.risk_periods()
    if args.sweep:
        periods = [float(tok) for tok in args.sweep.split(",") if tok.strip()]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    base_cdf = cdf_of(pdf)
    summary = {
        "expected_time_density": expected_damage_time(pdf, "density"),
        "expected_time_cdf_literal": expected_damage_time(pdf, "cdf_literal"),
        "sweeps": [],
    }
    t = pdf.times
    for dr in periods:
        fh = restarted_density(pdf, dr)
        ph = restarted_cdf(pdf, dr)
        path = outdir / f"risk_dr{dr:g}.csv"
        with open(path, "w", newline="") as out:
            w = csv.writer(out)
            w.writerow(["t", "F", "P", "F_hat", "P_hat"])
            for i in range(t.size):
                w.writerow([f"{t[i]:.10g}", f"{pdf.values[i]:.10g}",
                            f"{base_cdf[i]:.10g}", f"{fh.values[i]:.10g}",
                            f"{ph[i]:.10g}"])
        summary["sweeps"].append({
            "delta_r": dr,
            "expected_time_density": expected_damage_time(fh, "density"),
            "final_p": float(base_cdf[-1]),
            "final_p_hat": float(ph[-1]),
            "table": str(path),
        })
    with open(outdir / "summary.json", "w") as out:
        json.dump(summary, out, indent=2)
    print(f"risk: {len(periods)} sweep(s) -> {outdir}")
    return 0


def _cmd_avail(args) -> int:
    scenario = load_scenario(args.scenario)
    pol = scenario.build_policy(args.deterministic)
    regions = scenario.build_regions()
    if not regions:
        raise ScenarioError("avail needs a regions block")
    if args.map_csv:
        grid = scenario.build_grid()
        rmap = RestartTimeMap.from_csv(args.map_csv, grid.x_axis.name,
                                       grid.y_axis.name)
    else:
        model = scenario.build_plant()
        sc = scenario.build_controller(model)
        grid = scenario.build_grid()
        rmap = restart_time_map(model, sc, pol, grid,
                                workers=max(1, args.threads))
    report = availability_breakdown(rmap, regions, pol.t_s, pol.t_r)
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"avail: weighted availability {report['weighted_availability']:.6f} "
          f"-> {args.out}")
    return 0


def _load_rows(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.size == 0:
        raise ScenarioError(f"{path}: empty CSV")
    return rows


def _cmd_anomaly(args) -> int:
    train = _load_rows(args.train)
    observations = _load_rows(args.observe)
    if args.raw:
        bounds = None
        train_data = train
    else:
        bounds = NormalizationBounds.from_data(train)
        train_data, _ = normalize(bounds, train)
    profile = build_profile(train_data, args.lambda_conf, bounds=None if args.raw else
                            NormalizationBounds(np.zeros(train.shape[1]),
                                                np.ones(train.shape[1])))
    if args.profile_out:
        profile.to_json(args.profile_out)
    results = []
    for row in observations:
        obs = row if args.raw else normalize(bounds, row)[0]
        d = detect(profile, obs)
        results.append({"t2": d.t2_value, "verdict": d.verdict,
                        "clamped": d.clamped})
    anomalous = sum(1 for r in results if r["verdict"] == "anomalous")
    payload = {
        "lambda": args.lambda_conf,
        "mu_t": profile.mu_t,
        "sigma_t": profile.sigma_t,
        "observations": results,
        "anomalous": anomalous,
        "total": len(results),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"anomaly: {anomalous}/{len(results)} anomalous -> {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "map": _cmd_map,
    "risk": _cmd_risk,
    "avail": _cmd_avail,
    "anomaly": _cmd_anomaly,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse reserves 2 for usage errors; our exit contract uses 1
        return 0 if e.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
