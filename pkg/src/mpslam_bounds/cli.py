"""Command line entry point.

Loads a scenario file, evaluates the bound recursion and (optionally) the
Monte-Carlo EKF validation, writes one CSV row per time step and prints a
human-readable summary to stderr. The CSV goes to ``--out`` (stdout by
default) with dot decimal separators, newline-terminated rows and at least
nine significant digits, so identical invocations produce byte-identical
files.

Exit codes: 0 success, 2 configuration errors (message names the offending
field), 3 numerical failures (singular information, failed run), 4 failed
self-check (each violated invariant is listed).
"""

from __future__ import annotations

import argparse
import sys

from .checks import run_self_check
from .ekf import MonteCarloResult, run_monte_carlo
from .pcrlb import BoundRecord, SingularFimError, run_recursion
from .scenario import MonteCarloConfig, Scenario, ScenarioError, load_scenario

_ASSUMPTIONS = (
    "every component is detected and associated with its true propagation path",
    "component amplitudes are known deterministic quantities; amplitude "
    "measurements carry no state information",
    "measurement noise variances are known deterministic functions of the amplitudes",
    "anchors contribute statistically independent observations",
    "per-component likelihoods factorize and measurements of distinct components "
    "are uncorrelated (diagonal per-anchor channel information)",
)


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _csv_lines(bounds: list[BoundRecord], result: MonteCarloResult | None) -> list[str]:
    num_surfaces = bounds[0].meb.shape[0]
    header = ["n", "peb", "veb", "oeb"]
    header += [f"meb_{s}" for s in range(1, num_surfaces + 1)]
    if result is not None:
        header += ["rmse_pos", "rmse_vel", "rmse_orient"]
        header += [f"maperr_{s}" for s in range(1, num_surfaces + 1)]
    lines = [",".join(header)]
    for i, rec in enumerate(bounds):
        row = [str(rec.step), _fmt(rec.peb), _fmt(rec.veb), _fmt(rec.oeb)]
        row += [_fmt(v) for v in rec.meb]
        if result is not None:
            row += [
                _fmt(result.rmse_position[i]),
                _fmt(result.rmse_velocity[i]),
                _fmt(result.rmse_orientation[i]),
            ]
            row += [_fmt(v) for v in result.rmse_map[i]]
        lines.append(",".join(row))
    return lines


def _summary(bounds: list[BoundRecord], result: MonteCarloResult | None) -> str:
    out = ["== bound summary (min / max / final) =="]
    series = {
        "peb": [r.peb for r in bounds],
        "veb": [r.veb for r in bounds],
        "oeb": [r.oeb for r in bounds],
    }
    for s in range(bounds[0].meb.shape[0]):
        series[f"meb_{s + 1}"] = [r.meb[s] for r in bounds]
    for name, values in series.items():
        out.append(
            f"  {name:<8} {_fmt(min(values))} / {_fmt(max(values))} / {_fmt(values[-1])}"
        )
    if result is not None:
        out.append(f"== final RMSE / bound ratios ({result.runs} runs) ==")
        final = bounds[-1]
        out.append(f"  position    {result.rmse_position[-1] / final.peb:.3f}")
        out.append(f"  velocity    {result.rmse_velocity[-1] / final.veb:.3f}")
        out.append(f"  orientation {result.rmse_orientation[-1] / final.oeb:.3f}")
        for s in range(final.meb.shape[0]):
            out.append(f"  surface {s + 1}   {result.rmse_map[-1, s] / final.meb[s]:.3f}")
    out.append("== modeling assumptions behind the bound ==")
    for i, text in enumerate(_ASSUMPTIONS, start=1):
        out.append(f"  {i}. {text}")
    return "\n".join(out) + "\n"


def _write_csv(lines: list[str], out_path: str) -> None:
    payload = "\n".join(lines) + "\n"
    if out_path == "-":
        sys.stdout.write(payload)
        sys.stdout.flush()
    else:
        with open(out_path, "w", newline="\n") as handle:
            handle.write(payload)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpslam-bounds",
        description="Posterior error bounds and EKF validation for multipath SLAM",
    )
    parser.add_argument("--scenario", help="scenario YAML file")
    parser.add_argument("--out", default="-", help="CSV output path (default: stdout)")
    parser.add_argument(
        "--mode",
        choices=("bounds", "validate"),
        default="validate",
        help="bounds: recursion only; validate: bounds plus Monte-Carlo EKF",
    )
    parser.add_argument("--mc-runs", type=int, help="override the scenario's run count")
    parser.add_argument("--seed", type=int, help="override the scenario's seed")
    parser.add_argument(
        "--self-check",
        action="store_true",
        help="run the finite-difference and PSD invariant suite and exit",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.self_check:
        failures = run_self_check()
        for failure in failures:
            print(f"self-check violation: {failure}", file=sys.stderr)
        if failures:
            print(f"self-check FAILED ({len(failures)} violations)", file=sys.stderr)
            return 4
        print("self-check passed", file=sys.stderr)
        return 0

    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.mc_runs is not None or args.seed is not None:
        try:
            scenario.mc = MonteCarloConfig(
                runs=args.mc_runs if args.mc_runs is not None else scenario.mc.runs,
                seed=args.seed if args.seed is not None else scenario.mc.seed,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2

    try:
        if args.mode == "bounds":
            bounds = run_recursion(scenario)
            result = None
        else:
            result = run_monte_carlo(scenario)
            bounds = result.bounds
    except (SingularFimError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    _write_csv(_csv_lines(bounds, result), args.out)
    sys.stderr.write(_summary(bounds, result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
