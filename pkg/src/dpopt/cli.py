"""Command line interface.

Subcommands:
    validate <config>     check structure and schedule conditions
    run <config>          Monte Carlo batch of the configured variant
    budget <config>       privacy budget report at chosen horizons
    compare <config>      several variants on one shared problem

Exit codes: 0 on success, 1 when an experiment fails validation or a
run-level check, 2 on config or IO errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import build_setup, load_config
from .errors import (
    ConditionError,
    ConfigError,
    ConnectivityError,
    DegenerateProblemError,
    DivergenceError,
    RangeError,
    SpectralError,
    StructureError,
)
from .harness import (
    Aggregate,
    aggregate,
    budget_report,
    monte_carlo,
    run_directory,
    write_aggregate,
    write_budget,
    write_budget_breakdown,
    write_csv,
    write_failures,
    write_trace,
)
from .solvers import TRACKING_VARIANTS, VARIANTS, effective_schedules, validate_for_variant
from .svgplot import Series, line_plot, std_band

_VALIDATION_ERRORS = (
    ConditionError,
    ConnectivityError,
    DegenerateProblemError,
    DivergenceError,
    RangeError,
    SpectralError,
    StructureError,
)

SUMMARY_COLUMNS = (
    "variant", "runs", "completed", "failures", "mean_final_gap",
    "se_final_gap", "mean_final_consensus", "epsilon_bound",
    "epsilon_envelope",
)


def _parse_horizons(text: str) -> list[int]:
    horizons = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            value = float(token)
        except ValueError:
            raise ConfigError(f"bad horizon {token!r}") from None
        if value < 1 or value != int(value):
            raise ConfigError(f"horizons must be positive integers, got {token!r}")
        horizons.append(int(value))
    if not horizons:
        raise ConfigError("at least one horizon is required")
    return sorted(set(horizons))


def _parse_variants(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ConfigError("at least one variant is required")
    for name in names:
        if name not in VARIANTS:
            raise ConfigError(
                f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}"
            )
    seen = set()
    unique = []
    for name in names:
        if name not in seen:
            seen.add(name)
            unique.append(name)
    return unique


def _config_with_overrides(args) -> "tuple":
    config = load_config(args.config)
    iterations = args.iters if args.iters is not None else config.iterations
    runs = args.runs if args.runs is not None else config.monte_carlo
    if iterations < 1:
        raise ConfigError("--iters must be positive")
    if runs < 1:
        raise ConfigError("--runs must be positive")
    return config, iterations, runs


def _write_run_outputs(
    out_dir: str,
    variant: str,
    setup,
    traces,
    agg: Aggregate,
    gradient_bound: float,
    iterations: int,
    plot: bool,
) -> None:
    for index, trace in enumerate(traces):
        if not trace.diverged:
            write_trace(
                os.path.join(out_dir, f"run_{index:03d}.csv"), trace
            )
    write_aggregate(os.path.join(out_dir, "aggregate.csv"), agg)
    write_failures(os.path.join(out_dir, "failures.csv"), agg)
    sch = effective_schedules(variant, setup)
    if sch.noise_scale is not None:
        rows = budget_report(variant, setup, gradient_bound, [iterations])
        write_budget(os.path.join(out_dir, "budget.csv"), rows)
    if plot:
        _plot_aggregate(out_dir, variant, agg)


def _plot_aggregate(out_dir: str, variant: str, agg: Aggregate) -> None:
    gap_band = std_band(agg.mean_gap, agg.var_gap)
    line_plot(
        os.path.join(out_dir, "gap.svg"),
        [Series(variant, agg.ks, agg.mean_gap, band=gap_band)],
        title="optimality gap, mean with one-std band",
        y_label="f(mean state) - f*",
        log_y=True,
    )
    cons_band = std_band(agg.mean_consensus, agg.var_consensus)
    line_plot(
        os.path.join(out_dir, "consensus.svg"),
        [Series(variant, agg.ks, agg.mean_consensus, band=cons_band)],
        title="consensus error, mean with one-std band",
        y_label="mean squared distance to network mean",
        log_y=True,
    )
    if variant in TRACKING_VARIANTS and np.isfinite(agg.mean_tracking).any():
        track_band = std_band(agg.mean_tracking, agg.var_tracking)
        line_plot(
            os.path.join(out_dir, "tracking.svg"),
            [Series(variant, agg.ks, agg.mean_tracking, band=track_band)],
            title="gradient tracking error, mean with one-std band",
            y_label="mean squared tracker residual",
            log_y=True,
        )


def _print_run_summary(agg: Aggregate) -> None:
    print(
        f"{agg.variant}: {agg.completed}/{agg.requested} runs completed, "
        f"{len(agg.failures)} diverged"
    )
    print(
        f"  final gap mean {agg.mean_final_gap:.6g} "
        f"(se {agg.se_final_gap:.3g}), final consensus mean "
        f"{float(np.mean(agg.final_consensus)):.6g}"
    )
    eps = agg.epsilon_partial[-1]
    if np.isfinite(eps):
        print(f"  privacy budget bound at final record: {eps:.6g}")


def cmd_validate(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config)
    report = validate_for_variant(config.variant, setup)
    print(report.format_table())
    for warning in report.warnings:
        print(f"warning: {warning}")
    if report.overall:
        print("overall: pass")
        return 0
    print("overall: FAIL")
    return 1


def cmd_run(args) -> int:
    config, iterations, runs = _config_with_overrides(args)
    setup = build_setup(config)
    out_dir = run_directory(args.output or config.output_dir)
    traces = monte_carlo(
        config.variant, setup, iterations, config.noise_seed, runs,
        force=args.force,
    )
    agg = aggregate(config.variant, traces, config.noise_seed)
    _write_run_outputs(
        out_dir, config.variant, setup, traces, agg,
        config.gradient_bound, iterations, args.plot,
    )
    _print_run_summary(agg)
    print(f"outputs in {out_dir}")
    return 0


def cmd_budget(args) -> int:
    config = load_config(args.config)
    horizons = _parse_horizons(args.horizons)
    gradient_bound = (
        args.gradient_bound if args.gradient_bound is not None
        else config.gradient_bound
    )
    if gradient_bound <= 0:
        raise ConfigError("gradient bound must be positive")
    setup = build_setup(config)
    rows = budget_report(config.variant, setup, gradient_bound, horizons)
    out_dir = run_directory(args.output or config.output_dir)
    write_budget(os.path.join(out_dir, "budget.csv"), rows)
    write_budget_breakdown(
        os.path.join(out_dir, "breakdown.csv"), config.variant, setup,
        gradient_bound, max(horizons),
    )
    header = f"{'horizon':>10}  {'bound':>14}  {'envelope':>14}  {'tail':>12}  summable"
    print(header)
    for row in rows:
        print(
            f"{row.horizon:>10}  {row.conservative:>14.6g}  "
            f"{row.envelope:>14.6g}  {row.tail:>12.6g}  "
            f"{'yes' if row.summable else 'no'}"
        )
    top = rows[-1]
    if not top.summable:
        print(
            "budget series diverges: no finite budget at unbounded horizons"
        )
    elif top.horizon >= 10:
        ref = budget_report(
            config.variant, setup, gradient_bound, [top.horizon // 10]
        )[0]
        growth = (top.envelope - ref.envelope) / ref.envelope
        verdict = "yes" if growth < 0.05 else "no"
        print(
            f"envelope growth over the last decade: {100 * growth:.4f}% "
            f"(under 5%: {verdict})"
        )
    print(f"outputs in {out_dir}")
    return 0


def cmd_compare(args) -> int:
    config, iterations, runs = _config_with_overrides(args)
    variants = _parse_variants(args.variants)
    setup = build_setup(config, variants)
    base = run_directory(args.output or config.output_dir)
    aggregates: dict[str, Aggregate] = {}
    summary_rows = []
    for variant in variants:
        out_dir = run_directory(base, variant)
        traces = monte_carlo(
            variant, setup, iterations, config.noise_seed, runs,
            force=args.force,
        )
        agg = aggregate(variant, traces, config.noise_seed)
        _write_run_outputs(
            out_dir, variant, setup, traces, agg,
            config.gradient_bound, iterations, plot=False,
        )
        aggregates[variant] = agg
        sch = effective_schedules(variant, setup)
        if sch.noise_scale is not None:
            row = budget_report(
                variant, setup, config.gradient_bound, [iterations]
            )[0]
            eps_bound, eps_env = row.conservative, row.envelope
        else:
            eps_bound, eps_env = math.nan, math.nan
        summary_rows.append((
            variant, agg.requested, agg.completed, len(agg.failures),
            agg.mean_final_gap, agg.se_final_gap,
            float(np.mean(agg.final_consensus)), eps_bound, eps_env,
        ))
    write_csv(os.path.join(base, "summary.csv"), SUMMARY_COLUMNS, summary_rows)
    if args.plot:
        _plot_compare(base, aggregates)
    print(
        f"{'variant':>16}  {'done':>5}  {'final gap':>12}  {'se':>10}  "
        f"{'eps bound':>12}"
    )
    for row in summary_rows:
        print(
            f"{row[0]:>16}  {row[2]:>3}/{row[1]}  {row[4]:>12.6g}  "
            f"{row[5]:>10.3g}  {row[7]:>12.6g}"
        )
    print(f"outputs in {base}")
    return 0


def _plot_compare(base: str, aggregates: dict[str, Aggregate]) -> None:
    gap_series = [
        Series(name, agg.ks, agg.mean_gap,
               band=std_band(agg.mean_gap, agg.var_gap))
        for name, agg in aggregates.items()
    ]
    line_plot(
        os.path.join(base, "compare_gap.svg"), gap_series,
        title="optimality gap by variant",
        y_label="f(mean state) - f*",
        log_y=True,
    )
    cons_series = [
        Series(name, agg.ks, agg.mean_consensus,
               band=std_band(agg.mean_consensus, agg.var_consensus))
        for name, agg in aggregates.items()
    ]
    line_plot(
        os.path.join(base, "compare_consensus.svg"), cons_series,
        title="consensus error by variant",
        y_label="mean squared distance to network mean",
        log_y=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpopt",
        description=(
            "Differentially private distributed optimization: validation, "
            "Monte Carlo runs, privacy budget reports and variant comparisons."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check config structure and schedule conditions")
    p.add_argument("config", help="path to experiment config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="Monte Carlo batch of the configured variant")
    p.add_argument("config", help="path to experiment config")
    p.add_argument("--plot", action="store_true", help="write SVG plots")
    p.add_argument("--force", action="store_true",
                   help="run even when schedule validation fails")
    p.add_argument("--runs", type=int, default=None,
                   help="override run.monte_carlo")
    p.add_argument("--iters", type=int, default=None,
                   help="override run.iterations")
    p.add_argument("--output", default=None, help="override run.output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("budget", help="privacy budget report at chosen horizons")
    p.add_argument("config", help="path to experiment config")
    p.add_argument("--horizons", required=True,
                   help="comma-separated horizons, e.g. 1e3,1e4,1e5")
    p.add_argument("--gradient-bound", type=float, default=None,
                   help="override budget.gradient_bound")
    p.add_argument("--output", default=None, help="override run.output_dir")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("compare", help="run several variants on one shared problem")
    p.add_argument("config", help="path to experiment config")
    p.add_argument("--variants", required=True,
                   help="comma-separated variant names")
    p.add_argument("--plot", action="store_true", help="write SVG plots")
    p.add_argument("--force", action="store_true",
                   help="run even when schedule validation fails")
    p.add_argument("--runs", type=int, default=None,
                   help="override run.monte_carlo")
    p.add_argument("--iters", type=int, default=None,
                   help="override run.iterations")
    p.add_argument("--output", default=None, help="override run.output_dir")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except _VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
