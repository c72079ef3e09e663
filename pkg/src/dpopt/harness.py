"""Monte Carlo orchestration, aggregation and CSV reports.

Runs are seeded from the configured base seed and the run index, so a
rerun of the same config reproduces every file byte for byte and two
variants launched from the same config see identical initial states and
identical message noise, run for run.  Aggregation is a deterministic
reduce ordered by run index.

Diverged runs never enter the aggregate statistics silently: each one
becomes a row in failures.csv, and trace files are written only for
completed runs, so file counts satisfy completed + failed = requested.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .noise import derive_seed
from .privacy import (
    asymptotic_budget,
    budget_tail_bound,
    conservative_budget_static,
    conservative_budget_tracking,
    infinite_tail,
)
from .solvers import (
    RunSetup,
    STATIC_VARIANTS,
    Trace,
    effective_schedules,
    run,
)

TRACE_COLUMNS = (
    "k", "consensus", "gap", "dist_opt", "tracking", "epsilon_partial"
)
AGGREGATE_COLUMNS = (
    "k", "mean_gap", "var_gap", "mean_consensus", "var_consensus",
    "mean_tracking", "var_tracking", "epsilon_partial",
)
FAILURE_COLUMNS = ("run", "seed", "diverged_at", "magnitude")
BUDGET_COLUMNS = (
    "horizon", "epsilon_bound", "epsilon_envelope", "tail_envelope",
    "summable",
)
BREAKDOWN_COLUMNS = ("k", "varsigma", "per_term", "epsilon_partial")


def format_value(value) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Failure:
    run_index: int
    seed: int
    diverged_at: int
    magnitude: float


@dataclass
class Aggregate:
    """Cross-run statistics of one variant's Monte Carlo batch.

    Means and variances are taken over completed runs on the shared
    record grid; per-run finals keep diverged runs as +inf entries so
    order statistics can count divergence against a variant.
    """

    variant: str
    requested: int
    ks: np.ndarray
    mean_gap: np.ndarray
    var_gap: np.ndarray
    mean_consensus: np.ndarray
    var_consensus: np.ndarray
    mean_tracking: np.ndarray
    var_tracking: np.ndarray
    epsilon_partial: np.ndarray
    final_gaps: np.ndarray
    final_consensus: np.ndarray
    failures: list[Failure] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return self.requested - len(self.failures)

    @property
    def mean_final_gap(self) -> float:
        return float(np.mean(self.final_gaps))

    @property
    def se_final_gap(self) -> float:
        """Standard error of the completed-run final gaps."""
        finite = self.final_gaps[np.isfinite(self.final_gaps)]
        if finite.size < 2:
            return 0.0
        return float(np.std(finite, ddof=1) / math.sqrt(finite.size))


def monte_carlo(
    variant: str,
    setup: RunSetup,
    iterations: int,
    base_seed: int,
    n_runs: int,
    force: bool = False,
) -> list[Trace]:
    """Execute n_runs independent runs with index-derived seeds."""
    return [
        run(variant, setup, iterations, derive_seed(base_seed, index),
            force=force)
        for index in range(n_runs)
    ]


def _stat_columns(traces: list[Trace], name: str):
    stack = np.vstack([t.column(name) for t in traces])
    mean = stack.mean(axis=0)
    if stack.shape[0] >= 2:
        var = stack.var(axis=0, ddof=1)
    else:
        var = np.zeros(stack.shape[1])
    return mean, var


def aggregate(variant: str, traces: list[Trace], base_seed: int) -> Aggregate:
    if not traces:
        raise ValueError("cannot aggregate an empty run list")
    failures = [
        Failure(
            run_index=i,
            seed=derive_seed(base_seed, i),
            diverged_at=t.diverged_at,
            magnitude=t.diverged_magnitude,
        )
        for i, t in enumerate(traces) if t.diverged
    ]
    completed = [t for t in traces if not t.diverged]
    # With every run diverged there is no shared full grid; fall back to
    # the k = 0 record, which every trace carries.
    if completed:
        basis = completed
        ks = completed[0].ks
    else:
        basis = [
            Trace(
                variant=t.variant, ks=t.ks[:1], consensus=t.consensus[:1],
                gap=t.gap[:1], dist_opt=t.dist_opt[:1],
                tracking=t.tracking[:1], epsilon_partial=t.epsilon_partial[:1],
            )
            for t in traces
        ]
        ks = basis[0].ks
    mean_gap, var_gap = _stat_columns(basis, "gap")
    mean_cons, var_cons = _stat_columns(basis, "consensus")
    mean_track, var_track = _stat_columns(basis, "tracking")
    eps, _ = _stat_columns(basis, "epsilon_partial")
    return Aggregate(
        variant=variant,
        requested=len(traces),
        ks=ks,
        mean_gap=mean_gap,
        var_gap=var_gap,
        mean_consensus=mean_cons,
        var_consensus=var_cons,
        mean_tracking=mean_track,
        var_tracking=var_track,
        epsilon_partial=eps,
        final_gaps=np.array([t.final_gap for t in traces]),
        final_consensus=np.array([t.final_consensus for t in traces]),
        failures=failures,
    )


def write_trace(path: str, trace: Trace) -> None:
    rows = zip(
        trace.ks, trace.consensus, trace.gap, trace.dist_opt,
        trace.tracking, trace.epsilon_partial,
    )
    write_csv(path, TRACE_COLUMNS, rows)


def write_aggregate(path: str, agg: Aggregate) -> None:
    rows = zip(
        agg.ks, agg.mean_gap, agg.var_gap, agg.mean_consensus,
        agg.var_consensus, agg.mean_tracking, agg.var_tracking,
        agg.epsilon_partial,
    )
    write_csv(path, AGGREGATE_COLUMNS, rows)


def write_failures(path: str, agg: Aggregate) -> None:
    rows = [
        (f.run_index, f.seed, f.diverged_at, f.magnitude)
        for f in agg.failures
    ]
    write_csv(path, FAILURE_COLUMNS, rows)


@dataclass(frozen=True)
class BudgetRow:
    horizon: int
    conservative: float
    envelope: float
    tail: float
    summable: bool


def budget_report(
    variant: str,
    setup: RunSetup,
    gradient_bound: float,
    horizons,
) -> list[BudgetRow]:
    """Privacy budget columns of one variant at the requested horizons.

    conservative: the finite-horizon sensitivity-recursion bound.
    envelope: partial sums of the dominating stepsize-over-noise power
        law, the column whose stabilization signals a finite budget at
        unbounded horizons.
    tail: integral-test bound on everything the envelope series pays
        after the horizon; inf when the series diverges.
    """
    horizons = sorted(int(h) for h in horizons)
    if not horizons or horizons[0] < 1:
        raise ConfigError("budget horizons must be positive integers")
    sch = effective_schedules(variant, setup)
    nu = sch.noise_scale
    if nu is None:
        raise ConfigError(
            "budget accounting needs a nonzero noise scale",
            key="noise.scale.form",
        )
    top = horizons[-1]
    if variant in STATIC_VARIANTS:
        factor = 1.0
        conservative = conservative_budget_static(
            sch.stepsize, sch.coupling, setup.consensus.min_diag_mag,
            nu, gradient_bound, top,
        )
    else:
        factor = 2.0
        conservative = conservative_budget_tracking(
            sch.stepsize, sch.tracker_mix, sch.coupling_state,
            sch.coupling_tracker, setup.push_pull.min_diag_pull,
            setup.push_pull.min_diag_push, nu, gradient_bound, top,
        )
    envelope = asymptotic_budget(
        sch.stepsize, nu, gradient_bound, top, message_factor=factor
    )
    summable = not infinite_tail(sch.stepsize, nu)
    return [
        BudgetRow(
            horizon=h,
            conservative=conservative.epsilon_at(h),
            envelope=envelope.epsilon_at(h),
            tail=budget_tail_bound(
                sch.stepsize, nu, h, gradient_bound, message_factor=factor
            ),
            summable=summable,
        )
        for h in horizons
    ]


def write_budget(path: str, rows: list[BudgetRow]) -> None:
    write_csv(
        path, BUDGET_COLUMNS,
        (
            (r.horizon, r.conservative, r.envelope, r.tail,
             "yes" if r.summable else "no")
            for r in rows
        ),
    )


def write_budget_breakdown(
    path: str,
    variant: str,
    setup: RunSetup,
    gradient_bound: float,
    horizon: int,
    max_rows: int = 10_000,
) -> None:
    """Per-iteration conservative budget terms, strided to max_rows."""
    sch = effective_schedules(variant, setup)
    nu = sch.noise_scale
    if nu is None:
        raise ConfigError(
            "budget accounting needs a nonzero noise scale",
            key="noise.scale.form",
        )
    if variant in STATIC_VARIANTS:
        series = conservative_budget_static(
            sch.stepsize, sch.coupling, setup.consensus.min_diag_mag,
            nu, gradient_bound, horizon,
        )
    else:
        series = conservative_budget_tracking(
            sch.stepsize, sch.tracker_mix, sch.coupling_state,
            sch.coupling_tracker, setup.push_pull.min_diag_pull,
            setup.push_pull.min_diag_push, nu, gradient_bound, horizon,
        )
    stride = max(1, horizon // max_rows)
    idx = np.arange(0, horizon, stride)
    if idx[-1] != horizon - 1:
        idx = np.append(idx, horizon - 1)
    rows = zip(
        series.ks[idx], series.varsigma[idx], series.per_term[idx],
        series.epsilon_partial[idx],
    )
    write_csv(path, BREAKDOWN_COLUMNS, rows)


def run_directory(base: str, variant: str | None = None) -> str:
    path = os.path.join(base, variant) if variant else base
    os.makedirs(path, exist_ok=True)
    return path
