"""Differentially private decentralized optimization toolkit.

Solvers for static-consensus and gradient-tracking updates whose
messages carry Laplace noise, schedule validators for the convergence
and finite-budget conditions, a privacy budget accountant, and a
reproducible Monte Carlo experiment harness with a CLI.
"""

from .cli import main
from .conditions import ConditionEntry, ConditionReport
from .config import ExperimentConfig, build_setup, load_config, parse_config_text
from .errors import (
    ConditionError,
    ConfigError,
    ConnectivityError,
    DegenerateProblemError,
    DivergenceError,
    DpoptError,
    RangeError,
    SpectralError,
    StructureError,
)
from .graphs import (
    ConsensusWeights,
    DirectedGraph,
    PushPullWeights,
    build_consensus_weights,
    build_push_pull_weights,
    contraction_at,
    spanning_roots,
    validate_consensus_matrix,
    validate_push_pull_graphs,
)
from .harness import (
    Aggregate,
    BudgetRow,
    aggregate,
    budget_report,
    monte_carlo,
    write_aggregate,
    write_budget,
    write_budget_breakdown,
    write_csv,
    write_failures,
    write_trace,
)
from .noise import LaplaceNoiseSource, derive_seed, laplace_inverse_cdf
from .objectives import (
    AdjacentVariant,
    QuadraticEstimationProblem,
    adjacent_variant,
    lipschitz_constant,
    optimal_solution,
    random_instance,
)
from .privacy import (
    BudgetSeries,
    DifferenceTrace,
    asymptotic_budget,
    budget_tail_bound,
    conservative_budget_static,
    conservative_budget_tracking,
    coupled_difference_trace,
    infinite_tail,
    sensitivity_static,
    sensitivity_static_closed_form,
    sensitivity_tracking,
    sensitivity_tracking_closed_form,
)
from .ratefit import RateFit, rate_fit
from .schedules import (
    PowerSchedule,
    ScheduleExpr,
    ScheduleSet,
    SeriesClass,
    SeriesResult,
    recursion_envelope_ratio,
    recursion_envelope_series,
    ratio_limit,
    series_class,
    validate_static_schedules,
    validate_tracking_schedules,
)
from .solvers import (
    RunSetup,
    STATIC_VARIANTS,
    TRACKING_VARIANTS,
    Trace,
    VARIANTS,
    effective_schedules,
    run,
    step_static,
    step_static_per_agent,
    step_tracking,
    step_tracking_per_agent,
    validate_for_variant,
)
from .svgplot import Series, line_plot, std_band

__version__ = "0.1.0"
