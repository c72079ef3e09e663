"""Experiment configuration: flat dotted-key text files.

One `key = value` pair per line, full-line comments starting with `#`,
no sections.  Dotted keys group related settings; the full schema is
documented in the README.  Edges are written `sender>receiver` in
config files and stored internally as (receiver, sender) pairs to match
the row-indexes-receivers convention of the coupling matrices.

Unknown keys are rejected so typos fail loudly, and every rejection
carries the offending line number and key.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .graphs import (
    DirectedGraph,
    build_consensus_weights,
    build_push_pull_weights,
)
from .objectives import random_instance
from .schedules import PowerSchedule, ScheduleSet
from .solvers import RunSetup, STATIC_VARIANTS, TRACKING_VARIANTS, VARIANTS

_SCHEDULE_FIELDS = ("form", "a", "b", "p", "r")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of one experiment config file."""

    variant: str
    problem_seed: int
    agents: int
    measurements: int
    dimension: int
    regularization: float
    measurement_noise_std: float
    edges: tuple[tuple[int, int], ...]
    edge_weight: float
    pull_edges: tuple[tuple[int, int], ...]
    push_edges: tuple[tuple[int, int], ...]
    schedules: ScheduleSet
    pdop_stepsize: PowerSchedule | None
    pdop_noise: PowerSchedule | None
    noise_seed: int
    iterations: int
    monte_carlo: int
    stride: int
    init_radius: float
    output_dir: str
    gradient_bound: float


class _RawConfig:
    """Key-value pairs with line numbers and consumption tracking."""

    def __init__(self, text: str):
        self.pairs: dict[str, tuple[str, int]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(
                    "expected `key = value`", line=lineno, key=stripped
                )
            key, _, value = stripped.partition("=")
            key = key.strip()
            if not key:
                raise ConfigError("empty key", line=lineno, key=stripped)
            if key in self.pairs:
                raise ConfigError("duplicate key", line=lineno, key=key)
            self.pairs[key] = (value.strip(), lineno)
        self.consumed: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.pairs

    def line(self, key: str) -> int | None:
        pair = self.pairs.get(key)
        return pair[1] if pair else None

    def take(self, key: str, default=None, required: bool = False) -> str | None:
        if key not in self.pairs:
            if required:
                raise ConfigError("missing required key", key=key)
            return default
        self.consumed.add(key)
        return self.pairs[key][0]

    def reject_unconsumed(self) -> None:
        for key, (_, lineno) in self.pairs.items():
            if key not in self.consumed:
                raise ConfigError("unknown key", line=lineno, key=key)


def _to_float(raw: _RawConfig, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(
            f"expected a number, got {value!r}", line=raw.line(key), key=key
        ) from None


def _to_int(raw: _RawConfig, key: str, value: str) -> int:
    number = _to_float(raw, key, value)
    if number != int(number):
        raise ConfigError(
            f"expected an integer, got {value!r}", line=raw.line(key), key=key
        )
    return int(number)


def _take_float(raw, key, default=None, required=False):
    value = raw.take(key, required=required)
    if value is None:
        return default
    return _to_float(raw, key, value)


def _take_int(raw, key, default=None, required=False):
    value = raw.take(key, required=required)
    if value is None:
        return default
    return _to_int(raw, key, value)


def _parse_edges(raw: _RawConfig, key: str, value: str):
    """`sender>receiver` pairs, comma separated, into (receiver, sender)."""
    edges = []
    if not value:
        return tuple(edges)
    for chunk in value.split(","):
        chunk = chunk.strip()
        if ">" not in chunk:
            raise ConfigError(
                f"edge {chunk!r} must be written sender>receiver",
                line=raw.line(key), key=key,
            )
        sender_s, _, receiver_s = chunk.partition(">")
        try:
            sender = int(sender_s.strip())
            receiver = int(receiver_s.strip())
        except ValueError:
            raise ConfigError(
                f"edge {chunk!r} must use integer agent indexes",
                line=raw.line(key), key=key,
            ) from None
        edges.append((receiver, sender))
    return tuple(edges)


def _take_edges(raw, key, default=None, required=False):
    value = raw.take(key, required=required)
    if value is None:
        return default
    return _parse_edges(raw, key, value)


def _take_schedule(raw, prefix, required=False, allow_zero=False):
    form = raw.take(f"{prefix}.form", required=required)
    if form is None:
        return None
    if form == "zero":
        if not allow_zero:
            raise ConfigError(
                "form `zero` is only valid for the noise scale",
                line=raw.line(f"{prefix}.form"), key=f"{prefix}.form",
            )
        return None
    kwargs = {}
    for field in ("a", "b", "p", "r"):
        value = raw.take(f"{prefix}.{field}")
        if value is not None:
            kwargs[field] = _to_float(raw, f"{prefix}.{field}", value)
    try:
        return PowerSchedule(form=form, **kwargs)
    except ValueError as exc:
        raise ConfigError(
            str(exc), line=raw.line(f"{prefix}.form"), key=f"{prefix}.form"
        ) from None


def parse_config_text(text: str) -> ExperimentConfig:
    raw = _RawConfig(text)

    variant = raw.take("variant", required=True)
    if variant not in VARIANTS:
        raise ConfigError(
            f"unknown variant {variant!r}; choose one of {', '.join(VARIANTS)}",
            line=raw.line("variant"), key="variant",
        )

    problem_seed = _take_int(raw, "problem.seed", default=7)
    agents = _take_int(raw, "problem.agents", default=5)
    measurements = _take_int(raw, "problem.measurements", default=3)
    dimension = _take_int(raw, "problem.dimension", default=2)
    regularization = _take_float(raw, "problem.regularization", default=0.01)
    noise_std = _take_float(raw, "problem.noise_std", default=1.0)

    edges = _take_edges(raw, "graph.edges", default=())
    edge_weight = _take_float(raw, "graph.edge_weight", default=0.2)
    pull_edges = _take_edges(raw, "graph.pull_edges", default=edges)
    push_edges = _take_edges(raw, "graph.push_edges", default=edges)

    stepsize = _take_schedule(raw, "schedules.stepsize", required=True)
    coupling = _take_schedule(raw, "schedules.coupling")
    coupling_state = _take_schedule(raw, "schedules.coupling_state")
    coupling_tracker = _take_schedule(raw, "schedules.coupling_tracker")
    tracker_mix = _take_schedule(raw, "schedules.tracker_mix")
    noise_scale = _take_schedule(
        raw, "noise.scale", required=True, allow_zero=True
    )

    schedules = ScheduleSet(
        stepsize=stepsize,
        coupling=coupling,
        coupling_state=coupling_state,
        coupling_tracker=coupling_tracker,
        tracker_mix=tracker_mix,
        noise_scale=noise_scale,
    )

    pdop_stepsize = _take_schedule(raw, "pdop.stepsize")
    pdop_noise = _take_schedule(raw, "pdop.noise")

    config = ExperimentConfig(
        variant=variant,
        problem_seed=problem_seed,
        agents=agents,
        measurements=measurements,
        dimension=dimension,
        regularization=regularization,
        measurement_noise_std=noise_std,
        edges=edges,
        edge_weight=edge_weight,
        pull_edges=pull_edges,
        push_edges=push_edges,
        schedules=schedules,
        pdop_stepsize=pdop_stepsize,
        pdop_noise=pdop_noise,
        noise_seed=_take_int(raw, "noise.seed", default=1),
        iterations=_take_int(raw, "run.iterations", default=10_000),
        monte_carlo=_take_int(raw, "run.monte_carlo", default=1),
        stride=_take_int(raw, "run.stride", default=10),
        init_radius=_take_float(raw, "run.init_radius", default=1.0),
        output_dir=raw.take("run.output_dir", default="out"),
        gradient_bound=_take_float(raw, "budget.gradient_bound", default=1.0),
    )
    raw.reject_unconsumed()
    _check_ranges(config)
    return config


def _check_ranges(config: ExperimentConfig) -> None:
    checks = (
        ("problem.agents", config.agents >= 1),
        ("problem.measurements", config.measurements >= 1),
        ("problem.dimension", config.dimension >= 1),
        ("problem.regularization", config.regularization >= 0),
        ("problem.noise_std", config.measurement_noise_std >= 0),
        ("graph.edge_weight", config.edge_weight > 0),
        ("run.iterations", config.iterations >= 1),
        ("run.monte_carlo", config.monte_carlo >= 1),
        ("run.stride", config.stride >= 1),
        ("run.init_radius", config.init_radius >= 0),
        ("budget.gradient_bound", config.gradient_bound > 0),
    )
    for key, ok in checks:
        if not ok:
            raise ConfigError("value out of range", key=key)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key=path) from None
    return parse_config_text(text)


def _needs(config: ExperimentConfig, variants) -> None:
    for variant in variants:
        if variant == "alg1" and config.schedules.coupling is None:
            raise ConfigError(
                "variant alg1 needs schedules.coupling",
                key="schedules.coupling.form",
            )
        if variant == "alg2" and not (
            config.schedules.is_tracking_shape()
            and config.schedules.tracker_mix is not None
        ):
            raise ConfigError(
                "variant alg2 needs schedules.coupling_state, "
                "schedules.coupling_tracker and schedules.tracker_mix",
                key="schedules.coupling_state.form",
            )
        if variant.startswith("pdop") and (
            config.pdop_stepsize is None or config.pdop_noise is None
        ):
            raise ConfigError(
                "pdop variants need pdop.stepsize and pdop.noise",
                key="pdop.stepsize.form",
            )
        if variant in STATIC_VARIANTS and not config.edges \
                and config.agents > 1:
            raise ConfigError(
                "static variants need graph.edges", key="graph.edges"
            )
        if variant in TRACKING_VARIANTS and (
            not config.pull_edges or not config.push_edges
        ) and config.agents > 1:
            raise ConfigError(
                "tracking variants need graph.pull_edges and graph.push_edges "
                "(or a shared graph.edges)",
                key="graph.pull_edges",
            )


def build_setup(config: ExperimentConfig, variants=None) -> RunSetup:
    """Materialize the problem and coupling weights for the requested
    variants (default: the config's own variant)."""
    variants = tuple(variants) if variants is not None else (config.variant,)
    for variant in variants:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}", key="variant")
    _needs(config, variants)
    problem, _ = random_instance(
        seed=config.problem_seed,
        m=config.agents,
        s=config.measurements,
        d=config.dimension,
        reg=config.regularization,
        noise_std=config.measurement_noise_std,
    )
    consensus = None
    push_pull = None
    if any(v in STATIC_VARIANTS for v in variants):
        graph = DirectedGraph(config.agents, frozenset(config.edges))
        consensus = build_consensus_weights(graph, config.edge_weight)
    if any(v in TRACKING_VARIANTS for v in variants):
        pull = DirectedGraph(config.agents, frozenset(config.pull_edges))
        push = DirectedGraph(config.agents, frozenset(config.push_edges))
        push_pull = build_push_pull_weights(pull, push, config.edge_weight)
    return RunSetup.create(
        problem,
        config.schedules,
        consensus=consensus,
        push_pull=push_pull,
        init_radius=config.init_radius,
        stride=config.stride,
        pdop_stepsize=config.pdop_stepsize,
        pdop_noise=config.pdop_noise,
    )
