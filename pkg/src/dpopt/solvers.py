"""Decentralized solvers with privacy noise on every message.

Two update families are implemented.

Static consensus: each agent mixes the obscured states of its neighbors
with an attenuation factor gamma^k and takes a local gradient step,

    x_i^{k+1} = x_i^k
        + gamma^k * sum_j w_ij (x_j^k + zeta_j^k - x_i^k)
        - lam^k * grad f_i(x_i^k).

Gradient tracking (directed graphs): the state is pulled through a
zero-row-sum matrix and a tracker of the average gradient is pushed
through a zero-column-sum matrix, with its own attenuation and mixing
factor.  The update order within one iteration is fixed: state first,
then gradients at the new state, then the tracker; the gradient at the
old state is cached, never recomputed.

Baseline variants reuse the same steps with frozen couplings: "dgd" is
static consensus with gamma == 1, "push_pull" is gradient tracking
with both couplings == 1 and no tracker mix, and the "pdop_*" variants
swap in geometric stepsize and noise schedules.

Every message is obscured by one fresh Laplace draw per sender per
iteration; all receivers observe the same copy and the sender's own
update uses its clean state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditions import ConditionReport
from .errors import ConditionError, DivergenceError, RangeError
from .graphs import (
    ConsensusWeights,
    PushPullWeights,
    contraction_at,
    validate_consensus_matrix,
)
from .noise import LaplaceNoiseSource
from .objectives import QuadraticEstimationProblem, optimal_solution
from .schedules import (
    PowerSchedule,
    ScheduleSet,
    validate_static_schedules,
    validate_tracking_schedules,
)

STATIC_VARIANTS = ("alg1", "dgd", "pdop_alg1")
TRACKING_VARIANTS = ("alg2", "push_pull", "pdop_push_pull")
VARIANTS = STATIC_VARIANTS + TRACKING_VARIANTS

_NOISE_CHUNK = 2048


@dataclass(frozen=True)
class RunSetup:
    """Everything a solver run needs besides the variant and the seed."""

    problem: QuadraticEstimationProblem
    theta_star: np.ndarray
    f_star: float
    schedules: ScheduleSet
    consensus: ConsensusWeights | None = None
    push_pull: PushPullWeights | None = None
    init_radius: float = 1.0
    stride: int = 10
    divergence_threshold: float = 1e12
    pdop_stepsize: PowerSchedule | None = None
    pdop_noise: PowerSchedule | None = None

    @classmethod
    def create(cls, problem, schedules, **kwargs) -> "RunSetup":
        theta_star, f_star = optimal_solution(problem)
        return cls(
            problem=problem, theta_star=theta_star, f_star=f_star,
            schedules=schedules, **kwargs,
        )


@dataclass
class Trace:
    """Recorded metrics of one run, sampled every `stride` iterations.

    epsilon_partial is the cumulative privacy budget bound up to each
    recorded iteration, scaled at finalization by the harvested
    gradient bound (the largest ||grad f_i||_1 seen on the trajectory);
    it is NaN for noiseless runs.  A diverged run keeps its records up
    to the divergence point and marks diverged_at.
    """

    variant: str
    ks: np.ndarray
    consensus: np.ndarray
    gap: np.ndarray
    dist_opt: np.ndarray
    tracking: np.ndarray
    epsilon_partial: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None
    diverged_magnitude: float = float("nan")
    gradient_bound: float = 0.0

    def raise_if_diverged(self) -> None:
        if self.diverged:
            raise DivergenceError(
                self.variant, self.diverged_at, self.diverged_magnitude
            )

    @property
    def final_k(self) -> int:
        return int(self.ks[-1])

    @property
    def final_gap(self) -> float:
        return np.inf if self.diverged else float(self.gap[-1])

    @property
    def final_consensus(self) -> float:
        return np.inf if self.diverged else float(self.consensus[-1])

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)


def effective_schedules(variant: str, setup: RunSetup) -> ScheduleSet:
    """Resolve the schedule bundle a variant actually runs with."""
    sch = setup.schedules
    one = PowerSchedule.constant(1.0)
    if variant == "alg1":
        sch.require_static()
        return sch
    if variant == "dgd":
        return ScheduleSet(
            stepsize=sch.stepsize, coupling=one, noise_scale=sch.noise_scale
        )
    if variant == "pdop_alg1":
        _require_pdop(setup)
        return ScheduleSet(
            stepsize=setup.pdop_stepsize, coupling=one,
            noise_scale=setup.pdop_noise,
        )
    if variant == "alg2":
        sch.require_tracking()
        return sch
    if variant == "push_pull":
        return ScheduleSet(
            stepsize=sch.stepsize, coupling_state=one, coupling_tracker=one,
            tracker_mix=None, noise_scale=sch.noise_scale,
        )
    if variant == "pdop_push_pull":
        _require_pdop(setup)
        return ScheduleSet(
            stepsize=setup.pdop_stepsize, coupling_state=one,
            coupling_tracker=one, tracker_mix=None,
            noise_scale=setup.pdop_noise,
        )
    raise ValueError(f"unknown variant {variant!r}")


def _require_pdop(setup: RunSetup) -> None:
    if setup.pdop_stepsize is None:
        raise ConditionError("pdop variants need a geometric stepsize schedule")


def validate_for_variant(variant: str, setup: RunSetup) -> ConditionReport:
    """Structural checks for every variant; schedule condition checks
    only for the two attenuated variants (baselines run schedules that
    intentionally violate them)."""
    if variant in STATIC_VARIANTS:
        if setup.consensus is None:
            raise ConditionError(f"variant {variant!r} needs consensus weights")
        report = validate_consensus_matrix(setup.consensus.matrix)
        if variant == "alg1":
            sub = validate_static_schedules(effective_schedules(variant, setup))
            report.entries.extend(sub.entries)
            report.warnings.extend(sub.warnings)
        return report
    if variant in TRACKING_VARIANTS:
        if setup.push_pull is None:
            raise ConditionError(f"variant {variant!r} needs push-pull weights")
        report = ConditionReport(f"{variant} structural conditions")
        w = setup.push_pull
        resid_u = float(np.max(np.abs(w.left_eigvec @ w.pull)))
        resid_v = float(np.max(np.abs(w.push @ w.right_eigvec)))
        report.add("pull_left_null_residual", "<= 1e-9", resid_u, resid_u <= 1e-9)
        report.add("push_right_null_residual", "<= 1e-9", resid_v, resid_v <= 1e-9)
        if variant == "alg2":
            sub = validate_tracking_schedules(effective_schedules(variant, setup))
            report.entries.extend(sub.entries)
            report.warnings.extend(sub.warnings)
        return report
    raise ValueError(f"unknown variant {variant!r}")


def step_static(x, grads, W, W_off, gamma_k, lam_k, zeta):
    """One stacked static-consensus update."""
    return x + gamma_k * (W @ x + W_off @ zeta) - lam_k * grads


def step_static_per_agent(x, grads, W, gamma_k, lam_k, zeta):
    """Reference per-agent loop for the static-consensus update."""
    m, d = x.shape
    out = np.empty_like(x)
    for i in range(m):
        acc = np.zeros(d)
        for j in range(m):
            if j != i and W[i, j] != 0.0:
                acc += W[i, j] * (x[j] + zeta[j] - x[i])
        out[i] = x[i] + gamma_k * acc - lam_k * grads[i]
    return out


def step_tracking(x, y, g_prev, problem, R, R_off, C, C_off,
                  gamma1_k, gamma2_k, alpha_k, lam_k, zeta, xi):
    """One stacked gradient-tracking update; returns (x, y, grads)."""
    x_next = x + gamma1_k * (R @ x + R_off @ zeta) - lam_k * y
    g_next = problem.all_gradients(x_next)
    y_next = (1.0 - alpha_k) * (y - g_prev) \
        + gamma2_k * (C @ y + C_off @ xi) + g_next
    return x_next, y_next, g_next


def step_tracking_per_agent(x, y, g_prev, problem, R, C,
                            gamma1_k, gamma2_k, alpha_k, lam_k, zeta, xi):
    """Reference per-agent loop for the gradient-tracking update."""
    m, d = x.shape
    x_next = np.empty_like(x)
    for i in range(m):
        acc = np.zeros(d)
        for j in range(m):
            if j != i and R[i, j] != 0.0:
                acc += R[i, j] * (x[j] + zeta[j])
        x_next[i] = (1.0 + gamma1_k * R[i, i]) * x[i] + gamma1_k * acc \
            - lam_k * y[i]
    g_next = np.array(
        [problem.local_gradient(i, x_next[i]) for i in range(m)]
    )
    y_next = np.empty_like(y)
    for i in range(m):
        acc = np.zeros(d)
        for j in range(m):
            if j != i and C[i, j] != 0.0:
                acc += C[i, j] * (y[j] + xi[j])
        y_next[i] = (1.0 - alpha_k + gamma2_k * C[i, i]) * y[i] \
            + gamma2_k * acc + g_next[i] - (1.0 - alpha_k) * g_prev[i]
    return x_next, y_next, g_next


def _off_diagonal(A: np.ndarray) -> np.ndarray:
    out = A.copy()
    np.fill_diagonal(out, 0.0)
    return out


def _record_points(iterations: int, stride: int) -> np.ndarray:
    ks = np.arange(0, iterations + 1, stride)
    if ks[-1] != iterations:
        ks = np.append(ks, iterations)
    return ks


class _BudgetTracker:
    """Accumulates the sensitivity recursion and raw budget sum in step
    with the solver loop.  Raw means unscaled by the gradient bound."""

    def __init__(self, variant, setup, sch):
        self.enabled = sch.noise_scale is not None
        self.valid = True
        self.nu = sch.noise_scale
        self.total = 0.0
        if variant in STATIC_VARIANTS:
            self.kind = "static"
            self.min_coupling = setup.consensus.min_diag_mag
            self.s = 0.0
        else:
            self.kind = "tracking"
            self.min_pull = setup.push_pull.min_diag_pull
            self.min_push = setup.push_pull.min_diag_push
            self.sx = 0.0
            self.sy = 0.0

    def step(self, k, sch):
        if not (self.enabled and self.valid):
            return
        lam_k = sch.stepsize.value(k)
        if self.kind == "static":
            shrink = 1.0 - self.min_coupling * sch.coupling.value(k)
            if shrink <= 0.0:
                self.valid = False
                return
            self.s = shrink * self.s + lam_k
            self.total += self.s / self.nu.value(k + 1)
        else:
            alpha_k = 0.0 if sch.tracker_mix is None else sch.tracker_mix.value(k)
            shrink_y = 1.0 - alpha_k - self.min_push * sch.coupling_tracker.value(k)
            shrink_x = 1.0 - self.min_pull * sch.coupling_state.value(k)
            if shrink_y <= 0.0 or shrink_x <= 0.0:
                self.valid = False
                return
            sx_next = shrink_x * self.sx + lam_k * self.sy
            self.sy = shrink_y * self.sy + (2.0 - alpha_k)
            self.sx = sx_next
            self.total += 2.0 * (self.sx + self.sy) / self.nu.value(k + 1)

    def partial(self) -> float:
        if not (self.enabled and self.valid):
            return np.nan
        return self.total


def run(variant: str, setup: RunSetup, iterations: int, seed: int,
        force: bool = False) -> Trace:
    """Execute one solver run and return its metric trace.

    The seed fixes both the random initial states and the noise
    substreams, so two variants run with the same seed see identical
    initializations and identical message noise.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if iterations < 1:
        raise RangeError("iterations must be positive")
    if not force:
        report = validate_for_variant(variant, setup)
        if not report.overall:
            raise ConditionError(
                f"variant {variant!r} fails validation: "
                + ", ".join(report.failed_names())
            )
    sch = effective_schedules(variant, setup)
    problem = setup.problem
    m, d = problem.m, problem.dim
    rng = np.random.default_rng(seed)
    x = setup.init_radius * rng.standard_normal((m, d))
    noise = LaplaceNoiseSource(sch.noise_scale, seed)
    budget = _BudgetTracker(variant, setup, sch)

    record_ks = _record_points(iterations, setup.stride)
    n_rec = len(record_ks)
    cons = np.full(n_rec, np.nan)
    gap = np.full(n_rec, np.nan)
    dist = np.full(n_rec, np.nan)
    track = np.full(n_rec, np.nan)
    eps = np.full(n_rec, np.nan)

    tracking = variant in TRACKING_VARIANTS
    if tracking:
        weights = setup.push_pull
        R, C = weights.pull, weights.push
        R_off, C_off = _off_diagonal(R), _off_diagonal(C)
        u, v = weights.left_eigvec, weights.right_eigvec
        # Coupling must keep the mixed diagonals positive; decaying
        # schedules peak at k = 0 so one check suffices.
        contraction_at(weights, sch.coupling_state.value(0), side="pull")
        contraction_at(weights, sch.coupling_tracker.value(0), side="push")
        grads = problem.all_gradients(x)
        y = grads.copy()
        g_prev = grads
    else:
        weights = setup.consensus
        W = weights.matrix
        W_off = _off_diagonal(W)
        contraction_at(weights, sch.coupling.value(0))
        grads = problem.all_gradients(x)

    grad_bound = float(np.max(np.abs(grads).sum(axis=1)))

    def capture(idx, k):
        if tracking:
            xbar = (u @ x) / m
            ybar = y.mean(axis=0)
            track[idx] = float(np.sum((y - np.outer(v, ybar)) ** 2))
        else:
            xbar = x.mean(axis=0)
        cons[idx] = float(np.sum((x - xbar) ** 2))
        gap[idx] = problem.global_cost(xbar) - setup.f_star
        dist[idx] = float(np.linalg.norm(xbar - setup.theta_star))
        eps[idx] = budget.partial()

    rec_idx = 0
    capture(rec_idx, 0)
    rec_idx += 1

    lam_vals = sch.stepsize.values(np.arange(iterations))
    if tracking:
        g1_vals = sch.coupling_state.values(np.arange(iterations))
        g2_vals = sch.coupling_tracker.values(np.arange(iterations))
        if sch.tracker_mix is None:
            al_vals = np.zeros(iterations)
        else:
            al_vals = sch.tracker_mix.values(np.arange(iterations))
    else:
        gmm_vals = sch.coupling.values(np.arange(iterations))

    threshold = setup.divergence_threshold
    diverged_at = None
    diverged_magnitude = float("nan")
    for start in range(0, iterations, _NOISE_CHUNK):
        stop = min(start + _NOISE_CHUNK, iterations)
        ks_chunk = np.arange(start, stop)
        zeta_block = noise.sample_block(m, "state", ks_chunk, d)
        xi_block = noise.sample_block(m, "tracker", ks_chunk, d) if tracking \
            else None
        for k in range(start, stop):
            zeta = zeta_block[k - start]
            if tracking:
                x, y, grads = step_tracking(
                    x, y, grads, problem, R, R_off, C, C_off,
                    g1_vals[k], g2_vals[k], al_vals[k], lam_vals[k],
                    zeta, xi_block[k - start],
                )
                extreme = max(np.max(np.abs(x)), np.max(np.abs(y)))
            else:
                x = step_static(
                    x, grads, W, W_off, gmm_vals[k], lam_vals[k], zeta
                )
                grads = problem.all_gradients(x)
                extreme = np.max(np.abs(x))
            budget.step(k, sch)
            gb = float(np.max(np.abs(grads).sum(axis=1)))
            if gb > grad_bound:
                grad_bound = gb
            if not np.isfinite(extreme) or extreme > threshold:
                diverged_at = k + 1
                diverged_magnitude = float(extreme)
                break
            if rec_idx < n_rec and record_ks[rec_idx] == k + 1:
                capture(rec_idx, k + 1)
                rec_idx += 1
        if diverged_at is not None:
            break

    keep = rec_idx
    # The budget bound scales linearly with the gradient bound, which is
    # only fully harvested at the end of the run.
    eps_scaled = eps[:keep] * grad_bound if budget.enabled else eps[:keep]
    return Trace(
        variant=variant,
        ks=record_ks[:keep],
        consensus=cons[:keep],
        gap=gap[:keep],
        dist_opt=dist[:keep],
        tracking=track[:keep],
        epsilon_partial=eps_scaled,
        diverged=diverged_at is not None,
        diverged_at=diverged_at,
        diverged_magnitude=diverged_magnitude,
        gradient_bound=grad_bound,
    )
