import numpy as np
import pytest

from conftest import desk_graph, make_setup, static_schedules, tracking_schedules

from dpopt.errors import ConditionError, DivergenceError, RangeError
from dpopt.graphs import (
    DirectedGraph,
    build_consensus_weights,
    build_push_pull_weights,
)
from dpopt.objectives import random_instance
from dpopt.privacy import conservative_budget_static, conservative_budget_tracking
from dpopt.schedules import PowerSchedule, ScheduleSet
from dpopt.solvers import (
    RunSetup,
    STATIC_VARIANTS,
    TRACKING_VARIANTS,
    VARIANTS,
    effective_schedules,
    run,
    step_static,
    step_static_per_agent,
    step_tracking,
    step_tracking_per_agent,
    validate_for_variant,
)


def off_diagonal(A):
    out = A.copy()
    np.fill_diagonal(out, 0.0)
    return out


class TestSteps:
    def test_static_stacked_matches_per_agent(self):
        W = build_consensus_weights(desk_graph(), 0.2).matrix
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 3))
        grads = rng.standard_normal((5, 3))
        zeta = rng.standard_normal((5, 3))
        stacked = step_static(x, grads, W, off_diagonal(W), 0.7, 0.05, zeta)
        looped = step_static_per_agent(x, grads, W, 0.7, 0.05, zeta)
        assert np.max(np.abs(stacked - looped)) <= 1e-12

    def test_tracking_stacked_matches_per_agent(self):
        problem, _ = random_instance(seed=7, m=5, s=3, d=2)
        g = desk_graph()
        w = build_push_pull_weights(g, g, 0.2)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 2))
        g_prev = problem.all_gradients(x)
        zeta = rng.standard_normal((5, 2))
        xi = rng.standard_normal((5, 2))
        a = step_tracking(x, y, g_prev, problem, w.pull, off_diagonal(w.pull),
                          w.push, off_diagonal(w.push),
                          0.6, 0.4, 0.01, 0.05, zeta, xi)
        b = step_tracking_per_agent(x, y, g_prev, problem, w.pull, w.push,
                                    0.6, 0.4, 0.01, 0.05, zeta, xi)
        for lhs, rhs in zip(a, b):
            assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_static_hand_computed_step(self):
        # Two agents, one symmetric edge with weight 0.3, d = 1.
        W = np.array([[-0.3, 0.3], [0.3, -0.3]])
        x = np.array([[2.0], [0.0]])
        grads = np.array([[0.5], [-0.25]])
        zeta = np.array([[0.2], [-0.4]])
        out = step_static(x, grads, W, off_diagonal(W), 0.5, 0.1, zeta)
        # agent 0: 2 + 0.5*0.3*((0 - 0.4) - 2) - 0.1*0.5
        assert out[0, 0] == pytest.approx(1.59)
        # agent 1: 0 + 0.5*0.3*((2 + 0.2) - 0) - 0.1*(-0.25)
        assert out[1, 0] == pytest.approx(0.355)

    def test_tracking_gradients_at_new_state(self):
        problem, _ = random_instance(seed=7, m=5, s=3, d=2)
        g = desk_graph()
        w = build_push_pull_weights(g, g, 0.2)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 2))
        g_prev = problem.all_gradients(x)
        zeta = rng.standard_normal((5, 2))
        xi = rng.standard_normal((5, 2))
        x_next, y_next, g_next = step_tracking(
            x, y, g_prev, problem, w.pull, off_diagonal(w.pull),
            w.push, off_diagonal(w.push), 0.6, 0.4, 0.01, 0.05, zeta, xi,
        )
        assert np.allclose(g_next, problem.all_gradients(x_next))

    def test_tracker_sum_conservation_without_noise(self):
        # With zero tracker noise the column sums of the push matrix
        # vanish, so sum_i (y - g) contracts by exactly (1 - alpha).
        problem, _ = random_instance(seed=7, m=5, s=3, d=2)
        g = desk_graph()
        w = build_push_pull_weights(g, g, 0.2)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 2))
        grads = problem.all_gradients(x)
        y = grads.copy()
        zero = np.zeros((5, 2))
        for k in range(50):
            x, y, grads = step_tracking(
                x, y, grads, problem, w.pull, off_diagonal(w.pull),
                w.push, off_diagonal(w.push),
                0.6 / (1 + 0.1 * k), 0.4 / (1 + 0.1 * k), 0.01, 0.02,
                zero, zero,
            )
            drift = np.max(np.abs(y.sum(axis=0) - grads.sum(axis=0)))
            assert drift <= 1e-12


class TestRun:
    def test_record_points_include_endpoint(self):
        setup = make_setup("static", noise=False, stride=10)
        trace = run("alg1", setup, iterations=25, seed=1)
        assert list(trace.ks) == [0, 10, 20, 25]
        assert trace.final_k == 25

    def test_deterministic_with_noise(self):
        setup = make_setup("static")
        a = run("alg1", setup, iterations=60, seed=5)
        b = run("alg1", setup, iterations=60, seed=5)
        assert np.array_equal(a.gap, b.gap)
        assert np.array_equal(a.consensus, b.consensus)
        assert np.array_equal(a.epsilon_partial, b.epsilon_partial)

    def test_seed_changes_trajectory(self):
        setup = make_setup("static")
        a = run("alg1", setup, iterations=60, seed=5)
        b = run("alg1", setup, iterations=60, seed=6)
        assert not np.array_equal(a.gap, b.gap)

    def test_same_seed_shares_initial_state_within_family(self):
        static = make_setup("static")
        a = run("alg1", static, iterations=20, seed=9)
        b = run("dgd", static, iterations=20, seed=9)
        assert a.consensus[0] == b.consensus[0]
        assert a.gap[0] == b.gap[0]
        tracking = make_setup("tracking")
        c = run("alg2", tracking, iterations=20, seed=9)
        d = run("push_pull", tracking, iterations=20, seed=9)
        assert c.consensus[0] == d.consensus[0]
        assert c.gap[0] == d.gap[0]

    def test_noiseless_epsilon_is_nan(self):
        setup = make_setup("static", noise=False)
        trace = run("alg1", setup, iterations=30, seed=1)
        assert np.all(np.isnan(trace.epsilon_partial))

    def test_epsilon_partial_is_nondecreasing(self):
        setup = make_setup("static")
        trace = run("alg1", setup, iterations=100, seed=1)
        assert trace.epsilon_partial[0] == 0.0
        assert np.all(np.diff(trace.epsilon_partial) >= 0)

    def test_epsilon_matches_static_budget_series(self):
        setup = make_setup("static")
        trace = run("alg1", setup, iterations=200, seed=3)
        sch = effective_schedules("alg1", setup)
        series = conservative_budget_static(
            sch.stepsize, sch.coupling, setup.consensus.min_diag_mag,
            sch.noise_scale, trace.gradient_bound, 200,
        )
        for i, k in enumerate(trace.ks):
            expected = 0.0 if k == 0 else series.epsilon_at(int(k))
            assert trace.epsilon_partial[i] == pytest.approx(expected, rel=1e-12)

    def test_epsilon_matches_tracking_budget_series(self):
        setup = make_setup("tracking")
        trace = run("alg2", setup, iterations=200, seed=3)
        sch = effective_schedules("alg2", setup)
        series = conservative_budget_tracking(
            sch.stepsize, sch.tracker_mix, sch.coupling_state,
            sch.coupling_tracker, setup.push_pull.min_diag_pull,
            setup.push_pull.min_diag_push, sch.noise_scale,
            trace.gradient_bound, 200,
        )
        for i, k in enumerate(trace.ks):
            expected = 0.0 if k == 0 else series.epsilon_at(int(k))
            assert trace.epsilon_partial[i] == pytest.approx(expected, rel=1e-12)

    def test_single_agent_is_plain_gradient_descent(self):
        problem, _ = random_instance(seed=11, m=1, s=8, d=3)
        setup = RunSetup.create(
            problem, static_schedules(noise=False),
            consensus=build_consensus_weights(DirectedGraph(1), 0.2),
            stride=7,
        )
        trace = run("alg1", setup, iterations=100, seed=4)
        # Replay the same initialization and take bare gradient steps.
        rng = np.random.default_rng(4)
        x = setup.init_radius * rng.standard_normal((1, 3))
        lam = setup.schedules.stepsize
        expected = {0: problem.global_cost(x[0]) - setup.f_star}
        for k in range(100):
            x = x - lam.value(k) * problem.all_gradients(x)
            expected[k + 1] = problem.global_cost(x[0]) - setup.f_star
        for i, k in enumerate(trace.ks):
            assert trace.gap[i] == pytest.approx(expected[int(k)], abs=1e-14)
            assert trace.consensus[i] == 0.0

    def test_divergence_is_flagged_not_raised(self):
        setup = make_setup("static", noise=False)
        bad = ScheduleSet(stepsize=PowerSchedule.constant(10.0))
        setup = RunSetup(
            problem=setup.problem, theta_star=setup.theta_star,
            f_star=setup.f_star, schedules=bad, consensus=setup.consensus,
        )
        trace = run("dgd", setup, iterations=500, seed=2)
        assert trace.diverged
        assert trace.diverged_at is not None
        assert trace.final_gap == np.inf
        assert trace.final_consensus == np.inf
        assert trace.ks[-1] <= trace.diverged_at
        with pytest.raises(DivergenceError):
            trace.raise_if_diverged()

    def test_validation_gate_and_force(self):
        setup = make_setup("static")
        bad = ScheduleSet(
            stepsize=setup.schedules.stepsize,
            coupling=PowerSchedule.decaying(1.0, 0.1, 1.1),
            noise_scale=setup.schedules.noise_scale,
        )
        gated = RunSetup(
            problem=setup.problem, theta_star=setup.theta_star,
            f_star=setup.f_star, schedules=bad, consensus=setup.consensus,
        )
        with pytest.raises(ConditionError):
            run("alg1", gated, iterations=10, seed=1)
        trace = run("alg1", gated, iterations=10, seed=1, force=True)
        assert trace.final_k == 10

    def test_baselines_ignore_schedule_conditions(self):
        setup = make_setup("static")
        bad = ScheduleSet(
            stepsize=setup.schedules.stepsize,
            coupling=PowerSchedule.decaying(1.0, 0.1, 1.1),
            noise_scale=setup.schedules.noise_scale,
        )
        gated = RunSetup(
            problem=setup.problem, theta_star=setup.theta_star,
            f_star=setup.f_star, schedules=bad, consensus=setup.consensus,
        )
        assert validate_for_variant("dgd", gated).overall
        trace = run("dgd", gated, iterations=10, seed=1)
        assert trace.final_k == 10

    def test_gradient_bound_covers_initial_gradients(self):
        setup = make_setup("static", noise=False)
        trace = run("alg1", setup, iterations=10, seed=8)
        rng = np.random.default_rng(8)
        x0 = setup.init_radius * rng.standard_normal((5, 2))
        g0 = np.max(np.abs(setup.problem.all_gradients(x0)).sum(axis=1))
        assert trace.gradient_bound >= g0 - 1e-12

    def test_argument_errors(self):
        setup = make_setup("static")
        with pytest.raises(ValueError):
            run("nope", setup, iterations=10, seed=1)
        with pytest.raises(RangeError):
            run("alg1", setup, iterations=0, seed=1)


class TestEffectiveSchedules:
    def test_dgd_runs_at_full_coupling(self):
        setup = make_setup("static")
        sch = effective_schedules("dgd", setup)
        assert sch.coupling.value(0) == 1.0 and sch.coupling.value(999) == 1.0
        assert sch.stepsize is setup.schedules.stepsize
        assert sch.noise_scale is setup.schedules.noise_scale

    def test_push_pull_has_no_tracker_mix(self):
        setup = make_setup("tracking")
        sch = effective_schedules("push_pull", setup)
        assert sch.tracker_mix is None
        assert sch.coupling_state.value(17) == 1.0
        assert sch.coupling_tracker.value(17) == 1.0

    def test_pdop_requires_geometric_schedules(self):
        setup = make_setup("static")
        with pytest.raises(ConditionError):
            effective_schedules("pdop_alg1", setup)
        with_pdop = make_setup("static", pdop=True)
        sch = effective_schedules("pdop_alg1", with_pdop)
        assert sch.stepsize.form == "geometric"
        assert sch.noise_scale.form == "geometric"
        assert sch.coupling.value(5) == 1.0

    def test_attenuated_variants_keep_their_bundle(self):
        static = make_setup("static")
        assert effective_schedules("alg1", static) is static.schedules
        tracking = make_setup("tracking")
        assert effective_schedules("alg2", tracking) is tracking.schedules


class TestValidateForVariant:
    def test_families_need_their_weights(self):
        static = make_setup("static")
        tracking = make_setup("tracking")
        for variant in TRACKING_VARIANTS:
            with pytest.raises(ConditionError):
                validate_for_variant(variant, static)
        for variant in STATIC_VARIANTS:
            with pytest.raises(ConditionError):
                validate_for_variant(variant, tracking)

    def test_alg1_report_combines_matrix_and_schedules(self):
        report = validate_for_variant("alg1", make_setup("static"))
        names = {e.name for e in report.entries}
        assert "symmetric" in names
        assert "coupling_sum_diverges" in names
        assert report.overall

    def test_alg2_report_includes_null_residuals(self):
        report = validate_for_variant("alg2", make_setup("tracking"))
        names = {e.name for e in report.entries}
        assert "pull_left_null_residual" in names
        assert "push_right_null_residual" in names
        assert "budget_sum_finite" in names
        assert report.overall

    def test_all_variants_pass_on_reference_setups(self):
        static = make_setup("static", pdop=True)
        tracking = make_setup("tracking", pdop=True)
        for variant in VARIANTS:
            setup = static if variant in STATIC_VARIANTS else tracking
            assert validate_for_variant(variant, setup).overall
