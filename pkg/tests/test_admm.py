import numpy as np
import pytest

from conftest import random_variates, uniform_problem
from ocot import OrderedVariates, SolverConfig, check_membership, solve, validate_problem
from ocot.errors import InvalidConfig
from ocot.oracle import lp_solve_oc


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"rho": 0.0}, {"rho": -1.0}, {"tol": 0.0}, {"max_iters": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            SolverConfig(**kwargs)

    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.rho == 1.0
        assert cfg.max_iters == 10_000
        assert cfg.tol == 1e-4


class TestSolve:
    def test_unconstrained_symmetric(self, symmetric_2x2):
        plan, trace = solve(symmetric_2x2)
        assert trace.termination == "tol"
        assert plan.objective == pytest.approx(0.0, abs=1e-3)
        np.testing.assert_allclose(plan.X, [[0.5, 0.0], [0.0, 0.5]], atol=1e-3)

    def test_forced_top_antidiagonal(self, symmetric_2x2):
        plan, _ = solve(symmetric_2x2, OrderedVariates(((0, 1),)))
        assert plan.objective == pytest.approx(0.5, abs=1e-3)
        np.testing.assert_allclose(plan.X, np.full((2, 2), 0.25), atol=1e-3)

    def test_random_vs_lp_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(12):
            p = uniform_problem(rng, 6, 6)
            oc = random_variates(rng, 6, 6, int(rng.integers(1, 3)))
            plan, _ = solve(p, oc)
            opt, _ = lp_solve_oc(p, oc)
            assert abs(plan.objective - opt) <= 0.01 * max(abs(opt), 1e-12)

    def test_iterate_feasibility_split(self):
        rng = np.random.default_rng(32)
        p = uniform_problem(rng, 5, 5)
        oc = random_variates(rng, 5, 5, 2)
        plan, _ = solve(p, oc)
        # X carries exact marginals, Z exact ordering; the gap is the residual
        assert np.max(np.abs(plan.X.sum(axis=1) - p.a)) <= 1e-10
        assert np.max(np.abs(plan.X.sum(axis=0) - p.b)) <= 1e-10
        z_report = check_membership(p, oc, plan.Z)
        assert z_report.order_violation == 0.0
        assert z_report.negativity == 0.0
        assert np.linalg.norm(plan.X - plan.Z) <= plan.primal_residual + 1e-12

    def test_objective_consistency(self, symmetric_2x2):
        plan, _ = solve(symmetric_2x2, OrderedVariates(((0, 1),)))
        assert plan.objective == pytest.approx(float(np.sum(symmetric_2x2.D * plan.X)), rel=1e-12)

    def test_max_iters_termination_on_infeasible(self):
        # skewed marginals with the small cell forced on top: the two sets
        # cannot meet, the solver reports the plateau instead of failing
        p = validate_problem([0.9, 0.1], [0.9, 0.1], np.ones((2, 2)))
        plan, trace = solve(p, OrderedVariates(((1, 1),)), SolverConfig(max_iters=500))
        assert trace.termination == "max_iters"
        assert plan.iterations == 500
        assert plan.primal_residual > 1e-3

    def test_trace_lengths(self, symmetric_2x2):
        plan, trace = solve(symmetric_2x2, OrderedVariates(((0, 1),)))
        assert trace.iterations == plan.iterations
        assert trace.objectives.size == trace.primal.size == trace.dual.size
        assert np.all(trace.primal >= 0.0) and np.all(trace.dual >= 0.0)


class TestConvergenceBehaviour:
    def test_windowed_primal_mean_non_increasing(self):
        rng = np.random.default_rng(123)
        for _ in range(8):
            m = int(rng.integers(4, 9))
            n = int(rng.integers(4, 9))
            k = int(rng.integers(0, 3))
            p = uniform_problem(rng, m, n)
            oc = random_variates(rng, m, n, k) if k else OrderedVariates()
            _, trace = solve(p, oc)
            r = trace.primal
            means = [r[i : i + 100].mean() for i in range(0, r.size - 99, 100)]
            for left, right in zip(means, means[1:]):
                assert right <= left

    def test_ergodic_average_halves(self, symmetric_2x2):
        # O(1/t) decay of the averaged objective on the analytic instance;
        # past exact stationarity the remaining iterates are constant
        _, trace = solve(
            symmetric_2x2,
            OrderedVariates(((0, 1),)),
            SolverConfig(max_iters=2000, tol=1e-30, track_averages=True),
        )
        objs = trace.objectives
        if objs.size < 2000:
            assert trace.primal[-1] == 0.0 and trace.dual[-1] == 0.0
            objs = np.concatenate([objs, np.full(2000 - objs.size, objs[-1])])
        avg = np.cumsum(objs) / np.arange(1, objs.size + 1)
        e1000 = abs(avg[999] - 0.5)
        e2000 = abs(avg[1999] - 0.5)
        assert e2000 <= 1.5 * (e1000 / 2.0)

    def test_average_tracking_fields(self, symmetric_2x2):
        _, trace = solve(
            symmetric_2x2, OrderedVariates(((0, 1),)), SolverConfig(track_averages=True)
        )
        assert trace.X_avg is not None and trace.Z_avg is not None
        assert trace.avg_objectives.size == trace.iterations
