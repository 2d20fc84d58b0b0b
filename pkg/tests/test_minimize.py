"""Two-stage self-consistency solver on synthetic problems."""
import numpy as np
import pytest

from hfphases.minimize import MinimizeSpec, minimize


def log_cosh(s):
    return float(np.logaddexp(s, -s) - np.log(2.0))


def quadratic_problem(target, curvature):
    """Objective (x-target)' C (x-target) / 2 with gap map x - C^{-1} grad."""
    target = np.asarray(target, dtype=float)
    C = np.asarray(curvature, dtype=float)

    def objective(x):
        d = x - target
        return 0.5 * float(d @ C @ d)

    def gap_map(x):
        # fixed point exactly at the minimum, with map slope I - C
        return x - C @ (x - target)

    return objective, gap_map


class TestFixedPointStage:
    def test_contracting_map_converges_fast(self):
        obj, gmap = quadratic_problem([1.0, -2.0], np.diag([0.8, 0.5]))
        spec = MinimizeSpec(seeds=[np.zeros(2)])
        res = minimize(obj, gmap, spec)
        assert res.converged
        assert np.allclose(res.x, [1.0, -2.0], atol=1e-7)
        assert res.n_iter < 60

    def test_anti_aligned_oscillatory_map(self):
        # map slope 1 - c = -1.5: plain iteration diverges, damping required
        obj, gmap = quadratic_problem([0.3, 0.7], np.diag([2.5, 2.2]))
        spec = MinimizeSpec(seeds=[np.array([5.0, -5.0])])
        res = minimize(obj, gmap, spec)
        assert res.converged
        assert np.allclose(res.x, [0.3, 0.7], atol=1e-7)

    def test_stiff_smoothed_step_map(self):
        # 1D root inside a near-discontinuous layer of width 1e-6
        width = 1e-6

        def gap_map(x):
            return np.array([1.0 + 0.5 * np.tanh((1.0 - x[0]) / width)])

        def objective(x):
            # antiderivative of x - G(x): stationary exactly at the root
            s = (1.0 - x[0]) / width
            return 0.5 * x[0] ** 2 - x[0] + 0.5 * width * log_cosh(s)

        spec = MinimizeSpec(seeds=[np.array([2.5])])
        res = minimize(objective, gap_map, spec)
        assert res.converged
        assert res.x[0] == pytest.approx(1.0, abs=1e-5)
        assert res.residual_norm < 1e-8

    def test_plateau_boundary_cycle_resolved_by_bisection(self):
        # piecewise-constant map whose two plateau values lie in each
        # other's regions: the classic limit cycle; root at the smoothed
        # boundary x = 1 requires bracketing
        width = 1e-9

        def gap_map(x):
            s = np.tanh((1.0 - x[0]) / width)
            return np.array([1.0 + 0.004 * s])

        def objective(x):
            s = (1.0 - x[0]) / width
            return 0.5 * x[0] ** 2 - x[0] + 0.004 * width * log_cosh(s)

        spec = MinimizeSpec(seeds=[np.array([0.3])], polish=False)
        res = minimize(objective, gap_map, spec)
        assert res.converged
        assert res.x[0] == pytest.approx(1.0, abs=1e-6)


class TestCollapseDetection:
    def test_decaying_component_reports_collapse(self):
        def gap_map(x):
            return np.array([0.8, 0.2 * x[1]])

        def objective(x):
            return float((x[0] - 0.8) ** 2 + 0.1 * x[1] ** 2)

        spec = MinimizeSpec(seeds=[np.array([0.0, 1.0])],
                            collapse_index=1, collapse_tol=1e-6,
                            polish=False)
        res = minimize(objective, gap_map, spec)
        assert res.status == "collapsed"
        assert not res.converged

    def test_surviving_component_not_collapsed(self):
        obj, gmap = quadratic_problem([0.5, 2.0], np.diag([0.6, 0.6]))
        spec = MinimizeSpec(seeds=[np.array([1.0, 1.0])], collapse_index=1)
        res = minimize(obj, gmap, spec)
        assert res.converged
        assert res.status == "converged"


class TestMultistart:
    def test_picks_lowest_objective_among_converged(self):
        # double-well in x0 with two fixed points; seeds reach both
        def gap_map(x):
            # stationarity of f at x0 = -1 and x0 = +2 (global)
            return np.array([-1.0 if x[0] < 0.5 else 2.0])

        def objective(x):
            return float(min((x[0] + 1.0) ** 2,
                             (x[0] - 2.0) ** 2 - 1.0))

        spec = MinimizeSpec(seeds=[np.array([-3.0]), np.array([3.0])],
                            polish=False)
        res = minimize(objective, gap_map, spec)
        assert res.converged
        assert res.x[0] == pytest.approx(2.0)
        assert res.seed_index == 1

    def test_deterministic_tie_break_by_seed_order(self):
        # constant map: every seed lands on exactly x = 1.0 with f = 0.0,
        # so the exact-tie rule (lowest seed index) decides
        def gap_map(x):
            return np.array([1.0])

        def objective(x):
            return float((x[0] - 1.0) ** 2)

        spec = MinimizeSpec(seeds=[np.array([0.0]), np.array([2.0])],
                            polish=False)
        res = minimize(objective, gap_map, spec)
        assert res.value == 0.0
        assert res.seed_index == 0

    def test_seed_statuses_recorded(self):
        obj, gmap = quadratic_problem([1.0, 1.0], np.diag([0.5, 0.5]))
        spec = MinimizeSpec(seeds=[np.zeros(2), np.ones(2) * 4])
        res = minimize(obj, gmap, spec)
        assert len(res.seed_statuses) == 2
        assert all(s[1] == "converged" for s in res.seed_statuses)


class TestPolishStage:
    def test_polish_rescues_crawling_map(self):
        # nearly unit map slope: stage 1 crawls, simplex finishes the job
        obj, gmap = quadratic_problem([2.0, -1.0], np.diag([1e-4, 1e-4]))
        spec = MinimizeSpec(seeds=[np.zeros(2)], max_fixed_point=30)
        res = minimize(obj, gmap, spec)
        assert np.allclose(res.x, [2.0, -1.0], atol=1e-4)

    def test_polish_never_raises_objective(self):
        obj, gmap = quadratic_problem([0.0, 0.0], np.diag([0.9, 0.9]))
        spec_off = MinimizeSpec(seeds=[np.ones(2)], polish=False)
        spec_on = MinimizeSpec(seeds=[np.ones(2)], polish=True)
        f_off = minimize(obj, gmap, spec_off).value
        f_on = minimize(obj, gmap, spec_on).value
        assert f_on <= f_off + 1e-12
