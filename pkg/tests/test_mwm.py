import json

import numpy as np
import pytest
from scipy.optimize import linprog

from wmeans.measures import GroupedDataset, empirical_measure, make_measure
from wmeans.multilevel import (
    MultilevelConfig,
    MultilevelState,
    assign_groups,
    mwm_objective,
    result_from_dict,
    result_to_dict,
)
from wmeans.mwm import global_update, local_update, mwm_init, mwm_run
from wmeans.transport import exact_coupling, wasserstein2


def random_measure(rng, k, d):
    return make_measure(rng.normal(size=(k, d)), rng.dirichlet(np.ones(k)))


def eq4_value(local_measures, global_measures, empiricals):
    """Independent oracle for the un-relaxed objective: the global term is an
    LP over the weights of an M-point measure supported on the H_i, coupled
    against the uniform measure on the G_j."""
    m = len(local_measures)
    M = len(global_measures)
    D = np.array(
        [
            [exact_coupling(g, h)[1] for h in global_measures]
            for g in local_measures
        ]
    )
    # variables T (m x M): rows sum to 1/m; column sums are the free weights
    A_eq = np.zeros((m, m * M))
    for j in range(m):
        A_eq[j, j * M:(j + 1) * M] = 1.0
    res = linprog(
        D.ravel(),
        A_eq=A_eq,
        b_eq=np.full(m, 1.0 / m),
        bounds=(0, None),
        method="highs",
    )
    assert res.success
    local = sum(
        exact_coupling(g, p)[1] for g, p in zip(local_measures, empiricals)
    )
    return local + res.fun


class TestAssignGroups:
    def test_single_global(self):
        rng = np.random.default_rng(0)
        locals_ = [random_measure(rng, 2, 2) for _ in range(4)]
        globals_ = [random_measure(rng, 2, 2)]
        np.testing.assert_array_equal(assign_groups(locals_, globals_), np.zeros(4))

    def test_exact_match_assigned(self):
        rng = np.random.default_rng(1)
        globals_ = [random_measure(rng, 2, 2) for _ in range(3)]
        locals_ = [globals_[2], globals_[0]]
        np.testing.assert_array_equal(assign_groups(locals_, globals_), [2, 0])

    def test_matches_bruteforce_argmin(self):
        rng = np.random.default_rng(2)
        locals_ = [random_measure(rng, 3, 2) for _ in range(6)]
        globals_ = [random_measure(rng, 2, 2) for _ in range(3)]
        expected = [
            int(np.argmin([wasserstein2(g, h) ** 2 for h in globals_]))
            for g in locals_
        ]
        np.testing.assert_array_equal(assign_groups(locals_, globals_), expected)

    def test_empty_globals_rejected(self):
        with pytest.raises(ValueError):
            assign_groups([], [])


class TestLocalUpdate:
    def test_k1_closed_form(self):
        # single-atom solution of min (1/n) sum ||t - X_i||^2 + ||t - h||^2 / m
        rng = np.random.default_rng(3)
        m = 5
        points = rng.normal(size=(8, 2))
        p = empirical_measure(points)
        h = make_measure([rng.normal(size=2)], [1.0])
        g0 = make_measure([points.mean(axis=0)], [1.0])
        updated = local_update(g0, p, h, m, k=1)
        expected = (m * points.mean(axis=0) + h.atoms[0]) / (m + 1)
        np.testing.assert_allclose(updated.atoms[0], expected, atol=1e-8)

    def test_perfect_fit_returns_empirical(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(4, 2))
        p = empirical_measure(points)
        g0 = make_measure([points.mean(axis=0)], [1.0])
        updated = local_update(g0, p, p, m=3, k=4)
        term = exact_coupling(updated, p)[1] * (1 + 1 / 3)
        assert term == pytest.approx(0.0, abs=1e-12)

    def test_guarded_descent(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            p = empirical_measure(rng.normal(size=(10, 2)))
            h = random_measure(rng, 3, 2)
            g = random_measure(rng, 3, 2)
            m = 4
            before = exact_coupling(g, p)[1] + exact_coupling(g, h)[1] / m
            updated = local_update(g, p, h, m, k=3, rng=rng)
            after = exact_coupling(updated, p)[1] + exact_coupling(updated, h)[1] / m
            assert after <= before + 1e-9


class TestGlobalUpdate:
    def test_single_member_identity(self):
        rng = np.random.default_rng(6)
        g = random_measure(rng, 3, 2)
        h = global_update([g], global_support=10, init=g)
        assert wasserstein2(h, g) == pytest.approx(0.0, abs=1e-12)
        assert h.n_atoms <= 10

    def test_single_member_requantized_to_budget(self):
        rng = np.random.default_rng(7)
        g = random_measure(rng, 8, 2)
        h = global_update([g], global_support=3, rng=rng)
        assert h.n_atoms <= 3

    def test_two_diracs_midpoint(self):
        a = make_measure([[0.0, 0.0]], [1.0])
        b = make_measure([[4.0, 2.0]], [1.0])
        h = global_update([a, b], global_support=10, rng=np.random.default_rng(0))
        np.testing.assert_allclose(h.atoms[0], [2.0, 1.0], atol=1e-10)

    def test_beats_best_member_candidate(self):
        rng = np.random.default_rng(8)
        members = [random_measure(rng, 2, 2) for _ in range(3)]
        h = global_update(members, global_support=10, rng=rng)
        cost = sum(exact_coupling(h, g)[1] for g in members)
        best_member = min(
            sum(exact_coupling(c, g)[1] for g in members) for c in members
        )
        assert cost <= best_member + 1e-9


class TestObjective:
    def test_perfect_fit_zero(self):
        rng = np.random.default_rng(9)
        groups = [rng.normal(size=(3, 2)) for _ in range(2)]
        data = GroupedDataset(groups)
        locals_ = [empirical_measure(g) for g in groups]
        state = MultilevelState(
            local_measures=locals_,
            global_measures=[locals_[0], locals_[1]],
            assignments=np.array([0, 1]),
        )
        assert mwm_objective(state, data) == pytest.approx(0.0, abs=1e-12)

    def test_single_group_dirac_arithmetic(self):
        # oracle: (1/n) sum ||t - X_i||^2 + ||t - h||^2 / m  by direct arithmetic
        rng = np.random.default_rng(10)
        points = rng.normal(size=(5, 2))
        theta = rng.normal(size=2)
        h = rng.normal(size=2)
        data = GroupedDataset([points])
        state = MultilevelState(
            local_measures=[make_measure([theta], [1.0])],
            global_measures=[make_measure([h], [1.0])],
            assignments=np.array([0]),
        )
        expected = ((points - theta) ** 2).sum(axis=1).mean() + ((theta - h) ** 2).sum()
        assert mwm_objective(state, data) == pytest.approx(expected, rel=1e-12)

    def test_matches_eq4_lp_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            m = int(rng.integers(1, 6))
            M = int(rng.integers(1, 4))
            groups = [rng.normal(size=(int(rng.integers(2, 5)), 2)) for _ in range(m)]
            data = GroupedDataset(groups)
            locals_ = [random_measure(rng, int(rng.integers(1, 5)), 2) for _ in range(m)]
            globals_ = [random_measure(rng, int(rng.integers(1, 5)), 2) for _ in range(M)]
            state = MultilevelState(
                local_measures=locals_,
                global_measures=globals_,
                assignments=assign_groups(locals_, globals_),
            )
            expected = eq4_value(locals_, globals_, data.empiricals())
            assert mwm_objective(state, data) == pytest.approx(expected, abs=1e-8)


class TestInit:
    def test_deterministic(self):
        rng = np.random.default_rng(12)
        data = GroupedDataset([rng.normal(size=(10, 2)) for _ in range(4)])
        cfg = MultilevelConfig(local_atoms=2, n_global=2, seed=99)
        s1 = mwm_init(data, cfg)
        s2 = mwm_init(data, cfg)
        for a, b in zip(s1.local_measures, s2.local_measures):
            np.testing.assert_array_equal(a.atoms, b.atoms)
            np.testing.assert_array_equal(a.weights, b.weights)
        for a, b in zip(s1.global_measures, s2.global_measures):
            np.testing.assert_array_equal(a.atoms, b.atoms)
        np.testing.assert_array_equal(s1.assignments, s2.assignments)

    def test_zero_variance_groups_give_diracs(self):
        data = GroupedDataset(
            [np.zeros((5, 2)), np.ones((4, 2))]
        )
        cfg = MultilevelConfig(local_atoms=3, n_global=1, seed=0)
        state = mwm_init(data, cfg)
        for g, value in zip(state.local_measures, (0.0, 1.0)):
            assert np.unique(g.atoms, axis=0).shape[0] == 1
            assert g.atoms[0, 0] == value

    def test_single_group_single_global(self):
        rng = np.random.default_rng(13)
        data = GroupedDataset([rng.normal(size=(12, 2))])
        cfg = MultilevelConfig(local_atoms=3, n_global=1, global_support=5, seed=1)
        state = mwm_init(data, cfg)
        assert len(state.global_measures) == 1
        assert state.global_measures[0].n_atoms <= 5
        np.testing.assert_array_equal(state.assignments, [0])

    def test_budget_clamped_with_warning(self):
        data = GroupedDataset([np.arange(3.0)])
        cfg = MultilevelConfig(local_atoms=10, n_global=1, seed=0)
        with pytest.warns(UserWarning, match="clamp"):
            cfg.local_budgets(data)


class TestRun:
    def _fixed_point_oracle(self, xbars, m, iters=200):
        """Iterate the two closed-form block updates to their fixed point."""
        theta = xbars.copy()
        for _ in range(iters):
            h = theta.mean(axis=0)
            theta = (m * xbars + h) / (m + 1)
        return theta

    def test_example1_fixed_point(self):
        rng = np.random.default_rng(14)
        m = 3
        groups = [rng.normal(size=(4, 2)) + rng.normal(scale=3, size=2) for _ in range(m)]
        data = GroupedDataset(groups)
        xbars = np.array([g.mean(axis=0) for g in groups])
        oracle = self._fixed_point_oracle(xbars, m)
        closed_form = ((m * m + 1) * xbars + (xbars.sum(axis=0) - xbars)) / (m * m + m)
        np.testing.assert_allclose(oracle, closed_form, atol=1e-12)

        cfg = MultilevelConfig(
            local_atoms=1, n_global=1, rel_tol=1e-13, max_outer=300, seed=0
        )
        res = mwm_run(data, cfg)
        fitted = np.array([g.atoms[0] for g in res.state.local_measures])
        np.testing.assert_allclose(fitted, oracle, atol=1e-6)

    def test_zero_variance_recovery(self):
        # realizable optimum: every group sits exactly on one global atom
        centers = np.array([[0.0, 0.0], [10.0, 10.0]])
        groups = [np.tile(centers[j % 2], (6, 1)) for j in range(4)]
        data = GroupedDataset(groups)
        cfg = MultilevelConfig(local_atoms=1, n_global=2, seed=3)
        res = mwm_run(data, cfg)
        assert res.state.objective_trace[-1] == pytest.approx(0.0, abs=1e-12)
        atoms = np.array(sorted(h.atoms[0].tolist() for h in res.state.global_measures))
        np.testing.assert_allclose(atoms, centers, atol=1e-9)

    def test_trace_monotone_and_budgets(self):
        rng = np.random.default_rng(15)
        groups = [rng.normal(size=(12, 2)) + 4 * rng.normal(size=2) for _ in range(6)]
        data = GroupedDataset(groups)
        cfg = MultilevelConfig(local_atoms=3, n_global=2, global_support=4, seed=5)
        res = mwm_run(data, cfg)
        trace = np.array(res.state.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9)
        for g in res.state.local_measures:
            assert g.n_atoms <= 3
        for h in res.state.global_measures:
            assert h.n_atoms <= 4

    def test_post_run_assignments_stable(self):
        rng = np.random.default_rng(16)
        groups = [rng.normal(size=(10, 2)) + 3 * rng.normal(size=2) for _ in range(5)]
        data = GroupedDataset(groups)
        cfg = MultilevelConfig(local_atoms=2, n_global=2, seed=6)
        res = mwm_run(data, cfg)
        recomputed = assign_groups(
            res.state.local_measures, res.state.global_measures
        )
        np.testing.assert_array_equal(res.state.assignments, recomputed)

    def test_converged_flag_semantics(self):
        rng = np.random.default_rng(17)
        data = GroupedDataset([rng.normal(size=(8, 2)) for _ in range(3)])
        cfg = MultilevelConfig(local_atoms=2, n_global=2, seed=7, max_outer=1)
        res = mwm_run(data, cfg)
        assert res.iterations == 1
        trace = res.state.objective_trace
        if res.converged:
            assert trace[-2] - trace[-1] < cfg.rel_tol * max(trace[-2], 1e-300)

    def test_result_serialization_roundtrip(self):
        rng = np.random.default_rng(18)
        data = GroupedDataset([rng.normal(size=(6, 2)) for _ in range(3)])
        cfg = MultilevelConfig(local_atoms=2, n_global=2, seed=8)
        res = mwm_run(data, cfg)
        payload = json.loads(json.dumps(result_to_dict(res)))
        back = result_from_dict(payload)
        assert back.method == "mwm"
        assert back.iterations == res.iterations
        np.testing.assert_array_equal(back.state.assignments, res.state.assignments)
        np.testing.assert_array_equal(
            back.state.local_measures[0].atoms, res.state.local_measures[0].atoms
        )
        assert back.state.objective_trace == res.state.objective_trace
        assert "wall_time" not in payload
