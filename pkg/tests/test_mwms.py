import numpy as np
import pytest

from wmeans.measures import GroupedDataset, empirical_measure, make_measure
from wmeans.multilevel import MultilevelConfig, mwm_objective, result_to_dict
from wmeans.mwm import mwm_run
from wmeans.mwms import local_weight_update, mwms_run, support_update
from wmeans.synthdata import GenParams, generate_lc
from wmeans.transport import exact_coupling


class TestSupportUpdate:
    def test_single_group_single_atom_closed_form(self):
        # one shared atom serving one group and a Dirac global: the atom
        # moves to the midpoint of the group mean and the global atom
        rng = np.random.default_rng(0)
        points = rng.normal(size=(6, 2))
        data = GroupedDataset([points])
        h = make_measure([rng.normal(size=2)], [1.0])
        shared = np.zeros((1, 2))
        T = np.full((1, 6), 1 / 6)
        U = np.array([[1.0]])
        moved = support_update(shared, data, [T], [U], [h])
        expected = (points.mean(axis=0) + h.atoms[0]) / 2.0
        np.testing.assert_allclose(moved[0], expected, atol=1e-12)

    def test_degenerate_coupling_pins_atom_to_point(self):
        rng = np.random.default_rng(1)
        points = rng.normal(size=(4, 2))
        data = GroupedDataset([points])
        h = make_measure([rng.normal(size=2)], [1.0])
        shared = np.zeros((2, 2))
        T = np.zeros((2, 4))
        T[0, 2] = 1.0  # atom 0 serves only data point 2
        U = np.zeros((2, 1))  # atom 0 unused by the global term
        U[1, 0] = 1.0
        moved = support_update(shared, data, [T], [U], [h])
        np.testing.assert_allclose(moved[0], points[2], atol=1e-12)
        np.testing.assert_allclose(moved[1], h.atoms[0], atol=1e-12)

    def test_zero_mass_atom_unchanged(self):
        data = GroupedDataset([np.ones((2, 2))])
        h = make_measure([[0.0, 0.0]], [1.0])
        shared = np.array([[5.0, 5.0], [1.0, 1.0]])
        T = np.array([[0.0, 0.0], [0.5, 0.5]])
        U = np.array([[0.0], [1.0]])
        moved = support_update(shared, data, [T], [U], [h])
        np.testing.assert_array_equal(moved[0], [5.0, 5.0])


class TestLocalWeightUpdate:
    def test_realizable_fit(self):
        rng = np.random.default_rng(2)
        points = rng.normal(size=(5, 2))
        p = empirical_measure(points)
        g = local_weight_update(p, points, p, m=4)
        term = exact_coupling(g, p)[1]
        assert term == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(np.sort(g.weights), np.sort(p.weights), atol=1e-12)

    def test_single_shared_atom_forced_weight(self):
        rng = np.random.default_rng(3)
        p = empirical_measure(rng.normal(size=(4, 2)))
        h = make_measure([rng.normal(size=2)], [1.0])
        g = local_weight_update(p, np.zeros((1, 2)), h, m=3)
        np.testing.assert_array_equal(g.weights, [1.0])

    def test_two_atoms_match_grid_search(self):
        rng = np.random.default_rng(4)
        shared = rng.normal(size=(2, 2))
        p = empirical_measure(rng.normal(size=(3, 2)))
        h = make_measure([rng.normal(size=2)], [1.0])
        m = 5

        def term(weights):
            g = make_measure(shared, weights)
            return exact_coupling(g, p)[1] + exact_coupling(g, h)[1] / m

        best = min(
            term([t, 1.0 - t]) for t in np.arange(0.0, 1.0 + 1e-9, 1e-3)
        )
        g = local_weight_update(p, shared, h, m)
        assert term(g.weights) <= best + 1e-3

    def test_atoms_may_get_zero_weight(self):
        p = empirical_measure([[0.0, 0.0]])
        shared = np.array([[0.0, 0.0], [100.0, 100.0]])
        g = local_weight_update(p, shared, p, m=2)
        assert g.n_atoms == 2
        assert g.weights[1] == pytest.approx(0.0, abs=1e-12)


class TestRun:
    def _small_config(self, seed=0, K=6):
        return MultilevelConfig(
            local_atoms=2, n_global=2, global_support=4,
            seed=seed, shared_atoms=K,
        )

    def test_requires_shared_atoms(self):
        data = GroupedDataset([np.zeros((2, 1))])
        with pytest.raises(ValueError, match="shared_atoms"):
            mwms_run(data, MultilevelConfig(n_global=1))

    def test_zero_variance_lc_recovery(self):
        # realizable optimum: two shared atoms, groups constant on them
        atoms = np.array([[0.0, 0.0], [8.0, 8.0]])
        groups = [np.tile(atoms[j % 2], (5, 1)) for j in range(4)]
        data = GroupedDataset(groups)
        cfg = MultilevelConfig(
            local_atoms=1, n_global=2, global_support=2, seed=1, shared_atoms=2
        )
        res = mwms_run(data, cfg)
        assert res.state.objective_trace[-1] == pytest.approx(0.0, abs=1e-12)
        recovered = np.array(sorted(res.state.shared_support.tolist()))
        np.testing.assert_allclose(recovered, atoms, atol=1e-9)

    def test_monotone_trace_and_sharing_invariant(self):
        params = GenParams(m=6, n_j=12, d=2, n_global=2, shared_atoms=5,
                           local_atoms=2, seed=3)
        data, _ = generate_lc(params)
        cfg = self._small_config(seed=3, K=5)
        res = mwms_run(data, cfg)
        trace = np.array(res.state.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9)
        # all local supports live inside the shared set
        pool = {tuple(row) for row in res.state.shared_support}
        union = set()
        for g in res.state.local_measures:
            for atom, w in zip(g.atoms, g.weights):
                assert tuple(atom) in pool
                if w > 0:
                    union.add(tuple(atom))
        assert len(union) <= cfg.shared_atoms

    def test_constraint_inactive_matches_unconstrained_optimum(self):
        # K spans every distinct group point, so sharing costs nothing and
        # both algorithms reach the realizable zero objective
        centers = np.array([[0.0, 0.0], [9.0, 9.0], [0.0, 9.0]])
        groups = [np.tile(centers[j], (4, 1)) for j in range(3)]
        data = GroupedDataset(groups)
        mwms_cfg = MultilevelConfig(
            local_atoms=1, n_global=3, global_support=3, seed=4, shared_atoms=3
        )
        mwm_cfg = MultilevelConfig(
            local_atoms=1, n_global=3, global_support=3, seed=4
        )
        obj_mwms = mwms_run(data, mwms_cfg).state.objective_trace[-1]
        obj_mwm = mwm_run(data, mwm_cfg).state.objective_trace[-1]
        assert obj_mwms == pytest.approx(obj_mwm, abs=1e-10)
        assert obj_mwms == pytest.approx(0.0, abs=1e-10)

    def test_objective_matches_exact_reevaluation(self):
        params = GenParams(m=4, n_j=8, d=2, n_global=2, shared_atoms=4,
                           local_atoms=2, seed=5)
        data, _ = generate_lc(params)
        res = mwms_run(data, self._small_config(seed=5, K=4))
        assert res.state.objective_trace[-1] == pytest.approx(
            mwm_objective(res.state, data), rel=1e-10
        )

    def test_serialization_includes_shared_support(self):
        params = GenParams(m=3, n_j=6, d=2, n_global=2, shared_atoms=3,
                           local_atoms=2, seed=6)
        data, _ = generate_lc(params)
        res = mwms_run(data, self._small_config(seed=6, K=3))
        payload = result_to_dict(res)
        assert payload["method"] == "mwms"
        assert len(payload["shared_support"]) == 3

    def test_deterministic(self):
        params = GenParams(m=4, n_j=8, d=2, n_global=2, shared_atoms=4,
                           local_atoms=2, seed=7)
        data, _ = generate_lc(params)
        r1 = mwms_run(data, self._small_config(seed=7, K=4))
        r2 = mwms_run(data, self._small_config(seed=7, K=4))
        np.testing.assert_array_equal(r1.state.shared_support, r2.state.shared_support)
        assert r1.state.objective_trace == r2.state.objective_trace
