import numpy as np
import pytest

from wmeans.barycenter import (
    BarycenterProblem,
    barycenter_objective,
    fixed_support_weights,
    free_support_barycenter,
)
from wmeans.measures import empirical_measure, make_measure
from wmeans.transport import wasserstein2


def random_measure(rng, k, d):
    return make_measure(rng.normal(size=(k, d)), rng.dirichlet(np.ones(k)))


class TestFixedSupportWeights:
    def test_self_support_recovers_weights(self):
        rng = np.random.default_rng(0)
        p = random_measure(rng, 4, 2)
        w = fixed_support_weights(p.atoms, [p], [1.0])
        np.testing.assert_allclose(w, p.weights, atol=1e-12)
        cand = make_measure(p.atoms, w)
        assert barycenter_objective(cand, [p], [1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_single_support_point(self):
        rng = np.random.default_rng(1)
        p = random_measure(rng, 3, 2)
        w = fixed_support_weights(p.atoms[:1], [p], [1.0])
        np.testing.assert_array_equal(w, [1.0])

    def test_two_point_support_matches_grid_search(self):
        # oracle: dense sweep of the 1-simplex at 1e-3 resolution
        rng = np.random.default_rng(2)
        support = rng.normal(size=(2, 2))
        m1 = make_measure(rng.normal(size=(1, 2)), [1.0])
        m2 = make_measure(rng.normal(size=(1, 2)), [1.0])
        lam = np.array([0.5, 0.5])
        best = np.inf
        for t in np.arange(0.0, 1.0 + 1e-9, 1e-3):
            cand = make_measure(support, [t, 1.0 - t])
            best = min(best, barycenter_objective(cand, [m1, m2], lam))
        w = fixed_support_weights(support, [m1, m2], lam)
        achieved = barycenter_objective(make_measure(support, w), [m1, m2], lam)
        assert achieved <= best + 1e-3

    def test_three_measures_lp_matches_pair_route(self):
        # same two-measure instance fed through the N=2 reduction and the
        # joint LP (by duplicating one measure with split lambda) must agree
        rng = np.random.default_rng(3)
        support = rng.normal(size=(3, 2))
        m1 = random_measure(rng, 4, 2)
        m2 = random_measure(rng, 3, 2)
        w_pair = fixed_support_weights(support, [m1, m2], [0.6, 0.4])
        w_lp = fixed_support_weights(support, [m1, m2, m2], [0.6, 0.2, 0.2])
        v_pair = barycenter_objective(
            make_measure(support, w_pair), [m1, m2], [0.6, 0.4]
        )
        v_lp = barycenter_objective(
            make_measure(support, w_lp), [m1, m2], [0.6, 0.4]
        )
        assert v_lp == pytest.approx(v_pair, abs=1e-9)

    def test_dimension_mismatch(self):
        p = make_measure([[0.0, 1.0]], [1.0])
        with pytest.raises(ValueError, match="dimension"):
            fixed_support_weights(np.zeros((2, 1)), [p], [1.0])


class TestFreeSupportBarycenter:
    def test_two_diracs_midpoint(self):
        x = np.array([1.0, -2.0])
        y = np.array([3.0, 6.0])
        prob = BarycenterProblem(
            measures=[make_measure([x], [1.0]), make_measure([y], [1.0])], k=1
        )
        bary = free_support_barycenter(prob, rng=np.random.default_rng(0))
        np.testing.assert_allclose(bary.atoms[0], (x + y) / 2, atol=1e-10)
        np.testing.assert_array_equal(bary.weights, [1.0])

    def test_single_measure_identity(self):
        rng = np.random.default_rng(1)
        p = random_measure(rng, 4, 2)
        prob = BarycenterProblem(measures=[p], k=6)
        bary = free_support_barycenter(prob, rng=rng)
        assert wasserstein2(bary, p) == pytest.approx(0.0, abs=1e-12)

    def test_k1_is_weighted_mean_of_means(self):
        rng = np.random.default_rng(2)
        measures = [random_measure(rng, 3, 2) for _ in range(3)]
        lam = np.array([0.2, 0.3, 0.5])
        prob = BarycenterProblem(measures=measures, lam=lam, k=1)
        bary = free_support_barycenter(prob, rng=rng)
        expected = sum(l * m.mean() for l, m in zip(lam, measures))
        np.testing.assert_allclose(bary.atoms[0], expected, atol=1e-8)

    def test_support_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            sizes = rng.integers(1, 5, size=3)
            measures = [random_measure(rng, int(s), 2) for s in sizes]
            prob = BarycenterProblem(measures=measures, k=50)
            bary = free_support_barycenter(prob, rng=rng)
            assert bary.n_atoms <= sizes.sum() - len(measures) + 1

    def test_identical_pair_attains_zero(self):
        rng = np.random.default_rng(4)
        p = random_measure(rng, 3, 2)
        prob = BarycenterProblem(measures=[p, p], k=3, init=p)
        bary = free_support_barycenter(prob, rng=rng)
        assert barycenter_objective(bary, [p, p], prob.lam) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_objective_not_above_init(self):
        # guarded acceptance: result never worse than the warm start
        rng = np.random.default_rng(5)
        for trial in range(5):
            measures = [random_measure(rng, int(rng.integers(2, 5)), 2) for _ in range(3)]
            init = random_measure(rng, 3, 2)
            prob = BarycenterProblem(measures=measures, k=3, init=init)
            bary = free_support_barycenter(prob, rng=rng)
            before = barycenter_objective(init, measures, prob.lam)
            after = barycenter_objective(bary, measures, prob.lam)
            assert after <= before + 1e-9

    def test_empirical_mixture(self):
        # barycenter of two overlapping empiricals improves on either input
        rng = np.random.default_rng(6)
        p1 = empirical_measure(rng.normal(size=(6, 2)))
        p2 = empirical_measure(rng.normal(size=(6, 2)) + 0.5)
        prob = BarycenterProblem(measures=[p1, p2], k=4)
        bary = free_support_barycenter(prob, rng=rng)
        val = barycenter_objective(bary, [p1, p2], prob.lam)
        for candidate in (p1, p2):
            assert val <= barycenter_objective(candidate, [p1, p2], prob.lam) + 1e-9

    def test_problem_validation(self):
        p = make_measure([[0.0]], [1.0])
        with pytest.raises(ValueError):
            BarycenterProblem(measures=[], k=1)
        with pytest.raises(ValueError):
            BarycenterProblem(measures=[p], lam=[0.4], k=1)
        with pytest.raises(ValueError):
            BarycenterProblem(measures=[p], k=0)
