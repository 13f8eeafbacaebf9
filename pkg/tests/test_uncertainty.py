"""Tests for the ambiguity-set support functions, duals, and the grid oracle."""

import numpy as np
import pytest

from rarl.uncertainty import (
    ChiSquare,
    Contamination,
    KLDivergence,
    SupportResult,
    TotalVariation,
    Wasserstein,
    line_metric,
    support_exact,
    support_oracle_grid,
    uncertainty_from_json,
    worst_case_row,
)

DELTAS = (0.1, 0.3, 0.6)


def families(delta):
    return [
        Contamination(min(delta, 0.99)),
        TotalVariation(delta),
        ChiSquare(delta),
        KLDivergence(delta),
        Wasserstein(delta),
    ]


def random_instance(rng, n=4):
    return rng.dirichlet(np.ones(n)), rng.normal(0.0, 1.5, size=n)


class TestClosedFormExamples:
    def test_contamination_half(self):
        assert Contamination(0.5).support([0.5, 0.5], [0.0, 2.0]) == pytest.approx(0.5, abs=1e-12)

    def test_constant_value_vector(self):
        for spec in families(0.3):
            assert spec.support([0.3, 0.7], [2.0, 2.0]) == pytest.approx(2.0, abs=1e-9)

    def test_tv_two_state(self):
        assert TotalVariation(0.2).support([0.5, 0.5], [0.0, 1.0]) == pytest.approx(0.3, abs=1e-12)

    def test_chi_square_two_state(self):
        # q = (0.5 + t, 0.5 - t) with 4 t^2 <= delta; optimum t = sqrt(delta)/2
        expected = 0.5 - np.sqrt(0.5) / 2.0
        assert ChiSquare(0.5).support([0.5, 0.5], [0.0, 1.0]) == pytest.approx(expected, abs=1e-9)

    def test_kl_large_radius_saturates_to_support_min(self):
        assert KLDivergence(50.0).support([0.5, 0.5], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-6)

    def test_kl_zero_mass_states_excluded(self):
        # mass cannot move onto states outside the nominal support
        assert KLDivergence(100.0).support([0.0, 1.0], [-5.0, 1.0]) == pytest.approx(1.0, abs=1e-9)

    def test_wasserstein_two_state(self):
        assert Wasserstein(0.2).support([0.5, 0.5], [0.0, 1.0]) == pytest.approx(0.3, abs=1e-9)

    def test_zero_radius_every_family(self):
        rng = np.random.default_rng(0)
        p, v = random_instance(rng)
        for spec in (Contamination(0.0), TotalVariation(0.0), ChiSquare(0.0), KLDivergence(0.0), Wasserstein(0.0)):
            assert spec.support(p, v) == pytest.approx(float(p @ v), abs=1e-12)

    def test_invalid_simplex_rejected(self):
        with pytest.raises(ValueError):
            TotalVariation(0.1).support([0.6, 0.6], [0.0, 1.0])

    def test_invalid_radii_rejected(self):
        with pytest.raises(ValueError):
            Contamination(1.0)
        with pytest.raises(ValueError):
            TotalVariation(-0.1)
        with pytest.raises(ValueError):
            Wasserstein(0.1, order=0.5)


class TestAxioms:
    """Shared properties on >= 100 random instances per family."""

    def test_bounds_translation_homogeneity_lipschitz(self):
        rng = np.random.default_rng(1)
        for trial in range(25):
            p, v = random_instance(rng)
            c = float(rng.normal(0, 3))
            pos = float(abs(rng.normal(0, 2)))
            v2 = rng.normal(0.0, 1.5, size=4)
            for spec in families(DELTAS[trial % 3]):
                base = spec.support(p, v)
                assert v.min() - 1e-9 <= base <= p @ v + 1e-9
                assert spec.support(p, v + c) == pytest.approx(base + c, abs=1e-9)
                assert spec.support(p, pos * v) == pytest.approx(pos * base, abs=1e-9 * max(1, pos))
                assert abs(spec.support(p, v2) - base) <= np.abs(v2 - v).max() + 1e-9

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            p, v = random_instance(rng)
            for small, large in zip(families(0.1), families(0.4)):
                assert large.support(p, v) <= small.support(p, v) + 1e-9

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        rows = rng.dirichlet(np.ones(5), size=40)
        v = rng.normal(0, 2, size=5)
        for spec in families(0.3):
            batch = spec.support_batch(rows, v)
            for i in range(0, 40, 7):
                assert batch[i] == pytest.approx(spec.support(rows[i], v), abs=1e-12)


class TestDualCertificates:
    def test_tv_primal_equals_dual(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            p, v = random_instance(rng, n=5)
            spec = TotalVariation(float(rng.uniform(0.05, 0.8)))
            assert spec.support(p, v) == pytest.approx(spec.dual_value(p, v), abs=1e-9)

    def test_dual_variables_within_brackets(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            p, v = random_instance(rng)
            vmax = np.abs(v).max()
            res_tv = support_exact(TotalVariation(0.3), p, v)
            assert np.all(res_tv.dual >= -1e-12) and np.all(res_tv.dual <= v + vmax + 1e-9)
            res_chi = support_exact(ChiSquare(0.3), p, v)
            assert np.all(res_chi.dual >= -1e-12) and np.all(res_chi.dual <= v + vmax + 1e-9)
            res_kl = support_exact(KLDivergence(0.3), p, v)
            assert res_kl.dual >= 0.0
            res_w = support_exact(Wasserstein(0.3), p, v)
            assert 0.0 <= res_w.dual <= 2.0 * vmax / 0.3 + 1e-6

    def test_optimal_value_bounds_from_duals(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p, v = random_instance(rng, n=5)
            vmax = np.abs(v).max()
            delta = float(rng.uniform(0.05, 0.9))
            assert abs(TotalVariation(delta).support(p, v)) <= 3 * (1 + 2 * delta) * vmax + 1e-9
            assert abs(ChiSquare(delta).support(p, v)) <= 3 * (1 + np.sqrt(2 * delta)) * vmax + 1e-9
            assert abs(Wasserstein(delta).support(p, v)) <= vmax + 1e-9

    def test_support_exact_returns_result_type(self):
        res = support_exact(Contamination(0.2), np.array([0.5, 0.5]), np.array([0.0, 1.0]))
        assert isinstance(res, SupportResult)
        assert res.value == pytest.approx(0.4 + 0.0, abs=1e-12)


class TestWorstRows:
    def test_contamination_definitional(self):
        p = np.array([0.25, 0.75])
        v = np.array([3.0, -1.0])
        q = worst_case_row(Contamination(0.4), p, v)
        np.testing.assert_allclose(q, 0.6 * p + 0.4 * np.array([0.0, 1.0]), atol=1e-12)

    def test_tv_greedy_transfer(self):
        q = worst_case_row(TotalVariation(0.2), np.array([0.5, 0.5]), np.array([0.0, 1.0]))
        np.testing.assert_allclose(q, [0.7, 0.3], atol=1e-12)

    def test_zero_radius_returns_nominal(self):
        rng = np.random.default_rng(7)
        p, v = random_instance(rng)
        for spec in (Contamination(0.0), TotalVariation(0.0), ChiSquare(0.0), KLDivergence(0.0), Wasserstein(0.0)):
            np.testing.assert_allclose(worst_case_row(spec, p, v), p, atol=1e-12)

    def test_feasible_and_attains_value(self):
        rng = np.random.default_rng(8)
        exact_tol = {"Contamination": 1e-8, "TotalVariation": 1e-8}
        for trial in range(40):
            p, v = random_instance(rng, n=5)
            for spec in families(DELTAS[trial % 3]):
                name = type(spec).__name__
                q = worst_case_row(spec, p, v)
                assert q.min() >= -1e-12 and q.sum() == pytest.approx(1.0, abs=1e-8)
                value = float(q @ v)
                target = spec.support(p, v)
                # attains the support value (diagnostic 1e-4 for the divergence balls)
                tol = exact_tol.get(name, 1e-4 * max(1.0, np.abs(v).max()))
                assert value >= target - 1e-8
                assert value - target <= tol
                if isinstance(spec, Contamination):
                    assert np.all(q >= (1 - spec.delta) * p - 1e-9)
                elif isinstance(spec, TotalVariation):
                    assert 0.5 * np.abs(q - p).sum() <= spec.delta + 1e-9
                elif isinstance(spec, (ChiSquare, KLDivergence)):
                    assert spec.divergence(q, p) <= spec.delta + 1e-8
                else:
                    assert spec.distance_pow(p, q) <= spec.delta**spec.order + 1e-6


class TestGridOracle:
    def test_zero_radius_only_feasible_point(self):
        # any grid containing p itself: minimum is p.v
        p = np.array([0.25, 0.5, 0.25])
        v = np.array([1.0, -2.0, 0.5])
        for spec in (TotalVariation(0.0), ChiSquare(0.0), KLDivergence(0.0), Wasserstein(0.0)):
            assert support_oracle_grid(spec, p, v, 4) == pytest.approx(float(p @ v), abs=1e-12)

    def test_contamination_matches_closed_form_within_spacing(self):
        rng = np.random.default_rng(9)
        for resolution in (50, 100, 200):
            p = rng.dirichlet(np.ones(2))
            v = rng.normal(0, 1, size=2)
            spec = Contamination(0.4)
            gap = support_oracle_grid(spec, p, v, resolution) - spec.support(p, v)
            assert 0.0 <= gap <= 2 * np.abs(v).max() / resolution + 1e-12

    def test_converges_from_above(self):
        rng = np.random.default_rng(10)
        p, v = random_instance(rng)
        for spec in families(0.3):
            coarse = support_oracle_grid(spec, p, v, 25)
            fine = support_oracle_grid(spec, p, v, 100)
            exact = spec.support(p, v)
            assert coarse >= fine - 1e-9 >= exact - 1e-7

    def test_rejects_large_state_spaces(self):
        with pytest.raises(ValueError):
            support_oracle_grid(TotalVariation(0.1), np.ones(5) / 5, np.zeros(5), 10)

    def test_general_metric_wasserstein(self):
        metric = np.array([[0.0, 2.0, 1.0], [2.0, 0.0, 5.0], [1.0, 5.0, 0.0]])
        spec = Wasserstein(0.5, order=1.0, metric=metric)
        p = np.array([0.2, 0.5, 0.3])
        v = np.array([0.0, 1.0, -1.0])
        exact = spec.support(p, v)
        oracle = support_oracle_grid(spec, p, v, 30)
        assert oracle >= exact - 1e-7
        assert oracle - exact <= 0.2 * np.abs(v).max()


class TestJsonRoundTrip:
    def test_all_families(self):
        metric = line_metric(3)
        specs = [
            Contamination(0.25),
            TotalVariation(0.5),
            ChiSquare(0.7),
            KLDivergence(0.9),
            Wasserstein(0.4, order=2.0, metric=metric),
        ]
        for spec in specs:
            doc = spec.to_json_dict()
            back = uncertainty_from_json(doc)
            assert type(back) is type(spec)
            assert back.delta == spec.delta
        assert uncertainty_from_json({"kind": "wasserstein", "delta": 0.4, "l": 2.0}).order == 2.0
        with pytest.raises(ValueError):
            uncertainty_from_json({"kind": "nope", "delta": 0.1})
