"""Tests for the sampled support / Bellman-operator estimators."""

import numpy as np
import pytest

from rarl.estimators import (
    KernelSampler,
    MlmcConfig,
    default_psi,
    estimate_H,
    estimate_T,
    estimate_support_contamination,
    mlmc_estimate_batch,
    mlmc_estimate_support,
    sigma_hat_for_pairs,
)
from rarl.environments import garnet
from rarl.mdp import Policy, TabularMDP, induced_chain
from rarl.uncertainty import ChiSquare, Contamination, KLDivergence, TotalVariation, Wasserstein

P3 = np.array([0.2, 0.3, 0.5])
V3 = np.array([0.0, 1.0, 2.0])


def row_sampler(p):
    p = np.asarray(p, dtype=float)
    n = len(p)
    kernel = np.zeros((n, 1, n))
    kernel[:, 0, :] = p
    return KernelSampler(kernel)


class TestContaminationEstimator:
    def test_full_radius_returns_min(self):
        spec = Contamination(0.999)
        v = np.array([3.0, -1.0, 2.0])
        got = estimate_support_contamination(0, spec, v)
        assert got == pytest.approx(0.001 * 3.0 + 0.999 * (-1.0), abs=1e-12)

    def test_zero_radius_returns_sampled_value(self):
        assert estimate_support_contamination(2, Contamination(0.0), V3) == 2.0

    def test_monte_carlo_mean_matches_closed_form(self):
        spec = Contamination(0.5)
        p = np.array([0.5, 0.5])
        v = np.array([0.0, 2.0])
        src = row_sampler(p)
        rng = np.random.default_rng(0)
        draws = src.draw(0, 0, 100_000, rng)
        vals = (1 - spec.delta) * v[draws] + spec.delta * v.min()
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - spec.support(p, v)) <= 3 * se


class TestMlmcConfig:
    def test_psi_domain(self):
        with pytest.raises(ValueError):
            MlmcConfig(psi=0.0)
        with pytest.raises(ValueError):
            MlmcConfig(psi=1.0)

    def test_defaults_inside_proved_ranges(self):
        assert default_psi(ChiSquare(0.2)) == pytest.approx(0.2)
        assert default_psi(ChiSquare(0.2)) < 1 - np.sqrt(2) / 2
        for spec in (TotalVariation(0.2), KLDivergence(0.2), Wasserstein(0.2)):
            assert default_psi(spec) == pytest.approx(0.25)
            assert default_psi(spec) < 0.5

    def test_level_probability_arithmetic(self):
        # p_2 = 0.49 * 0.51^2
        psi = 0.49
        assert psi * (1 - psi) ** 2 == pytest.approx(0.127449, abs=1e-9)


class TestMlmcEstimate:
    def test_point_mass_row_zero_correction(self):
        # all draws land on one state: the four empirical rows coincide
        src = row_sampler([0.0, 1.0, 0.0])
        spec = TotalVariation(0.2)
        rng = np.random.default_rng(1)
        for _ in range(10):
            out = mlmc_estimate_support(src, spec, 0, 0, V3, MlmcConfig(0.25), rng)
            point = np.array([0.0, 1.0, 0.0])
            assert out.value == pytest.approx(spec.support(point, V3), abs=1e-12)
            assert out.samples_used == 2 ** (out.level + 1)

    def test_contamination_rejected(self):
        src = row_sampler(P3)
        with pytest.raises(ValueError):
            mlmc_estimate_support(src, Contamination(0.1), 0, 0, V3, MlmcConfig(0.25), np.random.default_rng(0))

    def test_level_cap_frequency(self):
        src = row_sampler(P3)
        cfg = MlmcConfig(psi=0.25, max_level=3)
        rng = np.random.default_rng(2)
        _, levels, capped = mlmc_estimate_batch(src, TotalVariation(0.2), 0, 0, V3, cfg, rng, 40_000)
        assert levels.max() <= 3
        expected = (1 - 0.25) ** 4  # P(raw level > 3) = P(geometric N >= 4)
        se = np.sqrt(expected * (1 - expected) / 40_000)
        assert abs(capped.mean() - expected) <= 4 * se

    @pytest.mark.parametrize(
        "spec",
        [TotalVariation(0.2), ChiSquare(0.2), KLDivergence(0.2), Wasserstein(0.2)],
        ids=["tv", "chi2", "kl", "wasserstein"],
    )
    def test_unbiased_smoke(self, spec):
        # statistical smoke test at M = 30k; the acceptance suite runs 2e5
        src = row_sampler(P3)
        rng = np.random.default_rng(3)
        cfg = MlmcConfig(psi=default_psi(spec))
        vals, _, _ = mlmc_estimate_batch(src, spec, 0, 0, V3, cfg, rng, 30_000)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - spec.support(P3, V3)) <= 4 * se

    def test_batch_law_matches_scalar_path(self):
        # same seed stream, one estimate: identical value and level
        spec = TotalVariation(0.3)
        src = row_sampler(P3)
        a = mlmc_estimate_support(src, spec, 0, 0, V3, MlmcConfig(0.25), np.random.default_rng(7))
        vals, levels, _ = mlmc_estimate_batch(src, spec, 0, 0, V3, MlmcConfig(0.25), np.random.default_rng(7), 1)
        assert vals[0] == pytest.approx(a.value, abs=1e-12)
        assert levels[0] == a.level

    def test_coupling_even_odd_exchangeable(self):
        # means of sigma(even) and sigma(odd) agree over repetitions
        spec = TotalVariation(0.2)
        src = row_sampler(P3)
        rng = np.random.default_rng(4)
        reps = 20_000
        even_vals = np.empty(reps)
        odd_vals = np.empty(reps)
        for i in range(reps):
            half = 4
            first = int(src.draw(0, 0, 1, rng)[0])
            odd = np.zeros(3)
            odd[first] = 1.0
            odd += src.draw_counts(0, 0, half - 1, rng)
            even = src.draw_counts(0, 0, half, rng).astype(float)
            even_vals[i] = spec.support(even / half, V3)
            odd_vals[i] = spec.support(odd / half, V3)
        gap = abs(even_vals.mean() - odd_vals.mean())
        se = np.sqrt(even_vals.var(ddof=1) / reps + odd_vals.var(ddof=1) / reps)
        assert gap <= 3 * se

    def test_variance_proxy_bounded_in_value_scale(self):
        # Var(sigma_hat) / (1 + ||V||^2) stays within a 10x band over ||V|| sweeps
        spec = TotalVariation(0.2)
        src = row_sampler(P3)
        rng = np.random.default_rng(5)
        buckets = []
        for scale in (1.0, 10.0, 100.0):
            vals, _, _ = mlmc_estimate_batch(src, spec, 0, 0, scale * V3 / 2.0, MlmcConfig(0.25), rng, 30_000)
            buckets.append(vals.var(ddof=1) / (1.0 + (scale / 2.0 * V3.max()) ** 2))
        assert max(buckets) <= 10 * min(buckets)


class TestOperatorEstimators:
    def test_zero_probability_actions_draw_nothing(self):
        m = garnet(3, 2, seed=11)
        src = KernelSampler.from_mdp(m)
        policy = Policy.deterministic([0, 0, 0], 2)
        rng = np.random.default_rng(6)
        _, cost = estimate_T(src, m, policy, Contamination(0.2), np.zeros(3), None, rng)
        assert cost == 3  # one sample per state, none for the unused action

    def test_delta_zero_reduces_to_td_target(self):
        m = garnet(4, 2, seed=12)
        src = KernelSampler.from_mdp(m)
        policy = Policy.deterministic([1, 0, 1, 0], 2)
        v = np.random.default_rng(13).normal(0, 1, 4)
        rng_a = np.random.default_rng(14)
        t_hat, _ = estimate_T(src, m, policy, Contamination(0.0), v, None, rng_a)
        rng_b = np.random.default_rng(14)
        pairs = [(s, int(policy.actions()[s])) for s in range(4)]
        nxt = src.draw_one_each(
            np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]), rng_b
        )
        expected = np.array([m.reward[s, a] + v[nxt[i]] for i, (s, a) in enumerate(pairs)])
        np.testing.assert_allclose(t_hat, expected, atol=1e-12)

    def test_estimate_T_unbiased(self):
        m = garnet(2, 2, seed=15)
        src = KernelSampler.from_mdp(m)
        policy = Policy.uniform(2, 2)
        v = np.array([0.5, -1.5])
        spec = Contamination(0.3)
        rng = np.random.default_rng(16)
        reps = 40_000
        acc = np.zeros(2)
        for _ in range(reps):
            t_hat, _ = estimate_T(src, m, policy, spec, v, None, rng)
            acc += t_hat
        mean = acc / reps
        _, r_pi = induced_chain(m, policy)
        exact = np.array(
            [
                sum(
                    policy.probs[s, a] * (m.reward[s, a] + spec.support(m.kernel[s, a], v))
                    for a in range(2)
                )
                for s in range(2)
            ]
        )
        assert np.abs(mean - exact).max() < 0.02

    def test_constant_q_zero_variance(self):
        m = garnet(3, 2, seed=17)
        src = KernelSampler.from_mdp(m)
        q = np.full((3, 2), 4.0)
        rng = np.random.default_rng(18)
        spec = TotalVariation(0.3)
        vals = [estimate_H(src, m, spec, q, 1, 0, MlmcConfig(0.25), rng) for _ in range(20)]
        assert np.ptp(vals) == pytest.approx(0.0, abs=1e-12)
        assert vals[0] == pytest.approx(m.reward[1, 0] + 4.0, abs=1e-12)

    def test_single_action_H_equals_T(self):
        m = garnet(3, 1, seed=19)
        src = KernelSampler.from_mdp(m)
        policy = Policy.deterministic([0, 0, 0], 1)
        v = np.array([1.0, 0.0, -1.0])
        spec = TotalVariation(0.2)
        cfg = MlmcConfig(0.25)
        rng_a = np.random.default_rng(20)
        t_hat, _ = estimate_T(src, m, policy, spec, v, cfg, rng_a)
        rng_b = np.random.default_rng(20)
        sigma, _ = sigma_hat_for_pairs(src, spec, [(s, 0) for s in range(3)], v, cfg, rng_b)
        np.testing.assert_allclose(t_hat, m.reward[:, 0] + sigma, atol=1e-12)

    def test_estimate_H_unbiased_three_state(self):
        m = garnet(3, 2, seed=21)
        src = KernelSampler.from_mdp(m)
        q = np.random.default_rng(22).normal(0, 1, (3, 2))
        spec = TotalVariation(0.2)
        exact = m.reward[0, 1] + spec.support(m.kernel[0, 1], q.max(axis=1))
        rng = np.random.default_rng(23)
        vals, _, _ = mlmc_estimate_batch(src, spec, 0, 1, q.max(axis=1), MlmcConfig(0.25), rng, 30_000)
        vals = vals + m.reward[0, 1]
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - exact) <= 4 * se


class TestSampleSource:
    def test_kernel_sampler_empirical_law(self):
        src = row_sampler(P3)
        rng = np.random.default_rng(24)
        draws = src.draw(0, 0, 200_000, rng)
        freq = np.bincount(draws, minlength=3) / len(draws)
        np.testing.assert_allclose(freq, P3, atol=0.005)
        counts = src.draw_counts(0, 0, 200_000, rng)
        np.testing.assert_allclose(counts / counts.sum(), P3, atol=0.005)

    def test_generic_fallback_paths(self):
        class ListSource(KernelSampler):
            # force the generic per-pair fallbacks from the base class
            def draw_one_each(self, s_idx, a_idx, rng):
                return super(KernelSampler, self).draw_one_each(s_idx, a_idx, rng)

            def draw_counts_each(self, s_idx, a_idx, count, rng):
                return super(KernelSampler, self).draw_counts_each(s_idx, a_idx, count, rng)

        src = ListSource(row_sampler(P3).kernel)
        rng = np.random.default_rng(25)
        ones = src.draw_one_each(np.array([0, 1]), np.array([0, 0]), rng)
        assert ones.shape == (2,)
        counts = src.draw_counts_each(np.array([0, 1]), np.array([0, 0]), 8, rng)
        assert counts.shape == (2, 3) and counts.sum() == 16

    def test_deterministic_given_seed(self):
        src = row_sampler(P3)
        a = src.draw(0, 0, 100, np.random.default_rng(42))
        b = src.draw(0, 0, 100, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)
