"""Unbiased sampled estimators of the support function and Bellman operators.

Only next-state samples from the nominal kernel are available. The
contamination family is linear in the nominal row, so a single sample gives an
unbiased support estimate. The other families are non-linear; plugging in an
empirical row is biased, so they use a randomized-level multi-level
Monte-Carlo telescope: draw a geometric level N, draw 2^(N+1) next states,
form the even-index / odd-index / pooled / first-sample empirical rows, and
combine their exact support values as

    sigma_hat = sigma(first) + [sigma(all) - (sigma(even) + sigma(odd)) / 2] / p_N,

with p_N = psi (1 - psi)^N. Empirical rows are represented by multinomial
counts, which follow the same law as tallying individual draws, so the cost of
a level-N estimate is O(S) rather than O(2^N); ``sigma_hat_for_pairs`` batches
many independent estimates by grouping them per level.

Estimators are pure given an RNG; callers own their seeded streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import Policy, TabularMDP
from .uncertainty import ChiSquare, Contamination, UncertaintySet


class SampleSource:
    """Generative access to the nominal kernel: i.i.d. next states per (s, a)."""

    n_states: int

    def draw(self, s: int, a: int, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def draw_counts(self, s: int, a: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """State-occurrence counts of ``count`` i.i.d. draws."""
        if count == 0:
            return np.zeros(self.n_states, dtype=np.int64)
        return np.bincount(self.draw(s, a, count, rng), minlength=self.n_states)

    def draw_one_each(self, s_idx: np.ndarray, a_idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One independent next state per (s_idx[i], a_idx[i])."""
        return np.array(
            [int(self.draw(int(s), int(a), 1, rng)[0]) for s, a in zip(s_idx, a_idx)], dtype=np.int64
        )

    def draw_counts_each(
        self, s_idx: np.ndarray, a_idx: np.ndarray, count: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Per-pair occurrence counts of ``count`` i.i.d. draws, shape (len(s_idx), S)."""
        if count == 0:
            return np.zeros((len(s_idx), self.n_states), dtype=np.int64)
        return np.stack([self.draw_counts(int(s), int(a), count, rng) for s, a in zip(s_idx, a_idx)])


class KernelSampler(SampleSource):
    """SampleSource backed by an explicit nominal kernel, with vectorized paths."""

    def __init__(self, kernel: np.ndarray):
        kernel = np.asarray(kernel, dtype=float)
        if kernel.ndim != 3 or kernel.shape[2] != kernel.shape[0]:
            raise ValueError(f"expected kernel of shape (S, A, S), got {kernel.shape}")
        self.kernel = kernel
        self.n_states = kernel.shape[0]
        self._cdf = np.cumsum(kernel, axis=2)

    @staticmethod
    def from_mdp(mdp: TabularMDP) -> "KernelSampler":
        return KernelSampler(mdp.kernel)

    def draw(self, s, a, count, rng):
        u = rng.random(count)
        idx = (self._cdf[s, a][None, :] < u[:, None]).sum(axis=1)
        return np.minimum(idx, self.n_states - 1)

    def draw_counts(self, s, a, count, rng):
        if count == 0:
            return np.zeros(self.n_states, dtype=np.int64)
        return rng.multinomial(count, self.kernel[s, a]).astype(np.int64)

    def draw_one_each(self, s_idx, a_idx, rng):
        u = rng.random(len(s_idx))
        idx = (self._cdf[s_idx, a_idx] < u[:, None]).sum(axis=1)
        return np.minimum(idx, self.n_states - 1)

    def draw_counts_each(self, s_idx, a_idx, count, rng):
        if count == 0:
            return np.zeros((len(s_idx), self.n_states), dtype=np.int64)
        return rng.multinomial(count, self.kernel[s_idx, a_idx]).astype(np.int64)


@dataclass(frozen=True)
class MlmcConfig:
    """Geometric-level parameter and a practical cap on the level.

    The proven ranges are psi in (0, 0.5) for TV / KL / Wasserstein and
    psi in (0, 1 - sqrt(2)/2) for chi-square. The cap bounds the worst-case
    sample cost at 2^(max_level + 1); truncation happens with probability
    (1 - psi)^(max_level + 1) per estimate and is recorded in the outcome.
    """

    psi: float
    max_level: int = 20

    def __post_init__(self):
        if not 0.0 < self.psi < 1.0:
            raise ValueError(f"psi must be in (0, 1), got {self.psi}")
        if self.max_level < 0:
            raise ValueError(f"max_level must be nonnegative, got {self.max_level}")


def default_psi(spec: UncertaintySet) -> float:
    """Module defaults inside the proven ranges: 0.2 for chi-square, else 0.25."""
    return 0.2 if isinstance(spec, ChiSquare) else 0.25


def default_mlmc_config(spec: UncertaintySet, max_level: int = 20) -> MlmcConfig:
    return MlmcConfig(psi=default_psi(spec), max_level=max_level)


@dataclass
class EstimateOutcome:
    value: float
    level: int
    samples_used: int
    capped: bool = False


def estimate_support_contamination(next_state: int, spec: Contamination, v: np.ndarray) -> float:
    """Single-sample unbiased estimate (1 - delta) v(s') + delta min v."""
    v = np.asarray(v, dtype=float)
    return float((1.0 - spec.delta) * v[next_state] + spec.delta * v.min())


def mlmc_estimate_support(
    source: SampleSource,
    spec: UncertaintySet,
    s: int,
    a: int,
    v: np.ndarray,
    cfg: MlmcConfig,
    rng: np.random.Generator,
) -> EstimateOutcome:
    """One multi-level Monte-Carlo support estimate for a non-linear set."""
    if isinstance(spec, Contamination):
        raise ValueError("contamination uses the single-sample estimator")
    v = np.asarray(v, dtype=float)
    raw_level = int(rng.geometric(cfg.psi)) - 1
    capped = raw_level > cfg.max_level
    level = min(raw_level, cfg.max_level)
    half = 2**level
    first = int(source.draw(s, a, 1, rng)[0])
    one_hot = np.zeros(source.n_states)
    one_hot[first] = 1.0
    odd = one_hot.copy()
    if half > 1:
        odd += source.draw_counts(s, a, half - 1, rng)
    even = source.draw_counts(s, a, half, rng).astype(float)
    rows = np.stack([one_hot, (odd + even) / (2 * half), even / half, odd / half])
    sig_first, sig_all, sig_even, sig_odd = spec.support_batch(rows, v)
    p_n = cfg.psi * (1.0 - cfg.psi) ** level
    value = sig_first + (sig_all - 0.5 * (sig_even + sig_odd)) / p_n
    return EstimateOutcome(float(value), level, 2 ** (level + 1), capped)


def mlmc_estimate_batch(
    source: SampleSource,
    spec: UncertaintySet,
    s: int,
    a: int,
    v: np.ndarray,
    cfg: MlmcConfig,
    rng: np.random.Generator,
    n_estimates: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Many independent MLMC estimates of one (s, a); returns (values, levels, capped)."""
    s_idx = np.full(n_estimates, s, dtype=np.int64)
    a_idx = np.full(n_estimates, a, dtype=np.int64)
    values, levels, capped = _mlmc_sigma_many(source, spec, s_idx, a_idx, v, cfg, rng)
    return values, levels, capped


def _mlmc_sigma_many(source, spec, s_idx, a_idx, v, cfg, rng):
    """Vectorized MLMC estimates, one per index pair.

    Next-state counts are drawn per level group (one broadcast multinomial
    each), but all 4n empirical rows go through a single support_batch call;
    the 1-D dual searches are row-wise independent, so fusing levels does not
    change any value.
    """
    n = len(s_idx)
    n_states = source.n_states
    raw = rng.geometric(cfg.psi, size=n).astype(np.int64) - 1
    levels = np.minimum(raw, cfg.max_level)
    capped = raw > cfg.max_level
    firsts = source.draw_one_each(s_idx, a_idx, rng)
    one_hot = np.zeros((n, n_states))
    one_hot[np.arange(n), firsts] = 1.0
    pooled = np.empty((n, n_states))
    even_row = np.empty((n, n_states))
    odd_row = np.empty((n, n_states))
    for level in np.unique(levels):
        idx = np.flatnonzero(levels == level)
        half = int(2**level)
        odd = one_hot[idx].copy()
        if half > 1:
            odd += source.draw_counts_each(s_idx[idx], a_idx[idx], half - 1, rng)
        even = source.draw_counts_each(s_idx[idx], a_idx[idx], half, rng).astype(float)
        pooled[idx] = (odd + even) / (2 * half)
        even_row[idx] = even / half
        odd_row[idx] = odd / half
    sig = spec.support_batch(np.concatenate([one_hot, pooled, even_row, odd_row]), v)
    p_n = cfg.psi * (1.0 - cfg.psi) ** levels
    sigma = sig[:n] + (sig[n : 2 * n] - 0.5 * (sig[2 * n : 3 * n] + sig[3 * n :])) / p_n
    return sigma, levels, capped


def sigma_hat_for_pairs(
    source: SampleSource,
    spec: UncertaintySet,
    pairs: Sequence[tuple[int, int]],
    v: np.ndarray,
    cfg: MlmcConfig | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Independent support estimates for each pair; returns (values, sample costs)."""
    v = np.asarray(v, dtype=float)
    s_idx = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
    a_idx = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
    if isinstance(spec, Contamination):
        nxt = source.draw_one_each(s_idx, a_idx, rng)
        values = (1.0 - spec.delta) * v[nxt] + spec.delta * v.min()
        return values, np.ones(len(pairs), dtype=np.int64)
    if cfg is None:
        cfg = default_mlmc_config(spec)
    sigma, levels, _ = _mlmc_sigma_many(source, spec, s_idx, a_idx, v, cfg, rng)
    return sigma, (2 ** (levels + 1)).astype(np.int64)


def estimate_T(
    source: SampleSource,
    mdp: TabularMDP,
    policy: Policy,
    spec: UncertaintySet,
    v: np.ndarray,
    cfg: MlmcConfig | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """Sampled worst-case evaluation operator: T_hat v(s) = sum_a pi(a|s)(r + sigma_hat).

    Actions with pi(a|s) = 0 draw nothing; every contributing (s, a) gets a
    fresh independent estimate.
    """
    v = np.asarray(v, dtype=float)
    pairs = [(s, a) for s in range(mdp.n_states) for a in range(mdp.n_actions) if policy.probs[s, a] > 0.0]
    sigma, costs = sigma_hat_for_pairs(source, spec, pairs, v, cfg, rng)
    t_hat = np.zeros(mdp.n_states)
    for (s, a), sig in zip(pairs, sigma):
        t_hat[s] += policy.probs[s, a] * (mdp.reward[s, a] + sig)
    return t_hat, int(costs.sum())


def estimate_H(
    source: SampleSource,
    mdp: TabularMDP,
    spec: UncertaintySet,
    q: np.ndarray,
    s: int,
    a: int,
    cfg: MlmcConfig | None,
    rng: np.random.Generator,
) -> float:
    """Sampled optimal-control operator H_hat q(s,a) = r(s,a) + sigma_hat(max_a q)."""
    q = np.asarray(q, dtype=float)
    v_q = q.max(axis=1)
    sigma, _ = sigma_hat_for_pairs(source, spec, [(s, a)], v_q, cfg, rng)
    return float(mdp.reward[s, a] + sigma[0])
