"""Exact tabular MDP machinery.

This module provides:
- ``TabularMDP`` and ``Policy`` containers with validation and JSON round-trips.
- Induced-chain construction (state transition matrix and state reward vector).
- Stationary distributions, unichain detection, and exact gain / relative value
  ("bias") computation for a fixed policy via a dense linear solve.
- Relative-value-iteration offset functionals (reference state, mean).
- The span seminorm and the worst-case Bellman residual check used to certify
  solutions of the worst-case average-reward fixed-point equation.

All containers are immutable after construction; the operations are pure
functions and safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

ROW_SUM_TOL = 1e-9
SUPPORT_EPS = 1e-12


class MultichainError(ValueError):
    """The induced chain has more than one recurrent class."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with kernel shape (S, A, S) and reward table shape (S, A).

    Row ``kernel[s, a]`` is the next-state distribution after taking action
    ``a`` in state ``s``. Rewards are finite reals; no range is imposed.
    """

    n_states: int
    n_actions: int
    kernel: np.ndarray
    reward: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kernel", np.ascontiguousarray(self.kernel, dtype=float))
        object.__setattr__(self, "reward", np.ascontiguousarray(self.reward, dtype=float))
        self.kernel.setflags(write=False)
        self.reward.setflags(write=False)

    def with_kernel(self, kernel: np.ndarray) -> "TabularMDP":
        """Copy of this MDP with a replacement transition kernel."""
        return TabularMDP(self.n_states, self.n_actions, np.array(kernel, dtype=float), self.reward)

    def to_json(self) -> str:
        doc = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            # one row per (s, a), s-major
            "kernel": self.kernel.reshape(self.n_states * self.n_actions, self.n_states).tolist(),
            "reward": self.reward.tolist(),
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "TabularMDP":
        doc = json.loads(text)
        n_s, n_a = int(doc["n_states"]), int(doc["n_actions"])
        kernel = np.asarray(doc["kernel"], dtype=float).reshape(n_s, n_a, n_s)
        reward = np.asarray(doc["reward"], dtype=float).reshape(n_s, n_a)
        return TabularMDP(n_s, n_a, kernel, reward)


@dataclass(frozen=True)
class Policy:
    """Stationary policy; ``probs[s, a]`` is the probability of action a in s."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.ascontiguousarray(self.probs, dtype=float))
        self.probs.setflags(write=False)

    @staticmethod
    def uniform(n_states: int, n_actions: int) -> "Policy":
        return Policy(np.full((n_states, n_actions), 1.0 / n_actions))

    @staticmethod
    def deterministic(actions: Sequence[int], n_actions: int) -> "Policy":
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), list(actions)] = 1.0
        return Policy(probs)

    def actions(self) -> np.ndarray:
        """Greedy action per state (only meaningful for deterministic policies)."""
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True)
class GainBias:
    """Long-run average reward and the relative value function solving
    v = r_pi - gain*e + P_pi v under the requested normalization."""

    gain: float
    bias: np.ndarray


class OffsetFn:
    """Normalizing functional used by relative value iteration.

    Satisfies f(e) = 1, f(x + c e) = f(x) + c and f(c x) = c f(x); both
    variants are 1-Lipschitz in the sup norm. Arrays are read through
    ``ravel()`` so the same functional applies to value vectors and Q tables.
    """

    def __init__(self, kind: str, state: int = 0):
        if kind not in ("mean", "state"):
            raise ValueError(f"unknown offset kind {kind!r}")
        self.kind = kind
        self.state = int(state)

    @staticmethod
    def mean() -> "OffsetFn":
        return OffsetFn("mean")

    @staticmethod
    def reference_state(state: int) -> "OffsetFn":
        return OffsetFn("state", state)

    def __call__(self, x: np.ndarray) -> float:
        flat = np.asarray(x, dtype=float).ravel()
        if self.kind == "mean":
            return float(flat.mean())
        return float(flat[self.state])

    def __repr__(self):
        return f"OffsetFn({self.kind!r}, state={self.state})" if self.kind == "state" else "OffsetFn('mean')"


def validate(mdp: TabularMDP) -> str | None:
    """Return None if the MDP is well formed, else the first violation found."""
    if mdp.n_states < 1 or mdp.n_actions < 1:
        return f"non-positive dimensions (n_states={mdp.n_states}, n_actions={mdp.n_actions})"
    if mdp.kernel.shape != (mdp.n_states, mdp.n_actions, mdp.n_states):
        return f"kernel shape {mdp.kernel.shape} != {(mdp.n_states, mdp.n_actions, mdp.n_states)}"
    if mdp.reward.shape != (mdp.n_states, mdp.n_actions):
        return f"reward shape {mdp.reward.shape} != {(mdp.n_states, mdp.n_actions)}"
    if not np.all(np.isfinite(mdp.reward)):
        s, a = np.argwhere(~np.isfinite(mdp.reward))[0]
        return f"non-finite reward at (s={s},a={a})"
    if not np.all(np.isfinite(mdp.kernel)):
        s, a, _ = np.argwhere(~np.isfinite(mdp.kernel))[0]
        return f"non-finite kernel entry at (s={s},a={a})"
    neg = np.argwhere(mdp.kernel < 0)
    if neg.size:
        s, a, j = neg[0]
        return f"negative entry {mdp.kernel[s, a, j]:.6g} at (s={s},a={a},s'={j})"
    sums = mdp.kernel.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        s, a = bad[0]
        return f"row sum {sums[s, a]:.6g} at (s={s},a={a})"
    return None


def validate_policy(policy: Policy, mdp: TabularMDP | None = None) -> str | None:
    """Return None if the policy rows are simplex rows (of matching shape)."""
    probs = policy.probs
    if mdp is not None and probs.shape != (mdp.n_states, mdp.n_actions):
        return f"policy shape {probs.shape} != {(mdp.n_states, mdp.n_actions)}"
    if np.any(probs < 0):
        s, a = np.argwhere(probs < 0)[0]
        return f"negative probability at (s={s},a={a})"
    sums = probs.sum(axis=1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        return f"row sum {sums[bad[0, 0]]:.6g} at s={bad[0, 0]}"
    return None


def induced_chain(mdp: TabularMDP, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """State transition matrix and state reward vector of the chain under policy.

    P_pi[s] = sum_a pi(a|s) kernel[s, a]; r_pi[s] = sum_a pi(a|s) reward[s, a].
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"{(mdp.n_states, mdp.n_actions)}"
        )
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.kernel)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    return p_pi, r_pi


def stationary_distribution(p: np.ndarray, tol: float = 1e-12, max_iters: int = 10**6) -> np.ndarray:
    """Stationary distribution of a unichain transition matrix.

    Power iteration on the half-lazy chain (I + P)/2, which shares the
    stationary distribution but is aperiodic, so the iteration also converges
    on periodic chains. Raises ConvergenceError if the residual does not fall
    below tol.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    lazy = 0.5 * (np.eye(n) + p)
    mu = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iters):
        nxt = mu @ lazy
        residual = float(np.abs(nxt - mu).sum())
        mu = nxt
        if residual < tol:
            break
    else:
        raise ConvergenceError("stationary distribution did not converge", residual)
    mu = np.maximum(mu, 0.0)
    return mu / mu.sum()


def is_unichain(p: np.ndarray, support_eps: float = SUPPORT_EPS) -> bool:
    """True iff the chain has exactly one closed recurrent class.

    Decided on the support graph (entries above support_eps): condense into
    strongly connected components and count components with no outgoing edge.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    graph = sp.csr_matrix(p > support_eps)
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    closed = np.ones(n_comp, dtype=bool)
    src, dst = (p > support_eps).nonzero()
    for i, j in zip(labels[src], labels[dst]):
        if i != j:
            closed[i] = False
    return int(closed.sum()) == 1


def gain_and_bias(
    mdp: TabularMDP,
    policy: Policy,
    normalization: OffsetFn | None = None,
    tol: float = 1e-9,
) -> GainBias:
    """Exact gain and relative value function of a policy on a unichain MDP.

    Solves the (S+1)-unknown linear system [v = r_pi - g e + P_pi v; f(v) = 0].
    With ``normalization=None`` the bias is pinned by mu . v = 0 (mu the
    stationary distribution), which is the unique relative value function in
    the cumulative-deviation sense; an OffsetFn pins f(v) = 0 instead.
    """
    p_pi, r_pi = induced_chain(mdp, policy)
    if not is_unichain(p_pi):
        raise MultichainError("induced chain has more than one recurrent class")
    n = mdp.n_states
    a = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    a[:n, :n] = np.eye(n) - p_pi
    a[:n, n] = 1.0
    b[:n] = r_pi
    if normalization is None:
        a[n, :n] = stationary_distribution(p_pi)
    elif normalization.kind == "mean":
        a[n, :n] = 1.0 / n
    else:
        a[n, normalization.state] = 1.0
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular gain/bias system: {exc}") from exc
    gain, bias = float(sol[n]), sol[:n]
    residual = float(np.max(np.abs(bias - (r_pi - gain + p_pi @ bias))))
    if residual > max(tol, 1e-7 * (1.0 + np.abs(r_pi).max())):
        raise ConvergenceError("gain/bias solve left a large residual", residual)
    return GainBias(gain, bias)


def gain_vector(p: np.ndarray, r: np.ndarray, max_squarings: int = 80) -> np.ndarray:
    """Per-start-state long-run average reward, valid for multichain matrices.

    Computes the limiting (Cesaro) matrix of the chain by repeated squaring of
    the half-lazy transition matrix (same class structure and absorption
    probabilities, but aperiodic) and applies it to the reward vector. On a
    unichain this returns a constant vector equal to the gain.
    """
    p = np.asarray(p, dtype=float)
    lazy = 0.5 * (np.eye(p.shape[0]) + p)
    for _ in range(max_squarings):
        nxt = lazy @ lazy
        if np.abs(nxt - lazy).max() < 1e-14:
            lazy = nxt
            break
        lazy = nxt
    return lazy @ np.asarray(r, dtype=float)


def span(v: np.ndarray) -> float:
    """Span seminorm max(v) - min(v)."""
    v = np.asarray(v, dtype=float)
    return float(v.max() - v.min())


def robust_bellman_residual(
    mdp: TabularMDP,
    policy: Policy,
    uset,
    gain: float,
    v: np.ndarray,
) -> np.ndarray:
    """Residual of the worst-case average-reward fixed-point equation.

    residual[s] = sum_a pi(a|s) (r(s,a) - gain + sigma(s,a,v)) - v(s), where
    sigma is the uncertainty set's support value at the nominal row. ``uset``
    must provide ``support_for(s, a, nominal_row, v)`` (see
    ``rarl.uncertainty`` and ``rarl.planners.FiniteKernelSet``).
    """
    v = np.asarray(v, dtype=float)
    n_s, n_a = mdp.n_states, mdp.n_actions
    rhs = np.zeros(n_s)
    for s in range(n_s):
        acc = 0.0
        for a in range(n_a):
            w = policy.probs[s, a]
            if w == 0.0:
                continue
            sigma = uset.support_for(s, a, mdp.kernel[s, a], v)
            acc += w * (mdp.reward[s, a] - gain + sigma)
        rhs[s] = acc
    return rhs - v
