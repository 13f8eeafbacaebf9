"""Support functions sigma(p, v) = min q.v over five ambiguity-set families.

Each family is an (s,a)-rectangular ball of probability rows around a nominal
row p: contamination mixtures, total-variation, chi-square and KL divergence
balls, and Wasserstein balls over a state metric. The module provides:

- Exact (closed-form or 1-D dual) evaluation, scalar and batched over rows.
- Dual variables and worst-case rows recovered from optimality conditions
  (exact for contamination/TV, diagnostic quality for the divergence balls,
  transport LP for Wasserstein).
- ``support_oracle_grid``: an independent brute-force oracle that minimizes
  q.v over all simplex grid points satisfying the set constraint.

All solvers are pure functions of immutable inputs. Batched paths and scalar
paths share one implementation, so repeated evaluation is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import linprog

SIMPLEX_TOL = 1e-9
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SEARCH_TOL = 1e-10
SEARCH_ITERS = 200


@dataclass
class SupportResult:
    """Value of the inner minimization plus optional certificates.

    ``dual`` is the family's dual variable (vector mu for TV / chi-square,
    scalar alpha for KL, scalar lambda for Wasserstein); ``worst_row`` is a
    minimizing row when requested.
    """

    value: float
    dual: Any = None
    worst_row: np.ndarray | None = None


def _check_simplex(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"expected a probability row, got shape {p.shape}")
    if np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError(f"not a probability row (sum={p.sum():.6g}, min={p.min():.6g})")
    return np.maximum(p, 0.0)


def _as_batch(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[None, :]
    return rows


class UncertaintySet:
    """Shared interface: ``support``, ``support_batch``, ``worst_row``.

    ``support_for(s, a, row, v)`` ignores the indices; it exists so that
    per-(s,a) set collections (finite kernel sets) can share call sites with
    the parametric families.
    """

    kind = "abstract"

    def support(self, p: np.ndarray, v: np.ndarray) -> float:
        p = _check_simplex(p)
        return float(self.support_batch(p[None, :], v)[0])

    def support_batch(self, rows: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support_with_dual(self, p: np.ndarray, v: np.ndarray) -> SupportResult:
        return SupportResult(self.support(p, v))

    def worst_row(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support_for(self, s: int, a: int, row: np.ndarray, v: np.ndarray) -> float:
        return self.support(row, v)

    def worst_row_for(self, s: int, a: int, row: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.worst_row(row, v)

    def to_json_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class Contamination(UncertaintySet):
    """Mixture ball {(1-delta) p + delta q : q in simplex}."""

    delta: float
    kind = "contamination"

    def __post_init__(self):
        # delta = 0 is the singleton {p}; used by the non-robust baselines.
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"contamination radius must be in [0, 1), got {self.delta}")

    def support_batch(self, rows, v):
        rows = _as_batch(rows)
        v = np.asarray(v, dtype=float)
        return (1.0 - self.delta) * rows @ v + self.delta * v.min()

    def worst_row(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        q = (1.0 - self.delta) * p
        q[int(np.argmin(v))] += self.delta
        return q

    def to_json_dict(self):
        return {"kind": self.kind, "delta": self.delta}


@dataclass
class TotalVariation(UncertaintySet):
    """Ball {q : 0.5 * ||q - p||_1 <= delta}.

    The primal is solved exactly by greedy mass transfer: up to delta total
    mass moves from the highest-value states onto an argmin-value state. The
    dual (threshold form of the span-penalized objective) is kept as a
    cross-check and as the source of the dual vector mu.
    """

    delta: float
    kind = "tv"

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.delta}")

    def support_batch(self, rows, v):
        rows = _as_batch(rows)
        v = np.asarray(v, dtype=float)
        order = np.argsort(-v, kind="stable")
        v_desc = v[order]
        avail = rows[:, order]
        moved = np.minimum(np.cumsum(avail, axis=1), self.delta)
        moved[:, 1:] = np.diff(moved, axis=1)
        return rows @ v - moved @ (v_desc - v.min())

    def dual_value(self, p, v):
        """Threshold scan of the span-penalized dual; equals the greedy primal."""
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        t = np.unique(v)
        vals = np.minimum(v[None, :], t[:, None]) @ p - self.delta * (t - v.min())
        return float(vals.max())

    def support_with_dual(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        t = np.unique(v)
        vals = np.minimum(v[None, :], t[:, None]) @ p - self.delta * (t - v.min())
        t_star = t[int(np.argmax(vals))]
        return SupportResult(self.support(p, v), dual=np.maximum(v - t_star, 0.0))

    def worst_row(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        q = p.copy()
        target = int(np.argmin(v))
        budget = self.delta
        for i in np.argsort(-v, kind="stable"):
            if budget <= 0.0 or v[i] <= v[target]:
                break
            step = min(q[i], budget)
            q[i] -= step
            q[target] += step
            budget -= step
        return q

    def to_json_dict(self):
        return {"kind": self.kind, "delta": self.delta}


@dataclass
class ChiSquare(UncertaintySet):
    """Ball {q : sum_i (q_i - p_i)^2 / p_i <= delta} (q_i = 0 wherever p_i = 0).

    The vector dual max_{mu >= 0} p.(v-mu) - sqrt(delta Var_p(v-mu)) reduces to
    a one-dimensional search: at the optimum v - mu = min(v, t) for a scalar
    threshold t, and the reduced objective is concave between consecutive
    entries of v. We evaluate every breakpoint and golden-search each segment.
    """

    delta: float
    kind = "chi2"

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.delta}")

    def _phi(self, rows, w):
        mean = rows @ w
        var = rows @ (w * w) - mean * mean
        return mean - np.sqrt(self.delta * np.maximum(var, 0.0))

    def support_batch(self, rows, v):
        rows = _as_batch(rows)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0 or v.max() == v.min():
            return rows @ v
        knots = np.unique(v)
        best = self._phi(rows, np.minimum(v, knots[0]))
        for t in knots[1:]:
            best = np.maximum(best, self._phi(rows, np.minimum(v, t)))
        n = rows.shape[0]
        scale = max(1.0, knots[-1] - knots[0])
        for k in range(len(knots) - 1):
            # the reduced dual is concave between consecutive knots
            lo = np.full(n, knots[k])
            hi = np.full(n, knots[k + 1])
            for _ in range(SEARCH_ITERS):
                if hi[0] - lo[0] < SEARCH_TOL * scale:
                    break
                x1 = hi - GOLDEN * (hi - lo)
                x2 = lo + GOLDEN * (hi - lo)
                f1 = self._phi_t(rows, v, x1)
                f2 = self._phi_t(rows, v, x2)
                shrink_hi = f1 >= f2
                hi = np.where(shrink_hi, x2, hi)
                lo = np.where(shrink_hi, lo, x1)
            best = np.maximum(best, self._phi_t(rows, v, 0.5 * (lo + hi)))
        return best

    def _phi_t(self, rows, v, t):
        w = np.minimum(v[None, :], t[:, None])
        mean = np.einsum("bs,bs->b", rows, w)
        var = np.einsum("bs,bs->b", rows, w * w) - mean * mean
        return mean - np.sqrt(self.delta * np.maximum(var, 0.0))

    def _threshold(self, p, v):
        """Argmax threshold t of the reduced dual, via the same search."""
        if self.delta == 0.0 or v.max() == v.min():
            return float(v.max())
        knots = np.unique(v)
        cand = list(knots)
        for k in range(len(knots) - 1):
            lo, hi = knots[k], knots[k + 1]
            for _ in range(SEARCH_ITERS):
                if hi - lo < SEARCH_TOL * max(1.0, knots[-1] - knots[0]):
                    break
                x1 = hi - GOLDEN * (hi - lo)
                x2 = lo + GOLDEN * (hi - lo)
                if self._phi(p[None, :], np.minimum(v, x1))[0] >= self._phi(p[None, :], np.minimum(v, x2))[0]:
                    hi = x2
                else:
                    lo = x1
            cand.append(0.5 * (lo + hi))
        vals = [self._phi(p[None, :], np.minimum(v, t))[0] for t in cand]
        return float(cand[int(np.argmax(vals))])

    def support_with_dual(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        t_star = self._threshold(p, v)
        return SupportResult(self.support(p, v), dual=np.maximum(v - t_star, 0.0))

    def worst_row(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0:
            return p.copy()
        w = np.minimum(v, self._threshold(p, v))
        mean = p @ w
        var = p @ (w * w) - mean * mean
        if var <= 0.0:
            return p.copy()
        q = p * (1.0 + np.sqrt(self.delta / var) * (mean - w))
        q = np.maximum(q, 0.0)
        q /= q.sum()
        # project back toward p if clipping pushed the divergence past delta
        dist = self.divergence(q, p)
        if dist > self.delta:
            scale = np.sqrt(self.delta / dist) * (1.0 - 1e-12)
            q = p + scale * (q - p)
        return q

    @staticmethod
    def divergence(q, p):
        mask = p > 0
        if np.any(q[~mask] > 1e-15):
            return np.inf
        return float(np.sum((q[mask] - p[mask]) ** 2 / p[mask]))

    def to_json_dict(self):
        return {"kind": self.kind, "delta": self.delta}


@dataclass
class KLDivergence(UncertaintySet):
    """Ball {q : KL(q || p) <= delta}.

    Evaluated through the exponential-tilt dual: sigma = -min_{alpha >= 0}
    (delta * alpha + alpha * log E_p[exp(-v/alpha)]), a convex 1-D problem
    solved by golden section on [~0, max(1, ||v||/delta)]. The alpha -> 0
    limit equals min v over the support of p; states with p_i = 0 never
    receive mass and are excluded from the log-sum. Log-sums are computed in
    shifted form to avoid overflow.
    """

    delta: float
    kind = "kl"

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.delta}")

    def _objective(self, rows, v, alpha, m):
        # h(alpha) = delta*alpha - m + alpha*log sum_supp p * exp(-(v - m)/alpha)
        expo = (m[:, None] - v[None, :]) / alpha[:, None]
        expo = np.where(rows > 0.0, expo, -np.inf)
        lse = np.log(np.maximum(np.einsum("bs,bs->b", rows, np.exp(expo)), 1e-300))
        return self.delta * alpha - m + alpha * lse

    def support_batch(self, rows, v):
        rows = _as_batch(rows)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0 or v.max() == v.min():
            return rows @ v
        m = np.where(rows > 0.0, v[None, :], np.inf).min(axis=1)
        scale = max(1.0, float(np.abs(v).max()))
        lo = np.full(rows.shape[0], 1e-9 * scale)
        hi = np.full(rows.shape[0], max(1.0, np.abs(v).max() / self.delta))
        h_star = self._objective(rows, v, hi, m)
        for _ in range(SEARCH_ITERS):
            if hi[0] - lo[0] < SEARCH_TOL * scale:
                break
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            f1 = self._objective(rows, v, x1, m)
            f2 = self._objective(rows, v, x2, m)
            shrink_hi = f1 <= f2  # minimizing a convex objective
            hi = np.where(shrink_hi, x2, hi)
            lo = np.where(shrink_hi, lo, x1)
        h_star = np.minimum(h_star, self._objective(rows, v, 0.5 * (lo + hi), m))
        # the alpha -> 0 boundary value of -h is min v over the support
        return np.maximum(-h_star, m)

    def _alpha_star(self, p, v):
        if self.delta == 0.0 or v.max() == v.min():
            return np.inf
        m = np.array([np.where(p > 0.0, v, np.inf).min()])
        scale = max(1.0, float(np.abs(v).max()))
        lo, hi = 1e-9 * scale, max(1.0, np.abs(v).max() / self.delta)
        rows = p[None, :]
        for _ in range(SEARCH_ITERS):
            if hi - lo < SEARCH_TOL * scale:
                break
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            h1 = self._objective(rows, v, np.array([x1]), m)[0]
            h2 = self._objective(rows, v, np.array([x2]), m)[0]
            if h1 <= h2:
                hi = x2
            else:
                lo = x1
        alpha = 0.5 * (lo + hi)
        h_alpha = self._objective(rows, v, np.array([alpha]), m)[0]
        if -float(m[0]) < h_alpha:  # boundary is the true minimum
            return 0.0
        return float(alpha)

    def support_with_dual(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        return SupportResult(self.support(p, v), dual=self._alpha_star(p, v))

    def worst_row(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0:
            return p.copy()
        alpha = self._alpha_star(p, v)
        support = p > 0.0
        if alpha <= 0.0 or not np.isfinite(alpha):
            if np.isinf(alpha):
                return p.copy()
            q = np.zeros_like(p)
            masked = np.where(support, v, np.inf)
            q[int(np.argmin(masked))] = 1.0
            return q
        # exponential tilt; bisect the tilt strength onto the KL sphere
        def tilt(c):
            logits = np.where(support, -c * v / alpha, -np.inf)
            logits -= logits.max()
            w = np.where(support, p * np.exp(logits), 0.0)
            return w / w.sum()

        q = tilt(1.0)
        if self.divergence(q, p) > self.delta:
            lo_c, hi_c = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo_c + hi_c)
                if self.divergence(tilt(mid), p) > self.delta:
                    hi_c = mid
                else:
                    lo_c = mid
            q = tilt(lo_c)
        return q

    @staticmethod
    def divergence(q, p):
        mask = q > 0
        if np.any(p[mask] <= 0):
            return np.inf
        return float(np.sum(q[mask] * np.log(q[mask] / p[mask])))

    def to_json_dict(self):
        return {"kind": self.kind, "delta": self.delta}


def line_metric(n: int) -> np.ndarray:
    """Default state metric d(i, j) = |i - j| on integer-indexed states."""
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]).astype(float)


@dataclass(eq=False)
class Wasserstein(UncertaintySet):
    """Ball {q : W_l(p, q) <= delta} for the metric d (default d(i,j) = |i-j|).

    The dual g(lambda) = -lambda delta^l + E_p[min_y (v_y + lambda d(.,y)^l)]
    is concave; golden section on lambda in [0, 2||v||/delta^l] per the dual
    bracket. Worst rows come from the exact transport LP.
    """

    delta: float
    order: float = 1.0
    metric: np.ndarray | None = None
    _pow_cache: dict = field(default_factory=dict, repr=False)

    kind = "wasserstein"

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.delta}")
        if self.order < 1.0:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.metric is not None:
            d = np.asarray(self.metric, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValueError("metric must be a square matrix")
            if np.any(np.abs(np.diag(d)) > 0) or np.any(d < 0) or not np.allclose(d, d.T):
                raise ValueError("metric must be symmetric, nonnegative, zero on the diagonal")
            self.metric = d

    def _dl(self, n: int) -> np.ndarray:
        cached = self._pow_cache.get(n)
        if cached is not None:
            return cached
        d = self.metric if self.metric is not None else line_metric(n)
        if d.shape[0] != n:
            raise ValueError(f"metric size {d.shape[0]} does not match row length {n}")
        dl = d**self.order
        self._pow_cache[n] = dl
        return dl

    def uses_line_metric(self, n: int) -> bool:
        return self.metric is None or np.array_equal(self.metric, line_metric(n))

    def _g(self, rows, v, lam, dl):
        # Phi[b, x] = min_y (v_y + lam_b * dl[x, y])
        phi = (v[None, None, :] + lam[:, None, None] * dl[None, :, :]).min(axis=2)
        return -lam * self.delta**self.order + np.einsum("bs,bs->b", rows, phi)

    def support_batch(self, rows, v):
        rows = _as_batch(rows)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0 or v.max() == v.min():
            return rows @ v
        dl = self._dl(v.shape[0])
        n = rows.shape[0]
        vmax = float(np.abs(v).max())
        lo = np.zeros(n)
        hi = np.full(n, 2.0 * vmax / self.delta**self.order + 1e-12)
        best = self._g(rows, v, lo, dl)  # lambda = 0 gives min v
        x1 = hi - GOLDEN * (hi - lo)
        x2 = lo + GOLDEN * (hi - lo)
        f1 = self._g(rows, v, x1, dl)
        f2 = self._g(rows, v, x2, dl)
        for _ in range(SEARCH_ITERS):
            if np.all(hi - lo < SEARCH_TOL * max(1.0, hi.max())):
                break
            shrink_hi = f1 >= f2  # maximize
            hi = np.where(shrink_hi, x2, hi)
            lo = np.where(shrink_hi, lo, x1)
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            f1 = self._g(rows, v, x1, dl)
            f2 = self._g(rows, v, x2, dl)
        return np.maximum(best, np.maximum(f1, f2))

    def _lambda_star(self, p, v):
        if self.delta == 0.0 or v.max() == v.min():
            return 0.0
        dl = self._dl(v.shape[0])
        rows = p[None, :]
        vmax = float(np.abs(v).max())
        lo, hi = 0.0, 2.0 * vmax / self.delta**self.order + 1e-12
        for _ in range(SEARCH_ITERS):
            if hi - lo < SEARCH_TOL * max(1.0, hi):
                break
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            g1 = self._g(rows, v, np.array([x1]), dl)[0]
            g2 = self._g(rows, v, np.array([x2]), dl)[0]
            if g1 >= g2:
                hi = x2
            else:
                lo = x1
        return 0.5 * (lo + hi)

    def support_with_dual(self, p, v):
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        return SupportResult(self.support(p, v), dual=self._lambda_star(p, v))

    def worst_row(self, p, v):
        """Exact minimizer via the transport linear program."""
        p = _check_simplex(p)
        v = np.asarray(v, dtype=float)
        if self.delta == 0.0:
            return p.copy()
        n = v.shape[0]
        dl = self._dl(n)
        # variables gamma[x, y] flattened; min sum gamma[x, y] v[y]
        c = np.tile(v, n)
        a_eq = np.zeros((n, n * n))
        for x in range(n):
            a_eq[x, x * n : (x + 1) * n] = 1.0
        a_ub = dl.reshape(1, -1)
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=[self.delta**self.order],
            A_eq=a_eq,
            b_eq=p,
            bounds=(0, None),
            method="highs",
        )
        if not res.success:
            raise RuntimeError(f"transport LP failed: {res.message}")
        gamma = res.x.reshape(n, n)
        q = gamma.sum(axis=0)
        return np.maximum(q, 0.0) / max(q.sum(), 1e-300)

    def distance_pow(self, p, q):
        """W_l(p, q)^l via the transport LP (used by the oracle for general metrics)."""
        n = len(p)
        dl = self._dl(n)
        c = dl.reshape(-1)
        a_eq = np.zeros((2 * n, n * n))
        for x in range(n):
            a_eq[x, x * n : (x + 1) * n] = 1.0
        for y in range(n):
            a_eq[n + y, y::n] = 1.0
        res = linprog(c, A_eq=a_eq, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
        if not res.success:
            raise RuntimeError(f"transport LP failed: {res.message}")
        return float(res.fun)

    def to_json_dict(self):
        doc = {"kind": self.kind, "delta": self.delta, "l": self.order}
        if self.metric is not None:
            doc["metric"] = np.asarray(self.metric).tolist()
        return doc


def uncertainty_from_json(doc: dict) -> UncertaintySet:
    kind = doc["kind"]
    delta = float(doc["delta"])
    if kind == "contamination":
        return Contamination(delta)
    if kind == "tv":
        return TotalVariation(delta)
    if kind == "chi2":
        return ChiSquare(delta)
    if kind == "kl":
        return KLDivergence(delta)
    if kind == "wasserstein":
        metric = doc.get("metric")
        return Wasserstein(
            delta,
            order=float(doc.get("l", 1.0)),
            metric=None if metric is None else np.asarray(metric, dtype=float),
        )
    raise ValueError(f"unknown uncertainty set kind {kind!r}")


def support_exact(spec: UncertaintySet, p: np.ndarray, v: np.ndarray) -> SupportResult:
    """Support value and dual certificate for one nominal row."""
    return spec.support_with_dual(np.asarray(p, dtype=float), np.asarray(v, dtype=float))


def worst_case_row(spec: UncertaintySet, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """A row attaining (approximately, for the divergence balls) the support value."""
    return spec.worst_row(np.asarray(p, dtype=float), np.asarray(v, dtype=float))


_GRID_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All probability rows with entries that are multiples of 1/resolution."""
    cached = _GRID_CACHE.get((n, resolution))
    if cached is not None:
        return cached
    r = resolution
    if n == 1:
        grid = np.ones((1, 1))
    elif n == 2:
        i = np.arange(r + 1)
        grid = np.stack([i, r - i], axis=1) / r
    elif n == 3:
        i, j = np.meshgrid(np.arange(r + 1), np.arange(r + 1), indexing="ij")
        mask = i + j <= r
        i, j = i[mask], j[mask]
        grid = np.stack([i, j, r - i - j], axis=1) / r
    elif n == 4:
        rng = np.arange(r + 1, dtype=np.int32)
        i, j, k = np.meshgrid(rng, rng, rng, indexing="ij")
        mask = (i.astype(np.int64) + j + k) <= r
        i, j, k = i[mask], j[mask], k[mask]
        grid = np.stack([i, j, k, r - i - j - k], axis=1).astype(float) / r
    else:
        raise ValueError(f"grid oracle limited to 4 states, got {n}")
    grid.setflags(write=False)
    _GRID_CACHE[(n, resolution)] = grid
    return grid


def _wasserstein_pow_line(p: np.ndarray, qs: np.ndarray, order: float) -> np.ndarray:
    """W_l(p, q)^l on the line metric via the monotone (quantile) coupling."""
    n = p.shape[0]
    fp = np.cumsum(p)
    fq = np.cumsum(qs, axis=1)
    if order == 1.0:
        # unit spacing: W_1 is the L1 distance between the CDFs
        return np.abs(fq[:, : n - 1] - fp[: n - 1]).sum(axis=1)
    levels = np.concatenate([np.broadcast_to(fp, fq.shape), fq], axis=1)
    levels = np.sort(levels, axis=1)
    du = np.diff(np.concatenate([np.zeros((qs.shape[0], 1)), levels], axis=1), axis=1)
    mid = levels - 0.5 * du  # interior point of each segment
    xp = np.minimum((mid[:, :, None] > fp[None, None, :] - 1e-15).sum(axis=2), n - 1)
    xq = np.minimum((mid[:, :, None] > fq[:, None, :] - 1e-15).sum(axis=2), n - 1)
    return np.einsum("bk,bk->b", du, np.abs(xp - xq).astype(float) ** order)


def support_oracle_grid(
    spec: UncertaintySet, p: np.ndarray, v: np.ndarray, resolution: int, feas_tol: float = 1e-9
) -> float:
    """Brute-force oracle: min q.v over feasible grid points of the simplex.

    Independent of the exact solvers; converges to the support value from
    above as the resolution grows. Limited to 4 states.
    """
    p = _check_simplex(p)
    v = np.asarray(v, dtype=float)
    n = p.shape[0]
    qs = _simplex_grid(n, resolution)
    if isinstance(spec, Contamination):
        feasible = np.all(qs >= (1.0 - spec.delta) * p[None, :] - feas_tol, axis=1)
    elif isinstance(spec, TotalVariation):
        feasible = 0.5 * np.abs(qs - p[None, :]).sum(axis=1) <= spec.delta + feas_tol
    elif isinstance(spec, ChiSquare):
        mask = p > 0
        div = np.sum((qs[:, mask] - p[mask]) ** 2 / p[mask], axis=1)
        feasible = (div <= spec.delta + feas_tol) & np.all(qs[:, ~mask] <= 1e-15, axis=1)
    elif isinstance(spec, KLDivergence):
        mask = p > 0
        safe = np.where(qs[:, mask] > 0, qs[:, mask], 1.0)
        div = np.sum(safe * np.log(safe / p[mask]), axis=1)
        feasible = (div <= spec.delta + feas_tol) & np.all(qs[:, ~mask] <= 1e-15, axis=1)
    elif isinstance(spec, Wasserstein):
        cap = spec.delta**spec.order + feas_tol
        if spec.uses_line_metric(n):
            chunks = []
            for start in range(0, qs.shape[0], 100_000):
                block = qs[start : start + 100_000]
                chunks.append(_wasserstein_pow_line(p, block, spec.order) <= cap)
            feasible = np.concatenate(chunks)
        else:
            if resolution > 40:
                raise ValueError("general-metric oracle limited to resolution <= 40")
            feasible = np.array([spec.distance_pow(p, q) <= cap for q in qs])
    else:
        raise ValueError(f"no oracle for {type(spec).__name__}")
    if not feasible.any():
        raise RuntimeError("no feasible grid point; increase the resolution")
    return float((qs[feasible] @ v).min())
