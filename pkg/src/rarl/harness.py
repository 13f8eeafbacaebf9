"""Experiment harness: multi-seed training, planner baselines, sweeps, checks.

Runs are driven by a JSON config (environment id + params, uncertainty set,
algorithm, offset, step schedule, horizons, seed counts). Per-seed RNG streams
are derived as ``SeedSequence((base_seed, seed_index))``, so traces are
reproducible byte-for-byte and adding seeds never changes earlier ones. Seeds
can run in a process pool; results are merged in seed order.

Outputs per experiment directory:
- ``trace.csv`` with header ``iter,mean,p95,p05,baseline`` (nearest-rank
  percentiles across seeds) and a matching ``plot.svg``;
- ``summary.json`` with per-seed tail estimates and the planner baseline;
- control runs add ``policy.json`` (per-seed and modal greedy policies);
- sweeps write ``sweep.csv`` with header
  ``perturbation,robust_gain,nonrobust_gain`` and ``sweep.svg``;
- ``support-check`` writes a pass/fail table over the support-function and
  estimator suites.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import environments as envs
from .estimators import KernelSampler, MlmcConfig, default_psi, mlmc_estimate_support
from .learners import Constant, RobbinsMonro, RunTrace, greedy_policy, robust_rvi_q, robust_rvi_td
from .mdp import OffsetFn, Policy, TabularMDP, validate
from .planners import robust_rvi_control, robust_rvi_eval
from .uncertainty import (
    ChiSquare,
    Contamination,
    KLDivergence,
    TotalVariation,
    UncertaintySet,
    Wasserstein,
    support_exact,
    support_oracle_grid,
    uncertainty_from_json,
)
from .svgplot import line_plot_svg


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


class RunFailure(RuntimeError):
    """Too many per-seed runs failed, or the planner failed."""


@dataclass
class ExperimentConfig:
    environment: dict
    uncertainty: dict
    algorithm: str
    offset: dict = field(default_factory=lambda: {"kind": "mean"})
    schedule: dict = field(default_factory=lambda: {"kind": "constant", "alpha": 0.01})
    n_iters: int = 10_000
    n_seeds: int = 1
    base_seed: int = 0
    estimator: dict = field(default_factory=dict)
    policy: Any = "uniform"
    record_every: int = 1
    tail_fraction: float = 0.1
    snapshot_every: int = 0
    planner_tol: float = 1e-9
    sweep: dict | None = None
    support_check: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            cfg = ExperimentConfig(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad config fields: {exc}") from exc
        if cfg.algorithm not in ("td", "q", "planner", "support-check", "robustness-sweep"):
            raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
        if cfg.n_seeds < 1 or cfg.n_iters < 1:
            raise ConfigError("n_seeds and n_iters must be >= 1")
        if not 0.0 < cfg.tail_fraction <= 1.0:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        return cfg

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "environment": self.environment,
            "uncertainty": self.uncertainty,
            "algorithm": self.algorithm,
            "offset": self.offset,
            "schedule": self.schedule,
            "n_iters": self.n_iters,
            "n_seeds": self.n_seeds,
            "base_seed": self.base_seed,
            "estimator": self.estimator,
            "policy": self.policy,
            "record_every": self.record_every,
            "tail_fraction": self.tail_fraction,
            "snapshot_every": self.snapshot_every,
            "planner_tol": self.planner_tol,
            "sweep": self.sweep,
            "support_check": self.support_check,
        }


def build_environment(doc: dict) -> TabularMDP:
    env_id = doc.get("id")
    params = dict(doc.get("params", {}))
    try:
        if env_id == "garnet":
            mdp = envs.garnet(**params)
        elif env_id == "example_a":
            mdp = envs.example_a(**params).mdp
        elif env_id == "recycling_robot":
            mdp = envs.recycling_robot(**params)
        elif env_id == "inventory":
            mdp = envs.inventory(**params)
        elif env_id == "one_loop":
            mdp = envs.one_loop()[0]
        elif env_id == "frozen_lake":
            mdp = envs.frozen_lake_4x4(**params)
        else:
            raise ConfigError(f"unknown environment id {env_id!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad environment config: {exc}") from exc
    problem = validate(mdp)
    if problem is not None:
        raise ConfigError(f"environment failed validation: {problem}")
    return mdp


def build_uncertainty(doc: dict) -> UncertaintySet:
    try:
        return uncertainty_from_json(doc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad uncertainty config: {exc}") from exc


def build_offset(doc: dict) -> OffsetFn:
    kind = doc.get("kind", "mean")
    if kind == "mean":
        return OffsetFn.mean()
    if kind == "state":
        return OffsetFn.reference_state(int(doc.get("state", 0)))
    raise ConfigError(f"unknown offset kind {kind!r}")


def build_schedule(doc: dict):
    kind = doc.get("kind", "constant")
    if kind == "constant":
        return Constant(float(doc.get("alpha", 0.01)))
    if kind == "robbins_monro":
        return RobbinsMonro(float(doc.get("c", 1.0)), float(doc.get("offset", 1.0)))
    raise ConfigError(f"unknown schedule kind {kind!r}")


def build_policy(doc, mdp: TabularMDP) -> Policy:
    if doc == "uniform":
        return Policy.uniform(mdp.n_states, mdp.n_actions)
    if isinstance(doc, dict) and "deterministic" in doc:
        return Policy.deterministic(doc["deterministic"], mdp.n_actions)
    if isinstance(doc, list):
        return Policy(np.asarray(doc, dtype=float))
    raise ConfigError(f"unsupported policy spec {doc!r}")


def build_mlmc_config(doc: dict, spec: UncertaintySet) -> MlmcConfig | None:
    if isinstance(spec, Contamination):
        return None
    psi = doc.get("psi")
    return MlmcConfig(
        psi=float(psi) if psi is not None else default_psi(spec),
        max_level=int(doc.get("max_level", 20)),
    )


def seed_stream(base_seed: int, seed_index: int) -> np.random.Generator:
    """Documented split: stream i is PCG64 seeded by SeedSequence((base, i))."""
    return np.random.default_rng(np.random.SeedSequence((base_seed, seed_index)))


def _run_one_seed(config_doc: dict, seed_index: int) -> RunTrace:
    cfg = ExperimentConfig.from_dict(config_doc)
    mdp = build_environment(cfg.environment)
    spec = build_uncertainty(cfg.uncertainty)
    offset = build_offset(cfg.offset)
    schedule = build_schedule(cfg.schedule)
    mlmc = build_mlmc_config(cfg.estimator, spec)
    source = KernelSampler.from_mdp(mdp)
    rng = seed_stream(cfg.base_seed, seed_index)
    if cfg.algorithm == "td":
        policy = build_policy(cfg.policy, mdp)
        return robust_rvi_td(
            source, mdp, policy, spec, offset, schedule, cfg.n_iters, mlmc, rng,
            record_every=cfg.record_every, snapshot_every=cfg.snapshot_every,
        )
    return robust_rvi_q(
        source, mdp, spec, offset, schedule, cfg.n_iters, mlmc, rng,
        record_every=cfg.record_every, snapshot_every=cfg.snapshot_every,
    )


def _run_seeds(cfg: ExperimentConfig, jobs: int) -> tuple[list[RunTrace | None], list[str]]:
    doc = cfg.to_dict()
    traces: list[RunTrace | None] = [None] * cfg.n_seeds
    errors: list[str] = []
    if jobs <= 1:
        for i in range(cfg.n_seeds):
            try:
                traces[i] = _run_one_seed(doc, i)
            except Exception as exc:  # per-seed failures are collected
                errors.append(f"seed {i}: {exc}")
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {i: pool.submit(_run_one_seed, doc, i) for i in range(cfg.n_seeds)}
            for i in range(cfg.n_seeds):
                try:
                    traces[i] = futures[i].result()
                except Exception as exc:
                    errors.append(f"seed {i}: {exc}")
    failed = sum(t is None for t in traces)
    if failed > 0.1 * cfg.n_seeds:
        raise RunFailure(f"{failed}/{cfg.n_seeds} seeds failed: {errors[:3]}")
    return traces, errors


def nearest_rank_percentile(values: np.ndarray, pct: float) -> np.ndarray:
    """Nearest-rank percentile along axis 0."""
    values = np.sort(np.asarray(values, dtype=float), axis=0)
    n = values.shape[0]
    rank = min(max(int(math.ceil(pct / 100.0 * n)), 1), n)
    return values[rank - 1]


def _write_trace_csv(path, iters, mean, p95, p05, baseline) -> None:
    with open(path, "w") as fh:
        fh.write("iter,mean,p95,p05,baseline\n")
        for i, m, hi, lo in zip(iters, mean, p95, p05):
            fh.write(f"{int(i)},{float(m)!r},{float(hi)!r},{float(lo)!r},{float(baseline)!r}\n")


def _aggregate_and_emit(cfg: ExperimentConfig, traces: list[RunTrace], baseline: float, out_dir, title: str):
    iters = traces[0].iters
    stack = np.stack([t.f_values for t in traces])
    mean = stack.mean(axis=0)
    p95 = nearest_rank_percentile(stack, 95.0)
    p05 = nearest_rank_percentile(stack, 5.0)
    _write_trace_csv(os.path.join(out_dir, "trace.csv"), iters, mean, p95, p05, baseline)
    line_plot_svg(
        os.path.join(out_dir, "plot.svg"),
        iters,
        {"mean over seeds": mean},
        band=(p05, p95),
        baseline=baseline,
        title=title,
        xlabel="iteration",
        ylabel="offset value",
    )
    tails = [t.tail_mean(cfg.tail_fraction) for t in traces]
    return mean, tails


def run_eval_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    """Multi-seed policy-evaluation experiment with a planner baseline."""
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_environment(cfg.environment)
    spec = build_uncertainty(cfg.uncertainty)
    offset = build_offset(cfg.offset)
    policy = build_policy(cfg.policy, mdp)
    baseline = robust_rvi_eval(mdp, policy, spec, offset, tol=cfg.planner_tol).gain
    traces, errors = _run_seeds(cfg, jobs)
    done = [t for t in traces if t is not None]
    mean, tails = _aggregate_and_emit(cfg, done, baseline, out_dir, "worst-case policy evaluation")
    summary = {
        "baseline_gain": baseline,
        "final_mean": float(np.mean(tails)),
        "abs_error": abs(float(np.mean(tails)) - baseline),
        "per_seed_tail": tails,
        "seed_errors": errors,
        "n_seeds_done": len(done),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def run_control_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    """Multi-seed control experiment; also records final greedy policies."""
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_environment(cfg.environment)
    spec = build_uncertainty(cfg.uncertainty)
    offset = build_offset(cfg.offset)
    plan = robust_rvi_control(mdp, spec, offset, tol=cfg.planner_tol)
    traces, errors = _run_seeds(cfg, jobs)
    done = [t for t in traces if t is not None]
    mean, tails = _aggregate_and_emit(cfg, done, plan.gain, out_dir, "worst-case optimal control")
    per_seed_actions = [greedy_policy(t.final).actions().tolist() for t in done]
    counts: dict[tuple, int] = {}
    for acts in per_seed_actions:
        counts[tuple(acts)] = counts.get(tuple(acts), 0) + 1
    modal = max(counts.items(), key=lambda kv: kv[1])[0]
    policy_doc = {
        "planner_policy": plan.policy.actions().tolist(),
        "modal_policy": list(modal),
        "modal_count": counts[modal],
        "per_seed_policies": per_seed_actions,
    }
    with open(os.path.join(out_dir, "policy.json"), "w") as fh:
        json.dump(policy_doc, fh, indent=2)
    summary = {
        "baseline_gain": plan.gain,
        "final_mean": float(np.mean(tails)),
        "abs_error": abs(float(np.mean(tails)) - plan.gain),
        "per_seed_tail": tails,
        "modal_policy": list(modal),
        "planner_policy": plan.policy.actions().tolist(),
        "modal_matches_planner": list(modal) == plan.policy.actions().tolist(),
        "seed_errors": errors,
        "n_seeds_done": len(done),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def run_planner(cfg: ExperimentConfig, out_dir) -> dict:
    """Model-based baseline only; writes baseline.json."""
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_environment(cfg.environment)
    spec = build_uncertainty(cfg.uncertainty)
    offset = build_offset(cfg.offset)
    if cfg.policy != "optimal":
        policy = build_policy(cfg.policy, mdp)
        res = robust_rvi_eval(mdp, policy, spec, offset, tol=cfg.planner_tol)
        doc = {"gain": res.gain, "value": res.value.tolist(), "residual": res.residual}
    else:
        res = robust_rvi_control(mdp, spec, offset, tol=cfg.planner_tol)
        doc = {
            "gain": res.gain,
            "q": res.q.tolist(),
            "policy": res.policy.actions().tolist(),
            "residual": res.residual,
        }
    with open(os.path.join(out_dir, "baseline.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    return doc


def _perturbation_grid(cfg: ExperimentConfig):
    """Yield (label, [perturbed MDPs]) per grid point of the sweep family."""
    sweep = cfg.sweep or {}
    family = sweep.get("family")
    if family == "recycling_robot":
        params = dict(cfg.environment.get("params", {}))
        nominal_alpha = params.pop("alpha", 0.5)
        nominal_beta = params.pop("beta", 0.5)
        k = int(sweep.get("points_per_axis", 3))
        for x in sweep.get("x_grid", [0.0, 0.1, 0.2, 0.3, 0.4]):
            alphas = np.clip(np.linspace(nominal_alpha - x, nominal_alpha + x, k), 0.0, 1.0)
            betas = np.clip(np.linspace(nominal_beta - x, nominal_beta + x, k), 0.0, 1.0)
            mdps = [envs.recycling_robot(a, b, **params) for a in alphas for b in betas]
            yield float(x), mdps
    elif family == "inventory_b":
        params = dict(cfg.environment.get("params", {}))
        capacity = int(params.get("capacity", 16))
        m = int(sweep.get("m", 0))
        for b in sweep.get("b_grid", [0.0, 0.25, 0.5, 0.75, 1.0]):
            demand = envs.inventory_perturbed_demand(m, float(b), capacity + 1)
            yield float(b), [envs.inventory(**{**params, "demand": demand})]
    elif family == "inventory_m":
        params = dict(cfg.environment.get("params", {}))
        capacity = int(params.get("capacity", 16))
        b = float(sweep.get("b", 0.25))
        for m in sweep.get("m_grid", list(range(capacity))):
            demand = envs.inventory_perturbed_demand(int(m), b, capacity + 1)
            yield float(m), [envs.inventory(**{**params, "demand": demand})]
    elif family == "one_loop_mix":
        nominal, perturbed = envs.one_loop()
        for x in sweep.get("x_grid", [0.0, 0.25, 0.5, 0.75, 1.0]):
            kernel = (1.0 - float(x)) * nominal.kernel + float(x) * perturbed.kernel
            yield float(x), [nominal.with_kernel(kernel)]
    else:
        raise ConfigError(f"unknown sweep family {family!r}")


def run_robustness_sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    """Train robust and non-robust policies, evaluate both on perturbed MDPs.

    The non-robust learner is the same control loop with a zero-radius
    (singleton) uncertainty set, i.e. vanilla synchronous Q-learning.
    """
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_environment(cfg.environment)
    spec = build_uncertainty(cfg.uncertainty)
    offset = build_offset(cfg.offset)
    schedule = build_schedule(cfg.schedule)
    source = KernelSampler.from_mdp(mdp)
    mlmc = build_mlmc_config(cfg.estimator, spec)
    robust_trace = robust_rvi_q(
        source, mdp, spec, offset, schedule, cfg.n_iters, mlmc, seed_stream(cfg.base_seed, 0)
    )
    vanilla_trace = robust_rvi_q(
        source, mdp, Contamination(0.0), offset, schedule, cfg.n_iters, None, seed_stream(cfg.base_seed, 1)
    )
    robust_pi = greedy_policy(robust_trace.final)
    vanilla_pi = greedy_policy(vanilla_trace.final)
    start_state = (cfg.sweep or {}).get("start_state")
    rows = []
    for label, mdps in _perturbation_grid(cfg):
        rows.append(
            (
                label,
                envs.worst_gain_over(robust_pi, mdps, start_state),
                envs.worst_gain_over(vanilla_pi, mdps, start_state),
            )
        )
    with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
        fh.write("perturbation,robust_gain,nonrobust_gain\n")
        for label, rg, ng in rows:
            fh.write(f"{float(label)!r},{float(rg)!r},{float(ng)!r}\n")
    xs = np.array([r[0] for r in rows])
    line_plot_svg(
        os.path.join(out_dir, "sweep.svg"),
        xs,
        {"robust": np.array([r[1] for r in rows]), "non-robust": np.array([r[2] for r in rows])},
        title="learned policies under perturbation",
        xlabel="perturbation",
        ylabel="exact average reward",
    )
    doc = {
        "robust_policy": robust_pi.actions().tolist(),
        "nonrobust_policy": vanilla_pi.actions().tolist(),
        "rows": [[float(a), float(b), float(c)] for a, b, c in rows],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    return doc


def _support_check_rows(cfg: ExperimentConfig) -> list[dict]:
    opts = cfg.support_check or {}
    n_instances = int(opts.get("instances", 20))
    resolution = int(opts.get("resolution", 200))
    deltas = list(opts.get("deltas", [0.1, 0.3, 0.6]))
    mlmc_draws = int(opts.get("mlmc_draws", 20_000))
    rng = seed_stream(cfg.base_seed, 9000)
    rows = []

    def family(name, delta):
        if name == "contamination":
            return Contamination(min(delta, 0.99))
        if name == "tv":
            return TotalVariation(delta)
        if name == "chi2":
            return ChiSquare(delta)
        if name == "kl":
            return KLDivergence(delta)
        return Wasserstein(delta)

    # contamination is checked against its closed form; the others against the
    # grid oracle, whose spacing error scales like 1/resolution (0.02 ||V|| at 200)
    worst_closed = 0.0
    for i in range(n_instances):
        spec = family("contamination", deltas[i % len(deltas)])
        p = rng.dirichlet(np.ones(4))
        v = rng.normal(0.0, 1.0, size=4)
        closed = (1 - spec.delta) * p @ v + spec.delta * v.min()
        worst_closed = max(worst_closed, abs(spec.support(p, v) - closed))
    rows.append(
        {
            "check": "closed-form-agreement/contamination",
            "metric": f"max |exact - closed form| = {worst_closed:.2e} vs 1e-9",
            "value": worst_closed,
            "passed": bool(worst_closed <= 1e-9),
        }
    )
    tol_factor = 0.02 * (200.0 / resolution)
    for name in ("tv", "chi2", "kl", "wasserstein"):
        worst = 0.0
        for i in range(n_instances):
            delta = deltas[i % len(deltas)]
            spec = family(name, delta)
            p = rng.dirichlet(np.ones(4))
            v = rng.normal(0.0, 1.0, size=4)
            exact = spec.support(p, v)
            oracle = support_oracle_grid(spec, p, v, resolution)
            tol = tol_factor * max(np.abs(v).max(), 1e-12)
            worst = max(worst, abs(exact - oracle) / tol)
        rows.append(
            {
                "check": f"oracle-agreement/{name}",
                "metric": f"max |exact - grid| / ({tol_factor:.3g} ||V||) = {worst:.3f}",
                "value": worst,
                "passed": bool(worst <= 1.0),
            }
        )
    # unbiasedness of the multi-level estimator on a fixed three-state row
    p = np.array([0.2, 0.3, 0.5])
    v = np.array([0.0, 1.0, 2.0])
    kernel = np.zeros((3, 1, 3))
    kernel[:, 0, :] = p
    source = KernelSampler(kernel)
    for name in ("tv", "chi2", "kl", "wasserstein"):
        spec = family(name, 0.2)
        exact = spec.support(p, v)
        mlmc = MlmcConfig(psi=default_psi(spec))
        vals = np.array(
            [mlmc_estimate_support(source, spec, 0, 0, v, mlmc, rng).value for _ in range(mlmc_draws)]
        )
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        gap = abs(vals.mean() - exact)
        rows.append(
            {
                "check": f"mlmc-unbiased/{name}",
                "metric": f"|mean - exact| = {gap:.4g} vs 3*SE = {3 * se:.4g}",
                "value": gap / max(3 * se, 1e-300),
                "passed": bool(gap <= 3 * se),
            }
        )
    # negative control: a deliberately corrupted radius must be caught
    spec_good = TotalVariation(0.3)
    spec_bad = TotalVariation(0.6)
    p = np.array([0.4, 0.3, 0.2, 0.1])
    v = np.array([0.0, 1.0, 2.0, 3.0])
    gap = abs(spec_good.support(p, v) - support_oracle_grid(spec_bad, p, v, resolution))
    rows.append(
        {
            "check": "negative-control/corrupted-delta",
            "metric": f"measured gap {gap:.4g} must exceed 0.02 ||V||",
            "value": gap,
            "passed": bool(gap > 0.02 * np.abs(v).max()),
        }
    )
    return rows


def run_support_check(cfg: ExperimentConfig, out_dir) -> tuple[dict, bool]:
    """Oracle-agreement and estimator-unbiasedness table; returns (report, ok)."""
    os.makedirs(out_dir, exist_ok=True)
    rows = _support_check_rows(cfg)
    ok = all(r["passed"] for r in rows)
    report = {"ok": ok, "rows": rows}
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    lines = [f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']:40s} {r['metric']}" for r in rows]
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return report, ok
