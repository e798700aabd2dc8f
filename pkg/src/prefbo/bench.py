"""Simulation loop, regret accounting, aggregation, and file output.

A run is fully determined by (config, seed): the master seed splits into an
oracle stream and a policy stream through documented spawn keys, so every
policy compared under the same seed faces the same environment noise stream.
Traces serialize to CSV byte-identically across reruns; wall-clock timings
stay in memory only.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import yaml

from . import inference
from .environments import (
    BtlOracle,
    Utility,
    ackley_utility,
    instantaneous_regret,
    load_tabular,
    rkhs_utility,
    scalar_feedback,
)
from .inference import LOGISTIC, PreferenceHistory, fit
from .kernels import BaseKernel, DuelingKernel, draw_rkhs_sample, dueling_gram_cross
from .numeric import NotPsd, rng_from_seed
from .policies import (
    CandidateSet,
    PairDecision,
    gpts_select,
    maxminlcb_select,
    pfts_select,
    popbo_select,
    random_select,
)
from .scalar_gp import fit_scalar

PREFERENTIAL_POLICIES = ("pfts", "maxminlcb", "popbo", "random")
SCALAR_POLICIES = ("gpts",)
APPENDIX_LOG_TERM = float(np.log(2.0 / 0.05))


class ConfigError(ValueError):
    """Run configuration failed validation before round one."""


@dataclass
class KernelSpec:
    family: str = "matern"
    lengthscale: float = 0.1
    nu: float = 2.5
    signal_variance: float = 1.0

    def build(self) -> BaseKernel:
        return BaseKernel(
            family=self.family,
            lengthscale=self.lengthscale,
            nu=self.nu,
            signal_variance=self.signal_variance,
        )


@dataclass
class EnvironmentSpec:
    kind: str = "ackley"  # ackley | rkhs | tabular
    grid_points: int = 40
    bounds: tuple | None = None  # defaults per kind: ackley [-5, 5], rkhs [0, 1]
    utility_seed: int = 7  # rkhs: seed of the sampled utility, shared by all runs
    utility_norm: float = 2.0  # rkhs: exact RKHS norm of the sampled utility
    path: str | None = None  # tabular: CSV path
    feature_columns: tuple = ()
    utility_column: str = ""
    rescale: tuple | None = None
    divide_by: float | None = None


@dataclass
class PolicySpec:
    name: str = "pfts"
    v_schedule: str = "appendix"  # appendix | theory
    beta: float = 1.0  # confidence width for maxminlcb / popbo
    delta: float = 0.05  # theory schedule and recorded widths
    scalar_lambda: float = 1.0  # gpts regularization (noise variance)
    noise_sd: float = 1.0  # gpts observation noise

    def key(self) -> str:
        return self.name


@dataclass
class RunConfig:
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    policies: list = field(default_factory=lambda: [PolicySpec()])
    horizon: int = 300
    seeds: tuple = (0,)
    lam: float = 0.05
    norm_bound: float = 2.0
    out: str = "results"

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.lam <= 0 or self.norm_bound <= 0:
            raise ConfigError("lam and norm_bound must be positive")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        for policy in self.policies:
            if policy.name not in PREFERENTIAL_POLICIES + SCALAR_POLICIES:
                raise ConfigError(f"unknown policy {policy.name!r}")
            if policy.v_schedule not in ("appendix", "theory"):
                raise ConfigError(f"unknown v schedule {policy.v_schedule!r}")
        if self.environment.kind not in ("ackley", "rkhs", "tabular"):
            raise ConfigError(f"unknown environment kind {self.environment.kind!r}")
        if self.environment.kind == "tabular":
            if not self.environment.path:
                raise ConfigError("tabular environment requires a path")
            if not self.environment.feature_columns or not self.environment.utility_column:
                raise ConfigError("tabular environment requires feature and utility columns")


def config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from a nested mapping (parsed YAML)."""
    raw = dict(raw or {})
    env = EnvironmentSpec(**_tupled(raw.get("environment", {}), ("bounds", "feature_columns", "rescale")))
    kernel = KernelSpec(**raw.get("kernel", {}))
    policy_entries = raw.get("policies")
    if policy_entries is None:
        policy_entries = [raw.get("policy", {})]
    policies = [PolicySpec(**entry) for entry in policy_entries]
    run = raw.get("run", {})
    cfg = RunConfig(
        environment=env,
        kernel=kernel,
        policies=policies,
        horizon=int(run.get("horizon", 300)),
        seeds=tuple(int(s) for s in run.get("seeds", (0,))),
        lam=float(run.get("lambda", run.get("lam", 0.05))),
        norm_bound=float(run.get("norm_bound", 2.0)),
        out=str(run.get("out", "results")),
    )
    cfg.validate()
    return cfg


def _tupled(mapping: dict, keys: tuple) -> dict:
    mapping = dict(mapping)
    for key in keys:
        if key in mapping and mapping[key] is not None:
            mapping[key] = tuple(mapping[key])
    return mapping


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return config_from_dict(yaml.safe_load(handle))


def build_environment(cfg: RunConfig) -> tuple[CandidateSet, Utility]:
    env = cfg.environment
    if env.kind == "ackley":
        lo, hi = env.bounds if env.bounds is not None else (-5.0, 5.0)
        candidates = CandidateSet.evenly_spaced(float(lo), float(hi), env.grid_points)
        return candidates, ackley_utility()
    if env.kind == "rkhs":
        lo, hi = env.bounds if env.bounds is not None else (0.0, 1.0)
        candidates = CandidateSet.evenly_spaced(float(lo), float(hi), env.grid_points)
        sample = draw_rkhs_sample(
            cfg.kernel.build(), candidates, env.utility_norm, rng_from_seed(env.utility_seed, 2)
        )
        return candidates, rkhs_utility(sample)
    try:
        return load_tabular(
            env.path,
            list(env.feature_columns),
            env.utility_column,
            rescale=env.rescale,
            divide_by=env.divide_by,
        )
    except OSError as exc:
        raise ConfigError(f"cannot read tabular data: {exc}") from exc


@dataclass
class RoundRecord:
    t: int
    first: int
    second: int
    feedback: float
    regret: float
    cum_regret: float
    sigma: float
    beta: float
    wall_ms: float


@dataclass
class RegretTrace:
    policy: str
    seed: int
    records: list
    error: str | None = None

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.regret for r in self.records])

    @property
    def cum_regrets(self) -> np.ndarray:
        return np.array([r.cum_regret for r in self.records])


def exploration_scale(policy: PolicySpec, t: int, posterior=None) -> float:
    """Exploration scale v_t for Thompson draws at round t (1-based).

    The practical schedule sets v_t^2 = sqrt(t + 1 + log(2 / 0.05)); the
    theory schedule uses the confidence width of the current posterior.
    """
    if policy.v_schedule == "appendix":
        return float((t + 1.0 + APPENDIX_LOG_TERM) ** 0.25)
    if posterior is None:
        raise ConfigError("theory schedule needs a fitted preferential posterior")
    return inference.beta(posterior, policy.delta)


def run_episode(cfg: RunConfig, policy: PolicySpec, seed: int) -> RegretTrace:
    """One full optimization episode for a single policy and seed."""
    cfg.validate()
    candidates, utility = build_environment(cfg)
    x_star = candidates.points[utility.grid_argmax(candidates)]
    oracle = BtlOracle(utility=utility, link=LOGISTIC, rng=rng_from_seed(seed, 0))
    policy_rng = rng_from_seed(seed, 1)
    if policy.name in SCALAR_POLICIES:
        return _run_scalar_episode(cfg, policy, seed, candidates, utility, x_star, oracle, policy_rng)
    return _run_preferential_episode(cfg, policy, seed, candidates, utility, x_star, oracle, policy_rng)


def _run_preferential_episode(
    cfg, policy, seed, candidates, utility, x_star, oracle, policy_rng
) -> RegretTrace:
    dueling = DuelingKernel(cfg.kernel.build())
    history = PreferenceHistory(candidates.dim)
    gram = np.zeros((0, 0))
    theta = np.zeros(0)
    previous_first: int | None = None
    records: list[RoundRecord] = []
    cum = 0.0
    error = None
    for t in range(1, cfg.horizon + 1):
        started = time.perf_counter()
        try:
            if policy.name == "random":
                posterior = None
                decision = random_select(candidates, policy_rng)
            else:
                posterior = fit(
                    history, dueling, cfg.lam, cfg.norm_bound,
                    warm_start=theta, gram_matrix=gram,
                )
                theta = posterior.theta
                if policy.name == "pfts":
                    v = exploration_scale(policy, t, posterior)
                    decision = pfts_select(posterior, candidates, v, policy_rng)
                elif policy.name == "maxminlcb":
                    decision = maxminlcb_select(posterior, candidates, policy.beta)
                else:
                    decision = popbo_select(posterior, candidates, previous_first, policy.beta)
            first_point = candidates.points[decision.first]
            second_point = candidates.points[decision.second]
            pair = np.stack([first_point, second_point])
            if posterior is None:
                sigma_value, beta_value = float("nan"), float("nan")
            else:
                sigma_value = inference.sigma(posterior, pair)
                beta_value = inference.beta(posterior, policy.delta)
            y = oracle.preference(first_point, second_point)
            regret = instantaneous_regret(utility, x_star, first_point, second_point)
            cum += regret
            records.append(
                RoundRecord(
                    t=t,
                    first=decision.first,
                    second=decision.second,
                    feedback=float(y),
                    regret=regret,
                    cum_regret=cum,
                    sigma=sigma_value,
                    beta=beta_value,
                    wall_ms=(time.perf_counter() - started) * 1e3,
                )
            )
            if policy.name != "random":
                gram = _grow_gram(dueling, gram, history.pairs, pair)
            history.append(first_point, second_point, y)
            previous_first = decision.first
        except (NotPsd, inference.NoConvergence) as exc:
            error = f"round {t}: {type(exc).__name__}: {exc}"
            break
    return RegretTrace(policy=policy.key(), seed=seed, records=records, error=error)


def _grow_gram(dueling, gram, old_pairs, new_pair) -> np.ndarray:
    """Append one pair's row/column to an existing pair Gram matrix."""
    new_pair = new_pair[None, ...]
    diag = dueling_gram_cross(dueling, new_pair, new_pair)
    if gram.shape[0] == 0:
        return diag
    cross = dueling_gram_cross(dueling, old_pairs, new_pair)
    top = np.hstack([gram, cross])
    bottom = np.hstack([cross.T, diag])
    return np.vstack([top, bottom])


def _run_scalar_episode(
    cfg, policy, seed, candidates, utility, x_star, oracle, policy_rng
) -> RegretTrace:
    base = cfg.kernel.build()
    points: list[np.ndarray] = []
    observations: list[float] = []
    records: list[RoundRecord] = []
    cum = 0.0
    error = None
    for t in range(1, cfg.horizon + 1):
        started = time.perf_counter()
        try:
            posterior = fit_scalar(
                np.asarray(points) if points else np.zeros((0, candidates.dim)),
                np.asarray(observations),
                base,
                policy.scalar_lambda,
            )
            v = exploration_scale(policy, t)
            index = gpts_select(posterior, candidates, v, policy_rng)
            x = candidates.points[index]
            _, variance = posterior.mean_var(x)
            observation = scalar_feedback(utility, x, oracle.rng, policy.noise_sd)
            regret = instantaneous_regret(utility, x_star, x, x)
            cum += regret
            records.append(
                RoundRecord(
                    t=t,
                    first=index,
                    second=index,
                    feedback=observation,
                    regret=regret,
                    cum_regret=cum,
                    sigma=float(np.sqrt(variance)),
                    beta=float("nan"),
                    wall_ms=(time.perf_counter() - started) * 1e3,
                )
            )
            points.append(x)
            observations.append(observation)
        except NotPsd as exc:
            error = f"round {t}: NotPsd: {exc}"
            break
    return RegretTrace(policy=policy.key(), seed=seed, records=records, error=error)


def run_suite(cfg: RunConfig) -> dict:
    """Episodes for every (policy, seed), plus per-policy aggregates.

    Failed episodes keep their partial trace and error record; aggregation
    covers the seeds that completed and is independent of seed order.
    """
    cfg.validate()
    traces = {}
    for policy in cfg.policies:
        for seed in cfg.seeds:
            traces[(policy.key(), seed)] = run_episode(cfg, policy, seed)
    return {"traces": traces, "aggregates": aggregate(traces, cfg.horizon)}


def aggregate(traces: dict, horizon: int) -> dict:
    """Per-policy per-round mean and standard error of both regret series."""
    by_policy: dict[str, list[RegretTrace]] = {}
    for (policy, _seed), trace in sorted(traces.items()):
        by_policy.setdefault(policy, []).append(trace)
    result = {}
    for policy, policy_traces in by_policy.items():
        complete, failed = [], []
        for tr in policy_traces:
            if tr.error is None and len(tr.records) == horizon:
                complete.append(tr)
            else:
                failed.append(tr.seed)
        if not complete:
            result[policy] = {"seeds": [], "failed_seeds": failed}
            continue
        inst = np.stack([tr.regrets for tr in complete])
        cum = np.stack([tr.cum_regrets for tr in complete])
        n = inst.shape[0]

        def standard_error(a):
            if n <= 1:
                return np.zeros(a.shape[1])
            return a.std(axis=0, ddof=1) / np.sqrt(n)

        result[policy] = {
            "seeds": [tr.seed for tr in complete],
            "failed_seeds": failed,
            "mean_regret": inst.mean(axis=0),
            "se_regret": standard_error(inst),
            "mean_cum_regret": cum.mean(axis=0),
            "se_cum_regret": standard_error(cum),
        }
    return result


def cost_adjusted(traces: dict, xis, horizon: int, step: int = 25) -> list:
    """Cost-adjusted comparison table between preference and scalar runs.

    A budget of c preference units buys c preference rounds, or c // xi
    scalar rounds.  Rows where the scalar policy cannot afford a single round
    report a missing regret.
    """
    agg = aggregate(traces, horizon)
    rows = []
    budgets = list(range(step, horizon + 1, step))
    for xi in xis:
        if xi < 1:
            raise ConfigError("cost ratios must be >= 1")
        for policy, stats in sorted(agg.items()):
            if not stats.get("seeds"):
                continue
            is_scalar = policy in SCALAR_POLICIES
            for budget in budgets:
                round_used = budget // xi if is_scalar else budget
                if round_used < 1:
                    rows.append(
                        {"policy": policy, "xi": xi, "budget": budget,
                         "round_used": None, "mean_regret": None, "se_regret": None}
                    )
                    continue
                idx = round_used - 1
                rows.append(
                    {
                        "policy": policy,
                        "xi": xi,
                        "budget": budget,
                        "round_used": round_used,
                        "mean_regret": float(stats["mean_regret"][idx]),
                        "se_regret": float(stats["se_regret"][idx]),
                    }
                )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if np.isnan(value):
            return ""
        return repr(value)
    return str(value)


def trace_csv_text(traces: dict) -> str:
    """Long-format per-round CSV; byte deterministic for fixed inputs.

    Wall-clock timings are intentionally excluded so that reruns of the same
    (config, seed) produce identical bytes.
    """
    lines = ["policy,seed,t,first,second,feedback,regret,cum_regret,sigma,beta"]
    for (policy, seed), trace in sorted(traces.items()):
        for r in trace.records:
            lines.append(
                ",".join(
                    [
                        policy,
                        str(seed),
                        str(r.t),
                        str(r.first),
                        str(r.second),
                        _fmt(float(r.feedback)),
                        _fmt(float(r.regret)),
                        _fmt(float(r.cum_regret)),
                        _fmt(float(r.sigma)),
                        _fmt(float(r.beta)),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def aggregate_csv_text(aggregates: dict) -> str:
    lines = ["policy,t,mean_regret,se_regret,mean_cum_regret,se_cum_regret"]
    for policy in sorted(aggregates):
        stats = aggregates[policy]
        if not stats.get("seeds"):
            continue
        for i in range(stats["mean_regret"].shape[0]):
            lines.append(
                ",".join(
                    [
                        policy,
                        str(i + 1),
                        _fmt(float(stats["mean_regret"][i])),
                        _fmt(float(stats["se_regret"][i])),
                        _fmt(float(stats["mean_cum_regret"][i])),
                        _fmt(float(stats["se_cum_regret"][i])),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def cost_csv_text(rows: list) -> str:
    lines = ["policy,xi,budget,round_used,mean_regret,se_regret"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row["policy"],
                    str(row["xi"]),
                    str(row["budget"]),
                    _fmt(row["round_used"]),
                    _fmt(row["mean_regret"]),
                    _fmt(row["se_regret"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def summary_json_text(cfg: RunConfig, aggregates: dict) -> str:
    payload = {
        "config": asdict(cfg),
        "policies": {
            policy: {
                "seeds": stats.get("seeds", []),
                "failed_seeds": stats.get("failed_seeds", []),
                "final_mean_cum_regret": (
                    float(stats["mean_cum_regret"][-1]) if stats.get("seeds") else None
                ),
                "final_se_cum_regret": (
                    float(stats["se_cum_regret"][-1]) if stats.get("seeds") else None
                ),
            }
            for policy, stats in aggregates.items()
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def emit(cfg: RunConfig, suite: dict, out_dir) -> dict:
    """Write trace CSV, aggregate CSV, and a JSON summary under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in (
        ("trace.csv", trace_csv_text(suite["traces"])),
        ("aggregate.csv", aggregate_csv_text(suite["aggregates"])),
        ("summary.json", summary_json_text(cfg, suite["aggregates"])),
    ):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written[name] = path
    return written
