"""Metrics, validation environments, evaluation runs and analysis exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import baselines as bl
from . import channel, topology
from .env import EnvConfig, NetworkEnv


class InsufficientCandidates(RuntimeError):
    """Too few realizations fell inside the validation acceptance band."""


# -------------------------------------------------------------------- metrics

def pct5_rate(avg_rates: np.ndarray) -> float:
    """Largest rate threshold met by at least 95% of UEs (order statistic)."""
    rates = np.sort(np.asarray(avg_rates))
    m = (5 * len(rates)) // 100 + 1          # m-th smallest value
    return float(rates[m - 1])


@dataclass
class EpisodeMetrics:
    num_ues: int
    sum_rate_bpshz: float
    pct5_bpshz: float
    sum_rate_mbps: float
    pct5_mbps: float
    score: float     # sum_rate_mbps / K + 3 * pct5_mbps

    @classmethod
    def from_rates(cls, avg_rates: np.ndarray, bandwidth_hz: float) -> "EpisodeMetrics":
        k = len(avg_rates)
        s = float(np.sum(avg_rates))
        p5 = pct5_rate(avg_rates)
        mbps = bandwidth_hz / 1e6
        return cls(num_ues=k, sum_rate_bpshz=s, pct5_bpshz=p5,
                   sum_rate_mbps=s * mbps, pct5_mbps=p5 * mbps,
                   score=s * mbps / k + 3.0 * p5 * mbps)


def episode_metrics(avg_rates, num_ues: int, bandwidth_hz: float) -> EpisodeMetrics:
    avg_rates = np.asarray(avg_rates)
    if len(avg_rates) != num_ues:
        raise ValueError("rate vector length does not match num_ues")
    return EpisodeMetrics.from_rates(avg_rates, bandwidth_hz)


def dominates(a: EpisodeMetrics, b: EpisodeMetrics) -> bool:
    """Pareto dominance on (sum-rate, 5th percentile rate)."""
    ge = a.sum_rate_mbps >= b.sum_rate_mbps and a.pct5_mbps >= b.pct5_mbps
    strict = a.sum_rate_mbps > b.sum_rate_mbps or a.pct5_mbps > b.pct5_mbps
    return ge and strict


# -------------------------------------------------------------------- rollout

class BaselinePolicy:
    """Adapter turning a baseline decider into a rollout policy."""

    kind = "decisions"

    def __init__(self, name: str, **kwargs):
        self.name = name
        self._decide = bl.get_baseline(name)
        self._kwargs = kwargs

    def act(self, env: NetworkEnv, obs):
        return self._decide(env, **self._kwargs)


class RandomPolicy:
    """Uniform random actions over the discrete action space."""

    kind = "actions"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def act(self, env: NetworkEnv, obs):
        return self.rng.integers(0, env.config.num_actions,
                                 size=env.deployment.num_aps)


def run_episode(env: NetworkEnv, seed: int, policy, trace_rows: list | None = None):
    """Roll one full episode; returns the per-UE time-average rates.

    Baseline (decision) policies skip observation building for speed unless a
    trace is requested.
    """
    build_obs = policy.kind == "actions" or trace_rows is not None
    obs = env.reset(seed)
    done = False
    while not done:
        t = env.t
        if policy.kind == "actions":
            actions = np.asarray(policy.act(env, obs))
            obs, rewards, done, info = env.step(actions)
        else:
            actions = None
            decisions = policy.act(env, obs)
            obs, rewards, done, info = env.step_decisions(decisions, build_obs=build_obs)
        if trace_rows is not None:
            p_floor_w = 1e-30
            for i, dec in enumerate(info["decisions"]):
                trace_rows.append({
                    "t": t, "ap": i,
                    "action": int(actions[i]) if actions is not None else "",
                    "ue": dec.ue,
                    "power_dbm": (10.0 * np.log10(max(dec.power_w, p_floor_w)) + 30.0
                                  if not dec.off else ""),
                    "rate_bpshz": info["rates"][dec.ue] if not dec.off else 0.0,
                    "reward": rewards[i],
                })
    return env.average_rates()


def evaluate_policy(env_config: EnvConfig, policy, seeds) -> dict:
    """Aggregate metrics of a policy over a set of environment realizations."""
    env = NetworkEnv(env_config)
    per_env = [episode_metrics(run_episode(env, int(s), policy),
                               env_config.deployment.num_ues,
                               env_config.bandwidth_hz)
               for s in seeds]
    sums = np.array([m.sum_rate_mbps for m in per_env])
    p5s = np.array([m.pct5_mbps for m in per_env])
    k = env_config.deployment.num_ues
    return {
        "per_env": per_env,
        "sum_rate_mbps": float(sums.mean()),
        "sum_rate_mbps_std": float(sums.std()),
        "pct5_mbps": float(p5s.mean()),
        "pct5_mbps_std": float(p5s.std()),
        "score": float(sums.mean() / k + 3.0 * p5s.mean()),
    }


# ------------------------------------------------------------- validation set

@dataclass
class ValidationSet:
    env_config: EnvConfig
    seeds: list[int]
    reference: dict   # per-baseline population means and accepted per-seed metrics

    def to_dict(self) -> dict:
        return {"env_config": self.env_config.to_dict(),
                "seeds": self.seeds, "reference": self.reference}

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationSet":
        return cls(env_config=EnvConfig.from_dict(d["env_config"]),
                   seeds=list(d["seeds"]), reference=d["reference"])

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "ValidationSet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def build_validation_set(env_config: EnvConfig, target_count: int,
                         population_size: int, tolerance: float,
                         rng: np.random.Generator) -> ValidationSet:
    """Pick realizations typical of the population under full reuse and TDM.

    A realization is accepted when its sum-rate and 5th percentile rate under
    BOTH baselines are within `tolerance` relative error of the population
    means over `population_size` fresh realizations.
    """
    if population_size < target_count:
        raise ValueError("population must be at least the target count")
    env = NetworkEnv(env_config)
    seeds = [int(rng.integers(2 ** 63)) for _ in range(population_size)]
    names = ("full_reuse", "tdm")
    per_seed = {name: [] for name in names}
    for s in seeds:
        for name in names:
            rates = run_episode(env, s, BaselinePolicy(name))
            per_seed[name].append(episode_metrics(
                rates, env_config.deployment.num_ues, env_config.bandwidth_hz))
    means = {name: (float(np.mean([m.sum_rate_mbps for m in per_seed[name]])),
                    float(np.mean([m.pct5_mbps for m in per_seed[name]])))
             for name in names}

    def within(value, mean):
        return abs(value - mean) <= tolerance * abs(mean)

    accepted, reference_rows = [], []
    for idx, s in enumerate(seeds):
        ok = all(
            within(per_seed[name][idx].sum_rate_mbps, means[name][0])
            and within(per_seed[name][idx].pct5_mbps, means[name][1])
            for name in names)
        if ok:
            accepted.append(s)
            reference_rows.append({
                name: {"sum_rate_mbps": per_seed[name][idx].sum_rate_mbps,
                       "pct5_mbps": per_seed[name][idx].pct5_mbps}
                for name in names})
            if len(accepted) == target_count:
                break
    if len(accepted) < target_count:
        raise InsufficientCandidates(
            f"only {len(accepted)}/{target_count} realizations in the "
            f"{tolerance:.0%} band over {population_size} candidates")
    reference = {
        "population_means": {name: {"sum_rate_mbps": means[name][0],
                                    "pct5_mbps": means[name][1]}
                             for name in names},
        "tolerance": tolerance,
        "accepted": reference_rows,
    }
    return ValidationSet(env_config=env_config, seeds=accepted, reference=reference)


# ------------------------------------------------------------------- analyses

def interference_profile(env_config: EnvConfig, n_values, num_realizations: int,
                         rng: np.random.Generator) -> dict:
    """Mean long-term UE SINR (dB) vs number of nearest interferers included.

    Long-term gains only, every AP at full power; interference at a UE sums
    over the n' APs physically closest to its serving AP.
    """
    cfg = env_config
    dep_cfg = cfg.deployment
    totals = {n: [] for n in n_values}
    for _ in range(num_realizations):
        dep = topology.generate_deployment(dep_cfg, rng)
        gains = channel.draw_long_term_gains(dep, cfg.path_loss, cfg.shadow_std_db, rng)
        assoc = topology.associate_max_rsrp(gains.power)
        remotes = topology.nearest_remote_agents(dep.ap_positions, dep_cfg.num_aps - 1)
        g2 = gains.power
        for j in range(dep_cfg.num_ues):
            a = assoc[j]
            sig = g2[j, a] * cfg.p_max_w
            for n in n_values:
                interferers = remotes[a][:n]
                interf = float(np.sum(g2[j, interferers] * cfg.p_max_w))
                totals[n].append(10.0 * np.log10(sig / (interf + cfg.noise_w)))
    return {int(n): float(np.mean(v)) for n, v in totals.items()}


def export_decision_log(env_config: EnvConfig, policy, seeds, path) -> int:
    """Per agent-interval inputs/outputs of an action policy, as CSV.

    Columns carry the top-UE weight and SINR, the local top-k PF ratios and
    the remote agents' top-UE PF ratios, plus the chosen action.
    """
    if policy.kind != "actions":
        raise ValueError("decision logging needs an action policy")
    cfg = env_config
    k, n = cfg.top_k, cfg.num_remote
    cols = (["t", "agent", "top_weight", "top_sinr_db"]
            + [f"pf_local_{s + 1}" for s in range(k)]
            + [f"pf_remote_{r + 1}" for r in range(n)]
            + ["action"])
    env = NetworkEnv(cfg)
    rows = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for s in seeds:
            obs = env.reset(int(s))
            done = False
            while not done:
                actions = np.asarray(policy.act(env, obs))
                for i in range(env.deployment.num_aps):
                    o = obs[i]
                    w = o[0::2]
                    sinr_db = o[1::2]
                    pf = w * np.log2(1.0 + 10.0 ** (sinr_db / 10.0))
                    row = ([env.t, i, w[0], sinr_db[0]]
                           + [pf[slot] for slot in range(k)]
                           + [pf[(r + 1) * k] for r in range(n)]
                           + [int(actions[i])])
                    writer.writerow(row)
                    rows += 1
                obs, _, done, _ = env.step(actions)
    return rows


def metrics_to_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
