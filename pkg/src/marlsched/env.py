"""Episodic multi-agent scheduling environment with delayed feedback."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import channel, linklevel, topology
from .channel import PathLossParams
from .linklevel import LinkStats, ScheduleDecision
from .topology import DeploymentConfig


class ConfigError(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class EpisodeFinished(RuntimeError):
    pass


@dataclass
class EnvConfig:
    """Wireless environment parameters; defaults follow the reference setup."""

    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    episode_length: int = 2000          # T, scheduling intervals
    top_k: int = 3                      # observable UEs per agent
    num_remote: int = 3                 # remote agents per agent
    power_levels: int = 1               # p, positive transmit power levels
    feedback_period: int = 10           # report cadence, intervals
    feedback_delay: int = 5             # report delivery delay, intervals
    backhaul_delay: int = 5             # extra delay toward remote APs
    reward_exponent: float = 0.8        # lambda on the served UE's weight
    sort_by_pf: bool = True             # False = unsorted fixed-slot variant
    default_weight: float = 0.0
    default_sinr_db: float = -60.0

    p_max_dbm: float = 10.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    alpha_rate: float = 0.01
    alpha_interference: float = 0.05
    rate_floor: float = 1e-3

    path_loss: PathLossParams = field(default_factory=PathLossParams)
    shadow_std_db: float = 7.0
    doppler_hz: float = 8.0             # 1 m/s pedestrian at 2.4 GHz
    interval_duration_s: float = 1e-3
    num_sinusoids: int = 16

    @property
    def obs_dim(self) -> int:
        return 2 * (self.num_remote + 1) * self.top_k

    @property
    def num_actions(self) -> int:
        return 1 + self.power_levels * self.top_k

    @property
    def p_max_w(self) -> float:
        return 10.0 ** ((self.p_max_dbm - 30.0) / 10.0)

    @property
    def noise_w(self) -> float:
        noise_dbm = self.noise_psd_dbm_hz + 10.0 * np.log10(self.bandwidth_hz)
        return 10.0 ** ((noise_dbm - 30.0) / 10.0)

    def power_level_watts(self) -> np.ndarray:
        """Positive transmit power levels, ascending; the top one is P_max.

        Levels are uniform in dB over [P_max - 20 dB, P_max].
        """
        if self.power_levels == 1:
            return np.array([self.p_max_w])
        dbm = np.linspace(self.p_max_dbm - 20.0, self.p_max_dbm, self.power_levels)
        return 10.0 ** ((dbm - 30.0) / 10.0)

    def validate(self) -> None:
        self.deployment.validate()
        if self.episode_length < 1:
            raise ConfigError("episode_length must be >= 1")
        if self.top_k < 1 or self.power_levels < 1 or self.num_remote < 0:
            raise ConfigError("top_k, power_levels >= 1 and num_remote >= 0 required")
        if self.feedback_period < 1 or self.feedback_delay < 0 or self.backhaul_delay < 0:
            raise ConfigError("feedback period must be >= 1 and delays >= 0")
        if not 0.0 <= self.reward_exponent <= 1.0:
            raise ConfigError("reward_exponent must lie in [0, 1]")
        if not self.sort_by_pf:
            if self.deployment.num_ues != self.deployment.num_aps * self.top_k:
                raise ConfigError(
                    "unsorted observations require num_ues == num_aps * top_k")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        if "deployment" in d:
            d["deployment"] = DeploymentConfig(**d["deployment"])
        if "path_loss" in d:
            d["path_loss"] = PathLossParams(**d["path_loss"])
        return cls(**d)

    def fingerprint(self) -> str:
        dep = self.deployment
        return (f"N{dep.num_aps}-K{dep.num_ues}-k{self.top_k}-n{self.num_remote}"
                f"-p{self.power_levels}-T{self.episode_length}")


@dataclass
class FeedbackSnapshot:
    """Synchronous report of all UEs' (weight, SINR) measured at t_measured."""

    t_measured: int
    weight: np.ndarray     # (K,)
    sinr_db: np.ndarray    # (K,)


class NetworkEnv:
    """One multi-AP downlink network instance stepped interval by interval.

    Single-writer: step() mutates the instance. Run independent instances
    (with independent seeds) for parallel data collection.
    """

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        self.t = 0
        self._done = True

    # ------------------------------------------------------------------ reset

    def reset(self, seed: int) -> np.ndarray:
        """Start a new episode: fresh deployment, gains, fading and stats."""
        cfg = self.config
        rng = np.random.default_rng(seed)
        dep = topology.generate_deployment(cfg.deployment, rng)
        gains = channel.draw_long_term_gains(dep, cfg.path_loss, cfg.shadow_std_db, rng)
        assoc = topology.associate_max_rsrp(gains.power)
        if not cfg.sort_by_pf:
            assoc = topology.balance_pools(assoc, gains.power, cfg.top_k)
        dep.association = assoc
        dep.remote_agents = topology.nearest_remote_agents(dep.ap_positions, cfg.num_remote)
        self.deployment = dep
        self.long_term = gains
        self.fading = channel.create_fading(
            dep.num_ues, dep.num_aps, cfg.num_sinusoids, cfg.doppler_hz,
            cfg.interval_duration_s, rng)
        self.pools = dep.pools()
        self.association = assoc
        self.stats = LinkStats.initial(dep.num_ues, cfg.rate_floor)
        self.rate_sum = np.zeros(dep.num_ues)
        self._snapshots: list[FeedbackSnapshot] = []
        self._done = False
        self.t = 1
        self._refresh_interval_state()
        obs, slots, mask = self._build_observations()
        self._slot_map, self._last_obs_mask = slots, mask
        return obs

    # ------------------------------------------------------------- per-interval

    def _refresh_interval_state(self):
        """Gains for interval t, plus feedback generation on the report cadence."""
        cfg = self.config
        h = self.fading.sample_all(self.t)
        self.g2 = self.long_term.power * np.abs(h) ** 2
        if self.t % cfg.feedback_period == 0:
            sinr = linklevel.measured_sinr(
                self.g2[np.arange(self.deployment.num_ues), self.association],
                cfg.p_max_w, self.stats.avg_interference, cfg.noise_w)
            self._snapshots.append(FeedbackSnapshot(
                t_measured=self.t,
                weight=self.stats.weight.copy(),
                sinr_db=10.0 * np.log10(sinr)))
        # drop snapshots that can never be the latest visible one again
        horizon = self.t - cfg.feedback_delay - cfg.backhaul_delay
        while len(self._snapshots) >= 2 and self._snapshots[1].t_measured <= horizon:
            self._snapshots.pop(0)

    def _latest_visible(self, extra_delay: int) -> FeedbackSnapshot | None:
        limit = self.t - self.config.feedback_delay - extra_delay
        vis = None
        for snap in self._snapshots:
            if snap.t_measured <= limit:
                vis = snap
        return vis

    def visible_link_values(self, remote: bool = False):
        """Delayed per-UE (weight, sinr_db, pf, t_measured) as seen by the APs.

        remote=True applies the extra backhaul delay. Defaults fill in before
        the first report becomes visible.
        """
        cfg = self.config
        snap = self._latest_visible(cfg.backhaul_delay if remote else 0)
        k_ues = self.deployment.num_ues
        if snap is None:
            w = np.full(k_ues, cfg.default_weight)
            s = np.full(k_ues, cfg.default_sinr_db)
            t_meas = None
        else:
            w, s, t_meas = snap.weight, snap.sinr_db, snap.t_measured
        pf = linklevel.pf_ratio(w, 10.0 ** (s / 10.0))
        return w, s, pf, t_meas

    def _build_observations(self):
        """Fixed-size per-agent observation vectors.

        Layout per agent: (local block, then remote blocks by ascending AP
        distance), each block holding top_k (weight, sinr_db) slot pairs.
        Returns (obs (N, obs_dim), local slot->UE map (N, top_k), padding mask).
        """
        cfg = self.config
        n_aps = self.deployment.num_aps
        w_loc, s_loc, pf_loc, self._local_t_meas = self.visible_link_values(remote=False)
        w_rem, s_rem, pf_rem, self._remote_t_meas = self.visible_link_values(remote=True)

        obs = np.empty((n_aps, cfg.obs_dim))
        mask = np.zeros((n_aps, cfg.obs_dim), dtype=bool)
        slot_map = np.full((n_aps, cfg.top_k), -1, dtype=int)
        for i in range(n_aps):
            blocks = [(self.pools[i], w_loc, s_loc, pf_loc)]
            for r in self.deployment.remote_agents[i]:
                blocks.append((self.pools[r], w_rem, s_rem, pf_rem))
            while len(blocks) < cfg.num_remote + 1:
                blocks.append((np.empty(0, dtype=int), w_loc, s_loc, pf_loc))
            pos = 0
            for b, (pool, w, s, pf) in enumerate(blocks):
                if cfg.sort_by_pf:
                    order = sorted(pool, key=lambda j: (-pf[j], j))[: cfg.top_k]
                else:
                    order = list(pool)[: cfg.top_k]
                for slot in range(cfg.top_k):
                    if slot < len(order):
                        j = order[slot]
                        obs[i, pos], obs[i, pos + 1] = w[j], s[j]
                        if b == 0:
                            slot_map[i, slot] = j
                    else:
                        obs[i, pos] = cfg.default_weight
                        obs[i, pos + 1] = cfg.default_sinr_db
                        mask[i, pos] = mask[i, pos + 1] = True
                    pos += 2
        return obs, slot_map, mask

    def agent_top_pf(self) -> np.ndarray:
        """Each agent's highest locally visible PF ratio (reward rule input)."""
        _, _, pf, _ = self.visible_link_values(remote=False)
        return np.array([pf[pool].max() if len(pool) else 0.0 for pool in self.pools])

    def true_pf(self) -> np.ndarray:
        """Ground-truth PF ratios from current stats and instantaneous gains.

        Used by the centralized baselines, which bypass the feedback pipeline.
        """
        cfg = self.config
        sinr = linklevel.measured_sinr(
            self.g2[np.arange(self.deployment.num_ues), self.association],
            cfg.p_max_w, self.stats.avg_interference, cfg.noise_w)
        return linklevel.pf_ratio(self.stats.weight, sinr)

    # ------------------------------------------------------------------ actions

    def decode_action(self, agent: int, action: int):
        """Map a discrete action id to a schedule decision.

        Returns (decision, invalid): selecting an empty slot maps to the off
        action with the invalid flag raised.
        """
        cfg = self.config
        if action < 0 or action > cfg.power_levels * cfg.top_k:
            raise OutOfRange(f"action {action} outside [0, {cfg.power_levels * cfg.top_k}]")
        if action == 0:
            return ScheduleDecision.silent(), False
        level = (action - 1) // cfg.top_k          # 0-based power level
        slot = (action - 1) % cfg.top_k
        ue = self._slot_map[agent, slot]
        if ue < 0:
            return ScheduleDecision.silent(), True
        power = self.config.power_level_watts()[level]
        return ScheduleDecision.serve(int(ue), float(power)), False

    def compute_reward(self, decisions, rates, invalid) -> np.ndarray:
        """Weighted sum-rate reward with the all-off and invalid exceptions."""
        cfg = self.config
        w_vis, _, _, _ = self.visible_link_values(remote=False)
        r = 0.0
        any_tx = False
        for i, dec in enumerate(decisions):
            if not dec.off:
                any_tx = True
                r += np.power(w_vis[dec.ue], cfg.reward_exponent) * rates[dec.ue]
        rewards = np.full(self.deployment.num_aps, r)
        if not any_tx:
            top = self.agent_top_pf()
            rewards[:] = 0.0
            m = int(np.argmax(top))
            rewards[m] = -top[m]
        for i, bad in enumerate(invalid):
            if bad:
                rewards[i] = 0.0
        return rewards

    # -------------------------------------------------------------------- step

    def step(self, actions):
        """Advance one interval with per-agent discrete actions."""
        decisions, invalid = [], []
        for i, a in enumerate(actions):
            dec, bad = self.decode_action(i, int(a))
            decisions.append(dec)
            invalid.append(bad)
        return self.step_decisions(decisions, invalid)

    def step_decisions(self, decisions, invalid=None, build_obs: bool = True):
        """Advance one interval with explicit decisions (baseline fast path)."""
        if self._done:
            raise EpisodeFinished("episode is over; call reset()")
        cfg = self.config
        if invalid is None:
            invalid = [False] * len(decisions)
        rates, interference = linklevel.compute_rates(
            decisions, self.g2, cfg.noise_w, self.association)
        rewards = self.compute_reward(decisions, rates, invalid)
        self.rate_sum += rates
        linklevel.update_link_stats(self.stats, rates, interference,
                                    cfg.alpha_rate, cfg.alpha_interference)
        info = {"rates": rates, "interference": interference,
                "decisions": decisions, "t": self.t}
        self.t += 1
        self._done = self.t > cfg.episode_length
        obs = None
        if not self._done:
            self._refresh_interval_state()
            if build_obs:
                obs, self._slot_map, self._last_obs_mask = self._build_observations()
                info["obs_padding_mask"] = self._last_obs_mask
        return obs, rewards, self._done, info

    @property
    def done(self) -> bool:
        return self._done

    def average_rates(self) -> np.ndarray:
        """Per-UE time-average rates R_sum/T over the intervals stepped so far."""
        steps = min(self.t - 1, self.config.episode_length)
        return self.rate_sum / max(steps, 1)
