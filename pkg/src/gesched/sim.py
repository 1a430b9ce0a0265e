"""Monte Carlo rollout of scheduling policies on the true closed loop.

The simulator integrates the real system (source, estimator, channel,
acknowledgments) rather than the discretized model, so agreement with the
solved value function is evidence about the discretization, not a tautology.

Per-step order (state at t is recorded before the transition):

  u(t) from the policy at (t, e(t), b(t));  delivery iff u(t) and c(t) = 1
  cost(t) = e(t)^2 + lam * u(t)
  x(t+1) = a x(t) + w(t)
  xhat(t+1) = a x(t) on delivery, else a xhat(t)   (snap to the received
              sample, then drift: keeps e = x - xhat consistent with the
              error recursion e(t+1) = w or a e + w)
  b(t+1) = p11 / p01 on an ack / nack, else b p11 + (1-b) p01
  c(t+1) ~ Bernoulli(p11 if c(t) else p01)

Randomness: one numpy stream per (base_seed, episode, source), source 0 being
process noise and source 1 the channel (its first uniform draws c(0) from the
initial belief). Streams do not depend on the policy, so comparisons across
policies are paired (common random numbers) and the channel path is identical
across policies by construction.

The horizon should be chosen so the discarded tail beta^horizon * (bound on
the remaining cost) is negligible for the comparison at hand; SimStats
carries `tail_bias_bound` computed from the always-transmit stability bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, stationary_belief, validate
from .solver import ThresholdProfile
from .verify import CheckResult

_STREAM_NOISE = 0
_STREAM_CHANNEL = 1

Z_NONE = -1  # in-array stand-in for "no probe"; serialized as an empty field


class AlwaysTransmit:
    name = "always"

    def decide(self, t, e, b):
        return np.ones(np.shape(e), dtype=bool)


class NeverTransmit:
    name = "never"

    def decide(self, t, e, b):
        return np.zeros(np.shape(e), dtype=bool)


class Periodic:
    """Transmit every period-th step, starting at t = 0."""

    def __init__(self, period: int):
        if period < 1:
            raise ValueError("period must be >= 1")
        self.period = period
        self.name = f"periodic-{period}"

    def decide(self, t, e, b):
        u = (t % self.period) == 0
        return np.full(np.shape(e), u, dtype=bool)


class ErrorThreshold:
    """Transmit iff |e| >= theta, ignoring the belief."""

    def __init__(self, theta: float):
        self.theta = float(theta)
        self.name = f"error-threshold-{theta:g}"

    def decide(self, t, e, b):
        return np.abs(np.asarray(e)) >= self.theta


class ThresholdPolicy:
    """Transmit iff b >= b_star(|e|) from a solved threshold profile."""

    name = "threshold"

    def __init__(self, profile: ThresholdProfile):
        self.profile = profile

    def decide(self, t, e, b):
        th = self.profile.threshold_at(np.abs(np.asarray(e, dtype=float)))
        return np.asarray(b) >= th


@dataclass(frozen=True)
class EpisodeTrace:
    """Single-episode record; arrays are indexed by step t."""

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    e: np.ndarray
    c: np.ndarray
    b: np.ndarray
    u: np.ndarray
    z: np.ndarray        # Z_NONE where no probe was sent
    cost: np.ndarray     # instantaneous e^2 + lam*u
    seed: int
    episode: int

    def discounted_cost(self, beta: float) -> float:
        return float(np.sum(self.cost * beta ** self.t))


@dataclass(frozen=True)
class SimStats:
    """Aggregates of a batch of episodes under one policy."""

    policy: str
    n_episodes: int
    horizon: int
    mean_cost: float
    se_cost: float
    mean_error_cost: float
    mean_power_cost: float
    mse_per_step: np.ndarray      # mean of e(t)^2 over episodes
    mse_se_per_step: np.ndarray
    tail_bias_bound: float
    costs: np.ndarray             # per-episode discounted cost (for pairing)


def derive_rngs(base_seed: int, episode: int):
    """The (noise, channel) generators for one episode."""
    mk = lambda src: np.random.default_rng(
        np.random.SeedSequence((base_seed, episode, src)))
    return mk(_STREAM_NOISE), mk(_STREAM_CHANNEL)


def mean_square_error_bound(params: ModelParams, init_error: float = 0.0) -> float:
    """Always-transmit bound: E e(t)^2 <= (1 + e0^2) / ((1-p01)(1 - a^2(1-p01)))."""
    q = 1.0 - params.p01
    return (1.0 + init_error ** 2) / (q * (1.0 - params.a ** 2 * q))


def discounted_cost_bound(params: ModelParams, init_error: float = 0.0) -> float:
    """Discounted cost of always transmitting, bounded step by step."""
    return (mean_square_error_bound(params, init_error) + params.lam) \
        / (1.0 - params.beta)


def run_episode(policy, params: ModelParams, horizon: int, seed: int,
                episode: int = 0, init_error: float = 0.0,
                init_belief: float | None = None) -> EpisodeTrace:
    """One full trace. Matches estimate_cost's episode of the same index."""
    p = validate(params)
    b0 = stationary_belief(p) if init_belief is None else float(init_belief)
    rng_w, rng_c = derive_rngs(seed, episode)
    w = rng_w.standard_normal(horizon)
    uc = rng_c.random(horizon + 1)

    ts = np.arange(horizon)
    xs = np.empty(horizon); xhats = np.empty(horizon); es = np.empty(horizon)
    cs = np.empty(horizon, dtype=np.int8); bs = np.empty(horizon)
    us = np.empty(horizon, dtype=np.int8); zs = np.full(horizon, Z_NONE, dtype=np.int8)
    costs = np.empty(horizon)

    x, xhat, b = float(init_error), 0.0, b0
    c = 1 if uc[0] < b0 else 0
    for t in range(horizon):
        e = x - xhat
        u = bool(np.asarray(policy.decide(t, e, b)).reshape(()))
        xs[t], xhats[t], es[t], cs[t], bs[t], us[t] = x, xhat, e, c, b, u
        if u:
            zs[t] = c
        costs[t] = e * e + p.lam * u
        delivered = u and c == 1
        x_next = p.a * x + w[t]
        xhat = p.a * x if delivered else p.a * xhat
        x = x_next
        b = (p.p11 if c == 1 else p.p01) if u else (b * p.p11 + (1.0 - b) * p.p01)
        c = 1 if uc[t + 1] < (p.p11 if c == 1 else p.p01) else 0
    return EpisodeTrace(t=ts, x=xs, xhat=xhats, e=es, c=cs, b=bs, u=us, z=zs,
                        cost=costs, seed=seed, episode=episode)


def _batch_noise(base_seed: int, n_episodes: int, horizon: int):
    w = np.empty((n_episodes, horizon))
    uc = np.empty((n_episodes, horizon + 1))
    for ep in range(n_episodes):
        rng_w, rng_c = derive_rngs(base_seed, ep)
        w[ep] = rng_w.standard_normal(horizon)
        uc[ep] = rng_c.random(horizon + 1)
    return w, uc


def _rollout(policy, params: ModelParams, horizon: int, n_episodes: int,
             base_seed: int, init_error: float, init_belief: float | None):
    """Vectorized closed loop over all episodes; returns per-episode sums."""
    p = validate(params)
    b0 = stationary_belief(p) if init_belief is None else float(init_belief)
    w, uc = _batch_noise(base_seed, n_episodes, horizon)

    e = np.full(n_episodes, float(init_error))
    b = np.full(n_episodes, b0)
    c = (uc[:, 0] < b0).astype(np.int8)
    err_cost = np.zeros(n_episodes)
    pow_cost = np.zeros(n_episodes)
    e2 = np.empty((n_episodes, horizon))
    disc = 1.0
    for t in range(horizon):
        u = policy.decide(t, e, b)
        e2[:, t] = e * e
        err_cost += disc * e2[:, t]
        pow_cost += disc * p.lam * u
        delivered = u & (c == 1)
        e = np.where(delivered, w[:, t], p.a * e + w[:, t])
        b = np.where(u, np.where(c == 1, p.p11, p.p01),
                     b * p.p11 + (1.0 - b) * p.p01)
        good = np.where(c == 1, p.p11, p.p01)
        c = (uc[:, t + 1] < good).astype(np.int8)
        disc *= p.beta
    return err_cost, pow_cost, e2


def estimate_cost(policy, params: ModelParams, horizon: int, n_episodes: int,
                  base_seed: int, init_error: float = 0.0,
                  init_belief: float | None = None) -> SimStats:
    """Discounted-cost statistics of a policy from a fixed start state."""
    err_cost, pow_cost, e2 = _rollout(policy, params, horizon, n_episodes,
                                      base_seed, init_error, init_belief)
    costs = err_cost + pow_cost
    se = float(np.std(costs, ddof=1) / np.sqrt(n_episodes)) if n_episodes > 1 else 0.0
    mse_se = (np.std(e2, axis=0, ddof=1) / np.sqrt(n_episodes)
              if n_episodes > 1 else np.zeros(horizon))
    tail = params.beta ** horizon * discounted_cost_bound(params, init_error)
    return SimStats(policy=policy.name, n_episodes=n_episodes, horizon=horizon,
                    mean_cost=float(costs.mean()), se_cost=se,
                    mean_error_cost=float(err_cost.mean()),
                    mean_power_cost=float(pow_cost.mean()),
                    mse_per_step=e2.mean(axis=0), mse_se_per_step=mse_se,
                    tail_bias_bound=tail, costs=costs)


def verify_stability_bound(params: ModelParams, horizon: int = 200,
                           n_episodes: int = 10000, base_seed: int = 0,
                           init_error: float = 0.0) -> CheckResult:
    """Always-transmit empirical moments against the closed-form bounds.

    Checks E[e(t)^2] <= bound + 3 SE at every step and the mean discounted
    cost against (bound + lam)/(1 - beta) + 3 SE.
    """
    stats = estimate_cost(AlwaysTransmit(), params, horizon, n_episodes,
                          base_seed, init_error=init_error)
    bound = mean_square_error_bound(params, init_error)
    margins = stats.mse_per_step - (bound + 3.0 * stats.mse_se_per_step)
    worst_t = int(np.argmax(margins))
    cost_margin = stats.mean_cost - (discounted_cost_bound(params, init_error)
                                     + 3.0 * stats.se_cost)
    worst = max(float(margins.max()), cost_margin)
    passed = bool(worst <= 0.0)
    where = (f"t={worst_t}" if margins.max() >= cost_margin
             else "discounted total")
    return CheckResult("stability_bound", passed, max(worst, 0.0), 0.0, where,
                       note=f"bound {bound:.6g}, mean mse max "
                            f"{float(stats.mse_per_step.max()):.6g}, "
                            f"mean cost {stats.mean_cost:.6g}")


@dataclass(frozen=True)
class ComparisonRow:
    stats: SimStats
    diff_mean: float     # mean(cost - cost_of_first_policy)
    diff_se: float       # SE of the paired difference


@dataclass(frozen=True)
class PolicyComparison:
    rows: list[ComparisonRow]

    def to_csv(self, path) -> None:
        fmt = "%.12g"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("policy,mean_cost,se_cost,mean_error_cost,mean_power_cost,"
                     "diff_vs_first_mean,diff_vs_first_se\n")
            for r in self.rows:
                s = r.stats
                fh.write(",".join([s.policy] + [fmt % v for v in (
                    s.mean_cost, s.se_cost, s.mean_error_cost, s.mean_power_cost,
                    r.diff_mean, r.diff_se)]) + "\n")


def compare_policies(policies, params: ModelParams, horizon: int,
                     n_episodes: int, base_seed: int,
                     init_error: float = 0.0,
                     init_belief: float | None = None) -> PolicyComparison:
    """Run each policy on the same noise and channel streams; pair against the first."""
    rows = []
    first_costs = None
    for policy in policies:
        stats = estimate_cost(policy, params, horizon, n_episodes, base_seed,
                              init_error=init_error, init_belief=init_belief)
        if first_costs is None:
            first_costs = stats.costs
            diff_mean, diff_se = 0.0, 0.0
        else:
            diff = stats.costs - first_costs
            diff_mean = float(diff.mean())
            diff_se = (float(np.std(diff, ddof=1) / np.sqrt(len(diff)))
                       if len(diff) > 1 else 0.0)
        rows.append(ComparisonRow(stats=stats, diff_mean=diff_mean,
                                  diff_se=diff_se))
    return PolicyComparison(rows=rows)


def export_trace_csv(trace: EpisodeTrace, path) -> None:
    """Trace columns t,x,xhat,e,c,b,u,z,cost; no-probe z is an empty field."""
    fmt = "%.12g"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,xhat,e,c,b,u,z,cost\n")
        for k in range(len(trace.t)):
            z = "" if trace.z[k] == Z_NONE else str(int(trace.z[k]))
            fh.write(",".join([
                str(int(trace.t[k])), fmt % trace.x[k], fmt % trace.xhat[k],
                fmt % trace.e[k], str(int(trace.c[k])), fmt % trace.b[k],
                str(int(trace.u[k])), z, fmt % trace.cost[k]]) + "\n")


def export_stats_csv(stats: SimStats, path) -> None:
    fmt = "%.12g"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("policy,n_episodes,horizon,mean_cost,se_cost,"
                 "mean_error_cost,mean_power_cost,tail_bias_bound\n")
        fh.write(",".join([stats.policy, str(stats.n_episodes),
                           str(stats.horizon)] +
                          [fmt % v for v in (stats.mean_cost, stats.se_cost,
                                             stats.mean_error_cost,
                                             stats.mean_power_cost,
                                             stats.tail_bias_bound)]) + "\n")


def export_mse_csv(stats: SimStats, path) -> None:
    fmt = "%.12g"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,mean_squared_error,se\n")
        for t in range(stats.horizon):
            fh.write("%d,%s,%s\n" % (t, fmt % stats.mse_per_step[t],
                                     fmt % stats.mse_se_per_step[t]))
