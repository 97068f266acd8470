"""Online bandit evaluation: round streams, traces, regret curves.

A round carries the context in both raw numeric and binarized form plus
the full (hidden) reward vector; the policy only ever sees the entry of
the arm it chose.  Traces record enough per round to reconstruct
cumulative reward and regret exactly, and independent runs aggregate into
mean and standard-error curves.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AggregateCurves",
    "BanditRound",
    "Context",
    "ExperimentTrace",
    "aggregate_runs",
    "cumulative_regret",
    "cumulative_reward",
    "run_experiment",
    "write_aggregate_csv",
    "write_trace_csv",
]

TRACE_HEADER = ["round", "arm", "reward", "optimal", "cum_reward", "cum_regret"]
AGGREGATE_HEADER = [
    "round",
    "mean_cum_regret",
    "se_cum_regret",
    "mean_cum_reward",
    "se_cum_reward",
]


@dataclass(frozen=True)
class Context:
    """One observation in raw numeric form and, when available, as bits."""

    raw: np.ndarray
    bits: np.ndarray | None = None


@dataclass(frozen=True)
class BanditRound:
    index: int
    context: Context
    rewards: np.ndarray
    optimal: float

    @classmethod
    def create(cls, index: int, context: Context, rewards) -> "BanditRound":
        rewards = np.asarray(rewards, dtype=float)
        if rewards.ndim != 1 or rewards.size == 0:
            raise ValueError("rewards must be a non-empty vector")
        return cls(index, context, rewards, float(rewards.max()))


@dataclass
class ExperimentTrace:
    """Per-round outcomes of a single run."""

    arms: np.ndarray
    rewards: np.ndarray
    optimals: np.ndarray
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.arms) == len(self.rewards) == len(self.optimals)):
            raise ValueError("trace columns have mismatched lengths")

    def __len__(self):
        return len(self.arms)


def run_experiment(rounds, policy, horizon: int, seed: int | None = None, config: dict | None = None) -> ExperimentTrace:
    """Drive a policy through `horizon` rounds of a stream.

    Each round: show the context, get an arm, reveal only that arm's
    reward to the policy, and record the full outcome for regret
    bookkeeping.  The stream must yield at least `horizon` rounds; cycling
    streams satisfy that for any horizon.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    arms = np.zeros(horizon, dtype=np.int64)
    rewards = np.zeros(horizon, dtype=float)
    optimals = np.zeros(horizon, dtype=float)
    consumed = 0
    for t, rnd in enumerate(itertools.islice(rounds, horizon)):
        arm = policy.select(rnd.context)
        if not 0 <= arm < rnd.rewards.size:
            raise ValueError(f"policy chose arm {arm}, but round has {rnd.rewards.size} arms")
        realized = float(rnd.rewards[arm])
        policy.update(arm, rnd.context, realized)
        arms[t] = arm
        rewards[t] = realized
        optimals[t] = rnd.optimal
        consumed = t + 1
    if consumed != horizon:
        raise ValueError(f"stream ended after {consumed} rounds, horizon is {horizon}")
    return ExperimentTrace(arms, rewards, optimals, seed=seed, config=dict(config or {}))


def cumulative_reward(trace: ExperimentTrace) -> np.ndarray:
    return np.cumsum(trace.rewards)


def cumulative_regret(trace: ExperimentTrace) -> np.ndarray:
    """Entry t: sum over rounds <= t of (optimal - realized) reward."""
    return np.cumsum(trace.optimals - trace.rewards)


@dataclass(frozen=True)
class AggregateCurves:
    mean_cum_regret: np.ndarray
    se_cum_regret: np.ndarray
    mean_cum_reward: np.ndarray
    se_cum_reward: np.ndarray


def _mean_se(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = stack.mean(axis=0)
    if stack.shape[0] < 2:
        return mean, np.zeros_like(mean)
    se = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    return mean, se


def aggregate_runs(traces) -> AggregateCurves:
    """Pointwise mean and standard error of regret/reward curves."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    horizons = {len(t) for t in traces}
    if len(horizons) != 1:
        raise ValueError(f"traces have mismatched horizons: {sorted(horizons)}")
    regrets = np.stack([cumulative_regret(t) for t in traces])
    rewards = np.stack([cumulative_reward(t) for t in traces])
    mean_regret, se_regret = _mean_se(regrets)
    mean_reward, se_reward = _mean_se(rewards)
    return AggregateCurves(mean_regret, se_regret, mean_reward, se_reward)


def _fmt(value: float) -> str:
    if float(value) == int(value):
        return str(int(value))
    return repr(float(value))


def write_trace_csv(trace: ExperimentTrace, path):
    cum_reward = cumulative_reward(trace)
    cum_regret = cumulative_regret(trace)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for t in range(len(trace)):
            writer.writerow(
                [
                    t + 1,
                    int(trace.arms[t]),
                    _fmt(trace.rewards[t]),
                    _fmt(trace.optimals[t]),
                    _fmt(cum_reward[t]),
                    _fmt(cum_regret[t]),
                ]
            )


def write_aggregate_csv(curves: AggregateCurves, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_HEADER)
        for t in range(len(curves.mean_cum_regret)):
            writer.writerow(
                [
                    t + 1,
                    _fmt(curves.mean_cum_regret[t]),
                    _fmt(curves.se_cum_regret[t]),
                    _fmt(curves.mean_cum_reward[t]),
                    _fmt(curves.se_cum_reward[t]),
                ]
            )
