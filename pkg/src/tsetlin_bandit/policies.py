"""Arm-selection policies over per-arm learners.

Tsetlin Machine policies come in three flavours: epsilon-greedy over the
per-arm vote sums, exact bootstrap Thompson sampling (each round, every
arm's machine is refit from scratch on a with-replacement resample of its
observation history), and a streaming approximation that keeps one
persistent machine per arm and replays each new observation with
Poisson(1) multiplicity.  Disjoint LinUCB and per-arm online logistic
regression are provided as numeric-context baselines.

All policies share the same protocol: select(context) -> arm index, then
update(arm, context, reward) with the single revealed binary reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tm import TmConfig, TsetlinMachine, as_bit_vector

__all__ = [
    "ArmHistory",
    "LinUcbPolicy",
    "LogisticEpsGreedyPolicy",
    "Policy",
    "PolicyConfig",
    "TmEpsGreedyPolicy",
    "TmThompsonExactPolicy",
    "TmThompsonOnlinePolicy",
    "eps_greedy_select",
    "make_policy",
    "policy_from_dict",
    "thompson_step_exact",
    "thompson_step_online",
]

POLICY_KINDS = (
    "tm_eps_greedy",
    "tm_thompson_exact",
    "tm_thompson_online",
    "linucb",
    "logistic_eps_greedy",
)

_TM_KINDS = ("tm_eps_greedy", "tm_thompson_exact", "tm_thompson_online")


def _context_bits(context):
    bits = getattr(context, "bits", context)
    if bits is None:
        raise ValueError("this policy needs binarized contexts, round carries none")
    return as_bit_vector(bits)


def _context_raw(context):
    raw = getattr(context, "raw", context)
    return np.asarray(raw, dtype=float)


def _check_reward(reward) -> int:
    value = float(reward)
    if value not in (0.0, 1.0):
        raise ValueError(f"rewards must be binary, got {reward!r}")
    return int(value)


def argmax_random_tie(scores, rng: np.random.Generator) -> int:
    scores = np.asarray(scores, dtype=float)
    candidates = np.flatnonzero(scores == scores.max())
    if len(candidates) == 1:
        return int(candidates[0])
    return int(rng.choice(candidates))


def eps_greedy_select(scores, epsilon: float, rng: np.random.Generator) -> int:
    """Random arm with probability epsilon, else argmax with uniform ties."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("need at least one arm")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(scores.size))
    return argmax_random_tie(scores, rng)


@dataclass
class ArmHistory:
    """Append-only (context, binary reward) log for one arm."""

    arm: int
    contexts: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def append(self, context, reward):
        self.contexts.append(np.asarray(context))
        self.rewards.append(_check_reward(reward))

    def __len__(self):
        return len(self.contexts)

    def as_arrays(self):
        return np.stack(self.contexts), np.asarray(self.rewards, dtype=np.uint8)


@dataclass(frozen=True)
class PolicyConfig:
    """Declarative policy spec; only the fields relevant to `kind` apply."""

    kind: str
    tm: TmConfig | None = None
    epsilon: float = 0.1
    refit_interval: int = 1
    fit_epochs: int = 1
    alpha: float = 1.0
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}, expected one of {POLICY_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.refit_interval < 1:
            raise ValueError("refit_interval must be >= 1")
        if self.fit_epochs < 1:
            raise ValueError("fit_epochs must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.kind in _TM_KINDS and self.tm is None:
            raise ValueError(f"policy kind {self.kind!r} needs a TmConfig")


def _spawn_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _tm_config_dict(cfg: TmConfig) -> dict:
    return {
        "num_clauses": cfg.num_clauses,
        "threshold": cfg.threshold,
        "specificity": cfg.specificity,
        "num_features": cfg.num_features,
        "num_state_bits": cfg.num_state_bits,
        "boost_true_positives": cfg.boost_true_positives,
        "seed": cfg.seed,
    }


def _bootstrap_fit(history: ArmHistory, tm_config: TmConfig, rng: np.random.Generator, epochs: int):
    """Algorithm core: resample |D| observations with replacement, fit fresh.

    Returns (machine, bootstrap indices).
    """
    n = len(history)
    indices = rng.integers(0, n, size=n)
    contexts, rewards = history.as_arrays()
    tm = TsetlinMachine(replace(tm_config, seed=int(rng.integers(2**63))))
    tm.fit(contexts[indices], rewards[indices], epochs=epochs)
    return tm, indices


def thompson_step_exact(
    histories,
    bits,
    tm_config: TmConfig,
    rng: np.random.Generator,
    epochs: int = 1,
    return_details: bool = False,
):
    """One bootstrap-Thompson selection over per-arm histories.

    Arms without observations score +inf so every arm is explored before
    any posterior comparison happens; the rest get a fresh machine fit to
    a with-replacement resample of their history and are ranked by the
    machine's success score on the context.  Ties break uniformly.
    """
    bits = as_bit_vector(bits, tm_config.num_features)
    scores = np.empty(len(histories), dtype=float)
    details = {"bootstrap_indices": {}, "machines": {}, "scores": scores}
    for u, history in enumerate(histories):
        if len(history) == 0:
            scores[u] = np.inf
            continue
        tm, indices = _bootstrap_fit(history, tm_config, rng, epochs)
        scores[u] = tm.score(bits)
        details["bootstrap_indices"][u] = indices
        details["machines"][u] = tm
    arm = argmax_random_tie(scores, rng)
    if return_details:
        return arm, details
    return arm


def thompson_step_online(machines, bits, rng: np.random.Generator) -> int:
    """Selection half of the streaming variant: argmax of per-arm scores."""
    scores = [tm.score(bits) for tm in machines]
    return argmax_random_tie(scores, rng)


class Policy:
    """Protocol shared by every policy."""

    num_arms: int

    def select(self, context) -> int:
        raise NotImplementedError

    def update(self, arm: int, context, reward) -> None:
        raise NotImplementedError

    def _check_arm(self, arm: int):
        if not 0 <= arm < self.num_arms:
            raise IndexError(f"arm {arm} out of range [0, {self.num_arms})")

    def to_dict(self) -> dict:
        raise NotImplementedError


class _TmPolicyBase(Policy):
    def __init__(self, num_arms: int, tm_config: TmConfig, seed: int = 0):
        if num_arms < 1:
            raise ValueError("need at least one arm")
        self.num_arms = num_arms
        self.seed = seed
        seeds = _spawn_seeds(seed, num_arms + 1)
        self.tm_config = tm_config
        self.machines = [
            TsetlinMachine(replace(tm_config, seed=seeds[u])) for u in range(num_arms)
        ]
        self.rng = np.random.default_rng(seeds[num_arms])
        self.histories = [ArmHistory(u) for u in range(num_arms)]

    def _base_dict(self, kind: str) -> dict:
        return {
            "format": "tm-bandit-policy",
            "version": 1,
            "kind": kind,
            "num_arms": self.num_arms,
            "seed": self.seed,
            "tm_config": _tm_config_dict(self.tm_config),
            "rng_state": self.rng.bit_generator.state,
            "arms": [
                {
                    "tm": tm.to_dict(),
                    "history": {
                        "contexts": [np.asarray(c).tolist() for c in h.contexts],
                        "rewards": list(h.rewards),
                    },
                }
                for tm, h in zip(self.machines, self.histories)
            ],
        }

    def _restore(self, payload: dict):
        self.machines = [TsetlinMachine.from_dict(arm["tm"]) for arm in payload["arms"]]
        self.histories = []
        for u, arm in enumerate(payload["arms"]):
            h = ArmHistory(u)
            for c, r in zip(arm["history"]["contexts"], arm["history"]["rewards"]):
                h.append(np.asarray(c, dtype=np.uint8), r)
            self.histories.append(h)
        self.rng.bit_generator.state = payload["rng_state"]


class TmEpsGreedyPolicy(_TmPolicyBase):
    """Per-arm machines ranked by raw vote sum, epsilon-greedy selection."""

    kind = "tm_eps_greedy"

    def __init__(self, num_arms, tm_config, epsilon: float = 0.1, seed: int = 0):
        super().__init__(num_arms, tm_config, seed)
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        self.epsilon = epsilon

    def select(self, context) -> int:
        bits = _context_bits(context)
        scores = [tm.vote_sum(bits) for tm in self.machines]
        return eps_greedy_select(scores, self.epsilon, self.rng)

    def update(self, arm, context, reward):
        self._check_arm(arm)
        bits = _context_bits(context)
        label = _check_reward(reward)
        self.histories[arm].append(bits, label)
        self.machines[arm].train_step(bits, label)

    def to_dict(self):
        payload = self._base_dict(self.kind)
        payload["epsilon"] = self.epsilon
        return payload


class TmThompsonOnlinePolicy(_TmPolicyBase):
    """Streaming bootstrap Thompson sampling.

    Keeps one persistent machine per arm; each observed (context, reward)
    trains the chosen arm's machine a Poisson(1)-distributed number of
    times, mimicking how often the pair would appear in a with-replacement
    resample, without ever refitting from scratch.
    """

    kind = "tm_thompson_online"

    def select(self, context) -> int:
        bits = _context_bits(context)
        return thompson_step_online(self.machines, bits, self.rng)

    def update(self, arm, context, reward):
        self._check_arm(arm)
        bits = _context_bits(context)
        label = _check_reward(reward)
        self.histories[arm].append(bits, label)
        for _ in range(int(self.rng.poisson(1.0))):
            self.machines[arm].train_step(bits, label)

    def to_dict(self):
        return self._base_dict(self.kind)


class TmThompsonExactPolicy(Policy):
    """Bootstrap Thompson sampling with per-round refits.

    Every refit_interval selections, each arm with data gets a brand-new
    machine fit to a fresh bootstrap resample of its full history (seeded
    from (master seed, round, arm), so runs replay exactly); between
    refits the cached machines keep scoring new contexts.  The default
    interval of 1 refits every round.
    """

    kind = "tm_thompson_exact"

    def __init__(self, num_arms, tm_config, seed: int = 0, refit_interval: int = 1, fit_epochs: int = 1):
        if num_arms < 1:
            raise ValueError("need at least one arm")
        if refit_interval < 1:
            raise ValueError("refit_interval must be >= 1")
        if fit_epochs < 1:
            raise ValueError("fit_epochs must be >= 1")
        self.num_arms = num_arms
        self.tm_config = tm_config
        self.seed = seed
        self.refit_interval = refit_interval
        self.fit_epochs = fit_epochs
        self.histories = [ArmHistory(u) for u in range(num_arms)]
        self.rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
        self._machines: list[TsetlinMachine | None] = [None] * num_arms
        self._selections = 0
        self.last_details: dict | None = None

    def _arm_rng(self, round_index: int, arm: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(1 + round_index, arm))
        )

    def _refit(self, round_index: int):
        details = {"round": round_index, "bootstrap_indices": {}, "machine_ids": {}}
        for u, history in enumerate(self.histories):
            if len(history) == 0:
                self._machines[u] = None
                continue
            tm, indices = _bootstrap_fit(
                history, self.tm_config, self._arm_rng(round_index, u), self.fit_epochs
            )
            self._machines[u] = tm
            details["bootstrap_indices"][u] = indices
            details["machine_ids"][u] = id(tm)
        self.last_details = details

    def select(self, context) -> int:
        bits = _context_bits(context)
        if self._selections % self.refit_interval == 0 or all(
            tm is None for tm in self._machines
        ):
            self._refit(self._selections)
        self._selections += 1
        scores = [np.inf if tm is None else tm.score(bits) for tm in self._machines]
        if self.last_details is not None:
            self.last_details["scores"] = list(scores)
        return argmax_random_tie(scores, self.rng)

    def update(self, arm, context, reward):
        self._check_arm(arm)
        self.histories[arm].append(_context_bits(context), _check_reward(reward))

    def to_dict(self):
        """Dump histories plus one machine per arm fit to its full history.

        The exact variant has no single persistent machine, so the dumped
        per-arm models are deterministic full-history fits intended for
        rule inspection and for resuming.
        """
        arms = []
        for u, history in enumerate(self.histories):
            tm = TsetlinMachine(
                replace(
                    self.tm_config,
                    seed=int(self._arm_rng(self._selections, u).integers(2**63)),
                )
            )
            if len(history) > 0:
                contexts, rewards = history.as_arrays()
                tm.fit(contexts, rewards, epochs=self.fit_epochs)
            arms.append(
                {
                    "tm": tm.to_dict(),
                    "history": {
                        "contexts": [np.asarray(c).tolist() for c in history.contexts],
                        "rewards": list(history.rewards),
                    },
                }
            )
        return {
            "format": "tm-bandit-policy",
            "version": 1,
            "kind": self.kind,
            "num_arms": self.num_arms,
            "seed": self.seed,
            "refit_interval": self.refit_interval,
            "fit_epochs": self.fit_epochs,
            "selections": self._selections,
            "tm_config": _tm_config_dict(self.tm_config),
            "rng_state": self.rng.bit_generator.state,
            "arms": arms,
        }


class LinUcbPolicy(Policy):
    """Disjoint linear UCB on the raw numeric context.

    Per arm: ridge-regularized Gram matrix A (identity prior) and reward
    vector b; the score is theta.x + alpha * sqrt(x A^-1 x) with
    theta = A^-1 b.  With alpha = 0 the exploration bonus vanishes and
    selection is greedy ridge regression.
    """

    kind = "linucb"

    def __init__(self, num_arms, alpha: float = 1.0, seed: int = 0):
        if num_arms < 1:
            raise ValueError("need at least one arm")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.num_arms = num_arms
        self.alpha = alpha
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.grams: list[np.ndarray] | None = None
        self.reward_vecs: list[np.ndarray] | None = None
        self.histories = [ArmHistory(u) for u in range(num_arms)]

    def _ensure_dim(self, dim: int):
        if self.grams is None:
            self.grams = [np.eye(dim) for _ in range(self.num_arms)]
            self.reward_vecs = [np.zeros(dim) for _ in range(self.num_arms)]
        elif self.grams[0].shape[0] != dim:
            raise ValueError(
                f"context dimension changed from {self.grams[0].shape[0]} to {dim}"
            )

    def scores(self, x: np.ndarray) -> np.ndarray:
        self._ensure_dim(x.size)
        out = np.empty(self.num_arms)
        for u in range(self.num_arms):
            theta = np.linalg.solve(self.grams[u], self.reward_vecs[u])
            width = np.sqrt(x @ np.linalg.solve(self.grams[u], x))
            out[u] = theta @ x + self.alpha * width
        return out

    def select(self, context) -> int:
        x = _context_raw(context)
        return argmax_random_tie(self.scores(x), self.rng)

    def update(self, arm, context, reward):
        self._check_arm(arm)
        x = _context_raw(context)
        r = _check_reward(reward)
        self._ensure_dim(x.size)
        self.histories[arm].append(x, r)
        self.grams[arm] += np.outer(x, x)
        self.reward_vecs[arm] += r * x

    def to_dict(self):
        return {
            "format": "tm-bandit-policy",
            "version": 1,
            "kind": self.kind,
            "num_arms": self.num_arms,
            "seed": self.seed,
            "alpha": self.alpha,
            "rng_state": self.rng.bit_generator.state,
            "arms": [
                {
                    "gram": None if self.grams is None else self.grams[u].tolist(),
                    "reward_vec": None if self.reward_vecs is None else self.reward_vecs[u].tolist(),
                    "history": {
                        "contexts": [np.asarray(c).tolist() for c in self.histories[u].contexts],
                        "rewards": list(self.histories[u].rewards),
                    },
                }
                for u in range(self.num_arms)
            ],
        }


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logistic_gradient(weights: np.ndarray, x_aug: np.ndarray, reward: int) -> np.ndarray:
    """Gradient of the log-loss at one (augmented context, reward) pair."""
    return (_sigmoid(weights @ x_aug) - reward) * x_aug


class LogisticEpsGreedyPolicy(Policy):
    """Per-arm online logistic regression with epsilon-greedy selection.

    Weights carry an intercept; each update is one SGD step on the
    log-loss of the observed reward.
    """

    kind = "logistic_eps_greedy"

    def __init__(self, num_arms, epsilon: float = 0.1, learning_rate: float = 0.1, seed: int = 0):
        if num_arms < 1:
            raise ValueError("need at least one arm")
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        self.num_arms = num_arms
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] | None = None
        self.histories = [ArmHistory(u) for u in range(num_arms)]

    @staticmethod
    def _augment(x: np.ndarray) -> np.ndarray:
        return np.concatenate([[1.0], x])

    def _ensure_dim(self, dim: int):
        if self.weights is None:
            self.weights = [np.zeros(dim + 1) for _ in range(self.num_arms)]
        elif self.weights[0].size != dim + 1:
            raise ValueError(
                f"context dimension changed from {self.weights[0].size - 1} to {dim}"
            )

    def scores(self, x: np.ndarray) -> np.ndarray:
        self._ensure_dim(x.size)
        aug = self._augment(x)
        return np.array([_sigmoid(w @ aug) for w in self.weights])

    def select(self, context) -> int:
        x = _context_raw(context)
        return eps_greedy_select(self.scores(x), self.epsilon, self.rng)

    def update(self, arm, context, reward):
        self._check_arm(arm)
        x = _context_raw(context)
        r = _check_reward(reward)
        self._ensure_dim(x.size)
        self.histories[arm].append(x, r)
        aug = self._augment(x)
        self.weights[arm] -= self.learning_rate * logistic_gradient(self.weights[arm], aug, r)

    def to_dict(self):
        return {
            "format": "tm-bandit-policy",
            "version": 1,
            "kind": self.kind,
            "num_arms": self.num_arms,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "learning_rate": self.learning_rate,
            "rng_state": self.rng.bit_generator.state,
            "arms": [
                {
                    "weights": None if self.weights is None else self.weights[u].tolist(),
                    "history": {
                        "contexts": [np.asarray(c).tolist() for c in self.histories[u].contexts],
                        "rewards": list(self.histories[u].rewards),
                    },
                }
                for u in range(self.num_arms)
            ],
        }


def make_policy(config: PolicyConfig, num_arms: int, num_features: int | None = None) -> Policy:
    """Instantiate a policy; num_features overrides the TmConfig width."""
    tm_config = config.tm
    if tm_config is not None and num_features is not None and tm_config.num_features != num_features:
        tm_config = replace(tm_config, num_features=num_features)
    if config.kind == "tm_eps_greedy":
        return TmEpsGreedyPolicy(num_arms, tm_config, epsilon=config.epsilon, seed=config.seed)
    if config.kind == "tm_thompson_online":
        return TmThompsonOnlinePolicy(num_arms, tm_config, seed=config.seed)
    if config.kind == "tm_thompson_exact":
        return TmThompsonExactPolicy(
            num_arms,
            tm_config,
            seed=config.seed,
            refit_interval=config.refit_interval,
            fit_epochs=config.fit_epochs,
        )
    if config.kind == "linucb":
        return LinUcbPolicy(num_arms, alpha=config.alpha, seed=config.seed)
    if config.kind == "logistic_eps_greedy":
        return LogisticEpsGreedyPolicy(
            num_arms, epsilon=config.epsilon, learning_rate=config.learning_rate, seed=config.seed
        )
    raise ValueError(f"unknown policy kind {config.kind!r}")


def policy_from_dict(payload: dict) -> Policy:
    """Rebuild a policy from its to_dict() payload."""
    kind = payload.get("kind")
    num_arms = payload["num_arms"]
    seed = payload.get("seed", 0)
    if kind in _TM_KINDS:
        tm_config = TmConfig(**payload["tm_config"])
        if kind == "tm_eps_greedy":
            policy = TmEpsGreedyPolicy(num_arms, tm_config, epsilon=payload["epsilon"], seed=seed)
            policy._restore(payload)
            return policy
        if kind == "tm_thompson_online":
            policy = TmThompsonOnlinePolicy(num_arms, tm_config, seed=seed)
            policy._restore(payload)
            return policy
        policy = TmThompsonExactPolicy(
            num_arms,
            tm_config,
            seed=seed,
            refit_interval=payload.get("refit_interval", 1),
            fit_epochs=payload.get("fit_epochs", 1),
        )
        policy._selections = payload.get("selections", 0)
        policy.rng.bit_generator.state = payload["rng_state"]
        policy._machines = [TsetlinMachine.from_dict(arm["tm"]) for arm in payload["arms"]]
        policy.histories = []
        for u, arm in enumerate(payload["arms"]):
            h = ArmHistory(u)
            for c, r in zip(arm["history"]["contexts"], arm["history"]["rewards"]):
                h.append(np.asarray(c, dtype=np.uint8), r)
            policy.histories.append(h)
        return policy
    if kind == "linucb":
        policy = LinUcbPolicy(num_arms, alpha=payload["alpha"], seed=seed)
        policy.rng.bit_generator.state = payload["rng_state"]
        arms = payload["arms"]
        if arms and arms[0]["gram"] is not None:
            policy.grams = [np.asarray(a["gram"], dtype=float) for a in arms]
            policy.reward_vecs = [np.asarray(a["reward_vec"], dtype=float) for a in arms]
        for u, arm in enumerate(arms):
            for c, r in zip(arm["history"]["contexts"], arm["history"]["rewards"]):
                policy.histories[u].append(np.asarray(c, dtype=float), r)
        return policy
    if kind == "logistic_eps_greedy":
        policy = LogisticEpsGreedyPolicy(
            num_arms,
            epsilon=payload["epsilon"],
            learning_rate=payload["learning_rate"],
            seed=seed,
        )
        policy.rng.bit_generator.state = payload["rng_state"]
        arms = payload["arms"]
        if arms and arms[0]["weights"] is not None:
            policy.weights = [np.asarray(a["weights"], dtype=float) for a in arms]
        for u, arm in enumerate(arms):
            for c, r in zip(arm["history"]["contexts"], arm["history"]["rewards"]):
                policy.histories[u].append(np.asarray(c, dtype=float), r)
        return policy
    raise ValueError(f"unknown policy kind {kind!r}")
