"""Two-class Tsetlin Machine over binary feature vectors.

A machine with ``n`` clauses over ``o`` features keeps one two-action
automaton per (clause, literal) pair, its state stored in an ``n x 2o``
integer matrix.  States run from 1 to 2N; states above N mean the literal
is included in the clause's conjunction.  Columns 0..o-1 address the plain
features, columns o..2o-1 their negations.  Clauses at even row index
(odd in 1-based counting) vote positively, odd rows negatively, and the
class decision is the sign of the vote sum.

Training walks one labelled sample at a time: clauses are picked for
feedback with probability proportional to the voting error, then each
automaton receives a stochastic Type I or deterministic Type II state
nudge.  The per-sample update loop is JIT-compiled (numba), which keeps
single-sample online updates cheap enough for bandit loops.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

__all__ = [
    "ConfigError",
    "FeedbackKind",
    "TmConfig",
    "TsetlinMachine",
    "as_bit_vector",
    "sample_type_i_transitions",
    "sample_type_ii_transitions",
    "transition_kind",
]

_KERNEL_SEED_SPACE = 2**32


class ConfigError(ValueError):
    """Invalid machine configuration."""


@dataclass(frozen=True)
class TmConfig:
    """Hyperparameters of one two-class Tsetlin Machine.

    num_clauses must be even: rows alternate positive/negative polarity.
    num_state_bits sets the automaton depth, 2N = 2**num_state_bits.
    specificity >= 1 so that 1/s and (s-1)/s are both probabilities.
    """

    num_clauses: int
    threshold: int
    specificity: float
    num_features: int
    num_state_bits: int = 8
    boost_true_positives: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.num_clauses < 2 or self.num_clauses % 2 != 0:
            raise ConfigError(f"num_clauses must be a positive even integer, got {self.num_clauses}")
        if self.threshold < 1:
            raise ConfigError(f"threshold must be >= 1, got {self.threshold}")
        if self.specificity < 1.0:
            raise ConfigError(f"specificity must be >= 1, got {self.specificity}")
        if self.num_features < 1:
            raise ConfigError(f"num_features must be >= 1, got {self.num_features}")
        if self.num_state_bits < 1:
            raise ConfigError(f"num_state_bits must be >= 1, got {self.num_state_bits}")

    @property
    def half_states(self) -> int:
        """N: the number of states on each action side."""
        return 2 ** (self.num_state_bits - 1)

    @property
    def num_states(self) -> int:
        """2N: total states per automaton."""
        return 2 * self.half_states

    @property
    def num_literals(self) -> int:
        return 2 * self.num_features


class FeedbackKind(enum.Enum):
    REWARD = "reward"
    INACTION = "inaction"
    PENALTY = "penalty"


def transition_kind(delta: int, include_action: bool) -> FeedbackKind:
    """Classify a state delta as Reward/Inaction/Penalty for the acting side.

    A reward drives the automaton deeper into its current action's half,
    a penalty toward the middle: on the Include side (state > N) reward
    means +1, on the Exclude side reward means -1.
    """
    if delta == 0:
        return FeedbackKind.INACTION
    if delta not in (1, -1):
        raise ValueError(f"delta must be in {{-1, 0, 1}}, got {delta}")
    if (delta == 1) == bool(include_action):
        return FeedbackKind.REWARD
    return FeedbackKind.PENALTY


def as_bit_vector(x, width: int | None = None) -> np.ndarray:
    """Validate and convert an input to a uint8 0/1 vector."""
    bits = np.asarray(x)
    if bits.ndim != 1:
        raise ValueError(f"expected a 1-d bit vector, got shape {bits.shape}")
    if bits.size == 0:
        raise ValueError("bit vector must be non-empty")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bit vector entries must be 0 or 1")
    if width is not None and bits.size != width:
        raise ValueError(f"bit vector has width {bits.size}, expected {width}")
    return bits.astype(np.uint8)


def _literal_row(bits: np.ndarray) -> np.ndarray:
    """Concatenate features with their negations: [x, 1-x]."""
    return np.concatenate([bits, 1 - bits])


# --- JIT kernels ------------------------------------------------------------
#
# Randomness inside kernels uses numba's own np.random state, seeded per call
# from the machine's generator, so results are reproducible and independent
# of the host process RNG.


@njit(cache=True, inline="always")
def _type_i_delta(clause_out, lit, s, boost):
    # Type Ia: clause and literal both 1 -> +1 w.p. (s-1)/s (1 when boosting).
    # Type Ib: clause or literal 0 -> -1 w.p. 1/s.  Disjoint cells, one draw.
    if clause_out == 1 and lit == 1:
        p = 1.0 if boost else (s - 1.0) / s
        if np.random.random() < p:
            return 1
        return 0
    if np.random.random() < 1.0 / s:
        return -1
    return 0


@njit(cache=True)
def _train_batch(states, lit_rows, labels, epochs, half, threshold, s, boost, seed):
    """Run the online update over every row of lit_rows, epochs times.

    states is mutated in place and kept inside [1, 2N].  Clause outputs are
    evaluated with the training convention: a clause with no included
    literal outputs 1, so fresh clauses can attract feedback.
    """
    np.random.seed(seed)
    n, num_lits = states.shape
    two_n = 2 * half
    out = np.empty(n, np.uint8)
    for _ in range(epochs):
        for i in range(lit_rows.shape[0]):
            lits = lit_rows[i]
            y = labels[i]

            # Vote with training-mode clause outputs, clamped to [-T, T].
            v = 0
            for j in range(n):
                cj = 1
                for k in range(num_lits):
                    if states[j, k] > half and lits[k] == 0:
                        cj = 0
                        break
                out[j] = cj
                if cj == 1:
                    if j % 2 == 0:
                        v += 1
                    else:
                        v -= 1
            if v > threshold:
                v = threshold
            elif v < -threshold:
                v = -threshold
            err = threshold - v if y == 1 else threshold + v
            p_feedback = err / (2.0 * threshold)

            for j in range(n):
                if np.random.random() >= p_feedback:
                    continue
                positive = j % 2 == 0
                if (positive and y == 1) or (not positive and y == 0):
                    cj = out[j]
                    for k in range(num_lits):
                        d = _type_i_delta(cj, lits[k], s, boost)
                        if d == 1:
                            if states[j, k] < two_n:
                                states[j, k] += 1
                        elif d == -1:
                            if states[j, k] > 1:
                                states[j, k] -= 1
                else:
                    # Type II: deterministic penalty on excluded 0-literals
                    # of a firing clause; included literals are untouched.
                    if out[j] == 1:
                        for k in range(num_lits):
                            if lits[k] == 0 and states[j, k] < two_n:
                                states[j, k] += 1


@njit(cache=True)
def _sample_type_i(clause_out, lit, s, boost, trials, seed):
    np.random.seed(seed)
    deltas = np.empty(trials, np.int8)
    for i in range(trials):
        deltas[i] = _type_i_delta(clause_out, lit, s, boost)
    return deltas


@njit(cache=True)
def _sample_type_ii(clause_out, lit, trials):
    deltas = np.empty(trials, np.int8)
    d = 1 if (clause_out == 1 and lit == 0) else 0
    for i in range(trials):
        deltas[i] = d
    return deltas


def sample_type_i_transitions(
    clause_output: int,
    literal: int,
    specificity: float,
    boost_true_positives: bool,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Draw state deltas for one Type I feedback cell.

    Exercises the same compiled cell rule the trainer uses, so empirical
    Reward/Inaction/Penalty frequencies can be checked against the feedback
    tables.  Returns an int8 array of -1/0/+1 deltas.
    """
    return _sample_type_i(
        int(clause_output), int(literal), float(specificity), bool(boost_true_positives), int(trials), int(seed)
    )


def sample_type_ii_transitions(clause_output: int, literal: int, trials: int) -> np.ndarray:
    """Type II deltas for one cell: +1 iff clause fires and the literal is 0."""
    return _sample_type_ii(int(clause_output), int(literal), int(trials))


# --- The machine ------------------------------------------------------------


class TsetlinMachine:
    """A trainable two-class Tsetlin Machine.

    All automata start at state N (the outermost Exclude state adjacent to
    the Include boundary): every clause is initially empty, and the first
    Type I feedback can tip matching literals into the clause.
    """

    def __init__(self, config: TmConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.states = np.full(
            (config.num_clauses, config.num_literals), config.half_states, dtype=np.int32
        )
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)

    # -- structure ------------------------------------------------------

    @property
    def num_clauses(self) -> int:
        return self.config.num_clauses

    @property
    def num_features(self) -> int:
        return self.config.num_features

    def clause_polarity(self, j: int) -> int:
        """+1 for positive-voting clauses (even row index), -1 otherwise."""
        self._check_clause_index(j)
        return 1 if j % 2 == 0 else -1

    def clause_literals(self, j: int) -> set[int]:
        """Included literal indices of clause j (0-based; k >= o means not-x_{k-o})."""
        self._check_clause_index(j)
        row = self.states[j]
        return set(np.flatnonzero(row > self.config.half_states).tolist())

    def _check_clause_index(self, j: int):
        if not 0 <= j < self.config.num_clauses:
            raise IndexError(f"clause index {j} out of range [0, {self.config.num_clauses})")

    # -- inference ------------------------------------------------------

    def clause_outputs(self, bits, training: bool = False) -> np.ndarray:
        """Evaluate all clauses on one sample; returns a uint8 vector.

        A clause fires iff every included literal holds.  Clauses with no
        included literal output 1 while training and 0 at inference time,
        so vacuous clauses never vote on predictions.
        """
        bits = as_bit_vector(bits, self.config.num_features)
        lits = _literal_row(bits).astype(bool)
        include = self.states > self.config.half_states
        fired = ~(include & ~lits).any(axis=1)
        if not training:
            fired &= include.any(axis=1)
        return fired.astype(np.uint8)

    def clause_output(self, j: int, bits, training: bool = False) -> int:
        self._check_clause_index(j)
        return int(self.clause_outputs(bits, training=training)[j])

    def vote_sum(self, bits, training: bool = False) -> int:
        """Positive-clause minus negative-clause outputs."""
        out = self.clause_outputs(bits, training=training)
        return int(out[0::2].sum()) - int(out[1::2].sum())

    def predict(self, bits) -> int:
        """Majority-vote class: 1 iff the vote sum is strictly positive."""
        return 1 if self.vote_sum(bits) > 0 else 0

    def score(self, bits) -> float:
        """Vote sum clamped to [-T, T] and mapped onto [0, 1]."""
        t = self.config.threshold
        v = max(-t, min(t, self.vote_sum(bits)))
        return (v + t) / (2.0 * t)

    # -- training -------------------------------------------------------

    def train_step(self, bits, label) -> "TsetlinMachine":
        """One online update from a single labelled sample."""
        if label is None:
            raise ValueError("train_step requires a 0/1 label")
        label = int(label)
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label}")
        bits = as_bit_vector(bits, self.config.num_features)
        lit_rows = _literal_row(bits).astype(np.uint8).reshape(1, -1)
        self._run_kernel(lit_rows, np.array([label], dtype=np.uint8), 1)
        return self

    def fit(self, samples, labels, epochs: int = 1) -> "TsetlinMachine":
        """Train on the samples in the given order for `epochs` passes.

        No shuffling happens here; callers that want a fresh order per
        epoch permute upstream.
        """
        if epochs < 0:
            raise ValueError("epochs must be >= 0")
        samples = np.asarray(samples)
        if samples.ndim == 1:
            samples = samples.reshape(1, -1)
        labels = np.asarray(labels).reshape(-1)
        if samples.shape[0] != labels.shape[0]:
            raise ValueError(
                f"sample/label count mismatch: {samples.shape[0]} vs {labels.shape[0]}"
            )
        if samples.shape[0] == 0 or epochs == 0:
            return self
        if samples.shape[1] != self.config.num_features:
            raise ValueError(
                f"samples have width {samples.shape[1]}, expected {self.config.num_features}"
            )
        if not np.isin(samples, (0, 1)).all():
            raise ValueError("samples must be 0/1 valued")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0/1 valued")
        bits = samples.astype(np.uint8)
        lit_rows = np.concatenate([bits, 1 - bits], axis=1)
        self._run_kernel(np.ascontiguousarray(lit_rows), labels.astype(np.uint8), int(epochs))
        return self

    def _run_kernel(self, lit_rows: np.ndarray, labels: np.ndarray, epochs: int):
        cfg = self.config
        seed = int(self.rng.integers(_KERNEL_SEED_SPACE))
        _train_batch(
            self.states,
            lit_rows,
            labels,
            epochs,
            cfg.half_states,
            cfg.threshold,
            float(cfg.specificity),
            bool(cfg.boost_true_positives),
            seed,
        )

    # -- persistence ----------------------------------------------------

    def to_dict(self) -> dict:
        """JSON-ready dump: config, the n x 2o state matrix, RNG state.

        The matrix is row-major by clause; row j corresponds to clause
        j+1 in 1-based counting, so even rows (clause 1, 3, ...) carry
        positive polarity.  Columns 0..o-1 hold the plain literals,
        o..2o-1 the negated ones.
        """
        cfg = self.config
        return {
            "format": "tsetlin-machine",
            "version": 1,
            "config": {
                "num_clauses": cfg.num_clauses,
                "threshold": cfg.threshold,
                "specificity": cfg.specificity,
                "num_features": cfg.num_features,
                "num_state_bits": cfg.num_state_bits,
                "boost_true_positives": cfg.boost_true_positives,
                "seed": cfg.seed,
            },
            "states": self.states.tolist(),
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TsetlinMachine":
        config = TmConfig(**payload["config"])
        tm = cls(config)
        states = np.asarray(payload["states"], dtype=np.int32)
        if states.shape != tm.states.shape:
            raise ValueError(
                f"state matrix shape {states.shape} does not match config {tm.states.shape}"
            )
        if states.min() < 1 or states.max() > config.num_states:
            raise ValueError("state entries outside [1, 2N]")
        tm.states = states
        rng_state = payload.get("rng_state")
        if rng_state is not None:
            tm.rng.bit_generator.state = rng_state
        return tm

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "TsetlinMachine":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def spawn(self, **overrides) -> "TsetlinMachine":
        """Fresh machine with the same config (fields overridable)."""
        return TsetlinMachine(replace(self.config, **overrides))
