"""Dataset loading, synthesis, and conversion to bandit round streams.

Two conversion routes are supported.  Classification data turns into a
K-armed problem whose reward vector is the one-hot of the true class, so
the optimal per-round reward is always 1.  Recommender-style interaction
matrices are factored with a truncated SVD; user rows of the left factor
become contexts and the top raw-score item per user earns reward 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .experiment import BanditRound, Context

__all__ = [
    "ConvergenceError",
    "TabularDataset",
    "class_to_bandit",
    "gen_noisy_xor",
    "load_csv",
    "load_interactions",
    "recommender_to_bandit",
    "save_csv",
    "truncated_svd",
]

MISSING_TOKENS = {"", "?", "na", "n/a", "nan", "null"}


class ConvergenceError(RuntimeError):
    """Iterative decomposition failed to reach tolerance."""


@dataclass
class TabularDataset:
    """Cleaned classification table: typed feature columns plus arm labels."""

    feature_names: list[str]
    columns: list[np.ndarray]
    labels: np.ndarray
    class_names: list[str]
    label_name: str = "label"

    def __post_init__(self):
        lengths = {len(c) for c in self.columns} | {len(self.labels)}
        if len(lengths) != 1:
            raise ValueError("columns and labels must have equal lengths")

    @property
    def num_rows(self) -> int:
        return len(self.labels)

    @property
    def num_features(self) -> int:
        return len(self.columns)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def row(self, i: int) -> list:
        return [column[i] for column in self.columns]

    def is_numeric(self) -> bool:
        return all(np.issubdtype(c.dtype, np.number) for c in self.columns)

    def is_binary(self) -> bool:
        """True when every feature is already a 0/1 value."""
        return self.is_numeric() and all(np.isin(c, (0, 1)).all() for c in self.columns)

    def numeric_matrix(self) -> np.ndarray:
        """Feature matrix for numeric baselines; categories become rank codes."""
        out = np.empty((self.num_rows, self.num_features), dtype=float)
        for i, column in enumerate(self.columns):
            if np.issubdtype(column.dtype, np.number):
                out[:, i] = column.astype(float)
            else:
                uniq = sorted(set(column.tolist()), key=str)
                codes = {v: k for k, v in enumerate(uniq)}
                out[:, i] = [codes[v] for v in column.tolist()]
        return out


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def load_csv(path, label_column: str | None = None) -> TabularDataset:
    """Load a headered CSV, drop rows with missing cells, map labels to arms.

    Columns parse as numeric when every kept cell does; otherwise they stay
    categorical strings.  The label column defaults to the last one, and
    class names map to arm indices in order of first appearance.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    if label_column is None:
        label_idx = len(header) - 1
    else:
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one feature column and one label column")

    kept = []
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: row with {len(row)} cells, header has {len(header)}")
        if any(_is_missing(cell) for cell in row):
            continue
        kept.append([cell.strip() for cell in row])
    if not kept:
        raise ValueError(f"{path}: no complete rows after dropping missing values")

    feature_idx = [i for i in range(len(header)) if i != label_idx]
    columns = []
    for i in feature_idx:
        raw = [row[i] for row in kept]
        try:
            columns.append(np.array([float(v) for v in raw], dtype=float))
        except ValueError:
            columns.append(np.array(raw, dtype=object))

    class_names: list[str] = []
    labels = np.empty(len(kept), dtype=np.int64)
    for r, row in enumerate(kept):
        name = row[label_idx]
        if name not in class_names:
            class_names.append(name)
        labels[r] = class_names.index(name)
    if len(class_names) < 2:
        raise ValueError(f"{path}: label column has a single class, nothing to learn")

    return TabularDataset(
        feature_names=[header[i] for i in feature_idx],
        columns=columns,
        labels=labels,
        class_names=class_names,
        label_name=header[label_idx],
    )


def save_csv(dataset: TabularDataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + [dataset.label_name])
        for i in range(dataset.num_rows):
            row = []
            for value in dataset.row(i):
                if isinstance(value, float) and value == int(value):
                    row.append(str(int(value)))
                else:
                    row.append(str(value))
            row.append(dataset.class_names[dataset.labels[i]])
            writer.writerow(row)


def gen_noisy_xor(
    num_samples: int, num_bits: int = 12, flip_prob: float = 0.4, seed: int = 0
) -> TabularDataset:
    """Noisy-XOR benchmark: random bit vectors, label = x1 XOR x2, flipped.

    Only the first two bits carry signal; the remaining bits are
    independent distractors.  The emitted label is the clean XOR flipped
    with probability flip_prob, so the best achievable per-round accuracy
    is 1 - flip_prob.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if num_bits < 2:
        raise ValueError("num_bits must be >= 2")
    if not 0.0 <= flip_prob <= 0.5:
        raise ValueError("flip_prob must lie in [0, 0.5]")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(num_samples, num_bits))
    clean = bits[:, 0] ^ bits[:, 1]
    flips = rng.random(num_samples) < flip_prob
    labels = clean ^ flips
    return TabularDataset(
        feature_names=[f"x{i + 1}" for i in range(num_bits)],
        columns=[bits[:, i].astype(float) for i in range(num_bits)],
        labels=labels.astype(np.int64),
        class_names=["0", "1"],
        label_name="xor",
    )


def class_to_bandit(dataset: TabularDataset, schema=None, seed: int = 0):
    """Infinite stream of one-hot-reward rounds in reshuffled passes.

    Contexts carry the numeric feature row plus bits: via the schema when
    one is given, as-is for already-binary data, otherwise no bit form
    (only numeric-context policies can run).  Each pass over the data uses
    a fresh permutation from the stream seed.
    """
    raw = dataset.numeric_matrix()
    if schema is not None:
        bits = np.stack([schema.transform(dataset.row(i)) for i in range(dataset.num_rows)])
    elif dataset.is_binary():
        bits = raw.astype(np.uint8)
    else:
        bits = None
    k = dataset.num_classes
    onehot = np.zeros((dataset.num_rows, k), dtype=float)
    onehot[np.arange(dataset.num_rows), dataset.labels] = 1.0
    rng = np.random.default_rng(seed)
    t = 0
    while True:
        for i in rng.permutation(dataset.num_rows):
            t += 1
            ctx = Context(raw=raw[i], bits=None if bits is None else bits[i])
            yield BanditRound.create(t, ctx, onehot[i])


# --- recommender route ------------------------------------------------------


def truncated_svd(S, rank: int, tol: float = 1e-8, max_iter: int = 1000):
    """Top-`rank` factorization S ~ W @ X by orthogonal iteration.

    Iterates Q <- orth(G Q) on the smaller-side Gram matrix until the
    largest principal angle between successive subspaces drops below tol,
    then Rayleigh-Ritz rotates onto singular directions.  W = U_r S_r
    absorbs the singular values; X = V_r^T.  Column signs are fixed by
    making each left-singular column's largest-magnitude entry positive.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.size == 0:
        raise ValueError("S must be a non-empty 2-d matrix")
    if not np.isfinite(S).all():
        raise ValueError("S must be finite")
    m, n = S.shape
    if not 1 <= rank <= min(m, n):
        raise ValueError(f"rank must lie in [1, {min(m, n)}], got {rank}")

    tall = m >= n
    G = S.T @ S if tall else S @ S.T
    rng = np.random.default_rng(0x5EED)  # fixed: the factorization is deterministic
    Q, _ = np.linalg.qr(rng.standard_normal((G.shape[0], rank)))
    converged = False
    for _ in range(max_iter):
        Q_new, _ = np.linalg.qr(G @ Q)
        overlap = np.linalg.svd(Q.T @ Q_new, compute_uv=False)
        sin_angle = np.sqrt(max(0.0, 1.0 - min(overlap.min(), 1.0) ** 2))
        Q = Q_new
        if sin_angle <= tol:
            converged = True
            break
    W, X = _factors_from_subspace(S, Q, tall)
    if not converged:
        residual = float(np.linalg.norm(S - W @ X))
        raise ConvergenceError(
            f"subspace iteration did not reach tol={tol} within {max_iter} iterations "
            f"(current residual {residual:.6g})"
        )
    return W, X


def _factors_from_subspace(S, Q, tall):
    B = S @ Q if tall else S.T @ Q
    w, R = np.linalg.eigh(B.T @ B)
    order = np.argsort(w)[::-1]
    sigma = np.sqrt(np.clip(w[order], 0.0, None))
    basis = Q @ R[:, order]
    cutoff = sigma[0] * 1e-12 if sigma.size and sigma[0] > 0 else 0.0
    inv = np.where(sigma > cutoff, 1.0 / np.where(sigma > cutoff, sigma, 1.0), 0.0)
    if tall:
        V = basis
        U = (S @ V) * inv
    else:
        U = basis
        V = (S.T @ U) * inv
    for i in range(U.shape[1]):
        pivot = np.argmax(np.abs(U[:, i]))
        if U[pivot, i] < 0:
            U[:, i] = -U[:, i]
            V[:, i] = -V[:, i]
    return U * sigma, V.T


def load_interactions(path, top_k_items: int | None = None):
    """Read user,item,rating triples into a dense interaction matrix.

    Users and items index in order of first appearance; repeated pairs
    keep the last rating; absent pairs are 0.  With top_k_items, only the
    k most-rated item columns are kept (original order preserved).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) != 3:
            raise ValueError(f"{path}: expected 3 columns (user,item,rating), got {len(header)}")
        users: dict = {}
        items: dict = {}
        triples = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: malformed row {row!r}")
            u, i, r = (cell.strip() for cell in row)
            users.setdefault(u, len(users))
            items.setdefault(i, len(items))
            triples.append((users[u], items[i], float(r)))
    if not triples:
        raise ValueError(f"{path}: no interactions")
    S = np.zeros((len(users), len(items)), dtype=float)
    for u, i, r in triples:
        S[u, i] = r
    if top_k_items is not None:
        if top_k_items < 1:
            raise ValueError("top_k_items must be >= 1")
        counts = (S != 0).sum(axis=0)
        ranked = np.argsort(-counts, kind="stable")[: min(top_k_items, S.shape[1])]
        S = S[:, np.sort(ranked)]
    return S


def recommender_to_bandit(S, rank: int, schema=None, seed: int = 0, factors=None):
    """Infinite round stream from an interaction matrix.

    The context for user i is row i of the left SVD factor (rank reals);
    the raw reward of arm j is the dot product with item column j, and the
    emitted reward vector is one-hot at the raw argmax, ties to the lowest
    item index.  Users stream in reshuffled passes.  Pass factors=(W, X)
    to reuse a precomputed decomposition.
    """
    S = np.asarray(S, dtype=float)
    if factors is None:
        W, X = truncated_svd(S, rank)
    else:
        W, X = factors
        if W.shape != (S.shape[0], rank) or X.shape != (rank, S.shape[1]):
            raise ValueError("factors do not match S and rank")
    raw_rewards = W @ X
    best = raw_rewards.argmax(axis=1)
    onehot = np.zeros_like(raw_rewards)
    onehot[np.arange(S.shape[0]), best] = 1.0
    bits = None if schema is None else np.stack([schema.transform(w) for w in W])
    rng = np.random.default_rng(seed)
    t = 0
    while True:
        for i in rng.permutation(S.shape[0]):
            t += 1
            ctx = Context(raw=W[i], bits=None if bits is None else bits[i])
            yield BanditRound.create(t, ctx, onehot[i])
