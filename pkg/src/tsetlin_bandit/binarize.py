"""Context binarization: per-feature thermometer codes and one-hot categories.

Numeric features are encoded cumulatively: bit i of a feature block is 1
iff the value is >= the i-th threshold, so the popcount of a block equals
the value's rank among the thresholds and single literals express
half-space splits.  Categorical features get one bit per retained
category.  A fitted schema is immutable and safe to share across threads.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BinarizationSchema",
    "OneHotFeature",
    "ThermometerFeature",
    "cutoff_schema",
    "fit_schema",
    "threshold_binarize",
]


@dataclass(frozen=True)
class ThermometerFeature:
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) == 0:
            raise ValueError("a thermometer feature needs at least one threshold")
        diffs = np.diff(self.thresholds)
        if len(diffs) and not (diffs > 0).all():
            raise ValueError("thresholds must be strictly increasing")

    @property
    def width(self) -> int:
        return len(self.thresholds)

    def encode(self, value) -> np.ndarray:
        return (float(value) >= np.asarray(self.thresholds)).astype(np.uint8)


@dataclass(frozen=True)
class OneHotFeature:
    categories: tuple

    def __post_init__(self):
        if len(self.categories) == 0:
            raise ValueError("a one-hot feature needs at least one category")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate categories")

    @property
    def width(self) -> int:
        return len(self.categories)

    def encode(self, value) -> np.ndarray:
        # Unseen categories (dropped by the bit budget) encode to all zeros.
        return np.array([1 if value == c else 0 for c in self.categories], dtype=np.uint8)


@dataclass(frozen=True)
class BinarizationSchema:
    features: tuple

    @property
    def num_features(self) -> int:
        """M: input context dimension."""
        return len(self.features)

    @property
    def width(self) -> int:
        """B: total output bits."""
        return sum(f.width for f in self.features)

    def transform(self, context) -> np.ndarray:
        """Encode one context row into its B-bit vector."""
        if len(context) != self.num_features:
            raise ValueError(
                f"context has {len(context)} features, schema expects {self.num_features}"
            )
        return np.concatenate([f.encode(v) for f, v in zip(self.features, context)])

    def transform_many(self, rows) -> np.ndarray:
        return np.stack([self.transform(row) for row in rows])

    def to_json_dict(self) -> dict:
        features = {}
        for i, f in enumerate(self.features):
            if isinstance(f, ThermometerFeature):
                features[str(i)] = {"kind": "thermometer", "thresholds": list(f.thresholds)}
            else:
                features[str(i)] = {"kind": "onehot", "categories": list(f.categories)}
        return {"format": "binarization-schema", "version": 1, "features": features}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "BinarizationSchema":
        entries = payload["features"]
        features = []
        for i in range(len(entries)):
            spec = entries[str(i)]
            if spec["kind"] == "thermometer":
                features.append(ThermometerFeature(tuple(float(t) for t in spec["thresholds"])))
            elif spec["kind"] == "onehot":
                features.append(OneHotFeature(tuple(spec["categories"])))
            else:
                raise ValueError(f"unknown feature kind {spec['kind']!r}")
        return cls(tuple(features))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "BinarizationSchema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _fit_numeric(column: np.ndarray, max_bits: int) -> ThermometerFeature:
    values = np.asarray(column, dtype=float)
    uniq = np.unique(values)
    if len(uniq) <= max_bits:
        return ThermometerFeature(tuple(float(u) for u in uniq))
    # Equally spaced quantile cut points i/m for i = 1..m; collapsed when
    # heavy duplication makes neighbouring quantiles coincide.
    qs = np.arange(1, max_bits + 1) / max_bits
    cuts = np.unique(np.quantile(values, qs))
    return ThermometerFeature(tuple(float(c) for c in cuts))


def _fit_categorical(column, max_bits: int) -> OneHotFeature:
    counts = Counter(column)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
    kept = [value for value, _ in ranked[:max_bits]]
    return OneHotFeature(tuple(kept))


def fit_schema(columns, max_bits_per_feature) -> BinarizationSchema:
    """Fit per-feature encoders from raw column samples.

    Numeric columns become thermometer features: when a column has at most
    max_bits distinct values the sorted uniques are the thresholds,
    otherwise the thresholds are max_bits equally spaced quantile cut
    points.  Non-numeric columns become one-hot features keeping the
    max_bits most frequent categories.

    max_bits_per_feature is a single int or one int per column.
    """
    columns = list(columns)
    if len(columns) == 0:
        raise ValueError("cannot fit a schema on zero features")
    if np.isscalar(max_bits_per_feature):
        budgets = [int(max_bits_per_feature)] * len(columns)
    else:
        budgets = [int(b) for b in max_bits_per_feature]
        if len(budgets) != len(columns):
            raise ValueError(
                f"{len(budgets)} bit budgets for {len(columns)} features"
            )
    features = []
    for i, (column, budget) in enumerate(zip(columns, budgets)):
        column = np.asarray(column)
        if column.size == 0:
            raise ValueError(f"feature {i} has no samples to fit on")
        if budget < 1:
            raise ValueError(f"feature {i}: max bits must be >= 1, got {budget}")
        if np.issubdtype(column.dtype, np.number):
            features.append(_fit_numeric(column, budget))
        else:
            features.append(_fit_categorical(column.tolist(), budget))
    return BinarizationSchema(tuple(features))


def threshold_binarize(values, cutoff) -> np.ndarray:
    """One bit per entry: 1 iff the value is >= cutoff."""
    return (np.asarray(values, dtype=float) >= float(cutoff)).astype(np.uint8)


def cutoff_schema(num_features: int, cutoff) -> BinarizationSchema:
    """Schema applying a single shared cutoff to every feature."""
    if num_features < 1:
        raise ValueError("num_features must be >= 1")
    return BinarizationSchema(
        tuple(ThermometerFeature((float(cutoff),)) for _ in range(num_features))
    )
