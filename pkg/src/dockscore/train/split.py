"""Dataset partitioning: seeded random splits and the molecular-weight split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chem import Dataset, molecular_weight, parse_smiles
from ..errors import ConfigError, DataError
from ..numeric import SeededRng


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "random"  # "random" | "weight"
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def validate(self):
        if self.mode not in ("random", "weight"):
            raise ConfigError(f"unknown split mode '{self.mode}'")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions {self.fractions} must sum to 1")
        if any(f <= 0 for f in self.fractions):
            raise ConfigError("all split fractions must be positive")
        return self


def split_indices(n: int, spec: SplitSpec,
                  weights: np.ndarray | None = None):
    """Disjoint, exhaustive (train, val, test) index arrays.

    Random mode: seeded shuffle then contiguous cut. Weight mode: the
    heaviest test-fraction becomes the test set; validation is drawn at
    random from the lighter remainder, so every training and validation
    weight is <= every test weight.
    """
    spec.validate()
    n_val = int(np.floor(spec.fractions[1] * n))
    n_test = int(np.floor(spec.fractions[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"dataset of {n} records too small for non-empty splits")
    rng = SeededRng(spec.seed).child("split", spec.mode)
    if spec.mode == "random":
        perm = rng.permutation(n)
        train = perm[:n_train]
        val = perm[n_train:n_train + n_val]
        test = perm[n_train + n_val:]
    else:
        if weights is None:
            raise ConfigError("weight-mode split needs molecular weights")
        order = np.argsort(np.asarray(weights, dtype=np.float64), kind="stable")
        test = order[n - n_test:]
        pool = order[:n - n_test]
        pick = rng.permutation(len(pool))
        val = pool[pick[:n_val]]
        train = pool[pick[n_val:]]
    return np.sort(train), np.sort(val), np.sort(test)


def split_dataset(d: Dataset, spec: SplitSpec):
    """Partition a SMILES dataset into (train, val, test) Datasets."""
    weights = None
    if spec.mode == "weight":
        weights = np.array([molecular_weight(parse_smiles(r.smiles))
                            for r in d.records])
    idx = split_indices(len(d.records), spec, weights)
    parts = tuple(
        Dataset([d.records[i] for i in part], provenance=d.provenance)
        for part in idx)
    return parts
