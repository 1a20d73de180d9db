"""Forward-pass throughput measurement over a preprocessed dataset.

Timing covers batch collation from the cache plus the model forward pass;
parsing and walk-encoding computation happened at preprocess time and are
excluded, matching how surrogate screening is deployed.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import DataError
from .model import Model, collate
from .prep import GraphDataset


def _one_pass(model: Model, data: GraphDataset, batch_size: int) -> np.ndarray:
    use_pe = model.config.use_rwpe
    k = model.config.rw_length if use_pe else None
    out = np.empty(len(data))
    for start in range(0, len(data), batch_size):
        chunk = data.graphs[start:start + batch_size]
        batch = collate(chunk, require_rwpe=use_pe, rw_length=k)
        out[start:start + len(chunk)] = model.predict(batch)
    return out


def run_benchmark(model: Model, data: GraphDataset, batch_size: int,
                  repetitions: int) -> dict:
    """Median samples/second over repetitions, after one warm-up pass."""
    if len(data) == 0:
        raise DataError("benchmark needs a non-empty dataset")
    if batch_size < 1 or repetitions < 1:
        raise DataError("batch_size and repetitions must be >= 1")
    _one_pass(model, data, batch_size)  # warm-up
    per_rep = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        _one_pass(model, data, batch_size)
        per_rep.append(len(data) / (time.perf_counter() - t0))
    sps = float(np.median(per_rep))
    return {
        "samples_per_second": sps,
        "per_repetition": per_rep,
        "repetitions": repetitions,
        "total_samples": len(data),
        "batch_size": batch_size,
        "hours_for_128M": 128e6 / sps / 3600.0,
        "worker_count": 1,
    }
