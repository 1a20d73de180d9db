"""Random-walk return probabilities used as initial positional encodings.

For node i, entry t is the probability that a (t+1)-step walk following the
row-stochastic matrix D^-1 A returns to i. Entries live in [0, 1]; entry 0
is zero on simple graphs, and isolated nodes get all-zero rows.
"""

from __future__ import annotations

import numpy as np

from .chem import CallCounter, FeaturizedGraph
from .errors import ShapeError

COMPUTE_COUNTER = CallCounter()


def compute_rwpe(g: FeaturizedGraph, k: int) -> np.ndarray:
    """Return the (n_atoms, k) matrix of t-step return probabilities.

    Computed by k successive edge-list propagations of the walk matrix, not
    dense matrix powers.
    """
    COMPUTE_COUNTER.value += 1
    if k < 1:
        raise ShapeError(f"walk length must be >= 1, got {k}")
    n = g.num_atoms
    out = np.zeros((n, k))
    if n == 0:
        return out
    deg = g.degrees.astype(np.float64)
    src, dst = g.edge_src, g.edge_dst
    inv_deg_src = np.zeros(len(src))
    if len(src):
        inv_deg_src = 1.0 / deg[src]

    # walk[s, j] = probability that a walk started at s currently sits at j
    walk = np.eye(n)
    for t in range(k):
        nxt = np.zeros((n, n))
        if len(src):
            np.add.at(nxt.T, dst, (walk[:, src] * inv_deg_src).T)
        walk = nxt
        out[:, t] = np.diag(walk)
    return out


def attach_cache(g: FeaturizedGraph, matrix: np.ndarray) -> FeaturizedGraph:
    """Store a precomputed encoding matrix on the graph; replaces any old one."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != g.num_atoms:
        raise ShapeError(
            f"encoding rows {matrix.shape} do not match {g.num_atoms} atoms")
    g.rwpe = matrix
    g.rwpe_k = matrix.shape[1]
    return g
