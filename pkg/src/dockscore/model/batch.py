"""Disjoint-union batching of featurized molecular graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chem import EDGE_FEATURE_DIM, FeaturizedGraph
from ..errors import ConfigError, ShapeError


@dataclass
class GraphBatch:
    """Node/edge arrays for a batch, with node->graph segment ids.

    Edges are directed, globally sorted by (dst, src); segment ids are
    contiguous from 0. The attention mask restricts nodes to their own graph.
    """

    node_features: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_features: np.ndarray
    segment_ids: np.ndarray
    degrees: np.ndarray
    num_graphs: int
    rwpe: np.ndarray | None = None
    graph_ids: list[str] = field(default_factory=list)
    _attn_mask: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def attn_mask(self) -> np.ndarray:
        if self._attn_mask is None:
            seg = self.segment_ids
            self._attn_mask = seg[:, None] == seg[None, :]
        return self._attn_mask


def collate(graphs: list[FeaturizedGraph], require_rwpe: bool = True,
            rw_length: int | None = None) -> GraphBatch:
    """Stack graphs into one disjoint-union batch.

    When `require_rwpe`, every graph must carry a cached encoding matrix;
    `rw_length` (when given) is cross-checked against the cached width.
    """
    if not graphs:
        raise ShapeError("cannot collate an empty list of graphs")
    nodes, srcs, dsts, efeats, segs, degs, pes = [], [], [], [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        nodes.append(g.node_features)
        srcs.append(g.edge_src + offset)
        dsts.append(g.edge_dst + offset)
        efeats.append(g.edge_features)
        segs.append(np.full(g.num_atoms, gi, dtype=np.int64))
        degs.append(g.degrees)
        if require_rwpe:
            if g.rwpe is None:
                raise ConfigError(f"graph '{g.graph_id}' has no cached walk encoding")
            if rw_length is not None and g.rwpe.shape[1] != rw_length:
                raise ConfigError(
                    f"cached walk length {g.rwpe.shape[1]} does not match "
                    f"configured length {rw_length} for graph '{g.graph_id}'")
            pes.append(g.rwpe)
        offset += g.num_atoms
    return GraphBatch(
        node_features=np.concatenate(nodes, axis=0),
        edge_src=np.concatenate(srcs),
        edge_dst=np.concatenate(dsts),
        edge_features=(np.concatenate(efeats, axis=0) if any(e.shape[0] for e in efeats)
                       else np.zeros((0, EDGE_FEATURE_DIM))),
        segment_ids=np.concatenate(segs),
        degrees=np.concatenate(degs),
        num_graphs=len(graphs),
        rwpe=np.concatenate(pes, axis=0) if require_rwpe else None,
        graph_ids=[g.graph_id for g in graphs],
    )
