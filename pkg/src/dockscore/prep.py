"""Preprocessed datasets: parsed graphs, features, cached encodings, weights.

Preprocessing happens once; training and inference then never touch the
SMILES parser or the walk-encoding computation again (the module call
counters make that checkable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chem import (
    EDGE_FEATURE_DIM,
    Dataset,
    FeaturizedGraph,
    NODE_FEATURE_DIM,
    Rejection,
    featurize,
    molecular_weight,
    parse_smiles,
)
from .container import read_container, write_container
from .errors import DataError, ParseError
from .rwpe import attach_cache, compute_rwpe

PREP_KIND = "preprocessed-dataset"


@dataclass
class GraphDataset:
    """Featurized records ready for batching: graphs, scores, weights."""

    ids: list[str]
    graphs: list[FeaturizedGraph]
    scores: np.ndarray
    weights: np.ndarray
    k: int
    provenance: str = ""

    def __len__(self):
        return len(self.ids)

    def subset(self, indices) -> "GraphDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return GraphDataset(
            ids=[self.ids[i] for i in indices],
            graphs=[self.graphs[i] for i in indices],
            scores=self.scores[indices],
            weights=self.weights[indices],
            k=self.k,
            provenance=self.provenance,
        )

    def all_degrees(self) -> np.ndarray:
        return np.concatenate([g.degrees for g in self.graphs])


def preprocess(dataset: Dataset, k: int) -> tuple[GraphDataset, list[Rejection]]:
    """Parse, featurize, and attach walk encodings for every record."""
    ids, graphs, scores, weights = [], [], [], []
    rejections: list[Rejection] = []
    for record in dataset.records:
        try:
            mol = parse_smiles(record.smiles)
        except ParseError as e:
            rejections.append(Rejection(record.id, str(e)))
            continue
        g = featurize(mol, graph_id=record.id)
        attach_cache(g, compute_rwpe(g, k))
        ids.append(record.id)
        graphs.append(g)
        scores.append(record.score)
        weights.append(molecular_weight(mol))
    if not ids:
        raise DataError("every record failed to parse; nothing to preprocess")
    return GraphDataset(ids=ids, graphs=graphs,
                        scores=np.array(scores, dtype=np.float64),
                        weights=np.array(weights, dtype=np.float64),
                        k=k, provenance=dataset.provenance), rejections


def save_preprocessed(path, gd: GraphDataset):
    """Pack ragged per-graph arrays into one indexed container file."""
    node_offsets = np.zeros(len(gd) + 1, dtype=np.int64)
    edge_offsets = np.zeros(len(gd) + 1, dtype=np.int64)
    for i, g in enumerate(gd.graphs):
        node_offsets[i + 1] = node_offsets[i] + g.num_atoms
        edge_offsets[i + 1] = edge_offsets[i] + len(g.edge_src)
    arrays = {
        "node_features": np.concatenate([g.node_features for g in gd.graphs]),
        "rwpe": np.concatenate([g.rwpe for g in gd.graphs]),
        "degrees": np.concatenate([g.degrees for g in gd.graphs]),
        "edge_src": np.concatenate([g.edge_src for g in gd.graphs]),
        "edge_dst": np.concatenate([g.edge_dst for g in gd.graphs]),
        "edge_features": np.concatenate([g.edge_features for g in gd.graphs]),
        "node_offsets": node_offsets,
        "edge_offsets": edge_offsets,
        "scores": gd.scores,
        "weights": gd.weights,
    }
    meta = {"k": gd.k, "ids": gd.ids, "provenance": gd.provenance,
            "num_graphs": len(gd)}
    write_container(path, PREP_KIND, meta, arrays)


def load_preprocessed(path) -> GraphDataset:
    kind, meta, arrays = read_container(path, expect_kind=PREP_KIND)
    del kind
    n = meta["num_graphs"]
    ids = meta["ids"]
    if len(ids) != n:
        raise DataError(f"{path}: id list does not match graph count")
    node_off = arrays["node_offsets"]
    edge_off = arrays["edge_offsets"]
    graphs = []
    for i in range(n):
        ns, ne = node_off[i], node_off[i + 1]
        es, ee = edge_off[i], edge_off[i + 1]
        nf = arrays["node_features"][ns:ne]
        if nf.shape[1] != NODE_FEATURE_DIM:
            raise DataError(f"{path}: node feature width {nf.shape[1]} unexpected")
        ef = arrays["edge_features"][es:ee]
        if ef.shape[0] and ef.shape[1] != EDGE_FEATURE_DIM:
            raise DataError(f"{path}: edge feature width {ef.shape[1]} unexpected")
        g = FeaturizedGraph(
            graph_id=ids[i],
            node_features=nf,
            edge_src=arrays["edge_src"][es:ee],
            edge_dst=arrays["edge_dst"][es:ee],
            edge_features=ef,
            degrees=arrays["degrees"][ns:ne],
            rwpe=arrays["rwpe"][ns:ne],
            rwpe_k=int(meta["k"]),
        )
        graphs.append(g)
    return GraphDataset(ids=ids, graphs=graphs, scores=arrays["scores"],
                        weights=arrays["weights"], k=int(meta["k"]),
                        provenance=meta.get("provenance", ""))
