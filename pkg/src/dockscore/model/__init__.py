"""The graph-transformer surrogate architecture and its ablation variants."""

from .batch import GraphBatch, collate
from .config import (
    AGGREGATORS,
    DegreeStats,
    ModelConfig,
    PRESET_TRAINING,
    SCALERS,
    preset,
    preset_names,
)
from .layers import (
    gcn_conv,
    global_attention,
    gps_block,
    pna_aggregate,
    pna_conv_features,
    pna_conv_pe,
    scaler_values,
)
from .network import Model, build_model, parameter_count, parameter_shapes

__all__ = [
    "AGGREGATORS",
    "DegreeStats",
    "GraphBatch",
    "Model",
    "ModelConfig",
    "PRESET_TRAINING",
    "SCALERS",
    "build_model",
    "collate",
    "gcn_conv",
    "global_attention",
    "gps_block",
    "parameter_count",
    "parameter_shapes",
    "pna_aggregate",
    "pna_conv_features",
    "pna_conv_pe",
    "preset",
    "preset_names",
    "scaler_values",
]
