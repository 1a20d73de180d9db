"""Model assembly: parameter declaration, initialization, and forward pass."""

from __future__ import annotations

import numpy as np

from .. import numeric as dn
from ..chem import EDGE_FEATURE_DIM, NODE_FEATURE_DIM
from ..errors import ConfigError
from ..numeric import SeededRng, Tensor
from .batch import GraphBatch
from .config import ModelConfig
from .layers import _ACT, gps_block


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Names and shapes of every learnable tensor, in declaration order.

    `<name>.w` entries get fan-based uniform init, `.b` zeros, norm
    `.gamma`/`.beta` ones/zeros.
    """
    shapes: dict[str, tuple] = {}

    def lin(name, d_in, d_out):
        shapes[f"{name}.w"] = (d_in, d_out)
        shapes[f"{name}.b"] = (d_out,)

    h = cfg.hidden_dim
    k = cfg.rw_length if cfg.use_rwpe else 0
    tower_dim = h // cfg.towers
    n_pairs = len(cfg.aggregators) * len(cfg.scalers)

    lin("input.node", NODE_FEATURE_DIM, h)
    if cfg.use_rwpe:
        lin("input.pe", k, k)
    for layer in range(cfg.num_layers):
        pre = f"layer{layer}"
        if cfg.conv_kind == "gcn":
            lin(f"{pre}.gcn.self", h, h)
            lin(f"{pre}.gcn.nbr", h + k, h)
        else:
            msg_in = 2 * (tower_dim + k) + EDGE_FEATURE_DIM
            upd_in = tower_dim + k + n_pairs * tower_dim
            for t in range(cfg.towers):
                for i in range(cfg.pre_fc_layers):
                    lin(f"{pre}.feat.tower{t}.pre.{i}",
                        msg_in if i == 0 else tower_dim, tower_dim)
                for i in range(cfg.post_fc_layers):
                    lin(f"{pre}.feat.tower{t}.post.{i}",
                        upd_in if i == 0 else tower_dim, tower_dim)
            lin(f"{pre}.feat.mix", h, h)
        for proj in ("q", "k", "v", "o"):
            lin(f"{pre}.attn.{proj}", h, h)
        for norm in ("norm1", "norm2"):
            shapes[f"{pre}.{norm}.gamma"] = (h,)
            shapes[f"{pre}.{norm}.beta"] = (h,)
        lin(f"{pre}.ffn.0", h, 2 * h)
        lin(f"{pre}.ffn.1", 2 * h, h)
        if cfg.use_rwpe:
            for i in range(cfg.pre_fc_layers):
                lin(f"{pre}.pe.pre.{i}", 2 * k if i == 0 else k, k)
            for i in range(cfg.post_fc_layers):
                lin(f"{pre}.pe.post.{i}", k + n_pairs * k if i == 0 else k, k)

    read_in = h + k
    dims = list(cfg.readout_mlp_dims) + [1]
    for i, d_out in enumerate(dims):
        lin(f"readout.{i}", read_in if i == 0 else dims[i - 1], d_out)
    return shapes


def _init_array(name: str, shape: tuple, rng: SeededRng) -> np.ndarray:
    if name.endswith(".b") or name.endswith(".beta"):
        return np.zeros(shape)
    if name.endswith(".gamma"):
        return np.ones(shape)
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.child("init", name).uniform(size=shape, low=-bound, high=bound)


class Model:
    """A built network: config plus named parameter tensors."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor]):
        self.config = cfg
        self.params = params

    @property
    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def forward(self, batch: GraphBatch, training: bool = False,
                rng: SeededRng | None = None) -> Tensor:
        """Per-graph score predictions as a (num_graphs, 1) tensor."""
        cfg = self.config
        if training and rng is None and (cfg.dropout or cfg.dropout_attn or cfg.dropout_pe):
            raise ConfigError("training forward with nonzero dropout needs an rng")
        X = dn.add(dn.matmul(Tensor(batch.node_features), self.params["input.node.w"]),
                   self.params["input.node.b"])
        P = None
        if cfg.use_rwpe:
            if batch.rwpe is None:
                raise ConfigError("batch is missing the walk-encoding cache")
            if batch.rwpe.shape[1] != cfg.rw_length:
                raise ConfigError(
                    f"cached walk length {batch.rwpe.shape[1]} does not match "
                    f"model rw_length {cfg.rw_length}")
            P = _ACT[cfg.activation_pe](
                dn.add(dn.matmul(Tensor(batch.rwpe), self.params["input.pe.w"]),
                       self.params["input.pe.b"]))
        for layer in range(cfg.num_layers):
            X, P = gps_block(X, P, batch, self.params, layer, cfg, training, rng)
        node_repr = dn.concat([X, P], axis=1) if cfg.use_rwpe else X
        pooled = dn.segment_reduce(node_repr, batch.segment_ids,
                                   batch.num_graphs, "mean")
        out = pooled
        depth = len(cfg.readout_mlp_dims) + 1
        for i in range(depth):
            out = dn.add(dn.matmul(out, self.params[f"readout.{i}.w"]),
                         self.params[f"readout.{i}.b"])
            if i < depth - 1:
                out = _ACT[cfg.activation](out)
        return out

    def predict(self, batch: GraphBatch) -> np.ndarray:
        """Inference-mode predictions as a flat float array."""
        return self.forward(batch, training=False).data[:, 0].copy()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.params.items()}


def build_model(cfg: ModelConfig, rng: SeededRng) -> Model:
    """Validate the config and initialize all parameters deterministically.

    Initialization is keyed by parameter name, so the same (config, seed)
    always yields identical weights regardless of build order.
    """
    cfg.validate()
    if cfg.degree_stats is None:
        raise ConfigError("degree_stats must be populated from the training split")
    params = {name: Tensor(_init_array(name, shape, rng), requires_grad=True)
              for name, shape in parameter_shapes(cfg).items()}
    return Model(cfg, params)


def parameter_count(model: Model) -> int:
    return model.parameter_count
