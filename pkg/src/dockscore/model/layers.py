"""Message passing, degree-scaled aggregation, global attention, GPS blocks.

All functions build autodiff tape subgraphs from a named parameter dict;
the names are declared in `network.parameter_shapes` and must line up.
"""

from __future__ import annotations

import numpy as np

from .. import numeric as dn
from ..errors import ConfigError
from ..numeric import SeededRng, Tensor
from .batch import GraphBatch
from .config import DegreeStats, ModelConfig

_ACT = {"relu": dn.relu, "elu": dn.elu, "tanh": dn.tanh}


def _linear(params, name, x):
    return dn.add(dn.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def _mlp(params, prefix, x, depth, act):
    """Stack of `depth` linear layers with `act` between them (not after)."""
    for i in range(depth):
        x = _linear(params, f"{prefix}.{i}", x)
        if i < depth - 1:
            x = _ACT[act](x)
    return x


def scaler_values(name: str, degrees: np.ndarray, stats: DegreeStats) -> np.ndarray:
    """Degree-dependent multiplier per node; constants w.r.t. the tape."""
    d = degrees.astype(np.float64)
    if name == "identity":
        return np.ones_like(d)
    if name == "amplification":
        return np.log(d + 1.0) / stats.log_mean
    if name == "attenuation":
        return stats.log_mean / np.maximum(np.log(d + 1.0), 1e-5)
    if name == "linear":
        return d / stats.lin_mean
    if name == "inverse_linear":
        return stats.lin_mean / np.maximum(d, 1.0)
    raise ConfigError(f"unknown scaler '{name}'")


def pna_aggregate(messages: Tensor, targets: np.ndarray, degrees: np.ndarray,
                  num_nodes: int, aggregators, scalers,
                  stats: DegreeStats) -> Tensor:
    """Aggregate per-target message rows with every (aggregator, scaler) pair.

    Output width is |aggregators| * |scalers| * message width, blocks ordered
    aggregator-major. Nodes with no incoming messages get all-zero rows.
    """
    seg = targets
    n = num_nodes
    mean = None
    blocks = []
    for agg in aggregators:
        if agg in ("mean", "sum", "max", "min"):
            block = dn.segment_reduce(messages, seg, n, agg)
            if agg == "mean":
                mean = block
        elif agg == "mul":
            block = dn.segment_reduce(messages, seg, n, "prod")
        elif agg == "std":
            if mean is None:
                mean = dn.segment_reduce(messages, seg, n, "mean")
            sq = dn.segment_reduce(dn.mul(messages, messages), seg, n, "mean")
            var = dn.sub(sq, dn.mul(mean, mean))
            block = dn.sqrt(dn.add(dn.relu(var), Tensor(np.array(1e-8))))
        elif agg in ("moment4", "moment5"):
            order = int(agg[-1])
            if mean is None:
                mean = dn.segment_reduce(messages, seg, n, "mean")
            centered = dn.sub(messages, dn.gather_rows(mean, seg))
            sq = dn.mul(centered, centered)
            powed = dn.mul(sq, sq)
            if order == 5:
                powed = dn.mul(powed, centered)
            cm = dn.segment_reduce(powed, seg, n, "mean")
            block = dn.signed_root(cm, order)
        else:
            raise ConfigError(f"unknown aggregator '{agg}'")
        for scaler in scalers:
            scale = scaler_values(scaler, degrees, stats)
            blocks.append(dn.mul(block, Tensor(scale[:, None])))
    out = dn.concat(blocks, axis=1)
    # degree-0 targets are defined to aggregate to zero (kills the std epsilon)
    connected = (degrees > 0).astype(np.float64)[:, None]
    return dn.mul(out, Tensor(connected))


def pna_conv_features(X: Tensor, P: Tensor | None, batch: GraphBatch,
                      params, prefix: str, cfg: ModelConfig) -> Tensor:
    """Tower-parallel PNA update of the node-feature stream."""
    tower_dim = cfg.hidden_dim // cfg.towers
    e_feat = Tensor(batch.edge_features)
    p_src = p_dst = None
    if cfg.use_rwpe:
        p_src = dn.gather_rows(P, batch.edge_src)
        p_dst = dn.gather_rows(P, batch.edge_dst)
    outs = []
    for t in range(cfg.towers):
        lo, hi = t * tower_dim, (t + 1) * tower_dim
        x_t = dn.slice_axis(X, 1, lo, hi) if cfg.towers > 1 else X
        x_src = dn.gather_rows(x_t, batch.edge_src)
        x_dst = dn.gather_rows(x_t, batch.edge_dst)
        if cfg.use_rwpe:
            msg_in = dn.concat([x_dst, p_dst, x_src, p_src, e_feat], axis=1)
        else:
            msg_in = dn.concat([x_dst, x_src, e_feat], axis=1)
        msg = _mlp(params, f"{prefix}.tower{t}.pre", msg_in,
                   cfg.pre_fc_layers, cfg.activation)
        agg = pna_aggregate(msg, batch.edge_dst, batch.degrees, batch.num_nodes,
                            cfg.aggregators, cfg.scalers, cfg.degree_stats)
        upd_in = dn.concat([x_t, P, agg] if cfg.use_rwpe else [x_t, agg], axis=1)
        outs.append(_mlp(params, f"{prefix}.tower{t}.post", upd_in,
                         cfg.post_fc_layers, cfg.activation))
    mixed = outs[0] if cfg.towers == 1 else dn.concat(outs, axis=1)
    return _linear(params, f"{prefix}.mix", mixed)


def pna_conv_pe(P: Tensor, batch: GraphBatch, params, prefix: str,
                cfg: ModelConfig, training: bool, rng: SeededRng | None) -> Tensor:
    """Single-tower PNA over the positional stream; width stays at rw_length."""
    if not cfg.use_rwpe:
        raise ConfigError("positional conv called with use_rwpe=False")
    p_src = dn.gather_rows(P, batch.edge_src)
    p_dst = dn.gather_rows(P, batch.edge_dst)
    msg = _mlp(params, f"{prefix}.pre", dn.concat([p_dst, p_src], axis=1),
               cfg.pre_fc_layers, cfg.activation_pe)
    agg = pna_aggregate(msg, batch.edge_dst, batch.degrees, batch.num_nodes,
                        cfg.aggregators, cfg.scalers, cfg.degree_stats)
    out = _mlp(params, f"{prefix}.post", dn.concat([P, agg], axis=1),
               cfg.post_fc_layers, cfg.activation_pe)
    rng_pe = rng.child(prefix, "pe-drop") if rng is not None else None
    return dn.dropout(out, cfg.dropout_pe, training, rng_pe)


def gcn_conv(X: Tensor, P: Tensor | None, batch: GraphBatch,
             params, prefix: str, cfg: ModelConfig) -> Tensor:
    """Mean-normalized neighbor transform used by the conv-swap ablation.

    x'_i = W x_i + sum_j (1/sqrt((d_i+1)(d_j+1))) W_n [x_j (+) p_j]
    """
    self_term = _linear(params, f"{prefix}.self", X)
    nb_in = dn.gather_rows(X, batch.edge_src)
    if cfg.use_rwpe:
        nb_in = dn.concat([nb_in, dn.gather_rows(P, batch.edge_src)], axis=1)
    nb = _linear(params, f"{prefix}.nbr", nb_in)
    d = batch.degrees.astype(np.float64) + 1.0
    coeff = 1.0 / np.sqrt(d[batch.edge_dst] * d[batch.edge_src])
    nb = dn.mul(nb, Tensor(coeff[:, None]))
    agg = dn.segment_reduce(nb, batch.edge_dst, batch.num_nodes, "sum")
    return dn.add(self_term, agg)


def global_attention(X: Tensor, batch: GraphBatch, params, prefix: str,
                     cfg: ModelConfig, training: bool,
                     rng: SeededRng | None) -> Tensor:
    """Multi-head scaled dot-product attention masked to each graph."""
    heads = cfg.attention_heads
    dh = cfg.hidden_dim // heads
    q = _linear(params, f"{prefix}.q", X)
    k = _linear(params, f"{prefix}.k", X)
    v = _linear(params, f"{prefix}.v", X)
    mask = batch.attn_mask
    outs = []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        qh = dn.slice_axis(q, 1, lo, hi) if heads > 1 else q
        kh = dn.slice_axis(k, 1, lo, hi) if heads > 1 else k
        vh = dn.slice_axis(v, 1, lo, hi) if heads > 1 else v
        scores = dn.scalar_mul(dn.matmul(qh, dn.transpose(kh)), 1.0 / np.sqrt(dh))
        probs = dn.softmax(scores, axis=-1, mask=mask)
        rng_h = rng.child(prefix, "attn-drop", h) if rng is not None else None
        probs = dn.dropout(probs, cfg.dropout_attn, training, rng_h)
        outs.append(dn.matmul(probs, vh))
    merged = outs[0] if heads == 1 else dn.concat(outs, axis=1)
    return _linear(params, f"{prefix}.o", merged)


def _affine_norm(params, name, x):
    normed = dn.layer_norm(x, axis=-1)
    return dn.add(dn.mul(normed, params[f"{name}.gamma"]), params[f"{name}.beta"])


def gps_block(X: Tensor, P: Tensor | None, batch: GraphBatch, params,
              layer: int, cfg: ModelConfig, training: bool,
              rng: SeededRng | None) -> tuple[Tensor, Tensor | None]:
    """One transformer block: local conv + global attention + FFN.

    X1 = norm(residual_weight * X + conv + attention)
    X' = norm(X1 + FFN(X1));  P' = residual_weight * P + positional conv
    """
    prefix = f"layer{layer}"
    if cfg.conv_kind == "gcn":
        m = gcn_conv(X, P, batch, params, f"{prefix}.gcn", cfg)
    else:
        m = pna_conv_features(X, P, batch, params, f"{prefix}.feat", cfg)
    rng_m = rng.child(prefix, "msg-drop") if rng is not None else None
    m = dn.dropout(m, cfg.dropout, training, rng_m)
    a = global_attention(X, batch, params, f"{prefix}.attn", cfg, training, rng)
    x1 = _affine_norm(params, f"{prefix}.norm1",
                      dn.add(dn.add(dn.scalar_mul(X, cfg.residual_weight), m), a))
    ffn = _linear(params, f"{prefix}.ffn.1",
                  _ACT[cfg.activation](_linear(params, f"{prefix}.ffn.0", x1)))
    x_out = _affine_norm(params, f"{prefix}.norm2", dn.add(x1, ffn))
    p_out = None
    if cfg.use_rwpe:
        pe = pna_conv_pe(P, batch, params, f"{prefix}.pe", cfg, training, rng)
        p_out = dn.add(dn.scalar_mul(P, cfg.residual_weight), pe)
    return x_out, p_out
