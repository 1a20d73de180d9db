"""Shared helpers for building tiny molecules, batches, and models."""

import numpy as np

from dockscore.chem import featurize, parse_smiles
from dockscore.model import DegreeStats, ModelConfig, build_model, collate
from dockscore.numeric import SeededRng
from dockscore.rwpe import attach_cache, compute_rwpe


def featurized(smiles: str, k: int | None = None, graph_id: str = ""):
    g = featurize(parse_smiles(smiles), graph_id=graph_id or smiles)
    if k is not None:
        attach_cache(g, compute_rwpe(g, k))
    return g


def small_batch(smiles_list, k: int | None = None):
    graphs = [featurized(s, k, graph_id=f"g{i}") for i, s in enumerate(smiles_list)]
    return collate(graphs, require_rwpe=k is not None, rw_length=k)


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        hidden_dim=12, num_layers=2, rw_length=3,
        aggregators=("mean", "max", "std"), scalers=("identity", "amplification"),
        towers=2, pre_fc_layers=1, post_fc_layers=1,
        activation="relu", activation_pe="tanh",
        dropout=0.0, dropout_attn=0.0, dropout_pe=0.0,
        residual_weight=1.0, attention_heads=2, readout_mlp_dims=(8,),
        conv_kind="pna", use_rwpe=True,
        degree_stats=DegreeStats(log_mean=1.0, lin_mean=2.0),
    )
    base.update(overrides)
    return ModelConfig(**base)


def tiny_model(cfg=None, seed=0, **overrides):
    cfg = cfg or tiny_config(**overrides)
    return build_model(cfg, SeededRng(seed))


def stats_from_batch(batch) -> DegreeStats:
    return DegreeStats.from_degrees(batch.degrees)


def param_loss_fn(model, batch, name, training=False, rng=None):
    """Scalar loss as a function of one named parameter, for gradient checks."""
    import dockscore.numeric as dn

    def f(t):
        old = model.params[name]
        model.params[name] = t
        try:
            out = model.forward(batch, training=training, rng=rng)
            return dn.reduce_mean(dn.mul(out, out))
        finally:
            model.params[name] = old
    return f


def check_model_gradients(model, batch, per_tensor_coords=4, h=1e-5,
                          training=False, rng=None, seed=7):
    """Finite-difference every parameter tensor on sampled coordinates."""
    from dockscore.numeric import finite_diff_check

    worst = 0.0
    sample_rng = SeededRng(seed)
    for name in sorted(model.params):
        f = param_loss_fn(model, batch, name, training=training, rng=rng)
        res = finite_diff_check(f, model.params[name], h=h,
                                sample=per_tensor_coords,
                                rng=sample_rng.child(name))
        if res.checked:
            worst = max(worst, res.max_rel_error)
    return worst


def relabel(smiles_a: str, smiles_b: str, k: int):
    """Two SMILES spellings of the same molecule, featurized with encodings."""
    return featurized(smiles_a, k), featurized(smiles_b, k)
