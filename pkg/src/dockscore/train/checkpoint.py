"""Model checkpoints: config, degree statistics, and parameter arrays."""

from __future__ import annotations

from ..container import read_container, write_container
from ..errors import DataError
from ..model import Model, ModelConfig
from ..model.network import parameter_shapes
from ..numeric import Tensor

CHECKPOINT_KIND = "model-checkpoint"


def save_checkpoint(path, model: Model, *, wmse_alpha: float,
                    hit_fraction: float, split_seed: int | None,
                    train_seed: int, selected_epoch: int):
    meta = {
        "config": model.config.to_dict(),
        "wmse_alpha": wmse_alpha,
        "hit_fraction": hit_fraction,
        "split_seed": split_seed,
        "train_seed": train_seed,
        "selected_epoch": selected_epoch,
    }
    write_container(path, CHECKPOINT_KIND, meta, model.state_arrays())


def load_checkpoint(path) -> tuple[Model, dict]:
    """Rebuild the model; any mismatch with the declared shapes is an error."""
    kind, meta, arrays = read_container(path, expect_kind=CHECKPOINT_KIND)
    del kind
    cfg = ModelConfig.from_dict(meta["config"]).validate()
    expected = parameter_shapes(cfg)
    if set(expected) != set(arrays):
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        raise DataError(
            f"{path}: parameter names do not match config "
            f"(missing {missing[:3]}, unexpected {extra[:3]})")
    params = {}
    for name, shape in expected.items():
        arr = arrays[name]
        if tuple(arr.shape) != tuple(shape):
            raise DataError(
                f"{path}: parameter '{name}' has shape {arr.shape}, expected {shape}")
        params[name] = Tensor(arr, requires_grad=True)
    return Model(cfg, params), meta
