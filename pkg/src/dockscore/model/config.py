"""Model architecture configuration and the two named presets."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError

AGGREGATORS = ("mean", "min", "max", "std", "sum", "mul", "moment4", "moment5")
SCALERS = ("identity", "amplification", "attenuation", "linear", "inverse_linear")
ACTIVATIONS = ("relu", "elu", "tanh")
CONV_KINDS = ("pna", "gcn")


@dataclass(frozen=True)
class DegreeStats:
    """Training-set degree statistics feeding the aggregation scalers."""

    log_mean: float  # mean of log(d + 1)
    lin_mean: float  # mean of d

    @staticmethod
    def from_degrees(degrees: np.ndarray) -> "DegreeStats":
        degrees = np.asarray(degrees, dtype=np.float64)
        if degrees.size == 0:
            raise ConfigError("cannot compute degree statistics from zero nodes")
        return DegreeStats(
            log_mean=max(float(np.mean(np.log(degrees + 1.0))), 1e-5),
            lin_mean=max(float(np.mean(degrees)), 1e-5),
        )


@dataclass
class ModelConfig:
    hidden_dim: int = 128
    num_layers: int = 4
    rw_length: int = 9
    aggregators: tuple[str, ...] = ("mean", "min", "max", "std")
    scalers: tuple[str, ...] = ("identity", "amplification", "attenuation")
    towers: int = 4
    pre_fc_layers: int = 1
    post_fc_layers: int = 1
    activation: str = "relu"
    activation_pe: str = "tanh"
    dropout: float = 0.1
    dropout_attn: float = 0.5
    dropout_pe: float = 0.1
    residual_weight: float = 1.0
    attention_heads: int = 4
    readout_mlp_dims: tuple[int, ...] = (64,)
    conv_kind: str = "pna"
    use_rwpe: bool = True
    degree_stats: DegreeStats | None = None

    def validate(self):
        if self.hidden_dim < 1 or self.num_layers < 1:
            raise ConfigError("hidden_dim and num_layers must be positive")
        if not self.aggregators:
            raise ConfigError("aggregator set must not be empty")
        for a in self.aggregators:
            if a not in AGGREGATORS:
                raise ConfigError(f"unknown aggregator '{a}'")
        for s in self.scalers:
            if s not in SCALERS:
                raise ConfigError(f"unknown scaler '{s}'")
        if not self.scalers:
            raise ConfigError("scaler set must not be empty")
        if self.hidden_dim % self.towers != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by towers {self.towers}")
        if self.hidden_dim % self.attention_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by heads {self.attention_heads}")
        if self.use_rwpe and self.rw_length < 1:
            raise ConfigError("rw_length must be >= 1 when positional encodings are used")
        if self.activation not in ACTIVATIONS or self.activation_pe not in ACTIVATIONS:
            raise ConfigError(f"activations must be one of {ACTIVATIONS}")
        for rate in (self.dropout, self.dropout_attn, self.dropout_pe):
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"dropout rate {rate} outside [0, 1)")
        if self.residual_weight < 0:
            raise ConfigError("residual_weight must be >= 0")
        if self.conv_kind not in CONV_KINDS:
            raise ConfigError(f"conv_kind must be one of {CONV_KINDS}")
        return self

    def with_degree_stats(self, stats: DegreeStats) -> "ModelConfig":
        return replace(self, degree_stats=stats)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["aggregators"] = list(self.aggregators)
        d["scalers"] = list(self.scalers)
        d["readout_mlp_dims"] = list(self.readout_mlp_dims)
        if self.degree_stats is not None:
            d["degree_stats"] = {"log_mean": self.degree_stats.log_mean,
                                 "lin_mean": self.degree_stats.lin_mean}
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("aggregators", "scalers", "readout_mlp_dims"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("degree_stats") is not None:
            d["degree_stats"] = DegreeStats(**d["degree_stats"])
        return ModelConfig(**d)


# Named presets. Training defaults (batch size, learning rate) travel
# separately because they configure the loop, not the network.
_PRESETS = {
    "scoreformer": ModelConfig(
        hidden_dim=128, num_layers=4, rw_length=9,
        aggregators=("mean", "min", "max", "std"),
        scalers=("identity", "amplification", "attenuation"),
        towers=4, pre_fc_layers=1, post_fc_layers=1,
        activation="relu", activation_pe="tanh",
        dropout=0.1, dropout_attn=0.5, dropout_pe=0.1,
        residual_weight=1.0, attention_heads=4,
        readout_mlp_dims=(64,), conv_kind="pna", use_rwpe=True,
    ),
    "l-scoreformer": ModelConfig(
        hidden_dim=24, num_layers=4, rw_length=2,
        aggregators=("mul", "sum", "mean", "moment4", "moment5"),
        scalers=("linear", "inverse_linear"),
        towers=1, pre_fc_layers=3, post_fc_layers=2,
        activation="elu", activation_pe="relu",
        dropout=0.245, dropout_attn=0.432, dropout_pe=0.188,
        residual_weight=0.035, attention_heads=1,
        readout_mlp_dims=(12,), conv_kind="pna", use_rwpe=True,
    ),
}

PRESET_TRAINING = {
    "scoreformer": {"batch_size": 512, "learning_rate": 1e-3},
    "l-scoreformer": {"batch_size": 64, "learning_rate": 1.4126e-5},
}


def preset(name: str) -> ModelConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {sorted(_PRESETS)}")
    return replace(_PRESETS[name])


def preset_names() -> list[str]:
    return sorted(_PRESETS)
