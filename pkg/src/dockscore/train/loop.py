"""The training loop: mini-batches, weighted-MSE descent, F1 epoch selection."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, NonFiniteError
from ..model import DegreeStats, Model, ModelConfig, build_model, collate, preset
from ..numeric import Adam, SeededRng, backward
from ..prep import GraphDataset
from .objectives import f1_at_fraction, wmse, wmse_value


@dataclass
class TrainConfig:
    model: ModelConfig | str = "l-scoreformer"  # preset name or explicit config
    batch_size: int = 64
    learning_rate: float = 1e-3
    max_epochs: int = 100
    wmse_alpha: float = 1.0
    hit_fraction: float = 0.01
    seed: int = 0
    patience: int = 20

    def resolve_model(self) -> ModelConfig:
        cfg = preset(self.model) if isinstance(self.model, str) else self.model
        return cfg

    def validate(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.wmse_alpha < 0:
            raise ConfigError("wmse_alpha must be >= 0")
        if not 0.0 < self.hit_fraction <= 0.5:
            raise ConfigError("hit_fraction must lie in (0, 0.5]")
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("max_epochs and patience must be >= 1")
        return self


@dataclass
class EpochStats:
    epoch: int
    train_wmse: float
    val_wmse: float
    val_f1: float
    seconds: float


@dataclass
class TrainLog:
    rows: list[EpochStats] = field(default_factory=list)
    selected_epoch: int = 0

    def write_csv(self, path):
        from ..container import atomic_write
        with atomic_write(path, "w") as fh:
            fh.write("epoch,train_wmse,val_wmse,val_f1,seconds\n")
            for r in self.rows:
                fh.write(f"{r.epoch},{r.train_wmse!r},{r.val_wmse!r},"
                         f"{r.val_f1!r},{r.seconds:.3f}\n")

    def content_hash(self) -> str:
        """Hash of the deterministic fields (wall time excluded)."""
        h = hashlib.sha256()
        for r in self.rows:
            h.update(f"{r.epoch},{r.train_wmse!r},{r.val_wmse!r},{r.val_f1!r};".encode())
        h.update(str(self.selected_epoch).encode())
        return h.hexdigest()


@dataclass
class TrainResult:
    model: Model
    log: TrainLog
    effective_hit_fraction: float


def predict_dataset(model: Model, data: GraphDataset, batch_size: int = 256) -> np.ndarray:
    """Inference over a dataset in deterministic chunks."""
    out = np.empty(len(data))
    use_pe = model.config.use_rwpe
    k = model.config.rw_length if use_pe else None
    for start in range(0, len(data), batch_size):
        chunk = data.graphs[start:start + batch_size]
        batch = collate(chunk, require_rwpe=use_pe, rw_length=k)
        out[start:start + len(chunk)] = model.predict(batch)
    return out


def effective_hit_fraction(requested: float, n_val: int) -> float:
    """Fall back to the top-10% hit set when validation is too small."""
    if n_val >= math.ceil(1.0 / requested):
        return requested
    return 0.1


def train(tc: TrainConfig, train_data: GraphDataset,
          val_data: GraphDataset) -> TrainResult:
    """Run the full loop and return the best-F1-epoch model.

    Each epoch: seeded shuffle, mini-batches (last partial batch kept),
    forward -> weighted MSE -> backward -> Adam. Validation wMSE and hit F1
    are computed with dropout off; the parameters of the best-F1 epoch
    (ties -> earliest) are restored at the end. Stops early after
    `patience` epochs without F1 improvement.
    """
    tc.validate()
    if len(train_data) == 0 or len(val_data) == 0:
        raise DataError("training and validation splits must be non-empty")
    cfg = tc.resolve_model()
    if cfg.use_rwpe and train_data.k != cfg.rw_length:
        raise ConfigError(
            f"preprocessed walk length {train_data.k} does not match "
            f"model rw_length {cfg.rw_length}")
    cfg = cfg.with_degree_stats(DegreeStats.from_degrees(train_data.all_degrees()))
    root = SeededRng(tc.seed)
    model = build_model(cfg, root.child("model"))
    opt = Adam(model.params, lr=tc.learning_rate)
    hit_fraction = effective_hit_fraction(tc.hit_fraction, len(val_data))

    n = len(train_data)
    y_train = train_data.scores
    y_val = val_data.scores
    log = TrainLog()
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] = {}
    best_epoch = 0
    since_best = 0
    step = 0
    for epoch in range(1, tc.max_epochs + 1):
        t0 = time.perf_counter()
        perm = root.child("epoch", epoch).permutation(n)
        running = 0.0
        for start in range(0, n, tc.batch_size):
            idx = perm[start:start + tc.batch_size]
            batch = collate([train_data.graphs[i] for i in idx],
                            require_rwpe=cfg.use_rwpe,
                            rw_length=cfg.rw_length if cfg.use_rwpe else None)
            try:
                preds = model.forward(batch, training=True, rng=root.child("step", step))
                loss = wmse(preds, y_train[idx][:, None], tc.wmse_alpha)
                backward(loss)
            except NonFiniteError as e:
                raise NonFiniteError(
                    f"non-finite loss at epoch {epoch}, "
                    f"batch starting at shuffled index {start}: {e}") from None
            opt.step()
            running += loss.item() * len(idx)
            step += 1
        z_val = predict_dataset(model, val_data, batch_size=max(tc.batch_size, 64))
        row = EpochStats(
            epoch=epoch,
            train_wmse=running / n,
            val_wmse=wmse_value(y_val, z_val, tc.wmse_alpha),
            val_f1=f1_at_fraction(z_val, y_val, hit_fraction),
            seconds=time.perf_counter() - t0,
        )
        log.rows.append(row)
        if row.val_f1 > best_f1:
            best_f1 = row.val_f1
            best_epoch = epoch
            best_params = {k: p.data.copy() for k, p in model.params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= tc.patience:
                break
    for name, arr in best_params.items():
        model.params[name].data = arr
    log.selected_epoch = best_epoch
    return TrainResult(model=model, log=log, effective_hit_fraction=hit_fraction)
