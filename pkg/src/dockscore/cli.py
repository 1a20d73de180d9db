"""Command-line entry point: data generation, preprocessing, training,
prediction, evaluation, throughput benchmarking, and ablation runs.

Every subcommand banner-logs its resolved configuration and seed, writes
outputs atomically, and is bit-reproducible for identical arguments (except
benchmark timings). Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bench import run_benchmark
from .chem import load_dataset, write_rejections
from .container import atomic_write
from .errors import (
    ConfigError,
    DataError,
    DockscoreError,
    NonFiniteError,
    ParseError,
    ShapeError,
)
from .metrics import (
    PredictionSet,
    evaluate_all,
    write_res_surface_csv,
    write_rtc_curve_csv,
)
from .model import ModelConfig, PRESET_TRAINING, preset, preset_names
from .prep import GraphDataset, load_preprocessed, preprocess, save_preprocessed
from .synthetic import make_dataset, write_dataset_csv
from .train import (
    SplitSpec,
    TrainConfig,
    effective_hit_fraction,
    load_checkpoint,
    predict_dataset,
    save_checkpoint,
    split_indices,
    train,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULT_TRAIN_CONFIG = {
    "model": "l-scoreformer",
    "batch_size": None,       # None: take the preset's training default
    "learning_rate": None,
    "max_epochs": 100,
    "wmse_alpha": 1.0,
    "hit_fraction": 0.01,
    "seed": 0,
    "patience": 20,
    "split": {"mode": "random", "fractions": [0.8, 0.1, 0.1], "seed": 0},
}


def _deep_update(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def _parse_set_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, sets: list[str]) -> dict:
    """Apply `--set dotted.key=value` overrides; values parse as JSON."""
    config = json.loads(json.dumps(config))  # deep copy
    for item in sets or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got '{item}'")
        dotted, _, raw = item.partition("=")
        keys = dotted.split(".")
        if keys[0] == "model" and len(keys) > 1 and isinstance(config.get("model"), str):
            config["model"] = _preset_dict(config["model"])
        node = config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = _parse_set_value(raw)
    return config


def _preset_dict(name: str) -> dict:
    d = preset(name).to_dict()
    d.pop("degree_stats", None)
    return d


def load_train_config(path: str | None, sets: list[str],
                      seed: int | None) -> dict:
    config = DEFAULT_TRAIN_CONFIG
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as e:
            raise DataError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise DataError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(user, dict):
            raise DataError(f"config {path} must be a JSON object")
        config = _deep_update(config, user)
    config = apply_overrides(config, sets)
    if seed is not None:
        config["seed"] = seed
    model = config["model"]
    if isinstance(model, str) and model not in preset_names():
        raise ConfigError(f"unknown preset '{model}'; choose from {preset_names()}")
    defaults = PRESET_TRAINING.get(model if isinstance(model, str) else "", {})
    if config["batch_size"] is None:
        config["batch_size"] = defaults.get("batch_size", 64)
    if config["learning_rate"] is None:
        config["learning_rate"] = defaults.get("learning_rate", 1e-3)
    return config


def train_config_from_dict(config: dict) -> tuple[TrainConfig, SplitSpec]:
    model = config["model"]
    if isinstance(model, dict):
        model = ModelConfig.from_dict(model)
    tc = TrainConfig(
        model=model,
        batch_size=int(config["batch_size"]),
        learning_rate=float(config["learning_rate"]),
        max_epochs=int(config["max_epochs"]),
        wmse_alpha=float(config["wmse_alpha"]),
        hit_fraction=float(config["hit_fraction"]),
        seed=int(config["seed"]),
        patience=int(config["patience"]),
    )
    s = config["split"]
    spec = SplitSpec(mode=s["mode"], fractions=tuple(s["fractions"]),
                     seed=int(s["seed"])).validate()
    return tc, spec


def _banner(subcommand: str, info: dict):
    print(f"[dockscore {__version__}] {subcommand} "
          f"{json.dumps(info, sort_keys=True, default=str)}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_make_data(args) -> int:
    _banner("make-data", {"n": args.n, "seed": args.seed, "noise": args.noise,
                          "max_atoms": args.max_atoms, "out": args.out})
    ds = make_dataset(args.n, seed=args.seed, noise_scale=args.noise,
                      max_atoms=args.max_atoms)
    write_dataset_csv(args.out, ds)
    scores = ds.scores()
    print(f"wrote {len(ds)} molecules to {args.out} "
          f"(score mean {scores.mean():.3f}, std {scores.std():.3f})")
    return 0


def cmd_preprocess(args) -> int:
    _banner("preprocess", {"data": args.data, "k": args.k, "out": args.out})
    dataset, load_rejections = load_dataset(args.data)
    gd, prep_rejections = preprocess(dataset, k=args.k)
    rejections = load_rejections + prep_rejections
    save_preprocessed(args.out, gd)
    rej_path = args.rejections or (str(args.out) + ".rejected.csv")
    write_rejections(rej_path, rejections)
    print(f"preprocessed {len(gd)} graphs (k={args.k}); "
          f"{len(rejections)} rejected -> {rej_path}")
    return 0


def _split_preprocessed(gd: GraphDataset, spec: SplitSpec):
    weights = gd.weights if spec.mode == "weight" else None
    idx_train, idx_val, idx_test = split_indices(len(gd), spec, weights)
    return gd.subset(idx_train), gd.subset(idx_val), gd.subset(idx_test)


def cmd_train(args) -> int:
    config = load_train_config(args.config, args.set, args.seed)
    _banner("train", config)
    tc, spec = train_config_from_dict(config)
    gd = load_preprocessed(args.data)
    train_data, val_data, test_data = _split_preprocessed(gd, spec)
    result = train(tc, train_data, val_data)
    save_checkpoint(args.out, result.model,
                    wmse_alpha=tc.wmse_alpha,
                    hit_fraction=result.effective_hit_fraction,
                    split_seed=spec.seed, train_seed=tc.seed,
                    selected_epoch=result.log.selected_epoch)
    log_path = args.log or (str(args.out) + ".log.csv")
    result.log.write_csv(log_path)
    best = next(r for r in result.log.rows
                if r.epoch == result.log.selected_epoch)
    print(f"trained {len(result.log.rows)} epochs; selected epoch "
          f"{result.log.selected_epoch} (val wMSE {best.val_wmse:.5f}, "
          f"val F1 {best.val_f1:.4f}); sizes "
          f"{len(train_data)}/{len(val_data)}/{len(test_data)}")
    print(f"checkpoint -> {args.out}; log -> {log_path}")
    return 0


def _read_ids_file(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_predict(args) -> int:
    _banner("predict", {"checkpoint": args.checkpoint, "data": args.data,
                        "out": args.out, "ids": args.ids})
    model, _meta = load_checkpoint(args.checkpoint)
    gd = load_preprocessed(args.data)
    if model.config.use_rwpe and gd.k != model.config.rw_length:
        raise ConfigError(
            f"preprocessed walk length {gd.k} does not match model "
            f"rw_length {model.config.rw_length}")
    if args.ids is not None:
        wanted = _read_ids_file(args.ids)
        index = {rid: i for i, rid in enumerate(gd.ids)}
        missing = [rid for rid in wanted if rid not in index]
        if missing:
            raise DataError(f"ids not in dataset: {missing[:10]}"
                            + (" ..." if len(missing) > 10 else ""))
        gd = gd.subset([index[rid] for rid in wanted])
    preds = predict_dataset(model, gd) if len(gd) else np.empty(0)
    with atomic_write(args.out, "w") as fh:
        fh.write("id,prediction\n")
        for rid, z in zip(gd.ids, preds):
            fh.write(f"{rid},{float(z)!r}\n")
    print(f"wrote {len(gd)} predictions -> {args.out}")
    return 0


def _load_predictions_csv(path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "prediction"]:
            raise DataError(f"{path}: header must be 'id,prediction'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns")
            try:
                out[row[0].strip()] = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric prediction") from None
    return out


def _load_truth(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"DSCNTR01":
        gd = load_preprocessed(path)
        return list(gd.ids), gd.scores
    dataset, rejections = load_dataset(path)
    if rejections:
        raise DataError(
            f"{path}: {len(rejections)} records failed to parse; "
            "evaluate needs a fully-parseable truth file")
    return [r.id for r in dataset.records], dataset.scores()


def cmd_evaluate(args) -> int:
    _banner("evaluate", {"predictions": args.predictions, "data": args.data,
                         "out": args.out})
    preds = _load_predictions_csv(args.predictions)
    ids, scores = _load_truth(args.data)
    missing = [rid for rid in ids if rid not in preds]
    extra = sorted(set(preds) - set(ids))
    if missing or extra:
        raise DataError(
            f"prediction/truth id mismatch: {len(missing)} missing "
            f"(e.g. {missing[:5]}), {len(extra)} unexpected (e.g. {extra[:5]})")
    alpha = args.alpha
    hit_fraction = args.hit_fraction
    if args.checkpoint:
        _, meta = load_checkpoint(args.checkpoint)
        alpha = float(meta["wmse_alpha"])
        hit_fraction = float(meta["hit_fraction"])
    pset = PredictionSet(y=scores, z=np.array([preds[rid] for rid in ids]),
                         ids=ids)
    report = evaluate_all(pset, hit_fraction=effective_hit_fraction(
        hit_fraction, len(pset)), alpha=alpha)
    with atomic_write(args.out, "w") as fh:
        fh.write(report.to_text() + "\n")
    if args.csv:
        with atomic_write(args.csv, "w") as fh:
            fh.write(report.CSV_HEADER + "\n" + report.to_csv_row() + "\n")
    if args.dump_curves:
        import os
        os.makedirs(args.dump_curves, exist_ok=True)
        for zeta, tag in ((0.01, "0.01"), (0.001, "0.001")):
            write_rtc_curve_csv(os.path.join(args.dump_curves,
                                             f"rtc_zeta_{tag}.csv"), pset, zeta)
        write_res_surface_csv(os.path.join(args.dump_curves,
                                           "res_surface.csv"), pset)
    print(report.to_text())
    print(f"report -> {args.out}")
    return 0


def cmd_benchmark(args) -> int:
    _banner("benchmark", {"checkpoint": args.checkpoint, "data": args.data,
                          "batch_size": args.batch_size,
                          "repetitions": args.repetitions})
    model, _meta = load_checkpoint(args.checkpoint)
    gd = load_preprocessed(args.data)
    if model.config.use_rwpe and gd.k != model.config.rw_length:
        raise ConfigError(
            f"preprocessed walk length {gd.k} does not match model "
            f"rw_length {model.config.rw_length}")
    report = run_benchmark(model, gd, args.batch_size, args.repetitions)
    with atomic_write(args.out, "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(f"samples/s: {report['samples_per_second']:.2f} "
          f"(128M extrapolation: {report['hours_for_128M']:.2f} h) -> {args.out}")
    return 0


ABLATION_VARIANTS = ("base", "no-rwpe", "gcn", "no-rwpe+gcn")


def apply_variant(cfg: ModelConfig, variant: str) -> ModelConfig:
    if variant == "base":
        return cfg
    if variant == "no-rwpe":
        return replace(cfg, use_rwpe=False)
    if variant == "gcn":
        return replace(cfg, conv_kind="gcn")
    if variant == "no-rwpe+gcn":
        return replace(cfg, use_rwpe=False, conv_kind="gcn")
    raise ConfigError(f"unknown ablation variant '{variant}'")


def cmd_ablate(args) -> int:
    config = load_train_config(args.config, args.set, args.seed)
    variants = ["base"] + [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ABLATION_VARIANTS:
            raise UsageError(f"unknown variant '{v}'; choose from "
                             f"{ABLATION_VARIANTS[1:]}")
    seeds = [int(s) for s in args.seeds.split(",")]
    _banner("ablate", {"variants": variants, "seeds": seeds, **config})
    tc_base, spec = train_config_from_dict(config)
    base_model_cfg = (preset(tc_base.model) if isinstance(tc_base.model, str)
                      else tc_base.model)
    gd = load_preprocessed(args.data)
    train_data, val_data, test_data = _split_preprocessed(gd, spec)

    rows = []
    for variant in variants:
        cfg = apply_variant(base_model_cfg, variant)
        for seed in seeds:
            tc = replace(tc_base, model=cfg, seed=seed)
            result = train(tc, train_data, val_data)
            z_test = predict_dataset(result.model, test_data)
            z_train = predict_dataset(result.model, train_data)
            pset = PredictionSet(y=test_data.scores, z=z_test)
            from .metrics import pearson as pearson_fn, r_squared
            from .train import wmse_value
            rows.append({
                "variant": variant, "seed": seed,
                "pearson": pearson_fn(pset),
                "r_squared": r_squared(pset),
                "train_wmse": wmse_value(train_data.scores, z_train, tc.wmse_alpha),
                "test_wmse": wmse_value(test_data.scores, z_test, tc.wmse_alpha),
            })
            print(f"  {variant:12s} seed={seed} pearson={rows[-1]['pearson']:.4f} "
                  f"r2={rows[-1]['r_squared']:.4f} "
                  f"train_wmse={rows[-1]['train_wmse']:.5f} "
                  f"test_wmse={rows[-1]['test_wmse']:.5f}")

    with atomic_write(args.out, "w") as fh:
        fh.write("variant,seed,pearson,r_squared,train_wmse,test_wmse\n")
        for r in rows:
            fh.write(f"{r['variant']},{r['seed']},{r['pearson']!r},"
                     f"{r['r_squared']!r},{r['train_wmse']!r},{r['test_wmse']!r}\n")
    print("medians over seeds:")
    print(f"{'variant':12s} {'pearson':>9s} {'r2':>9s} {'train_wmse':>11s} {'test_wmse':>10s}")
    for variant in variants:
        vs = [r for r in rows if r["variant"] == variant]
        med = {k: statistics.median(r[k] for r in vs)
               for k in ("pearson", "r_squared", "train_wmse", "test_wmse")}
        print(f"{variant:12s} {med['pearson']:9.4f} {med['r_squared']:9.4f} "
              f"{med['train_wmse']:11.5f} {med['test_wmse']:10.5f}")
    print(f"per-run table -> {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="dockscore",
                     description="Graph-transformer surrogate models for "
                                 "molecular docking scores.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("make-data", help="generate a synthetic scored dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--max-atoms", type=int, default=26)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("preprocess", help="parse, featurize, cache walk encodings")
    p.add_argument("--data", required=True, help="input CSV (id,smiles,score)")
    p.add_argument("--k", type=int, required=True, help="walk length")
    p.add_argument("--out", required=True)
    p.add_argument("--rejections", default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on a preprocessed dataset")
    p.add_argument("--data", required=True, help="preprocessed container")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log CSV path")
    p.add_argument("--config", default=None, help="JSON training config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry (dotted keys)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write id,prediction CSV from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="preprocessed container")
    p.add_argument("--ids", default=None, help="optional file of ids to score")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True,
                   help="truth: dataset CSV or preprocessed container")
    p.add_argument("--checkpoint", default=None,
                   help="read alpha/hit fraction from this checkpoint")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--hit-fraction", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--dump-curves", default=None,
                   help="directory for curve/surface CSV dumps")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="forward-pass throughput measurement")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("ablate", help="train base and ablated variants side by side")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="per-run results CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--variants", default="no-rwpe,gcn")
    p.add_argument("--seeds", default="0,1,2")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except NonFiniteError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (DataError, ParseError, ConfigError, ShapeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except DockscoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
