"""Command-line surface for the forecasting pipeline.

Subcommands:

* ``inspect``:  print dataset schema and row statistics as JSON.
* ``corr``:     write the feature correlation matrix CSV.
* ``train``:    run the full pipeline for one model; write model,
  scaler, and run manifest.
* ``evaluate``: score a serialized model on the test partition.
* ``compare``:  train hybrid, rnn, and ann under one config; write the
  comparison CSV.
* ``forecast``: roll the model forward beyond the dataset; write daily
  (and optionally monthly) forecast CSVs.

Configuration is a JSON document with full defaulting; command-line
flags override config fields which override defaults. All randomness
flows from exactly two seeds: the data seed (synthetic generation) and
the model seed (initialization, batching, dropout). Every artifact is
written atomically, and every run leaves a manifest sufficient to re-run
it bit-identically.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from . import __version__
from .errors import ConfigError, EpfcastError, SeriesTooShort
from .forecast import aggregate_monthly, recursive_forecast, save_forecast
from .ingest import (
    CsvSchema,
    TimeSeriesFrame,
    add_seasonal_features,
    correlation_to_csv,
    dataset_fingerprint,
    forward_fill,
    frame_summary,
    load_csv,
    pearson_correlation,
)
from .ioutil import atomic_write_text
from .metrics import SpikeRule, comparison_csv, resolve_spike_threshold
from .models import HybridConfig, build_ann, build_hybrid, build_rnn
from .nn.graph import ModelGraph
from .nn.kernels import active_backend
from .preprocess import (
    SplitSpec,
    apply_minmax,
    chrono_split,
    fit_minmax,
    make_windows,
    save_scaler,
)
from .synth import synth_series
from .training import TrainConfig, evaluate_model, train_model

RUN_FORMAT = "epfcast-run/1"
TARGET_FEATURE = "rrp"

DEFAULT_CONFIG = {
    "data": {
        "csv_path": None,
        "synth": None,
        "schema": None,
        "seed": 0,
    },
    "preprocess": {
        "window": 30,
        "horizon": 1,
        "train_fraction": 0.7,
        "quantile": 0.90,
    },
    "model": {
        "kind": "hybrid",
        "seed": 0,
        "conv_blocks": [[16, 3, 2], [32, 3, 2]],
        "lstm_hidden": 64,
        "dense_head": [32, 1],
        "dropout_rate": 0.2,
        "rnn_hidden": 64,
        "ann_hidden": [64, 32],
    },
    "training": {
        "epochs": 100,
        "batch_size": 32,
        "learning_rate": 1e-3,
        "optimizer": "adam",
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_epsilon": 1e-8,
        "early_stop_patience": 10,
        "validation_fraction": 0.1,
    },
    "forecast": {
        "years": 6,
        "days": None,
        "monthly": True,
    },
    "output_dir": "runs",
}

# subtrees whose contents are free-form rather than key-checked here
_OPEN_SUBTREES = {"data.synth", "data.schema"}


def _merge_config(defaults: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {dotted!r}")
        if (isinstance(defaults[key], dict) and isinstance(value, dict)
                and dotted not in _OPEN_SUBTREES):
            out[key] = _merge_config(defaults[key], value, prefix=dotted + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- flags, in increasing precedence."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config is not None:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge_config(cfg, user)
    if args.csv is not None and args.synth is not None:
        raise ConfigError("--csv and --synth are mutually exclusive")
    if args.csv is not None:
        cfg["data"]["csv_path"] = args.csv
        cfg["data"]["synth"] = None
    if args.synth is not None:
        cfg["data"]["synth"] = {"n_days": args.synth}
        cfg["data"]["csv_path"] = None
    if args.data_seed is not None:
        cfg["data"]["seed"] = args.data_seed
    if args.seed is not None:
        cfg["model"]["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    if getattr(args, "kind", None):
        cfg["model"]["kind"] = args.kind
    return cfg


def _build_schema(overrides) -> CsvSchema:
    if overrides is None:
        return CsvSchema()
    if not isinstance(overrides, dict):
        raise ConfigError("data.schema must be an object")
    base = CsvSchema()
    columns = dict(base.columns)
    columns.update(overrides.get("columns", {}))
    return CsvSchema(
        columns=columns,
        required=tuple(overrides.get("required", base.required)),
        date_format=overrides.get("date_format", base.date_format),
    )


def load_frame(data_cfg: dict) -> TimeSeriesFrame:
    csv_path = data_cfg.get("csv_path")
    synth = data_cfg.get("synth")
    if csv_path:
        return load_csv(csv_path, _build_schema(data_cfg.get("schema")))
    if synth:
        if "n_days" not in synth:
            raise ConfigError("data.synth needs n_days")
        kwargs = {}
        if "start" in synth:
            kwargs["start"] = date.fromisoformat(synth["start"])
        for key in ("spike_fraction", "spike_factor"):
            if key in synth:
                kwargs[key] = synth[key]
        return synth_series(int(synth["n_days"]), seed=int(data_cfg.get("seed", 0)),
                            **kwargs)
    raise ConfigError("config must provide data.csv_path or data.synth")


@dataclass
class Pipeline:
    """Everything downstream commands need, derived once from config."""

    frame: TimeSeriesFrame          # filled, with calendar features, raw units
    scaled: TimeSeriesFrame
    scaler: object
    train_windows: object
    test_windows: object
    rule: SpikeRule
    fingerprint: dict
    cut: int                        # first test row index


def prepare(cfg: dict) -> Pipeline:
    raw = load_frame(cfg["data"])
    fingerprint = dataset_fingerprint(raw)
    frame = add_seasonal_features(forward_fill(raw))
    pp = cfg["preprocess"]
    window, horizon = int(pp["window"]), int(pp["horizon"])
    # split first, window each partition separately: no test window may
    # contain a train-dated row
    train_frame, test_frame = chrono_split(frame, SplitSpec(pp["train_fraction"]))
    cut = train_frame.n_rows
    scaler = fit_minmax(train_frame)
    scaled = apply_minmax(frame, scaler)
    try:
        train_windows = make_windows(apply_minmax(train_frame, scaler),
                                     window, horizon, TARGET_FEATURE)
        test_windows = make_windows(apply_minmax(test_frame, scaler),
                                    window, horizon, TARGET_FEATURE)
    except SeriesTooShort as exc:
        raise ConfigError(f"window/horizon too large for the split: {exc}")
    rule = resolve_spike_threshold(
        train_frame.column(TARGET_FEATURE), SpikeRule(quantile=pp["quantile"])
    )
    return Pipeline(
        frame=frame,
        scaled=scaled,
        scaler=scaler,
        train_windows=train_windows,
        test_windows=test_windows,
        rule=rule,
        fingerprint=fingerprint,
        cut=cut,
    )


def build_model(cfg: dict, window: int, n_features: int, horizon: int) -> ModelGraph:
    mc = cfg["model"]
    kind = mc["kind"]
    seed = int(mc["seed"])
    if kind == "hybrid":
        dense_head = tuple(int(v) for v in mc["dense_head"])
        if dense_head[-1] != horizon:
            raise ConfigError(
                f"model.dense_head must end in the horizon ({horizon}), "
                f"got {list(dense_head)}"
            )
        hc = HybridConfig(
            window=window,
            n_features=n_features,
            conv_blocks=tuple(tuple(int(v) for v in blk) for blk in mc["conv_blocks"]),
            lstm_hidden=int(mc["lstm_hidden"]),
            dense_head=dense_head,
            dropout_rate=float(mc["dropout_rate"]),
        )
        return build_hybrid(hc, seed=seed)
    if kind == "rnn":
        return build_rnn(window, n_features, int(mc["rnn_hidden"]), horizon, seed=seed)
    if kind == "ann":
        return build_ann(window, n_features, mc["ann_hidden"], horizon, seed=seed)
    raise ConfigError(f"unknown model.kind {kind!r} (hybrid, rnn, or ann)")


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(seed=int(cfg["model"]["seed"]), **cfg["training"])


def _manifest(cfg: dict, command: str, pipe: Pipeline, extra: dict) -> str:
    doc = {
        "format": RUN_FORMAT,
        "command": command,
        "package_version": __version__,
        "kernel_backend": active_backend(),
        "config": cfg,
        "seeds": {"data": cfg["data"]["seed"], "model": cfg["model"]["seed"]},
        "dataset": pipe.fingerprint,
        "split": {
            "train_rows": pipe.cut,
            "test_rows": pipe.frame.n_rows - pipe.cut,
            "train_samples": pipe.train_windows.n_samples,
            "test_samples": pipe.test_windows.n_samples,
        },
        "spike_threshold": pipe.rule.threshold,
    }
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _report_line(report) -> str:
    return (f"rmse={report.rmse:.4f} mae={report.mae:.4f} "
            f"accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
            f"recall={report.recall:.4f} f_score={report.f_score:.4f}")


def cmd_inspect(args, cfg) -> int:
    raw = load_frame(cfg["data"])
    print(json.dumps(frame_summary(raw), indent=2, sort_keys=True))
    return 0


def cmd_corr(args, cfg) -> int:
    raw = load_frame(cfg["data"])
    matrix = pearson_correlation(forward_fill(raw))
    out = _outdir(cfg)
    path = out / "correlation.csv"
    atomic_write_text(path, correlation_to_csv(matrix))
    _say(args, f"wrote {path}")
    return 0


def cmd_train(args, cfg) -> int:
    pipe = prepare(cfg)
    pp = cfg["preprocess"]
    kind = cfg["model"]["kind"]
    model = build_model(cfg, int(pp["window"]),
                        len(pipe.scaled.feature_names), int(pp["horizon"]))
    _say(args, f"training {kind} ({model.n_params} params, "
               f"{active_backend()} kernels)")
    model, history = train_model(model, pipe.train_windows, _train_config(cfg))
    report = evaluate_model(model, pipe.test_windows, pipe.scaler, pipe.rule)

    out = _outdir(cfg)
    model_path = out / f"{kind}_model.json"
    scaler_path = out / "scaler.json"
    manifest_path = out / f"{kind}_manifest.json"
    atomic_write_text(model_path, model.to_json())
    save_scaler(pipe.scaler, scaler_path)
    atomic_write_text(manifest_path, _manifest(cfg, "train", pipe, {
        "model_kind": kind,
        "n_params": model.n_params,
        "history": history.to_dict(),
        "best_epoch": history.best_epoch,
        "metrics": report.to_dict(),
        "artifacts": {"model": model_path.name, "scaler": scaler_path.name},
    }))
    _say(args, f"epochs={history.n_epochs} best_epoch={history.best_epoch}")
    _say(args, f"test {_report_line(report)}")
    _say(args, f"wrote {model_path}, {scaler_path}, {manifest_path}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    pipe = prepare(cfg)
    model = ModelGraph.from_json(Path(args.model).read_text(encoding="utf-8"))
    expected = (int(cfg["preprocess"]["window"]), len(pipe.scaled.feature_names))
    if model.input_shape != expected:
        raise ConfigError(
            f"model expects input shape {model.input_shape}, "
            f"pipeline produces {expected}"
        )
    report = evaluate_model(model, pipe.test_windows, pipe.scaler, pipe.rule)
    out = _outdir(cfg)
    path = out / "metrics.json"
    atomic_write_text(path, report.to_json() + "\n")
    _say(args, f"test {_report_line(report)}")
    _say(args, f"wrote {path}")
    return 0


def cmd_compare(args, cfg) -> int:
    pipe = prepare(cfg)
    pp = cfg["preprocess"]
    window, horizon = int(pp["window"]), int(pp["horizon"])
    n_features = len(pipe.scaled.feature_names)
    rows = []
    details = {}
    for kind in ("hybrid", "rnn", "ann"):
        sub = copy.deepcopy(cfg)
        sub["model"]["kind"] = kind
        model = build_model(sub, window, n_features, horizon)
        _say(args, f"training {kind} ({model.n_params} params)")
        model, history = train_model(model, pipe.train_windows, _train_config(sub))
        report = evaluate_model(model, pipe.test_windows, pipe.scaler, pipe.rule)
        rows.append((kind, report))
        details[kind] = {
            "n_params": model.n_params,
            "history": history.to_dict(),
            "metrics": report.to_dict(),
        }
        _say(args, f"  {kind}: {_report_line(report)}")
    out = _outdir(cfg)
    table_path = out / "comparison.csv"
    atomic_write_text(table_path, comparison_csv(rows))
    manifest_path = out / "compare_manifest.json"
    atomic_write_text(manifest_path, _manifest(cfg, "compare", pipe, {
        "models": details,
        "artifacts": {"comparison": table_path.name},
    }))
    _say(args, f"wrote {table_path}, {manifest_path}")
    return 0


def _forecast_days(cfg: dict, last: date) -> int:
    fc = cfg["forecast"]
    if fc.get("days"):
        return int(fc["days"])
    years = int(fc.get("years", 6))
    if years < 1:
        raise ConfigError("forecast.years must be >= 1")
    end = date(last.year + years, 12, 31)
    return (end - last).days


def cmd_forecast(args, cfg) -> int:
    pipe = prepare(cfg)
    pp = cfg["preprocess"]
    window = int(pp["window"])
    trained_here = args.model is None
    history = None
    if trained_here:
        model = build_model(cfg, window, len(pipe.scaled.feature_names),
                            int(pp["horizon"]))
        _say(args, f"training {cfg['model']['kind']} for forecasting")
        model, history = train_model(model, pipe.train_windows, _train_config(cfg))
    else:
        model = ModelGraph.from_json(Path(args.model).read_text(encoding="utf-8"))
        expected = (window, len(pipe.scaled.feature_names))
        if model.input_shape != expected:
            raise ConfigError(
                f"model expects input shape {model.input_shape}, "
                f"pipeline produces {expected}"
            )
    horizon_days = _forecast_days(cfg, pipe.frame.dates[-1])
    _say(args, f"forecasting {horizon_days} days past {pipe.frame.dates[-1]}")
    daily = recursive_forecast(model, pipe.scaled, pipe.scaler, window,
                               horizon_days, target_feature=TARGET_FEATURE)
    out = _outdir(cfg)
    daily_csv = out / "forecast_daily.csv"
    save_forecast(daily, daily_csv, out / "forecast_daily.json")
    written = [str(daily_csv)]
    monthly_rows = None
    if cfg["forecast"].get("monthly", True):
        monthly = aggregate_monthly(daily)
        monthly_csv = out / "forecast_monthly.csv"
        save_forecast(monthly, monthly_csv, out / "forecast_monthly.json")
        written.append(str(monthly_csv))
        monthly_rows = monthly.horizon_steps
    extra = {
        "model_kind": cfg["model"]["kind"],
        "model_source": "trained" if trained_here else str(args.model),
        "horizon_days": horizon_days,
        "monthly_rows": monthly_rows,
        "artifacts": {"daily": daily_csv.name},
    }
    if history is not None:
        extra["history"] = history.to_dict()
    atomic_write_text(out / "forecast_manifest.json",
                      _manifest(cfg, "forecast", pipe, extra))
    _say(args, "wrote " + ", ".join(written))
    return 0


HANDLERS = {
    "inspect": cmd_inspect,
    "corr": cmd_corr,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "forecast": cmd_forecast,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epfcast",
        description="Electricity price forecasting with CNN+LSTM, RNN and ANN models.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration file")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="model seed (overrides config)")
        sp.add_argument("--data-seed", type=int, dest="data_seed",
                        help="data seed for synthetic generation")
        sp.add_argument("--csv", help="CSV dataset path (overrides config)")
        sp.add_argument("--synth", type=int, metavar="N_DAYS",
                        help="use the built-in synthetic dataset with N_DAYS days")
        sp.add_argument("--quiet", action="store_true",
                        help="suppress progress output")

    sp = sub.add_parser("inspect", help="print dataset schema and row statistics")
    common(sp)
    sp = sub.add_parser("corr", help="write the feature correlation matrix CSV")
    common(sp)
    sp = sub.add_parser("train", help="train one model and write model + manifest")
    common(sp)
    sp.add_argument("--kind", choices=("hybrid", "rnn", "ann"),
                    help="model architecture (overrides config)")
    sp = sub.add_parser("evaluate", help="score a serialized model on the test split")
    common(sp)
    sp.add_argument("--model", required=True, help="path to a serialized model JSON")
    sp = sub.add_parser("compare", help="train hybrid, rnn and ann; write comparison CSV")
    common(sp)
    sp = sub.add_parser("forecast", help="forecast beyond the dataset")
    common(sp)
    sp.add_argument("--model", help="serialized model to forecast with "
                                    "(default: train per config)")
    sp.add_argument("--kind", choices=("hybrid", "rnn", "ann"),
                    help="model architecture when training here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"epfcast: config error: {exc}", file=sys.stderr)
        return 2
    except EpfcastError as exc:
        print(f"epfcast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"epfcast: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
