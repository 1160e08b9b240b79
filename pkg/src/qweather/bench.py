"""Experiment harness: data to trained model to report files.

A run stages ingest, correlate, select, scale, split, train, and evaluate
for one (model, task) pair, then writes diff-able artifacts: config.json,
report.json, predictions.csv, loss_history.csv.  Reports are byte-stable
for a fixed config and seed; wall time is measured but kept out of
report.json so repeated runs stay identical, landing in timing.json
instead.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import (
    build_reuploading_ising,
    build_reuploading_sel,
    build_zz_feature_map,
)
from .models_qnn import (
    build_dense_baseline,
    build_qnn,
    build_vqc_classifier,
    dense_forward,
    dense_predict,
    dense_train,
    qnn_expectations,
    qnn_predict,
    qnn_train,
    vqc_probabilities,
    vqc_train,
    _sigmoid,
    _softmax,
)
from .models_recurrent import (
    build_classical_gru,
    build_classical_lstm,
    build_qgru,
    build_qlstm,
    count_params,
    make_windows,
    sequence_forward,
    train_sequence_model,
)
from .qkernel import (
    default_gamma,
    fidelity_kernel,
    ovr_decision,
    ovr_train,
    rbf_kernel,
    svm_decision,
    svm_train,
)
from .weather import (
    ColumnScaler,
    Dataset,
    bin_target,
    correlation_report,
    load_csv,
    scale,
    select_features,
    synth_generate,
)


class ConfigError(Exception):
    """The experiment configuration is invalid."""


class NoPredictionsError(Exception):
    """The report holds class labels, not a plottable prediction series."""


class PipelineError(Exception):
    """A pipeline stage failed; carries the stage name and original error."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


MODEL_TASKS = {
    "qnn-ising": ("regression", "binary", "ternary"),
    "qnn-sel": ("regression", "binary", "ternary"),
    "vqc": ("binary", "ternary"),
    "qsvm": ("binary", "ternary"),
    "svc": ("binary", "ternary"),
    "nn": ("regression", "binary", "ternary"),
    "qlstm": ("regression",),
    "qgru": ("regression",),
    "lstm": ("regression",),
    "gru": ("regression",),
}

RECURRENT_MODELS = ("qlstm", "qgru", "lstm", "gru")

DEFAULT_EPOCHS = {
    "qnn-ising": 150,
    "qnn-sel": 150,
    "nn": 300,
    "qlstm": 50,
    "qgru": 20,
    "lstm": 150,
    "gru": 150,
}
DEFAULT_LR = {
    "qnn-ising": 0.1,
    "qnn-sel": 0.1,
    "nn": 0.05,
    "qlstm": 0.05,
    "qgru": 0.05,
    "lstm": 0.02,
    "gru": 0.02,
}
DEFAULT_LAYERS = {"qnn-ising": 2, "qnn-sel": 4, "qlstm": 2, "qgru": 2}
HIDDEN_SIZES = {"lstm": 8, "gru": 16}
DENSE_BUDGETS = {3: 21, 4: 48}
DEFAULT_ITERS = 150
# angle-embedding feature maps want inputs in [0, 1]; everything else
# trains on standardized features
MINMAX_MODELS = ("qsvm", "svc", "vqc")

_CONFIG_FIELDS = (
    "model",
    "task",
    "data",
    "selection",
    "scaling",
    "split_fraction",
    "window",
    "epochs",
    "iters",
    "lr",
    "n_layers",
    "C",
    "gamma",
    "seed",
)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    task: str
    data: dict
    selection: dict = field(default_factory=lambda: {"threshold": 0.8})
    scaling: str | None = None
    split_fraction: float = 0.8
    window: int = 4
    epochs: int | None = None
    iters: int | None = None
    lr: float | None = None
    n_layers: int | None = None
    C: float = 1.0
    gamma: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_TASKS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.task not in MODEL_TASKS[self.model]:
            raise ConfigError(
                f"model {self.model!r} does not support task {self.task!r}"
            )
        kind = self.data.get("kind") if isinstance(self.data, dict) else None
        if kind == "synth":
            extra = set(self.data) - {"kind", "seed", "n_months"}
            if extra or "seed" not in self.data:
                raise ConfigError(f"bad synth data spec {self.data!r}")
        elif kind == "csv":
            if set(self.data) != {"kind", "path"}:
                raise ConfigError(f"bad csv data spec {self.data!r}")
        else:
            raise ConfigError("data kind must be 'synth' or 'csv'")
        if not isinstance(self.selection, dict) or len(self.selection) != 1 or not (
            set(self.selection) <= {"threshold", "top_k"}
        ):
            raise ConfigError("selection must set exactly one of threshold or top_k")
        if self.scaling not in (None, "standard", "minmax"):
            raise ConfigError(f"unknown scaling method {self.scaling!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must be in (0, 1)")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        for name in ("epochs", "iters", "n_layers"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError("gamma must be positive")


def normalized(config: ExperimentConfig) -> ExperimentConfig:
    """Fill every defaulted knob so reports echo the values actually used."""
    updates = {}
    if config.scaling is None:
        updates["scaling"] = (
            "minmax" if config.model in MINMAX_MODELS else "standard"
        )
    if config.epochs is None and config.model in DEFAULT_EPOCHS:
        updates["epochs"] = DEFAULT_EPOCHS[config.model]
    if config.iters is None and config.model == "vqc":
        updates["iters"] = DEFAULT_ITERS
    if config.lr is None and config.model in DEFAULT_LR:
        updates["lr"] = DEFAULT_LR[config.model]
    if config.n_layers is None and config.model in DEFAULT_LAYERS:
        updates["n_layers"] = DEFAULT_LAYERS[config.model]
    return replace(config, **updates) if updates else config


def config_to_dict(config: ExperimentConfig) -> dict:
    return {name: getattr(config, name) for name in _CONFIG_FIELDS}


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - set(_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"model", "task", "data"} - set(doc)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    try:
        return ExperimentConfig(**doc)
    except TypeError as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
    return config_from_dict(doc)


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    n_parameters: int
    selected_features: tuple
    details: dict
    metrics: dict
    loss_history: tuple
    n_train: int
    n_test: int
    predictions: tuple
    probabilities: tuple | None
    wall_time_s: float

    def as_dict(self) -> dict:
        # wall time deliberately excluded: identical configs must produce
        # byte-identical report documents
        return {
            "config": self.config,
            "n_parameters": self.n_parameters,
            "selected_features": list(self.selected_features),
            "details": self.details,
            "metrics": self.metrics,
            "loss_history": list(self.loss_history),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "predictions": [list(row) for row in self.predictions],
            "probabilities": (
                [list(row) for row in self.probabilities]
                if self.probabilities is not None
                else None
            ),
        }


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=1)


def report_from_json(text: str) -> ExperimentReport:
    doc = json.loads(text)
    return ExperimentReport(
        config=doc["config"],
        n_parameters=doc["n_parameters"],
        selected_features=tuple(doc["selected_features"]),
        details=doc["details"],
        metrics=doc["metrics"],
        loss_history=tuple(doc["loss_history"]),
        n_train=doc["n_train"],
        n_test=doc["n_test"],
        predictions=tuple(tuple(row) for row in doc["predictions"]),
        probabilities=(
            tuple(tuple(row) for row in doc["probabilities"])
            if doc.get("probabilities") is not None
            else None
        ),
        wall_time_s=float("nan"),
    )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as err:
        raise PipelineError(name, err) from err


def _load_dataset(data_spec) -> Dataset:
    if data_spec["kind"] == "synth":
        return synth_generate(
            int(data_spec["seed"]), int(data_spec.get("n_months", 1000))
        )
    dataset, _ = load_csv(data_spec["path"])
    return dataset


def _accuracy(pred, truth) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(truth)))


def _mse(a, b) -> float:
    return float(np.mean((np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) ** 2))


def _n_classes(task) -> int:
    return 3 if task == "ternary" else 2


def _train_kernel_machine(cfg, X_train, y_train, X_test):
    if cfg.model == "qsvm":
        fm = build_zz_feature_map(X_train.shape[1], 1)
        K_train = fidelity_kernel(X_train, X_train, fm)
        K_test = fidelity_kernel(X_test, X_train, fm)
        details = {"feature_map": fm.name, "C": cfg.C}
    else:
        gamma = cfg.gamma if cfg.gamma is not None else default_gamma(X_train)
        K_train = rbf_kernel(X_train, X_train, gamma)
        K_test = rbf_kernel(X_test, X_train, gamma)
        details = {"gamma": gamma, "C": cfg.C}
    if cfg.task == "binary":
        y_pm = np.where(np.asarray(y_train) == 1, 1.0, -1.0)
        model = svm_train(K_train, y_pm, C=cfg.C, label_map=(0, 1))
        n_params = int(len(model.support_indices))

        def predict(rows):
            return (svm_decision(model, rows) >= 0).astype(int)

    else:
        model = ovr_train(K_train, y_train, C=cfg.C)
        n_params = int(sum(len(m.support_indices) for m in model.models))
        classes = np.asarray(model.classes)

        def predict(rows):
            return classes[np.argmax(ovr_decision(model, rows), axis=1)]

    details["n_support"] = n_params
    train_pred = predict(K_train)
    test_pred = predict(K_test)
    return n_params, details, [], train_pred, test_pred, None


def _classification_probabilities(kind, model, X):
    if kind == "qnn":
        z = qnn_expectations(model, X)
        if model.task == "binary":
            p1 = (1.0 - z[:, 0]) / 2.0
            return np.column_stack([1.0 - p1, p1])
        return _softmax(z)
    if kind == "vqc":
        return vqc_probabilities(model, X)
    out = dense_forward(model, X)
    if model.task == "binary":
        p1 = _sigmoid(out[:, 0])
        return np.column_stack([1.0 - p1, p1])
    return _softmax(out)


def _run_feedforward(cfg, dataset, feats):
    n = dataset.n_rows
    split = int(math.floor(n * cfg.split_fraction))
    scaled = _stage("scale", scale, dataset, feats, cfg.scaling, split)
    X = scaled.feature_matrix(feats)
    t2m = dataset.target()
    X_train, X_test = X[:split], X[split:]
    times_test = dataset.time[split:]

    if cfg.task in ("binary", "ternary"):
        y = _stage("bin", bin_target, t2m, cfg.task)
        y_train, y_test = y[:split], y[split:]
        if cfg.model in ("qsvm", "svc"):
            out = _stage(
                "train", _train_kernel_machine, cfg, X_train, y_train, X_test
            )
            n_params, details, history, train_pred, test_pred, probs = out
        else:
            model, details, history = _stage(
                "train", _fit_feedforward_model, cfg, feats, X_train, y_train
            )
            n_params = details.pop("_n_params")
            kind = details.pop("_kind")
            train_pred = _predict_labels(kind, model, X_train)
            test_pred = _predict_labels(kind, model, X_test)
            probs = _classification_probabilities(kind, model, X_test)
        metrics = {
            "train_accuracy": _accuracy(train_pred, y_train),
            "test_accuracy": _accuracy(test_pred, y_test),
        }
        predictions = tuple(
            (times_test[i], int(y_test[i]), int(test_pred[i]))
            for i in range(len(y_test))
        )
        probabilities = (
            tuple(tuple(float(v) for v in row) for row in probs)
            if probs is not None
            else None
        )
        return n_params, details, history, metrics, predictions, probabilities, split

    # regression on row features
    y_train, y_test = t2m[:split], t2m[split:]
    model, details, history = _stage(
        "train", _fit_feedforward_model, cfg, feats, X_train, y_train
    )
    n_params = details.pop("_n_params")
    kind = details.pop("_kind")
    if kind == "qnn":
        pred_train = qnn_predict(model, X_train)
        pred_test = qnn_predict(model, X_test)
        to_scaled = model.target_scaler.to_scaled
    else:
        scaler = ColumnScaler(
            "minmax", float(y_train.min()), float(y_train.max())
        )
        pred_train = scaler.inverse(dense_forward(model, X_train)[:, 0])
        pred_test = scaler.inverse(dense_forward(model, X_test)[:, 0])
        to_scaled = scaler.transform
    metrics = {
        "train_mse_scaled": _mse(to_scaled(pred_train), to_scaled(y_train)),
        "test_mse_scaled": _mse(to_scaled(pred_test), to_scaled(y_test)),
        "train_mse_kelvin": _mse(pred_train, y_train),
        "test_mse_kelvin": _mse(pred_test, y_test),
    }
    predictions = tuple(
        (times_test[i], float(y_test[i]), float(pred_test[i]))
        for i in range(len(y_test))
    )
    return n_params, details, history, metrics, predictions, None, split


def _predict_labels(kind, model, X):
    if kind == "qnn":
        return qnn_predict(model, X)
    if kind == "vqc":
        return np.argmax(vqc_probabilities(model, X), axis=1)
    return dense_predict(model, X)


def _fit_feedforward_model(cfg, feats, X_train, y_train):
    n_feats = len(feats)
    if cfg.model == "qnn-ising":
        if n_feats != 3:
            raise ValueError(
                f"the Ising circuit encodes exactly 3 features, selection gave {n_feats}"
            )
        circuit = build_reuploading_ising(3, cfg.n_layers)
        model = build_qnn(circuit, cfg.task, seed=cfg.seed)
        model, history = qnn_train(
            model, (X_train, y_train), epochs=cfg.epochs, seed=cfg.seed, lr=cfg.lr
        )
        details = {
            "circuit": circuit.name,
            "lr": cfg.lr,
            "_n_params": circuit.n_trainable,
            "_kind": "qnn",
        }
        return model, details, list(history)
    if cfg.model == "qnn-sel":
        if cfg.task == "ternary" and n_feats < 3:
            raise ValueError("ternary readout needs at least 3 qubits")
        circuit = build_reuploading_sel(n_feats, cfg.n_layers)
        model = build_qnn(circuit, cfg.task, seed=cfg.seed)
        model, history = qnn_train(
            model, (X_train, y_train), epochs=cfg.epochs, seed=cfg.seed, lr=cfg.lr
        )
        details = {
            "circuit": circuit.name,
            "lr": cfg.lr,
            "_n_params": circuit.n_trainable,
            "_kind": "qnn",
        }
        return model, details, list(history)
    if cfg.model == "vqc":
        clf = build_vqc_classifier(n_feats, _n_classes(cfg.task), seed=cfg.seed)
        clf, history = vqc_train(
            clf, (X_train, y_train), iters=cfg.iters, seed=cfg.seed
        )
        details = {
            "feature_map": clf.feature_map.name,
            "ansatz": clf.ansatz.name,
            "readout_rule": clf.readout_rule,
            "_n_params": clf.ansatz.n_trainable,
            "_kind": "vqc",
        }
        return clf, details, list(history)
    if cfg.model == "nn":
        if n_feats not in DENSE_BUDGETS:
            raise ValueError(
                f"no parameter budget defined for {n_feats} features"
            )
        budget = DENSE_BUDGETS[n_feats]
        model = build_dense_baseline(budget, n_feats, cfg.task, seed=cfg.seed)
        if cfg.task == "regression":
            scaler = ColumnScaler(
                "minmax", float(y_train.min()), float(y_train.max())
            )
            y_fit = scaler.transform(y_train)
        else:
            y_fit = y_train
        model, history = dense_train(
            model, (X_train, y_fit), epochs=cfg.epochs, seed=cfg.seed, lr=cfg.lr
        )
        details = {
            "layer_sizes": list(model.layer_sizes),
            "budget": budget,
            "lr": cfg.lr,
            "_n_params": budget,
            "_kind": "nn",
        }
        return model, details, list(history)
    raise ValueError(f"unhandled model {cfg.model!r}")


def _run_recurrent(cfg, dataset, feats):
    n = dataset.n_rows
    split = int(math.floor(n * cfg.split_fraction))
    target = dataset.target_name
    scaled = _stage("scale", scale, dataset, feats, cfg.scaling, split)
    scaled = _stage("scale", scale, scaled, [target], "minmax", split)
    target_scaler = scaled.scaling_state[target]
    F = scaled.feature_matrix(feats)
    ty = scaled.target()
    X_w, y_w = _stage("window", make_windows, F, ty, cfg.window)
    target_idx = np.arange(cfg.window, n)
    train_mask = target_idx < split
    X_train, y_train = X_w[train_mask], y_w[train_mask]
    X_test, y_test = X_w[~train_mask], y_w[~train_mask]
    if X_train.shape[0] == 0 or X_test.shape[0] == 0:
        raise PipelineError(
            "window", ValueError("split leaves an empty train or test window set")
        )

    def build():
        if cfg.model == "qlstm":
            return build_qlstm(len(feats), n_qubits=4, n_layers=cfg.n_layers)
        if cfg.model == "qgru":
            return build_qgru(len(feats), n_qubits=4, n_layers=cfg.n_layers)
        if cfg.model == "lstm":
            return build_classical_lstm(len(feats), HIDDEN_SIZES["lstm"])
        return build_classical_gru(len(feats), HIDDEN_SIZES["gru"])

    model = _stage("train", build)
    model, history = _stage(
        "train",
        train_sequence_model,
        model,
        X_train,
        y_train,
        epochs=cfg.epochs,
        lr=cfg.lr,
        seed=cfg.seed,
    )
    pred_train = sequence_forward(model, X_train)
    pred_test = sequence_forward(model, X_test)
    metrics = {
        "train_mse_scaled": _mse(pred_train, y_train),
        "test_mse_scaled": _mse(pred_test, y_test),
        "train_mse_kelvin": _mse(
            target_scaler.inverse(pred_train), target_scaler.inverse(y_train)
        ),
        "test_mse_kelvin": _mse(
            target_scaler.inverse(pred_test), target_scaler.inverse(y_test)
        ),
    }
    test_idx = target_idx[~train_mask]
    actual_k = target_scaler.inverse(y_test)
    pred_k = target_scaler.inverse(pred_test)
    predictions = tuple(
        (dataset.time[test_idx[i]], float(actual_k[i]), float(pred_k[i]))
        for i in range(len(test_idx))
    )
    details = {"window": cfg.window, "lr": cfg.lr}
    if cfg.model in ("qlstm", "qgru"):
        details["circuit"] = model.circuit.name
        details["n_circuit_params"] = model.n_circuit_params
    else:
        details["hidden_size"] = model.hidden_size
    n_params = count_params(model)
    return (
        n_params,
        details,
        list(history),
        metrics,
        predictions,
        None,
        int(train_mask.sum()),
        int((~train_mask).sum()),
    )


def run(config: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Execute one experiment and optionally write its artifact directory."""
    cfg = normalized(config)
    started = time.perf_counter()
    dataset = _stage("ingest", _load_dataset, cfg.data)
    corr = _stage("correlate", correlation_report, dataset)
    feats = _stage("select", select_features, corr, **cfg.selection)
    if cfg.model in RECURRENT_MODELS:
        (
            n_params,
            details,
            history,
            metrics,
            predictions,
            probabilities,
            n_train,
            n_test,
        ) = _run_recurrent(cfg, dataset, feats)
    else:
        n_params, details, history, metrics, predictions, probabilities, split = (
            _run_feedforward(cfg, dataset, feats)
        )
        n_train, n_test = split, dataset.n_rows - split
    if not all(np.isfinite(v) for v in metrics.values()):
        raise PipelineError("evaluate", ValueError("non-finite metric produced"))
    report = ExperimentReport(
        config=config_to_dict(cfg),
        n_parameters=int(n_params),
        selected_features=tuple(feats),
        details=details,
        metrics=metrics,
        loss_history=tuple(float(v) for v in history),
        n_train=n_train,
        n_test=n_test,
        predictions=predictions,
        probabilities=probabilities,
        wall_time_s=time.perf_counter() - started,
    )
    if out_dir is not None:
        write_run_artifacts(report, out_dir)
    return report


def write_run_artifacts(report: ExperimentReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.config, sort_keys=True, indent=1))
        fh.write("\n")
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
        fh.write("\n")
    with open(os.path.join(out_dir, "predictions.csv"), "w", encoding="utf-8") as fh:
        fh.write("time,actual,predicted\n")
        for row in report.predictions:
            fh.write(f"{row[0]},{_fmt(row[1])},{_fmt(row[2])}\n")
    with open(os.path.join(out_dir, "loss_history.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, value in enumerate(report.loss_history):
            fh.write(f"{i},{_fmt(value)}\n")
    with open(os.path.join(out_dir, "timing.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"wall_time_s": report.wall_time_s}))
        fh.write("\n")


def _fmt(value):
    # repr round-trips floats exactly; integers print bare
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def compare(configs, out_dir=None):
    """Run several configs on one task and tabulate them side by side.

    Returns (text_table, csv_text, reports); model order follows the input.
    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configurations")
    tasks = {c.task for c in configs}
    if len(tasks) != 1:
        raise ConfigError(f"compare needs a shared task, got {sorted(tasks)}")
    task = configs[0].task
    reports = []
    for i, cfg in enumerate(configs):
        sub = (
            os.path.join(out_dir, f"run{i:02d}_{cfg.model}")
            if out_dir is not None
            else None
        )
        reports.append(run(cfg, out_dir=sub))
    if task == "regression":
        columns = [
            "train_mse_scaled",
            "test_mse_scaled",
            "train_mse_kelvin",
            "test_mse_kelvin",
        ]
    else:
        columns = ["train_accuracy", "test_accuracy"]
    header = ["model", "n_parameters"] + columns
    rows = []
    for cfg, rep in zip(configs, reports):
        rows.append(
            [cfg.model, str(rep.n_parameters)]
            + [f"{rep.metrics[c]:.4f}" for c in columns]
        )
    widths = [
        max(len(header[j]), *(len(r[j]) for r in rows)) for j in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(widths[j]) for j, h in enumerate(header)),
        "  ".join("-" * widths[j] for j in range(len(header))),
    ]
    for r in rows:
        lines.append("  ".join(r[j].ljust(widths[j]) for j in range(len(header))))
    text = "\n".join(lines) + "\n"
    csv_lines = [",".join(header)]
    for cfg, rep in zip(configs, reports):
        csv_lines.append(
            ",".join(
                [cfg.model, str(rep.n_parameters)]
                + [_fmt(rep.metrics[c]) for c in columns]
            )
        )
    csv_text = "\n".join(csv_lines) + "\n"
    if out_dir is not None:
        with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(os.path.join(out_dir, "comparison.csv"), "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    return text, csv_text, reports


def emit_plot_data(report: ExperimentReport, path, probabilities: bool = False):
    """Write the prediction series (or class probabilities) as CSV."""
    if probabilities:
        if report.probabilities is None:
            raise NoPredictionsError("this report carries no class probabilities")
        n_classes = len(report.probabilities[0])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "time,actual," + ",".join(f"p_{c}" for c in range(n_classes)) + "\n"
            )
            for row, probs in zip(report.predictions, report.probabilities):
                fh.write(
                    f"{row[0]},{_fmt(row[1])},"
                    + ",".join(_fmt(p) for p in probs)
                    + "\n"
                )
        return
    if report.config.get("task") != "regression":
        raise NoPredictionsError(
            "classification reports hold labels; request probabilities instead"
        )
    if not report.predictions:
        raise NoPredictionsError("report contains no predictions")
    rows = sorted(report.predictions, key=lambda r: r[0])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time,actual_K,predicted_K\n")
        for row in rows:
            fh.write(f"{row[0]},{_fmt(row[1])},{_fmt(row[2])}\n")
