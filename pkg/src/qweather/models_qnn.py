"""Feed-forward quantum models and their parameter-matched dense baselines.

QnnModel reads per-qubit Z expectations off a reuploading circuit:
regression inverts an affine target map, binary classification uses
p(class 1) = (1 - <Z>)/2, ternary applies softmax over three readouts.
VqcClassifier runs a trainable ansatz behind a feature map and aggregates
basis-state probabilities by a readout rule (bitstring parity for binary,
basis index mod n_classes for ternary); it trains derivative-free.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import expectation_batch, expectation_jacobian
from .circuits import (
    Circuit,
    build_qlstm_vqc,
    build_real_amplitudes,
    build_reuploading_ising,
    build_reuploading_sel,
    build_z_feature_map,
    build_zz_feature_map,
    run_circuit_batch,
)
from .optim import adam_init, adam_step, cobyla_minimize

INIT_ANGLE = np.pi / 8

_TEMPLATE_BUILDERS = {
    "reuploading_ising": build_reuploading_ising,
    "reuploading_sel": build_reuploading_sel,
    "zz_feature_map": build_zz_feature_map,
    "real_amplitudes": build_real_amplitudes,
    "z_feature_map": build_z_feature_map,
    "qlstm_vqc": build_qlstm_vqc,
}


def circuit_from_name(name: str) -> Circuit:
    """Rebuild a template circuit from its descriptor, e.g. 'reuploading_sel(4,4)'."""
    m = re.fullmatch(r"([a-z_]+)\((\d+),(\d+)\)", name)
    if not m or m.group(1) not in _TEMPLATE_BUILDERS:
        raise ValueError(f"unknown circuit descriptor {name!r}")
    return _TEMPLATE_BUILDERS[m.group(1)](int(m.group(2)), int(m.group(3)))


def init_params(n: int, seed) -> np.ndarray:
    """Small random angles; zeros when seed is None."""
    if seed is None:
        return np.zeros(n)
    rng = np.random.default_rng(seed)
    return rng.uniform(-INIT_ANGLE, INIT_ANGLE, size=n)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TargetScaler:
    """Affine map between original target units and [-1, 1]."""

    lo: float
    hi: float

    @classmethod
    def fit(cls, y) -> "TargetScaler":
        y = np.asarray(y, dtype=float)
        lo, hi = float(y.min()), float(y.max())
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        return cls(lo, hi)

    def to_scaled(self, y):
        return 2.0 * (np.asarray(y, dtype=float) - self.lo) / (self.hi - self.lo) - 1.0

    def from_scaled(self, z):
        return (np.asarray(z, dtype=float) + 1.0) * (self.hi - self.lo) / 2.0 + self.lo


@dataclass(frozen=True)
class QnnModel:
    circuit: Circuit
    params: np.ndarray
    task: str
    readout: tuple
    target_scaler: TargetScaler | None = None

    def __post_init__(self):
        if self.task not in ("regression", "binary", "ternary"):
            raise ValueError(f"unknown task {self.task!r}")
        want = 3 if self.task == "ternary" else 1
        if len(self.readout) != want:
            raise ValueError(f"{self.task} needs {want} readout qubit(s)")
        if len(self.params) != self.circuit.n_trainable:
            raise ValueError("parameter length does not match circuit")


def build_qnn(circuit: Circuit, task: str, seed=None) -> QnnModel:
    readout = (0, 1, 2) if task == "ternary" else (0,)
    return QnnModel(
        circuit=circuit,
        params=init_params(circuit.n_trainable, seed),
        task=task,
        readout=readout,
    )


def qnn_expectations(model: QnnModel, X) -> np.ndarray:
    """Readout expectations for a batch, shape (n, len(readout))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.circuit.n_inputs:
        raise ValueError(
            f"expected {model.circuit.n_inputs} features, got {X.shape[1]}"
        )
    return expectation_batch(model.circuit, model.params, X, model.readout)


def qnn_forward(model: QnnModel, x):
    """Prediction for one sample.

    regression -> value in original target units; binary -> (label, p1);
    ternary -> (label, class probabilities).
    """
    z = qnn_expectations(model, np.atleast_2d(x))[0]
    if model.task == "regression":
        scaler = model.target_scaler or TargetScaler(-1.0, 1.0)
        return float(scaler.from_scaled(z[0]))
    if model.task == "binary":
        p1 = float((1.0 - z[0]) / 2.0)
        return (1 if p1 >= 0.5 else 0), p1
    probs = _softmax(z)
    return int(np.argmax(probs)), probs


def qnn_predict(model: QnnModel, X):
    """Batch predictions: values (regression) or labels (classification)."""
    z = qnn_expectations(model, X)
    if model.task == "regression":
        scaler = model.target_scaler or TargetScaler(-1.0, 1.0)
        return scaler.from_scaled(z[:, 0])
    if model.task == "binary":
        return ((1.0 - z[:, 0]) / 2.0 >= 0.5).astype(int)
    return np.argmax(_softmax(z), axis=1)


def _qnn_loss_and_grad(model: QnnModel, X, y_enc):
    z = qnn_expectations(model, X)
    jac = expectation_jacobian(model.circuit, model.params, X, model.readout)
    n = X.shape[0]
    if model.task == "regression":
        resid = z[:, 0] - y_enc
        loss = float(np.mean(resid**2))
        grad = (2.0 / n) * (resid @ jac[:, 0, :])
        return loss, grad
    if model.task == "binary":
        p = np.clip((1.0 - z[:, 0]) / 2.0, 1e-12, 1.0 - 1e-12)
        loss = float(-np.mean(y_enc * np.log(p) + (1 - y_enc) * np.log(1 - p)))
        dl_dz = (-y_enc / p + (1 - y_enc) / (1 - p)) * (-0.5) / n
        grad = dl_dz @ jac[:, 0, :]
        return loss, grad
    p = _softmax(z)
    onehot = np.eye(3)[y_enc.astype(int)]
    loss = float(-np.mean(np.log(np.clip(p[np.arange(n), y_enc.astype(int)], 1e-12, None))))
    dl_dz = (p - onehot) / n
    grad = np.einsum("sk,skp->p", dl_dz, jac)
    return loss, grad


def qnn_train(model: QnnModel, dataset, epochs: int, seed=None, lr: float = 0.01):
    """Full-batch Adam on MSE (regression, scaled space) or cross-entropy.

    When ``seed`` is given the parameters are re-initialized from it, so
    identical seeds give identical loss histories.
    """
    X, y = dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("dataset is empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if seed is not None:
        model = replace(model, params=init_params(model.circuit.n_trainable, seed))
    if model.task == "regression":
        scaler = model.target_scaler or TargetScaler.fit(y)
        model = replace(model, target_scaler=scaler)
        y_enc = scaler.to_scaled(y)
    else:
        y_enc = y
        n_classes = 3 if model.task == "ternary" else 2
        if np.any((y_enc < 0) | (y_enc >= n_classes)):
            raise ValueError(f"labels must be in [0, {n_classes})")
    params = model.params.copy()
    state = adam_init(params.size, learning_rate=lr)
    history = []
    for _ in range(epochs):
        loss, grad = _qnn_loss_and_grad(replace(model, params=params), X, y_enc)
        history.append(loss)
        state, params = adam_step(state, params, grad)
    return replace(model, params=params), history


@dataclass(frozen=True)
class VqcClassifier:
    feature_map: Circuit
    ansatz: Circuit
    params: np.ndarray
    n_classes: int
    readout_rule: str

    def __post_init__(self):
        if self.n_classes not in (2, 3):
            raise ValueError("n_classes must be 2 or 3")
        if self.readout_rule not in ("parity", "mod"):
            raise ValueError(f"unknown readout rule {self.readout_rule!r}")
        if self.feature_map.n_qubits != self.ansatz.n_qubits:
            raise ValueError("feature map and ansatz must share the qubit count")
        if len(self.params) != self.ansatz.n_trainable:
            raise ValueError("parameter length does not match ansatz")

    @property
    def full_circuit(self) -> Circuit:
        return Circuit(
            name=f"{self.feature_map.name}+{self.ansatz.name}",
            n_qubits=self.feature_map.n_qubits,
            ops=self.feature_map.ops + self.ansatz.ops,
            n_trainable=self.ansatz.n_trainable,
            n_inputs=self.feature_map.n_inputs,
        )


def build_vqc_classifier(
    n_features: int, n_classes: int, map_reps: int = 1, ansatz_reps: int = 3, seed=None
) -> VqcClassifier:
    feature_map = build_zz_feature_map(n_features, map_reps)
    ansatz = build_real_amplitudes(n_features, ansatz_reps)
    return VqcClassifier(
        feature_map=feature_map,
        ansatz=ansatz,
        params=init_params(ansatz.n_trainable, seed),
        n_classes=n_classes,
        readout_rule="parity" if n_classes == 2 else "mod",
    )


def readout_class_masks(n_qubits: int, n_classes: int, rule: str) -> np.ndarray:
    """Boolean (n_classes, 2**n) masks mapping basis states to classes."""
    idx = np.arange(1 << n_qubits)
    if rule == "parity":
        classes = np.bitwise_count(idx.astype(np.uint64)).astype(int) % 2
    else:
        classes = idx % n_classes
    return np.stack([classes == c for c in range(n_classes)])


def vqc_probabilities(clf: VqcClassifier, X) -> np.ndarray:
    """Class probabilities per sample, shape (n, n_classes)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    amps = run_circuit_batch(clf.full_circuit, clf.params, X)
    probs = np.abs(amps) ** 2
    masks = readout_class_masks(clf.feature_map.n_qubits, clf.n_classes, clf.readout_rule)
    return np.stack([probs[:, m].sum(axis=1) for m in masks], axis=1)


def vqc_predict(clf: VqcClassifier, x):
    """(label, class probabilities); argmax with ties to the lowest class."""
    probs = vqc_probabilities(clf, np.atleast_2d(x))[0]
    return int(np.argmax(probs)), probs


def vqc_train(clf: VqcClassifier, dataset, iters: int = 150, seed=None):
    """Derivative-free training of the ansatz on mean cross-entropy."""
    X, y = dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int).ravel()
    if X.shape[0] == 0:
        raise ValueError("dataset is empty")
    if np.any((y < 0) | (y >= clf.n_classes)):
        raise ValueError(f"labels must be in [0, {clf.n_classes})")
    theta0 = (
        init_params(clf.ansatz.n_trainable, seed) if seed is not None else clf.params
    )
    history = []

    def objective(theta):
        p = vqc_probabilities(replace(clf, params=theta), X)
        picked = np.clip(p[np.arange(len(y)), y], 1e-12, None)
        loss = float(-np.mean(np.log(picked)))
        history.append(loss)
        return loss

    result = cobyla_minimize(objective, theta0, max_iters=iters)
    return replace(clf, params=result.x_best), history


_DENSE_LAYOUTS = {
    # (budget, input_dim, output_dim) -> (hidden, hidden_bias, out_bias)
    (21, 3, 1): (4, True, True),
    (48, 4, 1): (8, True, False),
    (21, 3, 3): (3, True, False),
    (48, 4, 3): (6, True, False),
}


@dataclass(frozen=True)
class DenseBaseline:
    layer_sizes: tuple
    bias_flags: tuple
    task: str
    params: np.ndarray

    @property
    def n_params(self) -> int:
        (d, h, o), (bh, bo) = self.layer_sizes, self.bias_flags
        return d * h + (h if bh else 0) + h * o + (o if bo else 0)


def build_dense_baseline(budget: int, input_dim: int, task: str, seed=None):
    """Single-hidden-layer tanh network hitting the parameter budget exactly."""
    if task not in ("regression", "binary", "ternary"):
        raise ValueError(f"unknown task {task!r}")
    out_dim = 3 if task == "ternary" else 1
    key = (budget, input_dim, out_dim)
    if key not in _DENSE_LAYOUTS:
        raise ValueError(
            f"no exact {budget}-parameter decomposition for input_dim={input_dim}, "
            f"task={task}"
        )
    hidden, bias_h, bias_o = _DENSE_LAYOUTS[key]
    n = input_dim * hidden + (hidden if bias_h else 0) + hidden * out_dim + (
        out_dim if bias_o else 0
    )
    assert n == budget
    if seed is None:
        params = np.zeros(n)
    else:
        rng = np.random.default_rng(seed)
        params = rng.uniform(-0.5, 0.5, size=n)
    return DenseBaseline(
        layer_sizes=(input_dim, hidden, out_dim),
        bias_flags=(bias_h, bias_o),
        task=task,
        params=params,
    )


def _dense_unpack(model: DenseBaseline):
    d, h, o = model.layer_sizes
    bh, bo = model.bias_flags
    p = model.params
    k = 0
    w1 = p[k : k + d * h].reshape(d, h)
    k += d * h
    b1 = p[k : k + h] if bh else np.zeros(h)
    if bh:
        k += h
    w2 = p[k : k + h * o].reshape(h, o)
    k += h * o
    b2 = p[k : k + o] if bo else np.zeros(o)
    return w1, b1, w2, b2


def dense_forward(model: DenseBaseline, X) -> np.ndarray:
    """Raw outputs (n, out_dim): values, logits, or class scores."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w1, b1, w2, b2 = _dense_unpack(model)
    hidden = np.tanh(X @ w1 + b1)
    return hidden @ w2 + b2


def dense_predict(model: DenseBaseline, X):
    out = dense_forward(model, X)
    if model.task == "regression":
        return out[:, 0]
    if model.task == "binary":
        return (_sigmoid(out[:, 0]) >= 0.5).astype(int)
    return np.argmax(out, axis=1)


def _dense_loss_and_grad(model: DenseBaseline, X, y):
    w1, b1, w2, b2 = _dense_unpack(model)
    n = X.shape[0]
    a = X @ w1 + b1
    hidden = np.tanh(a)
    out = hidden @ w2 + b2
    if model.task == "regression":
        resid = out[:, 0] - y
        loss = float(np.mean(resid**2))
        d_out = (2.0 / n) * resid[:, None]
    elif model.task == "binary":
        p = np.clip(_sigmoid(out[:, 0]), 1e-12, 1 - 1e-12)
        loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
        d_out = ((p - y) / n)[:, None]
    else:
        p = _softmax(out)
        yi = y.astype(int)
        loss = float(-np.mean(np.log(np.clip(p[np.arange(n), yi], 1e-12, None))))
        d_out = (p - np.eye(3)[yi]) / n
    g_w2 = hidden.T @ d_out
    g_b2 = d_out.sum(axis=0)
    d_hidden = (d_out @ w2.T) * (1 - hidden**2)
    g_w1 = X.T @ d_hidden
    g_b1 = d_hidden.sum(axis=0)
    bh, bo = model.bias_flags
    pieces = [g_w1.ravel()]
    if bh:
        pieces.append(g_b1)
    pieces.append(g_w2.ravel())
    if bo:
        pieces.append(g_b2)
    return loss, np.concatenate(pieces)


def dense_train(model: DenseBaseline, dataset, epochs: int, seed=None, lr: float = 0.01):
    """Full-batch Adam; mirrors the quantum training interface."""
    X, y = dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("dataset is empty")
    if seed is not None:
        rng = np.random.default_rng(seed)
        model = replace(model, params=rng.uniform(-0.5, 0.5, size=model.params.size))
    params = model.params.copy()
    state = adam_init(params.size, learning_rate=lr)
    history = []
    for _ in range(epochs):
        loss, grad = _dense_loss_and_grad(replace(model, params=params), X, y)
        history.append(loss)
        state, params = adam_step(state, params, grad)
    return replace(model, params=params), history


def qnn_to_json(model: QnnModel, seed=None) -> str:
    doc = {
        "kind": "qnn",
        "layout": model.circuit.name,
        "task": model.task,
        "readout": list(model.readout),
        "values": model.params.tolist(),
        "scaler": (
            [model.target_scaler.lo, model.target_scaler.hi]
            if model.target_scaler
            else None
        ),
        "seed": seed,
    }
    return json.dumps(doc, sort_keys=True)


def qnn_from_json(text: str) -> QnnModel:
    doc = json.loads(text)
    if doc.get("kind") != "qnn":
        raise ValueError("not a qnn document")
    scaler = TargetScaler(*doc["scaler"]) if doc.get("scaler") else None
    return QnnModel(
        circuit=circuit_from_name(doc["layout"]),
        params=np.asarray(doc["values"], dtype=float),
        task=doc["task"],
        readout=tuple(doc["readout"]),
        target_scaler=scaler,
    )


def vqc_to_json(clf: VqcClassifier, seed=None) -> str:
    doc = {
        "kind": "vqc",
        "feature_map": clf.feature_map.name,
        "ansatz": clf.ansatz.name,
        "n_classes": clf.n_classes,
        "readout_rule": clf.readout_rule,
        "values": clf.params.tolist(),
        "seed": seed,
    }
    return json.dumps(doc, sort_keys=True)


def vqc_from_json(text: str) -> VqcClassifier:
    doc = json.loads(text)
    if doc.get("kind") != "vqc":
        raise ValueError("not a vqc document")
    return VqcClassifier(
        feature_map=circuit_from_name(doc["feature_map"]),
        ansatz=circuit_from_name(doc["ansatz"]),
        params=np.asarray(doc["values"], dtype=float),
        n_classes=doc["n_classes"],
        readout_rule=doc["readout_rule"],
    )
