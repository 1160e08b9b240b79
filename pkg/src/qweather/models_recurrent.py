"""Recurrent sequence models with variational-circuit gates.

The quantum LSTM replaces each gate of a classical LSTM cell with a
variational circuit read out as per-qubit Z expectations; two further
circuits project the cell output to the hidden state and to the scalar
prediction.  The quantum GRU does the same for reset/update/candidate
gates.  Classical LSTM/GRU baselines with the dual-bias convention are
provided for parameter-count comparisons, and everything trains under
full-batch Adam on next-step mean squared error with analytic gradients
(parameter shift through the circuits, backpropagation through time for
the surrounding arithmetic).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import expectation_batch, expectation_jacobian_pair
from .circuits import Circuit, build_qlstm_vqc
from .optim import adam_init, adam_step

INIT_ANGLE = np.pi / 8

QLSTM_GATES = ("forget", "input", "update", "output", "hidden", "readout")
QGRU_GATES = ("reset", "update", "candidate")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def make_windows(features, target, window: int = 4, stride: int = 1):
    """Sliding windows plus the value one step past each window.

    ``features`` is (n, d), ``target`` is (n,); returns X of shape
    (m, window, d) and y of shape (m,) with y[i] = target[i * stride + window].
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    target = np.asarray(target, dtype=float).ravel()
    if features.shape[0] != target.size:
        raise ValueError("features and target must have equal length")
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    n = target.size
    if n <= window:
        raise ValueError(f"need more than {window} rows, got {n}")
    starts = range(0, n - window, stride)
    X = np.stack([features[s : s + window] for s in starts])
    y = np.array([target[s + window] for s in starts])
    return X, y


@dataclass(frozen=True)
class QlstmCell:
    """LSTM cell whose gates are variational circuits.

    The hidden state is the per-qubit readout of the projection circuit,
    so hidden_size always equals n_qubits.  Parameters are one flat
    vector: six circuit blocks, then the shared input map (weights and
    bias), then the scalar head.
    """

    circuit: Circuit
    input_dim: int
    n_qubits: int
    hidden_size: int
    n_layers: int
    params: np.ndarray

    def __post_init__(self):
        if self.hidden_size != self.n_qubits:
            raise ValueError("hidden_size must equal n_qubits")
        if len(self.params) != qlstm_param_count(
            self.input_dim, self.n_qubits, self.n_layers
        ):
            raise ValueError("parameter vector has the wrong length")

    @property
    def n_circuit_params(self) -> int:
        return len(QLSTM_GATES) * self.circuit.n_trainable


@dataclass(frozen=True)
class QgruCell:
    """GRU cell with circuit-valued reset, update, and candidate gates."""

    circuit: Circuit
    input_dim: int
    n_qubits: int
    hidden_size: int
    n_layers: int
    params: np.ndarray

    def __post_init__(self):
        if self.hidden_size != self.n_qubits:
            raise ValueError("hidden_size must equal n_qubits")
        if len(self.params) != qgru_param_count(
            self.input_dim, self.n_qubits, self.n_layers
        ):
            raise ValueError("parameter vector has the wrong length")

    @property
    def n_circuit_params(self) -> int:
        return len(QGRU_GATES) * self.circuit.n_trainable


@dataclass(frozen=True)
class ClassicalRnnBaseline:
    """Plain LSTM or GRU with separate input and hidden biases per gate."""

    kind: str
    input_dim: int
    hidden_size: int
    params: np.ndarray

    def __post_init__(self):
        if self.kind not in ("lstm", "gru"):
            raise ValueError(f"kind must be 'lstm' or 'gru', got {self.kind!r}")
        if len(self.params) != classical_param_count(
            self.kind, self.input_dim, self.hidden_size
        ):
            raise ValueError("parameter vector has the wrong length")


def _affine_sizes(input_dim, n_qubits):
    # shared input map (input_dim + hidden) -> n_qubits, then head n_qubits -> 1
    in_dim = input_dim + n_qubits
    return in_dim * n_qubits, n_qubits, n_qubits, 1


def qlstm_param_count(input_dim, n_qubits=4, n_layers=2) -> int:
    per_vqc = 3 * n_qubits * n_layers
    return len(QLSTM_GATES) * per_vqc + sum(_affine_sizes(input_dim, n_qubits))


def qgru_param_count(input_dim, n_qubits=4, n_layers=2) -> int:
    per_vqc = 3 * n_qubits * n_layers
    return len(QGRU_GATES) * per_vqc + sum(_affine_sizes(input_dim, n_qubits))


def classical_param_count(kind, input_dim, hidden_size) -> int:
    gates = 4 if kind == "lstm" else 3
    recur = gates * ((input_dim + hidden_size) * hidden_size + 2 * hidden_size)
    return recur + hidden_size + 1


def count_params(model) -> int:
    return int(model.params.size)


def _init_quantum_params(input_dim, n_qubits, n_vqc_blocks, per_vqc, seed):
    w_n, b_n, hw_n, hb_n = _affine_sizes(input_dim, n_qubits)
    total = n_vqc_blocks * per_vqc + w_n + b_n + hw_n + hb_n
    if seed is None:
        return np.zeros(total)
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-INIT_ANGLE, INIT_ANGLE, size=n_vqc_blocks * per_vqc)
    bound = 1.0 / np.sqrt(input_dim + n_qubits)
    affine = rng.uniform(-bound, bound, size=w_n + b_n + hw_n + hb_n)
    return np.concatenate([angles, affine])


def build_qlstm(
    input_dim: int, n_qubits: int = 4, n_layers: int = 2, seed=None
) -> QlstmCell:
    circuit = build_qlstm_vqc(n_qubits, n_layers)
    params = _init_quantum_params(
        input_dim, n_qubits, len(QLSTM_GATES), circuit.n_trainable, seed
    )
    return QlstmCell(circuit, input_dim, n_qubits, n_qubits, n_layers, params)


def build_qgru(
    input_dim: int, n_qubits: int = 4, n_layers: int = 2, seed=None
) -> QgruCell:
    circuit = build_qlstm_vqc(n_qubits, n_layers)
    params = _init_quantum_params(
        input_dim, n_qubits, len(QGRU_GATES), circuit.n_trainable, seed
    )
    return QgruCell(circuit, input_dim, n_qubits, n_qubits, n_layers, params)


def build_classical_lstm(input_dim: int, hidden_size: int = 8, seed=None):
    n = classical_param_count("lstm", input_dim, hidden_size)
    params = _init_classical(n, hidden_size, seed)
    return ClassicalRnnBaseline("lstm", input_dim, hidden_size, params)


def build_classical_gru(input_dim: int, hidden_size: int = 16, seed=None):
    n = classical_param_count("gru", input_dim, hidden_size)
    params = _init_classical(n, hidden_size, seed)
    return ClassicalRnnBaseline("gru", input_dim, hidden_size, params)


def _init_classical(n, hidden_size, seed):
    if seed is None:
        return np.zeros(n)
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_size)
    return rng.uniform(-bound, bound, size=n)


def _unpack_quantum(cell):
    gates = QLSTM_GATES if isinstance(cell, QlstmCell) else QGRU_GATES
    per = cell.circuit.n_trainable
    p = cell.params
    thetas = {g: p[i * per : (i + 1) * per] for i, g in enumerate(gates)}
    k = len(gates) * per
    in_dim = cell.input_dim + cell.hidden_size
    W = p[k : k + in_dim * cell.n_qubits].reshape(in_dim, cell.n_qubits)
    k += in_dim * cell.n_qubits
    b = p[k : k + cell.n_qubits]
    k += cell.n_qubits
    head_w = p[k : k + cell.n_qubits]
    head_b = p[k + cell.n_qubits]
    return thetas, W, b, head_w, head_b


def qlstm_step(cell: QlstmCell, x_t, h, c, return_gates: bool = False):
    """One step: (x_t, h, c) -> (h', c', y).

    Shapes are batched: x_t (B, input_dim), h and c (B, hidden_size).
    Gate values come from circuits evaluated on the shared affine map of
    [x_t; h]; c' = f*c + i*g and the projection circuit turns o*tanh(c')
    into the next hidden state while the readout circuit feeds the head.
    """
    thetas, W, b, head_w, head_b = _unpack_quantum(cell)
    x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    qubits = tuple(range(cell.n_qubits))
    v = np.concatenate([x_t, h], axis=1) @ W + b
    f = _sigmoid(expectation_batch(cell.circuit, thetas["forget"], v, qubits))
    i = _sigmoid(expectation_batch(cell.circuit, thetas["input"], v, qubits))
    g = np.tanh(expectation_batch(cell.circuit, thetas["update"], v, qubits))
    o = _sigmoid(expectation_batch(cell.circuit, thetas["output"], v, qubits))
    c_next = f * c + i * g
    u2 = o * np.tanh(c_next)
    h_next = expectation_batch(cell.circuit, thetas["hidden"], u2, qubits)
    q = expectation_batch(cell.circuit, thetas["readout"], u2, qubits)
    y = q @ head_w + head_b
    if return_gates:
        return h_next, c_next, y, {"f": f, "i": i, "g": g, "o": o}
    return h_next, c_next, y


def qgru_step(cell: QgruCell, x_t, h, return_gates: bool = False):
    """One step: (x_t, h) -> (h', y) with h' = (1 - z)*h + z*g.

    The candidate gate sees the input map of [x_t; r*h], reusing the same
    affine map that feeds the reset and update gates.
    """
    thetas, W, b, head_w, head_b = _unpack_quantum(cell)
    x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    qubits = tuple(range(cell.n_qubits))
    v = np.concatenate([x_t, h], axis=1) @ W + b
    r = _sigmoid(expectation_batch(cell.circuit, thetas["reset"], v, qubits))
    z = _sigmoid(expectation_batch(cell.circuit, thetas["update"], v, qubits))
    v2 = np.concatenate([x_t, r * h], axis=1) @ W + b
    g = np.tanh(expectation_batch(cell.circuit, thetas["candidate"], v2, qubits))
    h_next = (1.0 - z) * h + z * g
    y = h_next @ head_w + head_b
    if return_gates:
        return h_next, y, {"r": r, "z": z, "g": g}
    return h_next, y


def _unpack_classical(model):
    gates = 4 if model.kind == "lstm" else 3
    d, hs = model.input_dim, model.hidden_size
    p = model.params
    k = 0
    W_ih = p[k : k + gates * hs * d].reshape(gates * hs, d)
    k += gates * hs * d
    W_hh = p[k : k + gates * hs * hs].reshape(gates * hs, hs)
    k += gates * hs * hs
    b_ih = p[k : k + gates * hs]
    k += gates * hs
    b_hh = p[k : k + gates * hs]
    k += gates * hs
    head_w = p[k : k + hs]
    head_b = p[k + hs]
    return W_ih, W_hh, b_ih, b_hh, head_w, head_b


def lstm_step(model: ClassicalRnnBaseline, x_t, h, c):
    W_ih, W_hh, b_ih, b_hh, head_w, head_b = _unpack_classical(model)
    hs = model.hidden_size
    pre = x_t @ W_ih.T + b_ih + h @ W_hh.T + b_hh
    i = _sigmoid(pre[:, 0:hs])
    f = _sigmoid(pre[:, hs : 2 * hs])
    g = np.tanh(pre[:, 2 * hs : 3 * hs])
    o = _sigmoid(pre[:, 3 * hs :])
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next, h_next @ head_w + head_b


def gru_step(model: ClassicalRnnBaseline, x_t, h):
    W_ih, W_hh, b_ih, b_hh, head_w, head_b = _unpack_classical(model)
    hs = model.hidden_size
    gi = x_t @ W_ih.T + b_ih
    gh = h @ W_hh.T + b_hh
    r = _sigmoid(gi[:, 0:hs] + gh[:, 0:hs])
    z = _sigmoid(gi[:, hs : 2 * hs] + gh[:, hs : 2 * hs])
    n = np.tanh(gi[:, 2 * hs :] + r * gh[:, 2 * hs :])
    h_next = (1.0 - z) * n + z * h
    return h_next, h_next @ head_w + head_b


def sequence_forward(model, X) -> np.ndarray:
    """Predictions y (B,) after running each window through the cell."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    B, T, _ = X.shape
    if isinstance(model, QlstmCell):
        h = np.zeros((B, model.hidden_size))
        c = np.zeros((B, model.hidden_size))
        for t in range(T):
            h, c, y = qlstm_step(model, X[:, t], h, c)
        return y
    if isinstance(model, QgruCell):
        h = np.zeros((B, model.hidden_size))
        for t in range(T):
            h, y = qgru_step(model, X[:, t], h)
        return y
    h = np.zeros((B, model.hidden_size))
    if model.kind == "lstm":
        c = np.zeros((B, model.hidden_size))
        for t in range(T):
            h, c, y = lstm_step(model, X[:, t], h, c)
    else:
        for t in range(T):
            h, y = gru_step(model, X[:, t], h)
    return y


def _qlstm_loss_and_grad(cell: QlstmCell, X, y):
    thetas, W, b, head_w, head_b = _unpack_quantum(cell)
    per = cell.circuit.n_trainable
    qubits = tuple(range(cell.n_qubits))
    B, T, _ = X.shape
    h = np.zeros((B, cell.hidden_size))
    c = np.zeros((B, cell.hidden_size))
    steps = []
    for t in range(T):
        u = np.concatenate([X[:, t], h], axis=1)
        v = u @ W + b
        rec = {"u": u, "v": v, "c_prev": c, "jac": {}}
        zs = {}
        for name in ("forget", "input", "update", "output"):
            jt, jx = expectation_jacobian_pair(cell.circuit, thetas[name], v, qubits)
            rec["jac"][name] = (jt, jx)
            zs[name] = expectation_batch(cell.circuit, thetas[name], v, qubits)
        f = _sigmoid(zs["forget"])
        i = _sigmoid(zs["input"])
        g = np.tanh(zs["update"])
        o = _sigmoid(zs["output"])
        c = f * c + i * g
        s = np.tanh(c)
        u2 = o * s
        rec.update(f=f, i=i, g=g, o=o, c=c, s=s, u2=u2)
        if t < T - 1:
            jt, jx = expectation_jacobian_pair(
                cell.circuit, thetas["hidden"], u2, qubits
            )
            rec["jac"]["hidden"] = (jt, jx)
            h = expectation_batch(cell.circuit, thetas["hidden"], u2, qubits)
        steps.append(rec)
    last = steps[-1]
    jt_q, jx_q = expectation_jacobian_pair(
        cell.circuit, thetas["readout"], last["u2"], qubits
    )
    q = expectation_batch(cell.circuit, thetas["readout"], last["u2"], qubits)
    yhat = q @ head_w + head_b
    resid = yhat - y
    loss = float(np.mean(resid**2))
    dy = (2.0 / B) * resid

    grad_theta = {name: np.zeros(per) for name in QLSTM_GATES}
    grad_W = np.zeros_like(W)
    grad_b = np.zeros_like(b)
    grad_head_w = q.T @ dy
    grad_head_b = dy.sum()

    dq = dy[:, None] * head_w[None, :]
    grad_theta["readout"] += np.einsum("bk,bkp->p", dq, jt_q)
    du2 = np.einsum("bk,bki->bi", dq, jx_q)
    dh = np.zeros((B, cell.hidden_size))
    dc = np.zeros((B, cell.hidden_size))
    for t in range(T - 1, -1, -1):
        rec = steps[t]
        du2_t = du2 if t == T - 1 else np.zeros((B, cell.hidden_size))
        if t < T - 1:
            jt, jx = rec["jac"]["hidden"]
            grad_theta["hidden"] += np.einsum("bk,bkp->p", dh, jt)
            du2_t = du2_t + np.einsum("bk,bki->bi", dh, jx)
        do = du2_t * rec["s"]
        dc = dc + du2_t * rec["o"] * (1.0 - rec["s"] ** 2)
        df = dc * rec["c_prev"]
        di = dc * rec["g"]
        dg = dc * rec["i"]
        dc = dc * rec["f"]
        dz = {
            "forget": df * rec["f"] * (1.0 - rec["f"]),
            "input": di * rec["i"] * (1.0 - rec["i"]),
            "update": dg * (1.0 - rec["g"] ** 2),
            "output": do * rec["o"] * (1.0 - rec["o"]),
        }
        dv = np.zeros((B, cell.n_qubits))
        for name in ("forget", "input", "update", "output"):
            jt, jx = rec["jac"][name]
            grad_theta[name] += np.einsum("bk,bkp->p", dz[name], jt)
            dv += np.einsum("bk,bki->bi", dz[name], jx)
        grad_W += rec["u"].T @ dv
        grad_b += dv.sum(axis=0)
        du = dv @ W.T
        dh = du[:, cell.input_dim :]
    grad = np.concatenate(
        [grad_theta[name] for name in QLSTM_GATES]
        + [grad_W.ravel(), grad_b, grad_head_w, [grad_head_b]]
    )
    return loss, grad


def _qgru_loss_and_grad(cell: QgruCell, X, y):
    thetas, W, b, head_w, head_b = _unpack_quantum(cell)
    per = cell.circuit.n_trainable
    qubits = tuple(range(cell.n_qubits))
    B, T, _ = X.shape
    h = np.zeros((B, cell.hidden_size))
    steps = []
    for t in range(T):
        u = np.concatenate([X[:, t], h], axis=1)
        v = u @ W + b
        jac = {}
        jac["reset"] = expectation_jacobian_pair(cell.circuit, thetas["reset"], v, qubits)
        jac["update"] = expectation_jacobian_pair(
            cell.circuit, thetas["update"], v, qubits
        )
        r = _sigmoid(expectation_batch(cell.circuit, thetas["reset"], v, qubits))
        z = _sigmoid(expectation_batch(cell.circuit, thetas["update"], v, qubits))
        u2 = np.concatenate([X[:, t], r * h], axis=1)
        v2 = u2 @ W + b
        jac["candidate"] = expectation_jacobian_pair(
            cell.circuit, thetas["candidate"], v2, qubits
        )
        g = np.tanh(expectation_batch(cell.circuit, thetas["candidate"], v2, qubits))
        h_prev = h
        h = (1.0 - z) * h + z * g
        steps.append(
            {"u": u, "u2": u2, "r": r, "z": z, "g": g, "h_prev": h_prev, "jac": jac}
        )
    yhat = h @ head_w + head_b
    resid = yhat - y
    loss = float(np.mean(resid**2))
    dy = (2.0 / B) * resid

    grad_theta = {name: np.zeros(per) for name in QGRU_GATES}
    grad_W = np.zeros_like(W)
    grad_b = np.zeros_like(b)
    grad_head_w = h.T @ dy
    grad_head_b = dy.sum()
    dh = dy[:, None] * head_w[None, :]
    for t in range(T - 1, -1, -1):
        rec = steps[t]
        dz = dh * (rec["g"] - rec["h_prev"])
        dg = dh * rec["z"]
        dh_prev = dh * (1.0 - rec["z"])
        dzg = dg * (1.0 - rec["g"] ** 2)
        jt, jx = rec["jac"]["candidate"]
        grad_theta["candidate"] += np.einsum("bk,bkp->p", dzg, jt)
        dv2 = np.einsum("bk,bki->bi", dzg, jx)
        grad_W += rec["u2"].T @ dv2
        grad_b += dv2.sum(axis=0)
        du2 = dv2 @ W.T
        drh = du2[:, cell.input_dim :]
        dr = drh * rec["h_prev"]
        dh_prev = dh_prev + drh * rec["r"]
        dzr = dr * rec["r"] * (1.0 - rec["r"])
        dzz = dz * rec["z"] * (1.0 - rec["z"])
        dv = np.zeros((B, cell.n_qubits))
        for name, dzk in (("reset", dzr), ("update", dzz)):
            jt, jx = rec["jac"][name]
            grad_theta[name] += np.einsum("bk,bkp->p", dzk, jt)
            dv += np.einsum("bk,bki->bi", dzk, jx)
        grad_W += rec["u"].T @ dv
        grad_b += dv.sum(axis=0)
        du = dv @ W.T
        dh = dh_prev + du[:, cell.input_dim :]
    grad = np.concatenate(
        [grad_theta[name] for name in QGRU_GATES]
        + [grad_W.ravel(), grad_b, grad_head_w, [grad_head_b]]
    )
    return loss, grad


def _lstm_loss_and_grad(model: ClassicalRnnBaseline, X, y):
    W_ih, W_hh, b_ih, b_hh, head_w, head_b = _unpack_classical(model)
    hs = model.hidden_size
    B, T, _ = X.shape
    h = np.zeros((B, hs))
    c = np.zeros((B, hs))
    steps = []
    for t in range(T):
        pre = X[:, t] @ W_ih.T + b_ih + h @ W_hh.T + b_hh
        i = _sigmoid(pre[:, 0:hs])
        f = _sigmoid(pre[:, hs : 2 * hs])
        g = np.tanh(pre[:, 2 * hs : 3 * hs])
        o = _sigmoid(pre[:, 3 * hs :])
        steps.append({"x": X[:, t], "h_prev": h, "c_prev": c, "i": i, "f": f, "g": g, "o": o})
        c = f * c + i * g
        h = o * np.tanh(c)
        steps[-1]["c"] = c
    yhat = h @ head_w + head_b
    resid = yhat - y
    loss = float(np.mean(resid**2))
    dy = (2.0 / B) * resid
    g_W_ih = np.zeros_like(W_ih)
    g_W_hh = np.zeros_like(W_hh)
    g_b_ih = np.zeros_like(b_ih)
    g_b_hh = np.zeros_like(b_hh)
    g_head_w = h.T @ dy
    g_head_b = dy.sum()
    dh = dy[:, None] * head_w[None, :]
    dc = np.zeros((B, hs))
    for t in range(T - 1, -1, -1):
        rec = steps[t]
        tc = np.tanh(rec["c"])
        do = dh * tc
        dc = dc + dh * rec["o"] * (1.0 - tc**2)
        df = dc * rec["c_prev"]
        di = dc * rec["g"]
        dg = dc * rec["i"]
        dc = dc * rec["f"]
        dpre = np.concatenate(
            [
                di * rec["i"] * (1 - rec["i"]),
                df * rec["f"] * (1 - rec["f"]),
                dg * (1 - rec["g"] ** 2),
                do * rec["o"] * (1 - rec["o"]),
            ],
            axis=1,
        )
        g_W_ih += dpre.T @ rec["x"]
        g_W_hh += dpre.T @ rec["h_prev"]
        g_b_ih += dpre.sum(axis=0)
        g_b_hh += dpre.sum(axis=0)
        dh = dpre @ W_hh
    grad = np.concatenate(
        [g_W_ih.ravel(), g_W_hh.ravel(), g_b_ih, g_b_hh, g_head_w, [g_head_b]]
    )
    return loss, grad


def _gru_loss_and_grad(model: ClassicalRnnBaseline, X, y):
    W_ih, W_hh, b_ih, b_hh, head_w, head_b = _unpack_classical(model)
    hs = model.hidden_size
    B, T, _ = X.shape
    h = np.zeros((B, hs))
    steps = []
    for t in range(T):
        gi = X[:, t] @ W_ih.T + b_ih
        gh = h @ W_hh.T + b_hh
        r = _sigmoid(gi[:, 0:hs] + gh[:, 0:hs])
        z = _sigmoid(gi[:, hs : 2 * hs] + gh[:, hs : 2 * hs])
        n = np.tanh(gi[:, 2 * hs :] + r * gh[:, 2 * hs :])
        steps.append(
            {"x": X[:, t], "h_prev": h, "r": r, "z": z, "n": n, "gh_n": gh[:, 2 * hs :]}
        )
        h = (1.0 - z) * n + z * h
    yhat = h @ head_w + head_b
    resid = yhat - y
    loss = float(np.mean(resid**2))
    dy = (2.0 / B) * resid
    g_W_ih = np.zeros_like(W_ih)
    g_W_hh = np.zeros_like(W_hh)
    g_b_ih = np.zeros_like(b_ih)
    g_b_hh = np.zeros_like(b_hh)
    g_head_w = h.T @ dy
    g_head_b = dy.sum()
    dh = dy[:, None] * head_w[None, :]
    for t in range(T - 1, -1, -1):
        rec = steps[t]
        dz = dh * (rec["h_prev"] - rec["n"])
        dn = dh * (1.0 - rec["z"])
        dh_prev = dh * rec["z"]
        dpre_n = dn * (1.0 - rec["n"] ** 2)
        dr = dpre_n * rec["gh_n"]
        dpre_r = dr * rec["r"] * (1.0 - rec["r"])
        dpre_z = dz * rec["z"] * (1.0 - rec["z"])
        gi_rows = np.concatenate([dpre_r, dpre_z, dpre_n], axis=1)
        gh_rows = np.concatenate([dpre_r, dpre_z, dpre_n * rec["r"]], axis=1)
        g_W_ih += gi_rows.T @ rec["x"]
        g_W_hh += gh_rows.T @ rec["h_prev"]
        g_b_ih += gi_rows.sum(axis=0)
        g_b_hh += gh_rows.sum(axis=0)
        dh = dh_prev + gh_rows @ W_hh
    grad = np.concatenate(
        [g_W_ih.ravel(), g_W_hh.ravel(), g_b_ih, g_b_hh, g_head_w, [g_head_b]]
    )
    return loss, grad


def sequence_loss_and_grad(model, X, y):
    """Full-batch MSE of final-step predictions and its exact gradient."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 3:
        raise ValueError("windows must have shape (batch, steps, features)")
    if X.shape[0] != y.size:
        raise ValueError("window count and target count differ")
    if isinstance(model, QlstmCell):
        return _qlstm_loss_and_grad(model, X, y)
    if isinstance(model, QgruCell):
        return _qgru_loss_and_grad(model, X, y)
    if model.kind == "lstm":
        return _lstm_loss_and_grad(model, X, y)
    return _gru_loss_and_grad(model, X, y)


def _reinitialized(model, seed):
    if isinstance(model, QlstmCell):
        return build_qlstm(model.input_dim, model.n_qubits, model.n_layers, seed=seed)
    if isinstance(model, QgruCell):
        return build_qgru(model.input_dim, model.n_qubits, model.n_layers, seed=seed)
    params = _init_classical(model.params.size, model.hidden_size, seed)
    return replace(model, params=params)


def train_sequence_model(model, windows, targets, epochs: int, lr: float = 0.01, seed=None):
    """Adam on next-step MSE; targets are expected already scaled.

    Passing ``seed`` re-initializes the parameters first, so a fixed seed
    reproduces the loss history exactly.
    """
    X = np.asarray(windows, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if X.ndim != 3 or X.shape[0] == 0:
        raise ValueError("windows must be a non-empty (batch, steps, features) array")
    if seed is not None:
        model = _reinitialized(model, seed)
    params = model.params.copy()
    state = adam_init(params.size, learning_rate=lr)
    history = []
    for _ in range(epochs):
        loss, grad = sequence_loss_and_grad(replace(model, params=params), X, y)
        history.append(loss)
        state, params = adam_step(state, params, grad)
    return replace(model, params=params), history


def recurrent_to_json(model, seed=None) -> str:
    if isinstance(model, (QlstmCell, QgruCell)):
        doc = {
            "kind": "qlstm" if isinstance(model, QlstmCell) else "qgru",
            "layout": model.circuit.name,
            "input_dim": model.input_dim,
            "n_qubits": model.n_qubits,
            "n_layers": model.n_layers,
            "values": model.params.tolist(),
            "seed": seed,
        }
    else:
        doc = {
            "kind": model.kind,
            "input_dim": model.input_dim,
            "hidden_size": model.hidden_size,
            "values": model.params.tolist(),
            "seed": seed,
        }
    return json.dumps(doc, sort_keys=True)


def recurrent_from_json(text: str):
    doc = json.loads(text)
    kind = doc.get("kind")
    values = np.asarray(doc["values"], dtype=float)
    if kind in ("qlstm", "qgru"):
        circuit = build_qlstm_vqc(doc["n_qubits"], doc["n_layers"])
        cls = QlstmCell if kind == "qlstm" else QgruCell
        return cls(
            circuit,
            doc["input_dim"],
            doc["n_qubits"],
            doc["n_qubits"],
            doc["n_layers"],
            values,
        )
    if kind in ("lstm", "gru"):
        return ClassicalRnnBaseline(kind, doc["input_dim"], doc["hidden_size"], values)
    raise ValueError(f"unknown model kind {kind!r}")
