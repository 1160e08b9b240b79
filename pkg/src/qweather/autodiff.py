"""Exact circuit gradients.

Parameter-shift differentiates the expectation with respect to each gate
angle: every parameterized gate here is exp(-i*theta*P/2) for a Pauli word
P, so dE/dtheta = [E(theta + pi/2) - E(theta - pi/2)] / 2.  Derivatives
with respect to trainable parameters or raw input values sum the shifts of
every occurrence times the angle transform's chain-rule factor.  A central
finite-difference oracle is provided for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import (
    Circuit,
    _input_array,
    _theta_array,
    angle_partials,
    parameterized_occurrences,
    run_circuit_batch,
)
from .qsim import z_signs

SHIFTABLE_KINDS = {"RX", "RY", "RZ", "R3", "RXX", "RYY", "RZZ"}


class UnsupportedGateError(Exception):
    """A differentiated slot sits on a gate without a two-point shift rule."""


@dataclass(frozen=True)
class GradientRequest:
    """What to differentiate: d<observable> / d(trainable params or inputs).

    ``observable`` is a qubit index for a plain Z term or a sequence of
    (qubit, weight) pairs for a weighted sum of single-qubit Z terms.
    """

    circuit: Circuit
    params: object
    inputs: object
    observable: object = 0
    wrt: str = "trainable"

    def __post_init__(self):
        if self.wrt not in ("trainable", "inputs"):
            raise ValueError(f"wrt must be 'trainable' or 'inputs', got {self.wrt!r}")


def _normalize_observable(observable, n_qubits):
    if isinstance(observable, (int, np.integer)):
        terms = [(int(observable), 1.0)]
    else:
        terms = [(int(q), float(w)) for q, w in observable]
    for q, _ in terms:
        if not 0 <= q < n_qubits:
            raise ValueError(f"observable qubit {q} out of range")
    return terms


def _expectations(amps, n_qubits, terms):
    probs = np.abs(amps) ** 2
    out = 0.0
    for q, w in terms:
        out = out + w * (probs @ z_signs(n_qubits, q))
    return out


def expectation(circuit: Circuit, params, inputs, observable=0) -> float:
    """Analytic expectation of a (weighted) Z observable after the circuit."""
    terms = _normalize_observable(observable, circuit.n_qubits)
    amps = run_circuit_batch(circuit, params, inputs)
    return float(_expectations(amps, circuit.n_qubits, terms))


def expectation_batch(circuit: Circuit, params, inputs, qubits) -> np.ndarray:
    """<Z_q> for each q in ``qubits``; shape batch + (len(qubits),)."""
    amps = run_circuit_batch(circuit, params, inputs)
    probs = np.abs(amps) ** 2
    cols = [probs @ z_signs(circuit.n_qubits, q) for q in qubits]
    return np.stack(cols, axis=-1)


def _relevant_occurrences(circuit, kind):
    occs = []
    for i, pos, ref in parameterized_occurrences(circuit):
        depends = ref.slot_kind == "trainable" if kind == "trainable" else (
            ref.slot_kind == "input"
        )
        if depends:
            if circuit.ops[i].kind not in SHIFTABLE_KINDS:
                raise UnsupportedGateError(
                    f"gate {circuit.ops[i].kind} has no parameter-shift rule"
                )
            occs.append((i, pos, ref))
    return occs


def param_shift_grad(req: GradientRequest) -> np.ndarray:
    """Exact gradient via shifted expectation evaluations.

    All 2 * n_occurrences shifted circuits run as one batch.
    """
    circuit = req.circuit
    theta = _theta_array(circuit, req.params).ravel()
    x = _input_array(circuit, req.inputs).ravel()
    terms = _normalize_observable(req.observable, circuit.n_qubits)
    kind = "trainable" if req.wrt == "trainable" else "input"
    n_slots = circuit.n_trainable if kind == "trainable" else circuit.n_inputs
    occs = _relevant_occurrences(circuit, kind)
    grad = np.zeros(n_slots)
    if not occs:
        return grad
    batch = 2 * len(occs)
    shifts = {}
    for j, (i, pos, _) in enumerate(occs):
        s = np.zeros(batch)
        s[2 * j] = np.pi / 2
        s[2 * j + 1] = -np.pi / 2
        shifts[(i, pos)] = s
    amps = run_circuit_batch(circuit, theta, x, shifts)
    e = _expectations(amps, circuit.n_qubits, terms)
    for j, (_, _, ref) in enumerate(occs):
        de_dangle = 0.5 * (e[2 * j] - e[2 * j + 1])
        for part_kind, idx, factor in angle_partials(ref, theta, x):
            if part_kind == kind:
                grad[idx] += float(factor) * de_dangle
    return grad


def finite_diff_grad(req: GradientRequest, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient over raw values; the test oracle."""
    if h <= 0:
        raise ValueError("h must be positive")
    circuit = req.circuit
    theta = _theta_array(circuit, req.params).ravel()
    x = _input_array(circuit, req.inputs).ravel()
    terms = _normalize_observable(req.observable, circuit.n_qubits)
    n_slots = circuit.n_trainable if req.wrt == "trainable" else circuit.n_inputs
    if n_slots == 0:
        return np.zeros(0)
    if req.wrt == "trainable":
        base = np.broadcast_to(theta, (2 * n_slots, theta.size)).copy()
    else:
        base = np.broadcast_to(x, (2 * n_slots, x.size)).copy()
    for k in range(n_slots):
        base[2 * k, k] += h
        base[2 * k + 1, k] -= h
    if req.wrt == "trainable":
        amps = run_circuit_batch(circuit, base, x)
    else:
        amps = run_circuit_batch(circuit, theta, base)
    e = _expectations(amps, circuit.n_qubits, terms)
    return (e[0::2] - e[1::2]) / (2 * h)


def expectation_jacobian_pair(circuit: Circuit, params, inputs, qubits):
    """Jacobians of <Z_q> with respect to parameters and raw inputs at once.

    Returns (d_params, d_inputs) shaped (n_samples, len(qubits), n_trainable)
    and (n_samples, len(qubits), n_inputs).  Shifts for both slot kinds share
    one batched evaluation, which recurrent training leans on.
    """
    theta = _theta_array(circuit, params).ravel()
    x = np.atleast_2d(_input_array(circuit, inputs))
    n_samples = x.shape[0]
    occs = _relevant_occurrences(circuit, "trainable") + _relevant_occurrences(
        circuit, "input"
    )
    jac_t = np.zeros((n_samples, len(qubits), circuit.n_trainable))
    jac_x = np.zeros((n_samples, len(qubits), circuit.n_inputs))
    if not occs:
        return jac_t, jac_x
    width = 2 * len(occs)
    shifts = {}
    for j, (i, pos, _) in enumerate(occs):
        s = np.zeros(width)
        s[2 * j] = np.pi / 2
        s[2 * j + 1] = -np.pi / 2
        shifts[(i, pos)] = s
    amps = run_circuit_batch(circuit, theta, x[:, None, :], shifts)
    probs = np.abs(amps) ** 2
    for qi, q in enumerate(qubits):
        e = probs @ z_signs(circuit.n_qubits, q)
        de = 0.5 * (e[:, 0::2] - e[:, 1::2])
        for j, (_, _, ref) in enumerate(occs):
            for part_kind, idx, factor in angle_partials(ref, theta, x):
                target = jac_t if part_kind == "trainable" else jac_x
                target[:, qi, idx] += np.broadcast_to(factor, (n_samples,)) * de[:, j]
    return jac_t, jac_x


def expectation_jacobian(
    circuit: Circuit, params, inputs, qubits, wrt: str = "trainable"
) -> np.ndarray:
    """Per-sample parameter-shift Jacobian of <Z_q> outputs.

    ``inputs`` is (n_samples, n_inputs); the result is
    (n_samples, len(qubits), n_slots).  Shared ``params`` of shape
    (n_trainable,).  Every sample and shift is evaluated in one batch.
    """
    theta = _theta_array(circuit, params).ravel()
    x = np.atleast_2d(_input_array(circuit, inputs))
    n_samples = x.shape[0]
    kind = "trainable" if wrt == "trainable" else "input"
    if wrt not in ("trainable", "inputs"):
        raise ValueError(f"wrt must be 'trainable' or 'inputs', got {wrt!r}")
    n_slots = circuit.n_trainable if kind == "trainable" else circuit.n_inputs
    occs = _relevant_occurrences(circuit, kind)
    jac = np.zeros((n_samples, len(qubits), n_slots))
    if not occs:
        return jac
    width = 2 * len(occs)
    shifts = {}
    for j, (i, pos, _) in enumerate(occs):
        s = np.zeros(width)
        s[2 * j] = np.pi / 2
        s[2 * j + 1] = -np.pi / 2
        shifts[(i, pos)] = s
    # batch shape (n_samples, width) by broadcasting inputs against shifts
    amps = run_circuit_batch(circuit, theta, x[:, None, :], shifts)
    probs = np.abs(amps) ** 2
    for qi, q in enumerate(qubits):
        e = probs @ z_signs(circuit.n_qubits, q)
        de = 0.5 * (e[:, 0::2] - e[:, 1::2])
        for j, (_, _, ref) in enumerate(occs):
            for part_kind, idx, factor in angle_partials(ref, theta, x):
                if part_kind == kind:
                    jac[:, qi, idx] += np.broadcast_to(factor, (n_samples,)) * de[:, j]
    return jac
