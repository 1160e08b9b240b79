"""Parameterized circuit templates and binding.

A Circuit is an ordered list of gate slots.  Slots carry either no angles
(H, CNOT, CZ) or AngleRef angles that point at a trainable parameter or an
input feature, with an optional nonlinearity applied to the referenced
value before it becomes the gate angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qsim import (
    GATE_ARITY,
    Gate,
    Statevector,
    apply_gate,
    apply_matrix,
    gate_matrix,
    new_state,
)

TRANSFORMS = ("identity", "arctan", "arctan_square", "zz_product")


@dataclass(frozen=True)
class AngleRef:
    """One gate angle: scale * transform(referenced value).

    ``zz_product`` is the pairwise feature-map phase
    scale * (pi - x[slot_index]) * (pi - x[partner]) and is the only
    transform that reads two values.
    """

    slot_kind: str
    slot_index: int
    transform: str = "identity"
    scale: float = 1.0
    partner: int | None = None

    def __post_init__(self):
        if self.slot_kind not in ("trainable", "input"):
            raise ValueError(f"unknown slot kind {self.slot_kind!r}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown angle transform {self.transform!r}")
        if (self.transform == "zz_product") != (self.partner is not None):
            raise ValueError("partner index is required exactly for zz_product")
        if self.transform == "zz_product" and self.slot_kind != "input":
            raise ValueError("zz_product only applies to input slots")
        if self.slot_index < 0 or (self.partner is not None and self.partner < 0):
            raise ValueError("negative slot index")


@dataclass(frozen=True)
class CircuitOp:
    """A gate slot: fixed when ``angles`` is empty, parameterized otherwise."""

    kind: str
    targets: tuple[int, ...]
    angles: tuple[AngleRef, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        n_angles, n_targets = GATE_ARITY[self.kind]
        if len(self.angles) != n_angles:
            raise ValueError(
                f"{self.kind} takes {n_angles} angle(s), got {len(self.angles)}"
            )
        if len(self.targets) != n_targets:
            raise ValueError(
                f"{self.kind} acts on {n_targets} qubit(s), got {len(self.targets)}"
            )


@dataclass(frozen=True)
class Circuit:
    name: str
    n_qubits: int
    ops: tuple[CircuitOp, ...]
    n_trainable: int
    n_inputs: int

    def __post_init__(self):
        for op in self.ops:
            for t in op.targets:
                if not 0 <= t < self.n_qubits:
                    raise ValueError(f"target {t} out of range in {self.name}")
            for ref in op.angles:
                bound = (
                    self.n_trainable
                    if ref.slot_kind == "trainable"
                    else self.n_inputs
                )
                if ref.slot_index >= bound:
                    raise ValueError(
                        f"{ref.slot_kind} slot {ref.slot_index} out of range"
                    )
                if ref.partner is not None and ref.partner >= self.n_inputs:
                    raise ValueError(f"input slot {ref.partner} out of range")


@dataclass(frozen=True)
class ParamVector:
    """Trainable angles in radians for one circuit template."""

    values: tuple[float, ...]
    layout: str


def param_vector(circuit: Circuit, values) -> ParamVector:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size != circuit.n_trainable:
        raise ValueError(
            f"{circuit.name} takes {circuit.n_trainable} parameters, got {arr.size}"
        )
    return ParamVector(tuple(arr.tolist()), circuit.name)


def angle_values(ref: AngleRef, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Angle for a slot; broadcasts over leading axes of theta/x."""
    if ref.transform == "zz_product":
        xi = x[..., ref.slot_index]
        xj = x[..., ref.partner]
        return ref.scale * (np.pi - xi) * (np.pi - xj)
    v = (
        theta[..., ref.slot_index]
        if ref.slot_kind == "trainable"
        else x[..., ref.slot_index]
    )
    if ref.transform == "identity":
        return ref.scale * v
    if ref.transform == "arctan":
        return ref.scale * np.arctan(v)
    return ref.scale * np.arctan(v * v)


def angle_partials(ref: AngleRef, theta: np.ndarray, x: np.ndarray):
    """(slot_kind, value_index, d angle / d value) for every dependency."""
    if ref.transform == "zz_product":
        xi = x[..., ref.slot_index]
        xj = x[..., ref.partner]
        return [
            ("input", ref.slot_index, -ref.scale * (np.pi - xj)),
            ("input", ref.partner, -ref.scale * (np.pi - xi)),
        ]
    v = (
        theta[..., ref.slot_index]
        if ref.slot_kind == "trainable"
        else x[..., ref.slot_index]
    )
    if ref.transform == "identity":
        d = ref.scale * np.ones_like(v)
    elif ref.transform == "arctan":
        d = ref.scale / (1.0 + v * v)
    else:
        # d/dv arctan(v^2) = 2v / (1 + v^4)
        d = ref.scale * 2.0 * v / (1.0 + v**4)
    return [(ref.slot_kind, ref.slot_index, d)]


def parameterized_occurrences(circuit: Circuit):
    """All (op_index, angle_position, AngleRef) triples, in circuit order."""
    out = []
    for i, op in enumerate(circuit.ops):
        for pos, ref in enumerate(op.angles):
            out.append((i, pos, ref))
    return out


def _theta_array(circuit: Circuit, params) -> np.ndarray:
    if isinstance(params, ParamVector):
        if params.layout != circuit.name:
            raise ValueError(
                f"parameter layout {params.layout!r} does not match {circuit.name!r}"
            )
        params = params.values
    arr = np.asarray(params, dtype=float)
    if arr.shape[-1:] != (circuit.n_trainable,):
        if not (circuit.n_trainable == 0 and arr.size == 0):
            raise ValueError(
                f"{circuit.name} takes {circuit.n_trainable} parameters, "
                f"got shape {arr.shape}"
            )
        arr = arr.reshape(arr.shape[:-1] + (0,) if arr.ndim else (0,))
    return arr


def _input_array(circuit: Circuit, inputs) -> np.ndarray:
    arr = np.asarray(inputs, dtype=float)
    if arr.shape[-1:] != (circuit.n_inputs,):
        if not (circuit.n_inputs == 0 and arr.size == 0):
            raise ValueError(
                f"{circuit.name} takes {circuit.n_inputs} inputs, "
                f"got shape {arr.shape}"
            )
        arr = arr.reshape(arr.shape[:-1] + (0,) if arr.ndim else (0,))
    return arr


def run_circuit_batch(
    circuit: Circuit, params, inputs, angle_shifts=None
) -> np.ndarray:
    """Amplitudes of shape batch + (2**n,) for batched params/inputs.

    ``params`` broadcasts as (..., n_trainable) against ``inputs``
    (..., n_inputs).  ``angle_shifts`` maps (op_index, angle_position) to
    an additive shift (scalar or batch-shaped), which is how parameter
    shift evaluations are batched.
    """
    theta = _theta_array(circuit, params)
    x = _input_array(circuit, inputs)
    shapes = [theta.shape[:-1], x.shape[:-1]]
    if angle_shifts:
        shapes += [np.shape(s) for s in angle_shifts.values()]
    batch_shape = np.broadcast_shapes(*shapes)
    amps = np.zeros(batch_shape + (1 << circuit.n_qubits,), dtype=complex)
    amps[..., 0] = 1.0
    for i, op in enumerate(circuit.ops):
        if not op.angles:
            mat = gate_matrix(op.kind)
        else:
            angles = []
            for pos, ref in enumerate(op.angles):
                a = angle_values(ref, theta, x)
                if angle_shifts and (i, pos) in angle_shifts:
                    a = a + angle_shifts[(i, pos)]
                angles.append(np.broadcast_to(a, batch_shape))
            mat = gate_matrix(op.kind, tuple(angles))
        amps = apply_matrix(amps, circuit.n_qubits, op.targets, mat)
    return amps


def bind_circuit(circuit: Circuit, params, inputs) -> list[Gate]:
    """Concrete gate list with every angle transform evaluated."""
    theta = _theta_array(circuit, params).ravel()
    x = _input_array(circuit, inputs).ravel()
    gates = []
    for op in circuit.ops:
        angles = tuple(float(angle_values(ref, theta, x)) for ref in op.angles)
        gates.append(Gate(op.kind, op.targets, angles))
    return gates


def bind_and_run(circuit: Circuit, params, inputs) -> Statevector:
    """Apply the bound circuit to |0...0>."""
    state = new_state(circuit.n_qubits) if circuit.n_qubits else None
    if circuit.n_qubits < 1:
        raise ValueError("circuit must have at least one qubit")
    for gate in bind_circuit(circuit, params, inputs):
        state = apply_gate(state, gate)
    return state


def _validate_sizes(name, **sizes):
    for label, (value, lo) in sizes.items():
        if int(value) != value or value < lo:
            raise ValueError(f"{name}: {label} must be an integer >= {lo}")


def build_reuploading_ising(n_qubits: int = 3, n_layers: int = 2) -> Circuit:
    """Data-reuploading encoder with Ising-style RZZ couplings.

    Each layer re-encodes the inputs with RY, applies trainable RX and RZ
    on every qubit and a ring of trainable RZZ couplings; a final encoding
    pass and trainable RY layer close the circuit.
    """
    if n_qubits != 3:
        raise ValueError("the Ising reuploading template is defined for 3 qubits")
    _validate_sizes("build_reuploading_ising", n_layers=(n_layers, 1))
    n = n_qubits
    ops = []
    k = 0
    for _ in range(n_layers):
        for q in range(n):
            ops.append(CircuitOp("RY", (q,), (AngleRef("input", q),)))
        for q in range(n):
            ops.append(CircuitOp("RX", (q,), (AngleRef("trainable", k),)))
            k += 1
        for q in range(n):
            ops.append(CircuitOp("RZ", (q,), (AngleRef("trainable", k),)))
            k += 1
        for q in range(n):
            ops.append(
                CircuitOp("RZZ", (q, (q + 1) % n), (AngleRef("trainable", k),))
            )
            k += 1
    for q in range(n):
        ops.append(CircuitOp("RY", (q,), (AngleRef("input", q),)))
    for q in range(n):
        ops.append(CircuitOp("RY", (q,), (AngleRef("trainable", k),)))
        k += 1
    return Circuit(
        name=f"reuploading_ising({n_qubits},{n_layers})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=k,
        n_inputs=n,
    )


def build_reuploading_sel(n_qubits: int = 4, n_layers: int = 4) -> Circuit:
    """Data-reuploading encoder with strongly entangling layers.

    Layer l (1-indexed) encodes inputs with RY, applies a trainable R3 per
    qubit, then a CNOT ring of range (l mod (n-1)) + 1.
    """
    _validate_sizes(
        "build_reuploading_sel", n_qubits=(n_qubits, 2), n_layers=(n_layers, 1)
    )
    n = n_qubits
    ops = []
    k = 0
    for layer in range(1, n_layers + 1):
        for q in range(n):
            ops.append(CircuitOp("RY", (q,), (AngleRef("input", q),)))
        for q in range(n):
            ops.append(
                CircuitOp(
                    "R3",
                    (q,),
                    (
                        AngleRef("trainable", k),
                        AngleRef("trainable", k + 1),
                        AngleRef("trainable", k + 2),
                    ),
                )
            )
            k += 3
        r = (layer % (n - 1)) + 1
        for q in range(n):
            ops.append(CircuitOp("CNOT", (q, (q + r) % n)))
    return Circuit(
        name=f"reuploading_sel({n_qubits},{n_layers})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=k,
        n_inputs=n,
    )


def sel_cnot_ranges(n_qubits: int, n_layers: int) -> list[int]:
    """Per-layer CNOT ranges of the strongly entangling template."""
    return [(layer % (n_qubits - 1)) + 1 for layer in range(1, n_layers + 1)]


def build_zz_feature_map(n_features: int, reps: int = 1) -> Circuit:
    """Second-order feature map with linear entanglement, no trainables.

    Per repetition: H on all qubits, RZ(2*x_i) per qubit, then for each
    adjacent pair a CNOT-conjugated RZ carrying 2*(pi - x_i)*(pi - x_j).
    """
    _validate_sizes("build_zz_feature_map", n_features=(n_features, 2), reps=(reps, 1))
    n = n_features
    ops = []
    for _ in range(reps):
        for q in range(n):
            ops.append(CircuitOp("H", (q,)))
        for q in range(n):
            ops.append(CircuitOp("RZ", (q,), (AngleRef("input", q, scale=2.0),)))
        for q in range(n - 1):
            ops.append(CircuitOp("CNOT", (q, q + 1)))
            ops.append(
                CircuitOp(
                    "RZ",
                    (q + 1,),
                    (AngleRef("input", q, "zz_product", 2.0, partner=q + 1),),
                )
            )
            ops.append(CircuitOp("CNOT", (q, q + 1)))
    return Circuit(
        name=f"zz_feature_map({n_features},{reps})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=0,
        n_inputs=n,
    )


def build_real_amplitudes(n_qubits: int, reps: int = 3) -> Circuit:
    """RY layer, then reps blocks of a linear CNOT chain plus an RY layer."""
    _validate_sizes("build_real_amplitudes", n_qubits=(n_qubits, 2), reps=(reps, 0))
    n = n_qubits
    ops = []
    k = 0
    for q in range(n):
        ops.append(CircuitOp("RY", (q,), (AngleRef("trainable", k),)))
        k += 1
    for _ in range(reps):
        for q in range(n - 1):
            ops.append(CircuitOp("CNOT", (q, q + 1)))
        for q in range(n):
            ops.append(CircuitOp("RY", (q,), (AngleRef("trainable", k),)))
            k += 1
    return Circuit(
        name=f"real_amplitudes({n_qubits},{reps})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=k,
        n_inputs=0,
    )


def build_z_feature_map(n_features: int = 4, reps: int = 1) -> Circuit:
    """First-order feature map: H then RZ(2*x_i) per qubit, no entanglement."""
    _validate_sizes("build_z_feature_map", n_features=(n_features, 1), reps=(reps, 1))
    n = n_features
    ops = []
    for _ in range(reps):
        for q in range(n):
            ops.append(CircuitOp("H", (q,)))
        for q in range(n):
            ops.append(CircuitOp("RZ", (q,), (AngleRef("input", q, scale=2.0),)))
    return Circuit(
        name=f"z_feature_map({n_features},{reps})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=0,
        n_inputs=n,
    )


def build_qlstm_vqc(n_qubits: int = 4, n_layers: int = 1) -> Circuit:
    """Gate circuit of the quantum recurrent cells.

    Encoding squashes each input through arctan before rotation: H, then
    RY(arctan(v_i)) and RZ(arctan(v_i^2)) per qubit.  Each variational
    layer is a CNOT ring followed by an R3 rotation per qubit.
    """
    _validate_sizes(
        "build_qlstm_vqc", n_qubits=(n_qubits, 2), n_layers=(n_layers, 1)
    )
    n = n_qubits
    ops = []
    for q in range(n):
        ops.append(CircuitOp("H", (q,)))
    for q in range(n):
        ops.append(CircuitOp("RY", (q,), (AngleRef("input", q, "arctan"),)))
    for q in range(n):
        ops.append(CircuitOp("RZ", (q,), (AngleRef("input", q, "arctan_square"),)))
    k = 0
    for _ in range(n_layers):
        for q in range(n):
            ops.append(CircuitOp("CNOT", (q, (q + 1) % n)))
        for q in range(n):
            ops.append(
                CircuitOp(
                    "R3",
                    (q,),
                    (
                        AngleRef("trainable", k),
                        AngleRef("trainable", k + 1),
                        AngleRef("trainable", k + 2),
                    ),
                )
            )
            k += 3
    return Circuit(
        name=f"qlstm_vqc({n_qubits},{n_layers})",
        n_qubits=n,
        ops=tuple(ops),
        n_trainable=k,
        n_inputs=n,
    )
