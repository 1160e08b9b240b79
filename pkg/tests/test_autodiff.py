import numpy as np
import pytest

from qweather.autodiff import (
    expectation_jacobian_pair,
    GradientRequest,
    expectation,
    expectation_batch,
    expectation_jacobian,
    finite_diff_grad,
    param_shift_grad,
)
from qweather.circuits import (
    AngleRef,
    Circuit,
    CircuitOp,
    build_qlstm_vqc,
    build_reuploading_ising,
    build_reuploading_sel,
    build_zz_feature_map,
)

RY_ONLY = Circuit(
    "single_ry", 1, (CircuitOp("RY", (0,), (AngleRef("trainable", 0),)),), 1, 0
)
RX_ONLY = Circuit(
    "single_rx", 1, (CircuitOp("RX", (0,), (AngleRef("trainable", 0),)),), 1, 0
)


def test_ry_gradient_at_zero_and_quarter_turn():
    g0 = param_shift_grad(GradientRequest(RY_ONLY, [0.0], [], 0))
    assert g0 == pytest.approx([0.0], abs=1e-12)
    g1 = param_shift_grad(GradientRequest(RY_ONLY, [np.pi / 2], [], 0))
    assert g1 == pytest.approx([-1.0], abs=1e-12)


def test_finite_diff_matches_analytic_sine():
    req = GradientRequest(RX_ONLY, [np.pi / 3], [], 0)
    fd = finite_diff_grad(req)
    assert fd[0] == pytest.approx(-np.sin(np.pi / 3), abs=1e-8)


def test_expectation_of_ry_is_cosine():
    for theta in np.linspace(-np.pi, np.pi, 7):
        assert expectation(RY_ONLY, [theta], [], 0) == pytest.approx(
            np.cos(theta), abs=1e-12
        )


def test_param_shift_matches_finite_diff_on_sel():
    rng = np.random.default_rng(31)
    circuit = build_reuploading_sel(4, 3)
    theta = rng.normal(size=circuit.n_trainable)
    x = rng.normal(size=circuit.n_inputs)
    req = GradientRequest(circuit, theta, x, 0)
    assert np.max(np.abs(param_shift_grad(req) - finite_diff_grad(req))) < 1e-6


@pytest.mark.parametrize(
    "circuit",
    [
        build_reuploading_ising(3, 2),
        build_reuploading_sel(4, 2),
        build_qlstm_vqc(4, 1),
        build_zz_feature_map(4, 1),
    ],
    ids=lambda c: c.name,
)
@pytest.mark.parametrize("wrt", ["trainable", "inputs"])
def test_param_shift_matches_finite_diff_across_templates(circuit, wrt):
    rng = np.random.default_rng(abs(hash(circuit.name)) % 2**32)
    for _ in range(5):
        theta = rng.normal(size=circuit.n_trainable)
        x = rng.uniform(-1.0, 1.0, size=circuit.n_inputs)
        obs = [(0, 1.0), (1, 0.5)]
        req = GradientRequest(circuit, theta, x, obs, wrt=wrt)
        ps = param_shift_grad(req)
        fd = finite_diff_grad(req)
        if ps.size:
            assert np.max(np.abs(ps - fd)) < 1e-5
        else:
            assert fd.size == 0 or np.allclose(fd, 0, atol=1e-5)


def test_feature_map_has_no_trainable_gradient():
    circuit = build_zz_feature_map(4, 1)
    req = GradientRequest(circuit, [], [0.1, 0.2, 0.3, 0.4], 0)
    assert param_shift_grad(req).size == 0
    assert finite_diff_grad(req).size == 0


def test_gradient_outside_light_cone_is_zero():
    circuit = Circuit(
        "two_disjoint_ry",
        2,
        (
            CircuitOp("RY", (0,), (AngleRef("trainable", 0),)),
            CircuitOp("RY", (1,), (AngleRef("trainable", 1),)),
        ),
        2,
        0,
    )
    grad = param_shift_grad(GradientRequest(circuit, [0.4, 1.1], [], 0))
    assert abs(grad[1]) < 1e-10
    assert grad[0] == pytest.approx(-np.sin(0.4), abs=1e-10)


def test_weighted_observable_gradient_is_linear():
    rng = np.random.default_rng(33)
    circuit = build_reuploading_sel(4, 2)
    theta = rng.normal(size=circuit.n_trainable)
    x = rng.normal(size=4)
    w0, w2 = 0.7, -1.3
    combined = param_shift_grad(
        GradientRequest(circuit, theta, x, [(0, w0), (2, w2)])
    )
    g0 = param_shift_grad(GradientRequest(circuit, theta, x, 0))
    g2 = param_shift_grad(GradientRequest(circuit, theta, x, 2))
    assert np.max(np.abs(combined - (w0 * g0 + w2 * g2))) < 1e-10


def test_jacobian_matches_per_sample_gradients():
    rng = np.random.default_rng(34)
    circuit = build_reuploading_sel(4, 2)
    theta = rng.normal(size=circuit.n_trainable)
    xs = rng.normal(size=(3, 4))
    for wrt in ("trainable", "inputs"):
        jac = expectation_jacobian(circuit, theta, xs, qubits=(0, 2), wrt=wrt)
        n_slots = circuit.n_trainable if wrt == "trainable" else circuit.n_inputs
        assert jac.shape == (3, 2, n_slots)
        for s in range(3):
            for qi, q in enumerate((0, 2)):
                ref = param_shift_grad(
                    GradientRequest(circuit, theta, xs[s], q, wrt=wrt)
                )
                assert np.allclose(jac[s, qi], ref, atol=1e-12)


def test_expectation_batch_matches_scalar():
    rng = np.random.default_rng(35)
    circuit = build_reuploading_ising(3, 1)
    theta = rng.normal(size=circuit.n_trainable)
    xs = rng.normal(size=(4, 3))
    vals = expectation_batch(circuit, theta, xs, qubits=(0, 1, 2))
    assert vals.shape == (4, 3)
    for s in range(4):
        for q in range(3):
            assert vals[s, q] == pytest.approx(
                expectation(circuit, theta, xs[s], q), abs=1e-12
            )


def test_request_validation():
    with pytest.raises(ValueError):
        GradientRequest(RY_ONLY, [0.0], [], 0, wrt="angles")
    with pytest.raises(ValueError):
        param_shift_grad(GradientRequest(RY_ONLY, [0.0], [], 5))
    with pytest.raises(ValueError):
        finite_diff_grad(GradientRequest(RY_ONLY, [0.0], [], 0), h=0.0)


def test_jacobian_pair_matches_separate_calls():
    rng = np.random.default_rng(40)
    circuit = build_qlstm_vqc(3, 2)
    theta = rng.normal(size=circuit.n_trainable)
    xs = rng.normal(size=(5, 3))
    jac_t, jac_x = expectation_jacobian_pair(circuit, theta, xs, qubits=(0, 1, 2))
    ref_t = expectation_jacobian(circuit, theta, xs, (0, 1, 2), wrt="trainable")
    ref_x = expectation_jacobian(circuit, theta, xs, (0, 1, 2), wrt="inputs")
    assert np.allclose(jac_t, ref_t, atol=1e-12)
    assert np.allclose(jac_x, ref_x, atol=1e-12)
