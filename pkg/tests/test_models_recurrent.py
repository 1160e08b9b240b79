"""Tests for the quantum and classical recurrent sequence models."""

from dataclasses import replace

import numpy as np
import pytest

from qweather.models_recurrent import (
    ClassicalRnnBaseline,
    QgruCell,
    QlstmCell,
    build_classical_gru,
    build_classical_lstm,
    build_qgru,
    build_qlstm,
    classical_param_count,
    count_params,
    gru_step,
    lstm_step,
    make_windows,
    qgru_param_count,
    qgru_step,
    qlstm_param_count,
    qlstm_step,
    recurrent_from_json,
    recurrent_to_json,
    sequence_forward,
    sequence_loss_and_grad,
    train_sequence_model,
)


def _seq_loss(model, X, y):
    yhat = sequence_forward(model, X)
    return float(np.mean((yhat - y) ** 2))


def _sine_windows(n_points=40, window=4, input_dim=1):
    t = np.arange(n_points)
    series = np.sin(2 * np.pi * t / 12.0)
    target = (series + 1.0) / 2.0
    features = np.repeat(series[:, None], input_dim, axis=1)
    return make_windows(features, target, window=window)


class TestParamCounts:
    def test_qlstm_circuit_only_count(self):
        cell = build_qlstm(input_dim=4, n_qubits=4, n_layers=2)
        assert cell.n_circuit_params == 144

    def test_qlstm_total_count(self):
        assert qlstm_param_count(4, 4, 2) == 185
        cell = build_qlstm(input_dim=4)
        assert count_params(cell) == 185

    def test_qgru_total_count(self):
        assert qgru_param_count(4, 4, 2) == 113
        assert count_params(build_qgru(input_dim=4)) == 113

    def test_classical_lstm_count(self):
        assert classical_param_count("lstm", 4, 8) == 457
        assert count_params(build_classical_lstm(4, 8)) == 457

    def test_classical_gru_count(self):
        assert classical_param_count("gru", 4, 16) == 1073
        assert count_params(build_classical_gru(4, 16)) == 1073

    def test_quantum_cells_are_smaller_than_baselines(self):
        assert count_params(build_qlstm(4)) < count_params(build_classical_lstm(4, 8))
        assert count_params(build_qgru(4)) < count_params(build_classical_gru(4, 16))

    def test_hidden_size_must_match_qubits(self):
        cell = build_qlstm(input_dim=2, n_qubits=2, n_layers=1)
        with pytest.raises(ValueError):
            QlstmCell(cell.circuit, 2, 2, 3, 1, cell.params)

    def test_param_length_checked(self):
        cell = build_qgru(input_dim=2, n_qubits=2, n_layers=1)
        with pytest.raises(ValueError):
            QgruCell(cell.circuit, 2, 2, 2, 1, cell.params[:-1])
        with pytest.raises(ValueError):
            ClassicalRnnBaseline("lstm", 4, 8, np.zeros(456))
        with pytest.raises(ValueError):
            ClassicalRnnBaseline("rnn", 4, 8, np.zeros(457))


class TestWindows:
    def test_shapes_and_values(self):
        features = np.arange(20, dtype=float).reshape(10, 2)
        target = np.arange(10, dtype=float)
        X, y = make_windows(features, target, window=4)
        assert X.shape == (6, 4, 2)
        assert y.shape == (6,)
        assert np.allclose(X[0], features[0:4])
        assert y[0] == target[4]
        assert y[-1] == target[9]

    def test_stride_two(self):
        features = np.arange(12, dtype=float)[:, None]
        target = np.arange(12, dtype=float)
        X, y = make_windows(features, target, window=4, stride=2)
        assert X.shape[0] == 4
        assert list(y) == [4.0, 6.0, 8.0, 10.0]

    def test_validation(self):
        with pytest.raises(ValueError):
            make_windows(np.zeros((5, 1)), np.zeros(4))
        with pytest.raises(ValueError):
            make_windows(np.zeros((4, 1)), np.zeros(4), window=4)
        with pytest.raises(ValueError):
            make_windows(np.zeros((5, 1)), np.zeros(5), window=0)


class TestQlstmStep:
    def test_zero_params_halve_the_cell_state(self):
        cell = build_qlstm(input_dim=3, n_qubits=4, n_layers=2)
        x = np.zeros((2, 3))
        h = np.zeros((2, 4))
        c = np.array([[0.8, -0.4, 0.2, 1.0], [0.1, 0.3, -0.5, 0.0]])
        h2, c2, y, gates = qlstm_step(cell, x, h, c, return_gates=True)
        assert np.allclose(gates["f"], 0.5, atol=1e-12)
        assert np.allclose(gates["i"], 0.5, atol=1e-12)
        assert np.allclose(gates["o"], 0.5, atol=1e-12)
        assert np.allclose(gates["g"], 0.0, atol=1e-12)
        assert np.allclose(c2, 0.5 * c, atol=1e-12)
        assert np.allclose(y, 0.0, atol=1e-12)

    def test_zero_cell_state_gives_input_times_update(self):
        cell = build_qlstm(input_dim=2, n_qubits=2, n_layers=1, seed=5)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(3, 2))
        h = rng.normal(size=(3, 2)) * 0.3
        c = np.zeros((3, 2))
        _, c2, _, gates = qlstm_step(cell, x, h, c, return_gates=True)
        assert np.allclose(c2, gates["i"] * gates["g"], atol=1e-12)

    def test_gate_ranges(self):
        cell = build_qlstm(input_dim=2, n_qubits=2, n_layers=1, seed=1)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(8, 2)) * 2
        h = rng.normal(size=(8, 2))
        c = rng.normal(size=(8, 2))
        h2, c2, _, gates = qlstm_step(cell, x, h, c, return_gates=True)
        for name in ("f", "i", "o"):
            assert np.all(gates[name] > 0) and np.all(gates[name] < 1)
        assert np.all(gates["g"] > -1) and np.all(gates["g"] < 1)
        assert np.all(np.abs(h2) <= 1.0)

    def test_sequence_forward_matches_manual_loop(self):
        cell = build_qlstm(input_dim=2, n_qubits=2, n_layers=1, seed=3)
        rng = np.random.default_rng(3)
        X = rng.normal(size=(4, 3, 2))
        h = np.zeros((4, 2))
        c = np.zeros((4, 2))
        for t in range(3):
            h, c, y = qlstm_step(cell, X[:, t], h, c)
        assert np.allclose(sequence_forward(cell, X), y, atol=1e-12)


class TestQgruStep:
    def test_gating_identity(self):
        cell = build_qgru(input_dim=2, n_qubits=2, n_layers=1, seed=2)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(5, 2))
        h = rng.normal(size=(5, 2)) * 0.5
        h2, y, gates = qgru_step(cell, x, h, return_gates=True)
        assert np.allclose(
            h2, (1.0 - gates["z"]) * h + gates["z"] * gates["g"], atol=1e-12
        )
        for name in ("r", "z"):
            assert np.all(gates[name] > 0) and np.all(gates[name] < 1)

    def test_update_gate_extremes_interpolate(self):
        cell = build_qgru(input_dim=2, n_qubits=2, n_layers=1, seed=4)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 2))
        h = rng.normal(size=(3, 2))
        _, _, gates = qgru_step(cell, x, h, return_gates=True)
        z, g = gates["z"], gates["g"]
        assert np.allclose((1 - np.zeros_like(z)) * h + np.zeros_like(z) * g, h)
        assert np.allclose((1 - np.ones_like(z)) * h + np.ones_like(z) * g, g)

    def test_zero_params_keep_hidden_at_candidate_mix(self):
        cell = build_qgru(input_dim=2, n_qubits=2, n_layers=1)
        x = np.zeros((2, 2))
        h = np.array([[0.6, -0.2], [0.1, 0.4]])
        h2, _, gates = qgru_step(cell, x, h, return_gates=True)
        # zero weights blind the gates to h, so r = z = 1/2 and g = 0
        assert np.allclose(gates["r"], 0.5, atol=1e-12)
        assert np.allclose(gates["z"], 0.5, atol=1e-12)
        assert np.allclose(gates["g"], 0.0, atol=1e-12)
        assert np.allclose(h2, 0.5 * h, atol=1e-12)


class TestClassicalSteps:
    def test_zero_params_zero_everything(self):
        model = build_classical_lstm(3, 4)
        x = np.ones((2, 3))
        h = np.zeros((2, 4))
        c = np.zeros((2, 4))
        h2, c2, y = lstm_step(model, x, h, c)
        assert np.allclose(h2, 0.0) and np.allclose(c2, 0.0) and np.allclose(y, 0.0)

    def test_gru_step_shapes(self):
        model = build_classical_gru(3, 5, seed=6)
        rng = np.random.default_rng(6)
        h2, y = gru_step(model, rng.normal(size=(4, 3)), rng.normal(size=(4, 5)))
        assert h2.shape == (4, 5)
        assert y.shape == (4,)


class TestGradients:
    @pytest.mark.parametrize(
        "builder,kwargs",
        [
            (build_qlstm, {"input_dim": 2, "n_qubits": 2, "n_layers": 1}),
            (build_qgru, {"input_dim": 2, "n_qubits": 2, "n_layers": 1}),
        ],
    )
    def test_quantum_gradients_match_finite_difference(self, builder, kwargs):
        model = builder(seed=7, **kwargs)
        rng = np.random.default_rng(7)
        X = rng.normal(size=(3, 3, 2)) * 0.7
        y = rng.normal(size=3) * 0.5
        _, grad = sequence_loss_and_grad(model, X, y)
        h = 1e-6
        fd = np.zeros_like(grad)
        for k in range(model.params.size):
            up = model.params.copy()
            up[k] += h
            dn = model.params.copy()
            dn[k] -= h
            fd[k] = (
                _seq_loss(replace(model, params=up), X, y)
                - _seq_loss(replace(model, params=dn), X, y)
            ) / (2 * h)
        assert np.max(np.abs(grad - fd)) < 1e-4
        assert np.allclose(grad, fd, atol=1e-6)

    def test_full_size_qlstm_gradient_spot_check(self):
        model = build_qlstm(input_dim=4, seed=9)
        rng = np.random.default_rng(9)
        X = rng.normal(size=(2, 3, 4)) * 0.5
        y = rng.normal(size=2) * 0.5
        _, grad = sequence_loss_and_grad(model, X, y)
        h = 1e-6
        idx = rng.choice(model.params.size, size=12, replace=False)
        for k in idx:
            up = model.params.copy()
            up[k] += h
            dn = model.params.copy()
            dn[k] -= h
            fd = (
                _seq_loss(replace(model, params=up), X, y)
                - _seq_loss(replace(model, params=dn), X, y)
            ) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-4)

    @pytest.mark.parametrize(
        "builder,hidden", [(build_classical_lstm, 4), (build_classical_gru, 4)]
    )
    def test_classical_gradients_match_finite_difference(self, builder, hidden):
        model = builder(3, hidden, seed=8)
        rng = np.random.default_rng(8)
        X = rng.normal(size=(4, 4, 3))
        y = rng.normal(size=4)
        _, grad = sequence_loss_and_grad(model, X, y)
        h = 1e-6
        fd = np.zeros_like(grad)
        for k in range(model.params.size):
            up = model.params.copy()
            up[k] += h
            dn = model.params.copy()
            dn[k] -= h
            fd[k] = (
                _seq_loss(ClassicalRnnBaseline(model.kind, 3, hidden, up), X, y)
                - _seq_loss(ClassicalRnnBaseline(model.kind, 3, hidden, dn), X, y)
            ) / (2 * h)
        assert np.max(np.abs(grad - fd)) < 1e-4
        assert np.allclose(grad, fd, atol=1e-6)


class TestTraining:
    def test_constant_target_learned_by_qlstm(self):
        X = np.zeros((8, 3, 2))
        y = np.full(8, 0.3)
        model = build_qlstm(input_dim=2, n_qubits=2, n_layers=1, seed=0)
        model, history = train_sequence_model(model, X, y, epochs=70, lr=0.05, seed=0)
        assert history[-1] < 1e-3
        assert history[-1] < history[0]

    def test_qlstm_learns_sinusoid(self):
        X, y = _sine_windows()
        model = build_qlstm(input_dim=1, n_qubits=4, n_layers=1, seed=1)
        model, history = train_sequence_model(model, X, y, epochs=40, lr=0.05, seed=1)
        assert history[-1] < 0.1
        assert history[-1] < history[0] / 2

    def test_qgru_converges_on_sinusoid(self):
        X, y = _sine_windows()
        model = build_qgru(input_dim=1, n_qubits=4, n_layers=1, seed=2)
        model, history = train_sequence_model(model, X, y, epochs=15, lr=0.05, seed=2)
        assert history[-1] < history[0]
        assert min(history) == pytest.approx(history[-1], rel=0.5)

    @pytest.mark.parametrize(
        "builder,hidden", [(build_classical_lstm, 8), (build_classical_gru, 16)]
    )
    def test_classical_baselines_learn_sinusoid(self, builder, hidden):
        X, y = _sine_windows()
        model = builder(1, hidden, seed=3)
        model, history = train_sequence_model(model, X, y, epochs=120, lr=0.02, seed=3)
        assert history[-1] < 0.05
        assert history[-1] < history[0]

    def test_seed_determinism(self):
        X, y = _sine_windows(n_points=20)
        runs = []
        for _ in range(2):
            model = build_qgru(input_dim=1, n_qubits=2, n_layers=1)
            _, history = train_sequence_model(model, X, y, epochs=4, lr=0.05, seed=11)
            runs.append(history)
        assert runs[0] == runs[1]
        model = build_qgru(input_dim=1, n_qubits=2, n_layers=1)
        _, other = train_sequence_model(model, X, y, epochs=4, lr=0.05, seed=12)
        assert runs[0] != other

    def test_window_shape_validated(self):
        model = build_qlstm(input_dim=2, n_qubits=2, n_layers=1)
        with pytest.raises(ValueError):
            train_sequence_model(model, np.zeros((3, 2)), np.zeros(3), epochs=1)
        with pytest.raises(ValueError):
            train_sequence_model(
                model, np.zeros((0, 3, 2)), np.zeros(0), epochs=1
            )
        with pytest.raises(ValueError):
            sequence_loss_and_grad(model, np.zeros((2, 3, 2)), np.zeros(3))


class TestSerialization:
    def test_quantum_round_trip(self):
        cell = build_qlstm(input_dim=3, n_qubits=2, n_layers=1, seed=4)
        loaded = recurrent_from_json(recurrent_to_json(cell, seed=4))
        assert isinstance(loaded, QlstmCell)
        assert np.allclose(loaded.params, cell.params)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(3, 2, 3))
        assert np.allclose(sequence_forward(loaded, X), sequence_forward(cell, X))

    def test_gru_round_trip(self):
        cell = build_qgru(input_dim=2, n_qubits=2, n_layers=1, seed=5)
        loaded = recurrent_from_json(recurrent_to_json(cell))
        assert isinstance(loaded, QgruCell)
        assert np.allclose(loaded.params, cell.params)

    def test_classical_round_trip(self):
        model = build_classical_gru(4, 16, seed=6)
        loaded = recurrent_from_json(recurrent_to_json(model, seed=6))
        assert loaded.kind == "gru"
        assert np.allclose(loaded.params, model.params)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            recurrent_from_json('{"kind": "tcn", "values": []}')
