"""Quantum fidelity kernels and a precomputed-kernel soft-margin SVM.

The kernel entry for two samples is the squared overlap of their embedded
statevectors.  Training solves the soft-margin dual by sequential minimal
optimization with the second choice picked to maximize |E_i - E_j|;
multiclass goes one-vs-rest with ties broken toward the lowest class.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, run_circuit_batch


class IllConditionedKernelError(Exception):
    """Kernel matrix is not positive semidefinite within tolerance."""


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    source: str

    @property
    def shape(self):
        return self.entries.shape


def _fingerprint(X: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(X).tobytes()).hexdigest()[:12]


def embed_states(X, feature_map: Circuit) -> np.ndarray:
    """Statevectors of every row under the feature map, shape (n, 2**q)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != feature_map.n_inputs:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match "
            f"{feature_map.name} ({feature_map.n_inputs} inputs)"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return run_circuit_batch(feature_map, np.zeros(feature_map.n_trainable), X)


def fidelity_kernel(Xa, Xb, feature_map: Circuit) -> np.ndarray:
    """|<phi(a)|phi(b)>|^2 for every pair of rows, shape (na, nb)."""
    amps_a = embed_states(Xa, feature_map)
    amps_b = embed_states(Xb, feature_map)
    return np.abs(amps_a.conj() @ amps_b.T) ** 2


def fidelity_kernel_matrix(X, feature_map: Circuit) -> KernelMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    amps = embed_states(X, feature_map)
    entries = np.abs(amps.conj() @ amps.T) ** 2
    source = f"{feature_map.name}|{_fingerprint(X)}"
    return KernelMatrix(entries=entries, source=source)


def rbf_kernel(Xa, Xb, gamma: float) -> np.ndarray:
    Xa = np.atleast_2d(np.asarray(Xa, dtype=float))
    Xb = np.atleast_2d(np.asarray(Xb, dtype=float))
    sq = (
        np.sum(Xa**2, axis=1)[:, None]
        + np.sum(Xb**2, axis=1)[None, :]
        - 2.0 * Xa @ Xb.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(X) -> float:
    """1 / (n_features * variance), the scale-aware default."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    var = float(X.var())
    if var <= 0:
        return 1.0 / X.shape[1]
    return 1.0 / (X.shape[1] * var)


def rbf_kernel_matrix(X, gamma: float | None = None) -> KernelMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if gamma is None:
        gamma = default_gamma(X)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    entries = rbf_kernel(X, X, gamma)
    source = f"rbf(gamma={gamma:.6g})|{_fingerprint(X)}"
    return KernelMatrix(entries=entries, source=source)


def kernel_to_csv(km: KernelMatrix, path) -> None:
    """Row-major CSV dump with the source descriptor as the header line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# source={km.source}\n")
        for row in km.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class SvmModel:
    dual_coefficients: np.ndarray
    support_indices: np.ndarray
    support_labels: np.ndarray
    bias: float
    regularization_C: float
    label_map: tuple
    n_train: int


def _as_entries(kernel) -> np.ndarray:
    if isinstance(kernel, KernelMatrix):
        return kernel.entries
    return np.asarray(kernel, dtype=float)


def svm_train(kernel, y, C: float = 1.0, tol: float = 1e-3, label_map=(-1, 1)):
    """Soft-margin SVM on a precomputed kernel via SMO.

    ``y`` must be in {-1, +1} with both classes present.  The final bias
    averages over free support vectors (0 < alpha < C); when none exist it
    is the midpoint of the interval the KKT conditions allow.
    """
    K = _as_entries(kernel)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise ValueError("both classes must be present")
    if C <= 0:
        raise ValueError("C must be positive")
    min_eig = float(np.linalg.eigvalsh(K).min())
    if min_eig < -1e-8:
        raise IllConditionedKernelError(
            f"kernel minimum eigenvalue {min_eig:.3e} below -1e-8"
        )

    alpha = np.zeros(n)
    b = 0.0
    # E_i = f(x_i) - y_i, kept incrementally up to date
    E = -y.copy()

    def try_pair(i, j):
        nonlocal b, E
        if i == j:
            return False
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(C, C + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - C)
            hi = min(C, alpha[i] + alpha[j])
        if hi - lo < 1e-12:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            return False
        aj = alpha[j] + y[j] * (E[i] - E[j]) / eta
        aj = min(hi, max(lo, aj))
        if abs(aj - alpha[j]) < 1e-12:
            return False
        ai = alpha[i] + y[i] * y[j] * (alpha[j] - aj)
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        b1 = b - E[i] - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
        b2 = b - E[j] - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
        if 0.0 < ai < C:
            b_new = b1
        elif 0.0 < aj < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        alpha[i], alpha[j] = ai, aj
        E += y[i] * d_i * K[i] + y[j] * d_j * K[j] + (b_new - b)
        b = b_new
        return True

    def examine(i):
        r = y[i] * E[i]
        if (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0):
            # second choice: largest |E_i - E_j|, then everything in order
            j = int(np.argmax(np.abs(E[i] - E)))
            if try_pair(i, j):
                return True
            for j in range(n):
                if try_pair(i, j):
                    return True
        return False

    examine_all = True
    for _ in range(200 * n):
        changed = 0
        if examine_all:
            for i in range(n):
                changed += examine(i)
        else:
            for i in np.flatnonzero((alpha > 0) & (alpha < C)):
                changed += examine(int(i))
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True

    g = (alpha * y) @ K
    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    if np.any(free):
        bias = float(np.mean(y[free] - g[free]))
    else:
        # midpoint of the bias interval the box constraints leave open
        lower, upper = -np.inf, np.inf
        for i in range(n):
            r = y[i] - g[i]
            at_zero, at_c = alpha[i] <= 1e-9, alpha[i] >= C - 1e-9
            if (at_zero and y[i] > 0) or (at_c and y[i] < 0):
                lower = max(lower, r)
            if (at_zero and y[i] < 0) or (at_c and y[i] > 0):
                upper = min(upper, r)
        if np.isfinite(lower) and np.isfinite(upper):
            bias = float(0.5 * (lower + upper))
        else:
            bias = float(lower if np.isfinite(lower) else upper)

    support = np.flatnonzero(alpha > 1e-9)
    return SvmModel(
        dual_coefficients=alpha[support].copy(),
        support_indices=support,
        support_labels=y[support].copy(),
        bias=bias,
        regularization_C=float(C),
        label_map=tuple(label_map),
        n_train=n,
    )


def svm_decision(model: SvmModel, k_rows) -> np.ndarray:
    """Decision values for kernel rows of shape (m, n_train) or (n_train,)."""
    k_rows = np.atleast_2d(np.asarray(k_rows, dtype=float))
    if k_rows.shape[1] != model.n_train:
        raise ValueError(
            f"kernel row length {k_rows.shape[1]} does not match "
            f"{model.n_train} training points"
        )
    coef = model.dual_coefficients * model.support_labels
    return k_rows[:, model.support_indices] @ coef + model.bias


def svm_predict(model: SvmModel, k_row):
    """(label, decision value) for one query row; sign ties go positive."""
    decision = float(svm_decision(model, k_row)[0])
    label = model.label_map[1] if decision >= 0 else model.label_map[0]
    return label, decision


@dataclass(frozen=True)
class OvrModel:
    classes: tuple
    models: tuple


def ovr_train(kernel, y, C: float = 1.0, tol: float = 1e-3) -> OvrModel:
    """One binary machine per class, that class against the rest."""
    K = _as_entries(kernel)
    y = np.asarray(y).ravel()
    classes = tuple(sorted(np.unique(y).tolist()))
    if len(classes) < 2:
        raise ValueError("at least two classes are required")
    models = []
    for c in classes:
        yc = np.where(y == c, 1.0, -1.0)
        models.append(svm_train(K, yc, C=C, tol=tol, label_map=(-1, 1)))
    return OvrModel(classes=classes, models=tuple(models))


def ovr_decision(model: OvrModel, k_rows) -> np.ndarray:
    """Per-class decision values, shape (m, n_classes)."""
    cols = [svm_decision(m, k_rows) for m in model.models]
    return np.stack(cols, axis=1)


def ovr_predict(model: OvrModel, k_row):
    """(label, decision values); argmax with ties to the lowest class."""
    decisions = ovr_decision(model, k_row)[0]
    return model.classes[int(np.argmax(decisions))], decisions
