"""Dense statevector simulation.

States are complex arrays of shape ``(2**n,)`` or ``(batch, 2**n)``. Qubit
label 1 is the most significant bit of the basis index. Practical ceiling is
around 20 qubits.
"""
from __future__ import annotations

import numpy as np


def _as_batch(state) -> tuple[np.ndarray, bool]:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return state[None, :], True
    return state, False


def num_qubits_of(state) -> int:
    dim = np.shape(state)[-1]
    n = int(dim).bit_length() - 1
    if 2 ** n != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return n


def apply_unitary(state: np.ndarray, u: np.ndarray, wires, n: int) -> np.ndarray:
    """Apply ``u`` to 0-based ``wires`` of a batched state of shape ``(B, 2**n)``."""
    k = len(wires)
    b = state.shape[0]
    psi = state.reshape((b,) + (2,) * n)
    ut = u.reshape((2,) * (2 * k))
    axes = [1 + w for w in wires]
    out = np.tensordot(psi, ut, axes=(axes, list(range(k, 2 * k))))
    out = np.moveaxis(out, list(range(out.ndim - k, out.ndim)), axes)
    return out.reshape(b, -1)


def embed(u: np.ndarray, wires, n: int) -> np.ndarray:
    """Full ``2**n`` matrix of ``u`` acting on ``wires``."""
    eye = np.eye(2 ** n, dtype=complex)
    return apply_unitary(eye, u, wires, n).T


def basis_state(n: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[index] = 1.0
    return psi


def readout(state, qubit: int) -> np.ndarray | float:
    """``P(qubit = 1)``; ``qubit`` is a 1-based label."""
    batch, single = _as_batch(state)
    n = num_qubits_of(batch)
    if not 1 <= qubit <= n:
        raise ValueError(f"qubit {qubit} outside 1..{n}")
    probs = (batch.real ** 2 + batch.imag ** 2).reshape(batch.shape[0], 2 ** (qubit - 1), 2, -1)
    p1 = probs[:, :, 1, :].sum(axis=(1, 2))
    p1 = np.clip(p1, 0.0, 1.0)
    return float(p1[0]) if single else p1


def expectation_z(state, qubit: int):
    return 1.0 - 2.0 * readout(state, qubit)


def norm(state):
    batch, single = _as_batch(state)
    out = np.linalg.norm(batch, axis=1)
    return float(out[0]) if single else out
