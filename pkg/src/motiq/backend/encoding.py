"""Classical-data encodings into statevectors.

Feature ranges expected by each scheme (apply :data:`SCALE_RANGES` with a
min-max scaler first):

* ``qubit``: one feature per qubit, ``Ry(2 x)`` on ``|0>``, x in [0, pi/2].
* ``iqp``: one feature per qubit; two repetitions of a Hadamard layer
  followed by ``exp(i (sum x_i Z_i + sum x_i x_{i+1} Z_i Z_{i+1}))``,
  x in [0, pi].
* ``amplitude``: up to ``2**N`` features, zero padded and normalised.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

SCHEMES = ("qubit", "iqp", "amplitude")
SCALE_RANGES = {"qubit": (0.0, np.pi / 2), "iqp": (0.0, np.pi), "amplitude": (0.0, 1.0)}
IQP_REPS = 2


@lru_cache(maxsize=None)
def _z_signs(n: int) -> np.ndarray:
    """``(2**n, n)`` array of Z eigenvalues, label 1 = most significant bit."""
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1.0 - 2.0 * bits


def _hadamard_all(batch: np.ndarray, n: int) -> np.ndarray:
    psi = batch.reshape((batch.shape[0],) + (2,) * n)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    for ax in range(1, n + 1):
        psi = np.moveaxis(np.tensordot(psi, h, axes=([ax], [1])), -1, ax)
    return psi.reshape(batch.shape[0], -1)


def encode_batch(x, scheme: str, n: int) -> np.ndarray:
    """Encode rows of ``x`` into a ``(B, 2**n)`` batch of states."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    b, f = x.shape
    if scheme == "amplitude":
        if f > 2 ** n:
            raise ValueError(f"{f} features do not fit in {2 ** n} amplitudes")
        out = np.zeros((b, 2 ** n), dtype=complex)
        out[:, :f] = x
        norms = np.linalg.norm(out, axis=1)
        if np.any(norms == 0):
            raise ValueError("amplitude encoding of a zero vector")
        return out / norms[:, None]
    if f != n:
        raise ValueError(f"{scheme} encoding needs {n} features, got {f}")
    if scheme == "qubit":
        # product state, built as a running Kronecker product per row
        c, s = np.cos(x), np.sin(x)
        out = np.ones((b, 1), dtype=complex)
        for q in range(n):
            amp = np.stack([c[:, q], s[:, q]], axis=1)
            out = (out[:, :, None] * amp[:, None, :]).reshape(b, -1)
        return out
    if scheme == "iqp":
        z = _z_signs(n)
        phase = x @ z.T
        if n > 1:
            phase += (x[:, :-1] * x[:, 1:]) @ (z[:, :-1] * z[:, 1:]).T
        diag = np.exp(1j * phase)
        out = np.zeros((b, 2 ** n), dtype=complex)
        out[:, 0] = 1.0
        for _ in range(IQP_REPS):
            out = diag * _hadamard_all(out, n)
        return out
    raise ValueError(f"unknown encoding {scheme!r}; choose from {SCHEMES}")


def encode(data, scheme: str, n: int) -> np.ndarray:
    return encode_batch(np.asarray(data, dtype=float)[None, :], scheme, n)[0]
