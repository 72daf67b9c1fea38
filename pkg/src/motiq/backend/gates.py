"""Gate matrices and the small gate language used by unitary mappings."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)

FIXED = {
    "h": H, "x": X, "y": Y, "z": Z, "s": S,
    "cnot": np.kron(P0, I2) + np.kron(P1, X),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}

ROTATIONS = ("rx", "ry", "rz")
CONTROLLED_ROTATIONS = ("crx", "cry", "crz")
ARITY = {"h": 1, "x": 1, "y": 1, "z": 1, "s": 1, "cnot": 2, "cz": 2, "swap": 2,
         "rx": 1, "ry": 1, "rz": 1, "crx": 2, "cry": 2, "crz": 2, "cgm": 2}


def rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t):
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


_ROT = {"rx": rx, "ry": ry, "rz": rz}


def controlled(u: np.ndarray) -> np.ndarray:
    """Control on the first wire, ``u`` on the rest."""
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


@lru_cache(maxsize=None)
def gell_mann_basis(v: int) -> tuple[np.ndarray, ...]:
    """The ``4**v - 1`` generalised Gell-Mann matrices on ``v`` qubits."""
    d = 2 ** v
    out = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1
            out.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j, 1j
            out.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        out.append(np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex))
    for m in out:
        m.setflags(write=False)
    return tuple(out)


def gell_mann_unitary(theta, v: int) -> np.ndarray:
    """``exp(i * sum_a theta_a * Lambda_a)`` via the Hermitian eigendecomposition."""
    basis = gell_mann_basis(v)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(basis),):
        raise ValueError(f"gm{v} takes {len(basis)} parameters, got {theta.shape}")
    gen = np.tensordot(theta, np.asarray(basis), axes=1)
    w, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(1j * w)) @ vecs.conj().T


def gell_mann_derivatives(theta, v: int) -> np.ndarray:
    """Exact ``d/d theta_a`` of :func:`gell_mann_unitary`, shape ``(4**v - 1, d, d)``.

    Uses the divided-difference form of the derivative of a matrix function
    in the eigenbasis of the generator.
    """
    basis = np.asarray(gell_mann_basis(v))
    gen = np.tensordot(np.asarray(theta, dtype=float), basis, axes=1)
    w, vecs = np.linalg.eigh(gen)
    e = np.exp(1j * w)
    gap = w[:, None] - w[None, :]
    close = np.abs(gap) < 1e-12
    div = np.where(close, 1j * e[:, None], (e[:, None] - e[None, :]) / np.where(close, 1, gap))
    rot = np.einsum("ji,ajk,kl->ail", vecs.conj(), basis, vecs)
    return vecs @ (rot * div) @ vecs.conj().T


@dataclass(frozen=True)
class GateSpec:
    """One gate inside a mapping.

    ``wires`` are local to the mapping. ``params`` index the mapping's own
    parameter vector; a gate with no parameters but a ``const`` angle is a
    fixed rotation.
    """

    kind: str
    wires: tuple[int, ...]
    params: tuple[int, ...] = ()
    const: float | None = None

    @property
    def shiftable(self) -> bool:
        return self.kind in ROTATIONS + CONTROLLED_ROTATIONS and len(self.params) == 1

    def matrix(self, values, shift: float = 0.0) -> np.ndarray:
        k = self.kind
        if k in FIXED:
            return FIXED[k]
        if k in _ROT or k in CONTROLLED_ROTATIONS:
            angle = (values[self.params[0]] if self.params else self.const) + shift
            base = _ROT[k.lstrip("c")](angle)
            return controlled(base) if k.startswith("c") else base
        if k == "gm":
            v = len(self.wires)
            return gell_mann_unitary([values[i] for i in self.params], v)
        if k == "cgm":
            return controlled(gell_mann_unitary([values[i] for i in self.params], 1))
        raise ValueError(f"unknown gate kind {k!r}")

    def derivatives(self, values) -> list[tuple[int, np.ndarray]]:
        """``(parameter index, d matrix / d parameter)`` for each parameter read."""
        k = self.kind
        if not self.params:
            return []
        if k in _ROT or k in CONTROLLED_ROTATIONS:
            # exp(-i t G / 2) with G**2 = 1, so the derivative is a half-turn shift
            d = _ROT[k.lstrip("c")](values[self.params[0]] + np.pi) / 2
            if k.startswith("c"):
                d = np.block([[np.zeros((2, 2)), np.zeros((2, 2))], [np.zeros((2, 2)), d]])
            return [(self.params[0], d)]
        if k in ("gm", "cgm"):
            v = len(self.wires) if k == "gm" else 1
            ds = gell_mann_derivatives([values[i] for i in self.params], v)
            if k == "cgm":
                z = np.zeros((2, 2))
                ds = [np.block([[z, z], [z, d]]) for d in ds]
            return list(zip(self.params, ds))
        raise ValueError(f"unknown gate kind {k!r}")
