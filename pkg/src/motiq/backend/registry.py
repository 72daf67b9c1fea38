"""Named unitary mappings (ansatzes) that primitives spread over their edges.

Convolution ansatzes, by letter key:

====  =======  ======  ==============================================================
key   alias    params  gates (wire 0 = first edge qubit)
====  =======  ======  ==============================================================
a     u_ttn    2       RY(t0) w0, RY(t1) w1, CNOT w0->w1
b     u_9      2       H w0, H w1, CZ, RX(t0) w0, RX(t1) w1
c     u_15     4       RY RY, CNOT w1->w0, RY RY, CNOT w0->w1
d     u_so4    6       RY RY, CNOT w0->w1, RY RY, CNOT w0->w1, RY RY
e     u_13     6       RY RY, CRZ w1->w0, RY RY, CRZ w0->w1
f     u_14     6       RY RY, CRX w1->w0, RY RY, CRX w0->w1
g     u_5      10      RX RX RZ RZ, CRZ w1->w0, CRZ w0->w1, RX RX RZ RZ
h     u_6      10      RX RX RZ RZ, CRX w1->w0, CRX w0->w1, RX RX RZ RZ
====  =======  ======  ==============================================================

Pooling mappings put the measured control on wire 0 and the target on wire 1.
``pool_crz_crx`` applies CRZ(t0) when the control is 1 and CRX(t1) when it is 0.

``gm<v>`` is ``exp(i sum theta_a Lambda_a)`` over the generalised Gell-Mann
basis on ``v`` qubits (``4**v - 1`` parameters). ``cgm<n>`` is an ``n``-qubit
pooling mapping: every one of the ``n - 1`` controls applies the same
single-qubit Gell-Mann rotation to the last wire.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .gates import GateSpec
from .simulator import apply_unitary, embed


@dataclass(frozen=True)
class UnitaryMapping:
    name: str
    arity: int
    param_count: int
    gates: tuple[GateSpec, ...]
    role: str = "conv"
    description: str = ""

    @property
    def shiftable(self) -> bool:
        """True when every parameterised gate admits a shift rule."""
        return all(g.shiftable for g in self.gates if g.params)

    def matrix(self, params=(), shift: tuple[int, float] | None = None) -> np.ndarray:
        """``2**arity`` unitary; ``shift=(gate_index, delta)`` offsets one gate's angle."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.param_count,):
            raise ValueError(f"{self.name} takes {self.param_count} parameters, got {params.shape}")
        d = 2 ** self.arity
        out = np.eye(d, dtype=complex)
        for i, g in enumerate(self.gates):
            delta = shift[1] if shift is not None and shift[0] == i else 0.0
            out = apply_unitary(out, g.matrix(params, delta), g.wires, self.arity)
        # rows of ``out`` are images of basis vectors
        return out.T

    def derivatives(self, params) -> np.ndarray:
        """``d matrix / d params[p]`` stacked over ``p``, shape ``(param_count, d, d)``."""
        params = np.asarray(params, dtype=float)
        n = self.arity
        ops = [embed(g.matrix(params), g.wires, n) for g in self.gates]
        before = [np.eye(2 ** n, dtype=complex)]
        for u in ops[:-1]:
            before.append(u @ before[-1])
        after = np.eye(2 ** n, dtype=complex)
        out = np.zeros((self.param_count, 2 ** n, 2 ** n), dtype=complex)
        for i in reversed(range(len(ops))):
            for p, d in self.gates[i].derivatives(params):
                out[p] += after @ embed(d, self.gates[i].wires, n) @ before[i]
            after = after @ ops[i]
        return out


def _g(kind, wires, *params, const=None):
    return GateSpec(kind, tuple(wires), tuple(params), const)


def _mapping(name, arity, gates, role="conv", description=""):
    n = 1 + max((p for g in gates for p in g.params), default=-1)
    return UnitaryMapping(name, arity, n, tuple(gates), role, description)


def _rotation_sandwich(name, rot, ctrl):
    gates = [_g(rot[0], [0], 0), _g(rot[0], [1], 1), _g(rot[1], [0], 2), _g(rot[1], [1], 3),
             _g(ctrl, [1, 0], 4), _g(ctrl, [0, 1], 5),
             _g(rot[0], [0], 6), _g(rot[0], [1], 7), _g(rot[1], [0], 8), _g(rot[1], [1], 9)]
    return _mapping(name, 2, gates)


def _builtin() -> dict[str, UnitaryMapping]:
    m = [
        _mapping("u_ttn", 2, [_g("ry", [0], 0), _g("ry", [1], 1), _g("cnot", [0, 1])]),
        _mapping("u_9", 2, [_g("h", [0]), _g("h", [1]), _g("cz", [0, 1]),
                            _g("rx", [0], 0), _g("rx", [1], 1)]),
        _mapping("u_15", 2, [_g("ry", [0], 0), _g("ry", [1], 1), _g("cnot", [1, 0]),
                             _g("ry", [0], 2), _g("ry", [1], 3), _g("cnot", [0, 1])]),
        _mapping("u_so4", 2, [_g("ry", [0], 0), _g("ry", [1], 1), _g("cnot", [0, 1]),
                              _g("ry", [0], 2), _g("ry", [1], 3), _g("cnot", [0, 1]),
                              _g("ry", [0], 4), _g("ry", [1], 5)]),
        _mapping("u_13", 2, [_g("ry", [0], 0), _g("ry", [1], 1), _g("crz", [1, 0], 2),
                             _g("ry", [0], 3), _g("ry", [1], 4), _g("crz", [0, 1], 5)]),
        _mapping("u_14", 2, [_g("ry", [0], 0), _g("ry", [1], 1), _g("crx", [1, 0], 2),
                             _g("ry", [0], 3), _g("ry", [1], 4), _g("crx", [0, 1], 5)]),
        _rotation_sandwich("u_5", ("rx", "rz"), "crz"),
        _rotation_sandwich("u_6", ("rx", "rz"), "crx"),
        _mapping("pool_crz_crx", 2, [_g("crz", [0, 1], 0), _g("x", [0]), _g("crx", [0, 1], 1),
                                 _g("x", [0])], role="pool"),
        _mapping("crz", 2, [_g("crz", [0, 1], 0)], role="pool"),
        _mapping("crx", 2, [_g("crx", [0, 1], 0)], role="pool"),
        _mapping("cnot", 2, [_g("cnot", [0, 1])], role="pool"),
        _mapping("cz", 2, [_g("cz", [0, 1])], role="pool"),
        _mapping("rot1", 1, [_g("rz", [0], 0), _g("ry", [0], 1), _g("rz", [0], 2)], role="single"),
        _mapping("ry1", 1, [_g("ry", [0], 0)], role="single"),
    ]
    return {x.name: x for x in m}


CONV_ANSATZ_KEYS = {"a": "u_ttn", "b": "u_9", "c": "u_15", "d": "u_so4",
                    "e": "u_13", "f": "u_14", "g": "u_5", "h": "u_6"}
POOL_ANSATZES = ("pool_crz_crx", "crz", "crx", "cnot")

_GM = re.compile(r"^gm(\d+)$")
_CGM = re.compile(r"^cgm(\d+)$")


@dataclass
class Registry:
    """Lookup table of mappings, with ``gm<v>``/``cgm<n>`` built on demand."""

    mappings: dict[str, UnitaryMapping] = field(default_factory=_builtin)

    def __contains__(self, name: str) -> bool:
        try:
            self.get(name)
        except KeyError:
            return False
        return True

    def get(self, name: str) -> UnitaryMapping:
        name = CONV_ANSATZ_KEYS.get(name, name)
        if name in self.mappings:
            return self.mappings[name]
        if m := _GM.match(name):
            v = int(m.group(1))
            if v < 1:
                raise KeyError(name)
            mp = _mapping(name, v, [GateSpec("gm", tuple(range(v)), tuple(range(4 ** v - 1)))],
                          role="any")
        elif m := _CGM.match(name):
            n = int(m.group(1))
            if n < 2:
                raise KeyError(name)
            gates = [GateSpec("cgm", (c, n - 1), (0, 1, 2)) for c in range(n - 1)]
            mp = _mapping(name, n, gates, role="pool")
        else:
            raise KeyError(f"unknown unitary mapping {name!r}")
        self.mappings[name] = mp
        return mp

    def register(self, mapping: UnitaryMapping) -> None:
        self.mappings[mapping.name] = mapping

    def names(self, role: str | None = None) -> list[str]:
        return [k for k, v in self.mappings.items() if role is None or v.role == role]


def registry_default() -> Registry:
    return Registry()
