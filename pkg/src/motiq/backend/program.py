"""Compiling resolved digraphs into executable circuit programs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..expansion import PrimitiveGraph, resolve
from ..motif import Motif
from .registry import Registry, UnitaryMapping, registry_default
from .simulator import _as_batch, apply_unitary, basis_state

DEFAULT_MAPPINGS = {"qconv": "u_ttn", "qdense": "u_ttn", "qpool": "pool_crz_crx"}


@dataclass(frozen=True)
class Operation:
    """A mapping placed on concrete 0-based ``wires``, reading parameter ``group``."""

    mapping: UnitaryMapping
    wires: tuple[int, ...]
    group: int
    graph: int


@dataclass(frozen=True)
class ParamGroup:
    mapping: str
    offset: int
    size: int
    graph: int
    kind: str = "qconv"


@dataclass(frozen=True)
class CircuitProgram:
    num_qubits: int
    ops: tuple[Operation, ...]
    groups: tuple[ParamGroup, ...]
    readout: int

    @property
    def n_params(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def shiftable(self) -> bool:
        return all(op.mapping.shiftable for op in self.ops)

    def param_counts(self) -> dict[str, int]:
        """Trainable parameters split by the role of the graph that owns them."""
        out = {"conv": 0, "pool": 0}
        for g in self.groups:
            out["pool" if g.kind == "qpool" else "conv"] += g.size
        return out

    def group_slice(self, group: int) -> slice:
        g = self.groups[group]
        return slice(g.offset, g.offset + g.size)

    def matrices(self, params, shift: tuple[int, int, float] | None = None) -> list[np.ndarray]:
        """One unitary per op. ``shift=(op_index, gate_index, delta)`` perturbs a single site."""
        params = self._check(params)
        cache: dict[int, np.ndarray] = {}
        out = []
        for i, op in enumerate(self.ops):
            if shift is not None and shift[0] == i:
                out.append(op.mapping.matrix(params[self.group_slice(op.group)],
                                             shift=(shift[1], shift[2])))
                continue
            if op.group not in cache:
                cache[op.group] = op.mapping.matrix(params[self.group_slice(op.group)])
            out.append(cache[op.group])
        return out

    def _check(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.shape[0] != self.n_params:
            raise ValueError(f"program takes {self.n_params} parameters, got {params.shape[0]}")
        return params

    def unitary(self, params) -> np.ndarray:
        eye = np.eye(2 ** self.num_qubits, dtype=complex)
        return run(self, params, eye).T


def _default_readout(graphs: Sequence[PrimitiveGraph]) -> int:
    return graphs[-1].remaining[-1]


def compile_program(graphs: Sequence[PrimitiveGraph] | Motif, registry: Registry | None = None,
                    *, conv_mapping: str = "u_ttn", pool_mapping: str = "pool_crz_crx",
                    dense_mapping: str | None = None, share_weights: bool = True,
                    readout: int | None = None, num_qubits: int | None = None) -> CircuitProgram:
    """Place each graph's mapping on its edges.

    Primitives without an explicit mapping use the ``*_mapping`` defaults.
    Every operational graph owns one parameter group shared by all of its
    edges unless ``share_weights`` is False, in which case each edge gets its
    own copy. Self-loop edges (a convolution over one qubit) fall back to the
    single-qubit ``rot1`` mapping when the chosen mapping is wider.
    """
    if isinstance(graphs, Motif):
        graphs = resolve(graphs)
    registry = registry or registry_default()
    defaults = {"qconv": conv_mapping, "qpool": pool_mapping,
                "qdense": dense_mapping or conv_mapping}
    n = max(q for g in graphs for q in g.qubits)
    if num_qubits is not None:
        if num_qubits < n:
            raise ValueError(f"graphs use label {n} but num_qubits={num_qubits}")
        n = num_qubits

    ops: list[Operation] = []
    groups: list[ParamGroup] = []

    def new_group(name, size, gi):
        offset = sum(g.size for g in groups)
        groups.append(ParamGroup(name, offset, size, gi, graphs[gi].kind))
        return len(groups) - 1

    for gi, g in enumerate(graphs):
        if not g.is_operational:
            continue
        spec = g.mapping if g.mapping is not None else defaults[g.kind]
        if isinstance(spec, Motif):
            sub = compile_program(resolve(spec), registry, conv_mapping=conv_mapping,
                                  pool_mapping=pool_mapping, dense_mapping=dense_mapping,
                                  share_weights=share_weights)
            for e in g.edges:
                if len(set(e)) != sub.num_qubits:
                    raise ValueError(f"graph {gi + 1}: motif mapping acts on {sub.num_qubits} "
                                     f"qubits but edges have {len(e)}")
            ids = None
            for e in g.edges:
                if ids is None or not share_weights:
                    ids = [new_group(f"{pg.mapping}", pg.size, gi) for pg in sub.groups]
                for op in sub.ops:
                    ops.append(Operation(op.mapping, tuple(e[w] - 1 for w in op.wires),
                                         ids[op.group], gi))
            continue
        try:
            mapping = registry.get(spec)
        except KeyError as exc:
            raise ValueError(f"graph {gi + 1}: {exc.args[0]}") from None
        loops = [len(set(e)) == 1 for e in g.edges]
        if all(loops) and mapping.arity != 1:
            mapping = registry.get("rot1")
        for e in g.edges:
            width = 1 if len(set(e)) == 1 else len(e)
            if width != mapping.arity:
                raise ValueError(f"graph {gi + 1}: mapping {mapping.name!r} has arity "
                                 f"{mapping.arity} but edge {e} has {width} qubits")
        gid = None
        for e in g.edges:
            if gid is None or not share_weights:
                gid = new_group(mapping.name, mapping.param_count, gi)
            wires = tuple(q - 1 for q in dict.fromkeys(e))
            ops.append(Operation(mapping, wires, gid, gi))

    ro = readout if readout is not None else _default_readout(graphs)
    if not 1 <= ro <= n:
        raise ValueError(f"readout qubit {ro} outside 1..{n}")
    return CircuitProgram(n, tuple(ops), tuple(groups), ro)


def run(prog: CircuitProgram, params, state=None, *, matrices=None, start: int = 0):
    """Apply the program (from op ``start`` on) to ``state`` (default ``|0...0>``)."""
    if state is None:
        state = basis_state(prog.num_qubits)
    batch, single = _as_batch(state)
    if batch.shape[1] != 2 ** prog.num_qubits:
        raise ValueError(f"state has dimension {batch.shape[1]}, "
                         f"program needs {2 ** prog.num_qubits}")
    mats = matrices if matrices is not None else prog.matrices(params)
    n = prog.num_qubits
    for op, u in zip(prog.ops[start:], mats[start:]):
        batch = apply_unitary(batch, u, op.wires, n)
    return batch[0] if single else batch


# -- OpenQASM ------------------------------------------------------------------

_QASM_PRELUDE = """\
gate c_rx(t) a,b { u1(pi/2) b; cx a,b; u3(-t/2,0,0) b; cx a,b; u3(t/2,-pi/2,0) b; }
gate c_ry(t) a,b { ry(t/2) b; cx a,b; ry(-t/2) b; cx a,b; }
"""
_QASM_NAMES = {"cnot": "cx", "crx": "c_rx", "cry": "c_ry"}


def _gate_line(g, wires, values) -> str:
    name = _QASM_NAMES.get(g.kind, g.kind)
    args = ",".join(f"q[{wires[w]}]" for w in g.wires)
    if g.kind in ("gm", "cgm"):
        ps = ",".join(f"{values[i]:.12g}" for i in g.params)
        return f"{g.kind}{len(g.wires) if g.kind == 'gm' else ''}({ps}) {args};"
    if g.params or g.const is not None:
        angle = values[g.params[0]] if g.params else g.const
        return f"{name}({angle:.12g}) {args};"
    return f"{name} {args};"


def to_qasm(prog: CircuitProgram, params) -> str:
    """OpenQASM 2.0 text; Gell-Mann unitaries appear as opaque gates."""
    params = prog._check(params)
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', _QASM_PRELUDE.rstrip()]
    opaque = set()
    body = []
    for op in prog.ops:
        values = params[prog.group_slice(op.group)]
        body.append(f"// {op.mapping.name} on {','.join(str(w + 1) for w in op.wires)}")
        for g in op.mapping.gates:
            if g.kind == "gm":
                opaque.add(f"opaque gm{len(g.wires)}({','.join(f'p{i}' for i in g.params)}) "
                           f"{','.join(f'w{i}' for i in range(len(g.wires)))};")
            elif g.kind == "cgm":
                opaque.add("opaque cgm(p0,p1,p2) c,t;")
            body.append(_gate_line(g, op.wires, values))
    lines.extend(sorted(opaque))
    lines.append(f"qreg q[{prog.num_qubits}];")
    lines.append(f"creg c[1];")
    lines.extend(body)
    lines.append(f"measure q[{prog.readout - 1}] -> c[0];")
    return "\n".join(lines) + "\n"


def state_to_csv(state) -> str:
    state = np.asarray(state, dtype=complex).reshape(-1)
    rows = ["index,re,im"] + [f"{i},{a.real:.17g},{a.imag:.17g}" for i, a in enumerate(state)]
    return "\n".join(rows) + "\n"
