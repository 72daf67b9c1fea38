"""Lowering a motif into the concrete sequence of primitive digraphs.

Qubit labels are 1-based everywhere outside this module's arithmetic. Stride,
step and offset act on ordinal positions inside the ordered list of
available qubits, so a layer with labels ``(1, 2, 3, 4)`` left over after
pooling eight qubits behaves exactly like a fresh four-qubit register.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

from .motif import FILTER_FAMILIES, Motif, Primitive, flatten, motif_to_dict

Edge = tuple[int, ...]


@dataclass(frozen=True)
class PrimitiveGraph:
    """One resolved primitive ``G_m = (Q_m, E_m)``.

    ``qubits`` is the ordered available set, ``edges`` the ordered unitary
    placements. For pooling graphs the controls come first in each tuple and
    the single target last; ``measured`` lists the controls.
    """

    kind: str
    qubits: tuple[int, ...]
    edges: tuple[Edge, ...]
    primitive: Primitive
    measured: tuple[int, ...] = ()
    filter: str | None = None

    @property
    def mapping(self):
        return self.primitive.mapping

    @property
    def remaining(self) -> tuple[int, ...]:
        """Qubits available to the next primitive."""
        if not self.measured:
            return self.qubits
        gone = set(self.measured)
        return tuple(q for q in self.qubits if q not in gone)

    @property
    def is_operational(self) -> bool:
        return self.kind != "qfree"

    def to_dict(self) -> dict:
        mapping = self.mapping
        if isinstance(mapping, Motif):
            mapping = motif_to_dict(mapping)
        return {
            "kind": self.kind,
            "qubits": list(self.qubits),
            "edges": [list(e) for e in self.edges],
            "measured": list(self.measured),
            "filter": self.filter,
            "mapping": mapping,
            "remaining": list(self.remaining),
        }


# -- edge constructions ----------------------------------------------------

def _hyperedges(qubits: Sequence[int], stride: int, step: int, offset: int,
                qpu: int, boundary: str) -> list[Edge]:
    n = len(qubits)
    if qpu > n:
        raise ValueError(f"{qpu}-qubit unitaries do not fit on {n} available qubits")
    s = stride % n
    if s == 0:
        raise ValueError(f"stride {stride} is a multiple of the {n} available qubits")
    edges = []
    n_starts = -(-n // step)
    for k in range(n_starts):
        start = offset + k * step
        pos = [start + t * s for t in range(qpu)]
        if boundary == "open":
            if pos[-1] >= n:
                break
        else:
            pos = [p % n for p in pos]
        if len(set(pos)) != qpu:
            raise ValueError(f"stride {stride} folds a {qpu}-qubit unitary onto itself")
        edges.append(tuple(qubits[p] for p in pos))
    return edges


def conv_edges(qubits: Sequence[int], stride: int = 1, step: int = 1, offset: int = 0,
               qpu: int = 2, boundary: str = "periodic") -> list[Edge]:
    """Edges of a convolution layer.

    A single available qubit yields the self-loop ``(q, q)`` (single-qubit
    unitaries); two qubits with two-qubit unitaries yield one edge.
    """
    qubits = tuple(qubits)
    n = len(qubits)
    if n == 0:
        raise ValueError("convolution over an empty qubit set")
    if n == 1:
        return [(qubits[0], qubits[0])]
    if n == 2 and qpu == 2:
        return [qubits]
    return _hyperedges(qubits, stride, step, offset, qpu, boundary)


def dense_edges(qubits: Sequence[int], qpu: int = 2) -> list[Edge]:
    """All ordered ``qpu``-tuples of distinct qubits, in positional order."""
    qubits = tuple(qubits)
    if len(qubits) < max(qpu, 2):
        raise ValueError(f"dense layer needs at least {max(qpu, 2)} qubits, got {len(qubits)}")
    return list(permutations(qubits, qpu))


def expand_filter(spec: str, k: int) -> str:
    """Binary measurement mask of length ``k`` for a literal or named filter."""
    if k < 1:
        raise ValueError("filter length must be positive")
    if spec not in FILTER_FAMILIES:
        if set(spec) - {"0", "1"}:
            raise ValueError(f"invalid filter {spec!r}")
        if len(spec) != k:
            raise ValueError(f"filter {spec!r} has length {len(spec)}, expected {k}")
        return spec
    if k % 2:
        raise ValueError(f"filter family {spec!r} needs an even qubit count, got {k}")
    h = k // 2
    if spec == "right":
        return "0" * h + "1" * h
    if spec == "left":
        return "1" * h + "0" * h
    if spec == "odd":
        return "01" * h
    if spec == "even":
        return "10" * h
    if k == 2:
        return "01" if spec == "inside" else "10"
    if k % 4:
        raise ValueError(f"filter family {spec!r} needs a multiple of four qubits, got {k}")
    q = k // 4
    if spec == "inside":
        return "0" * q + "1" * h + "0" * q
    return "1" * q + "0" * h + "1" * q


def apply_filter(mask: str, qubits: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split ``qubits`` into (kept, measured) by the 0/1 positions of ``mask``."""
    if len(mask) != len(qubits):
        raise ValueError(f"filter length {len(mask)} does not match {len(qubits)} qubits")
    kept = tuple(q for w, q in zip(mask, qubits) if w == "0")
    measured = tuple(q for w, q in zip(mask, qubits) if w == "1")
    return kept, measured


def pool_edges(qubits: Sequence[int], mask: str, stride: int = 0) -> list[Edge]:
    """Pair measured qubits, taken from the far end, with kept qubits from the near end.

    The a-th measured qubit counted from the last position targets kept
    position ``(a + stride) % |kept|``; at stride 0 with ``00001111`` this gives
    (8,1), (7,2), (6,3), (5,4), so each halving pools into qubit 1.
    """
    kept, measured = apply_filter(mask, qubits)
    if not kept:
        raise ValueError("pooling would measure every available qubit")
    if not measured:
        raise ValueError("pooling filter measures nothing")
    return [(c, kept[(a + stride) % len(kept)]) for a, c in enumerate(reversed(measured))]


def _hyper_pool_edges(qubits, mask, p: Primitive) -> list[Edge]:
    kept, measured = apply_filter(mask, qubits)
    if not kept or not measured:
        raise ValueError("pooling filter must keep and measure at least one qubit each")
    keep = set(kept)
    edges = []
    for e in _hyperedges(qubits, p.stride, p.step, p.offset, p.qpu, p.boundary):
        targets = [q for q in e if q in keep]
        if len(targets) == 1:
            edges.append(tuple(q for q in e if q not in keep) + (targets[0],))
    controls = [q for e in edges for q in e[:-1]]
    if sorted(controls) != sorted(measured):
        raise ValueError(
            f"{p.qpu}-qubit pooling edges do not cover each measured qubit exactly once"
        )
    return edges


def _reorder(edges: list[Edge], order) -> list[Edge]:
    if order is None:
        return edges
    if sorted(order) != list(range(1, len(edges) + 1)):
        raise ValueError(f"edge_order {order} is not a permutation of 1..{len(edges)}")
    return [edges[i - 1] for i in order]


# -- resolution --------------------------------------------------------------

def resolve_primitive(p: Primitive, available: tuple[int, ...] | None) -> PrimitiveGraph:
    if p.kind == "qfree":
        qubits = tuple(range(1, p.free + 1)) if isinstance(p.free, int) else tuple(p.free)
        return PrimitiveGraph("qfree", qubits, (), p)
    if available is None:
        raise ValueError("the first primitive must be Qfree")
    if not available:
        raise ValueError(f"{p.kind} has no available qubits")
    if p.kind == "qconv":
        edges = conv_edges(available, p.stride, p.step, p.offset, p.qpu, p.boundary)
        return PrimitiveGraph("qconv", available, tuple(_reorder(edges, p.edge_order)), p)
    if p.kind == "qdense":
        edges = dense_edges(available, p.qpu)
        return PrimitiveGraph("qdense", available, tuple(_reorder(edges, p.edge_order)), p)
    mask = expand_filter(p.filter, len(available))
    if p.qpu == 2:
        edges = pool_edges(available, mask, p.stride)
    else:
        edges = _hyper_pool_edges(available, mask, p)
    _, measured = apply_filter(mask, available)
    return PrimitiveGraph("qpool", available, tuple(_reorder(edges, p.edge_order)), p,
                          measured=measured, filter=mask)


def resolve(seq: Motif | Sequence[Primitive]) -> list[PrimitiveGraph]:
    """Expand a motif (or flattened primitive list) into its digraph sequence."""
    prims = flatten(seq) if isinstance(seq, Motif) else list(seq)
    if not prims:
        raise ValueError("empty primitive sequence")
    if prims[0].kind != "qfree":
        raise ValueError(f"primitive 1 ({prims[0].kind}): a primitive sequence must start "
                         "with Qfree")
    graphs: list[PrimitiveGraph] = []
    available = None
    for m, p in enumerate(prims, start=1):
        try:
            g = resolve_primitive(p, available)
        except ValueError as exc:
            raise ValueError(f"primitive {m} ({p.kind}): {exc}") from None
        graphs.append(g)
        available = g.remaining
    return graphs


def resolves(seq) -> bool:
    try:
        resolve(seq)
    except ValueError:
        return False
    return True


def count_unitaries(graphs: Sequence[PrimitiveGraph]) -> dict[str, int]:
    conv = sum(len(g.edges) for g in graphs if g.kind in ("qconv", "qdense"))
    pool = sum(len(g.edges) for g in graphs if g.kind == "qpool")
    return {"conv": conv, "pool": pool, "total": conv + pool}


# -- export ------------------------------------------------------------------

def graphs_to_json(graphs: Sequence[PrimitiveGraph], **kw) -> str:
    return json.dumps([g.to_dict() for g in graphs], **kw)


def to_dot(graphs: Sequence[PrimitiveGraph], name: str = "motif") -> str:
    """Graphviz text with one cluster per primitive; controls point at targets."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
    layer = 0
    for m, g in enumerate(graphs, start=1):
        if g.is_operational:
            layer += 1
            title = f"G{layer} {g.kind}"
        else:
            title = f"Qfree({len(g.qubits)})"
        letter = "V" if g.kind == "qpool" else "U"
        measured = set(g.measured)
        lines.append(f"  subgraph cluster_{m} {{")
        lines.append(f'    label="{title}";')
        for q in g.qubits:
            style = ' style=filled fillcolor="#f4a6a6"' if q in measured else ""
            lines.append(f'    n{m}_{q} [label="{q}"{style}];')
        for k, e in enumerate(g.edges, start=1):
            label = f"{letter}_{layer}"
            if len(e) == 2:
                lines.append(f'    n{m}_{e[0]} -> n{m}_{e[1]} [label="{label}"];')
            else:
                hub = f"h{m}_{k}"
                lines.append(f'    {hub} [shape=point label=""];')
                lines.append(f'    n{m}_{e[0]} -> {hub} [label="{label}"];')
                for q in e[1:]:
                    lines.append(f"    {hub} -> n{m}_{q};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
