"""Motifs: immutable hierarchies of primitive circuit operations.

A motif is either a :class:`Primitive` (level 1) or a :class:`Composite`
holding an ordered tuple of lower-level motifs. ``a + b`` builds the pair
``(a, b)`` and ``m * k`` builds ``(m, m, ..., m)``; the flattened primitive
order is what downstream expansion consumes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterator, Union

PRIMITIVE_KINDS = ("qfree", "qconv", "qpool", "qdense")
KIND_TAGS = {"qfree": "f", "qconv": "c", "qpool": "p", "qdense": "c"}
FILTER_FAMILIES = ("right", "left", "odd", "even", "inside", "outside")
BOUNDARIES = ("periodic", "open")


class Motif:
    """Common behaviour for primitives and composites."""

    level: int

    def __add__(self, other: "Motif") -> "Composite":
        return append(self, other)

    def __mul__(self, k: int) -> "Composite":
        return repeat(self, k)

    def flatten(self) -> list["Primitive"]:
        return flatten(self)

    def to_dict(self) -> dict:
        return motif_to_dict(self)


@dataclass(frozen=True)
class Primitive(Motif):
    """A level-1 motif: one primitive operation plus its hyperparameters.

    ``mapping`` is either a registry name, a :class:`Motif` (treated as a
    single multi-qubit unitary), or ``None`` to defer to compile-time defaults.
    """

    kind: str
    stride: int = 1
    step: int = 1
    offset: int = 0
    qpu: int = 2
    boundary: str = "periodic"
    edge_order: tuple[int, ...] | None = None
    filter: str | None = None
    free: int | tuple[int, ...] | None = None
    mapping: Union[str, "Motif", None] = None

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if isinstance(self.edge_order, list):
            object.__setattr__(self, "edge_order", tuple(self.edge_order))
        if isinstance(self.free, list):
            object.__setattr__(self, "free", tuple(self.free))

        if self.kind == "qfree":
            if self.free is None:
                raise ValueError("Qfree needs an integer count or a label set")
            if isinstance(self.free, tuple):
                if not self.free or any(not _is_int(q) or q < 1 for q in self.free):
                    raise ValueError("Qfree labels must be positive integers")
                if len(set(self.free)) != len(self.free):
                    raise ValueError("Qfree labels must be distinct")
            elif not _is_int(self.free) or self.free < 1:
                raise ValueError("Qfree count must be a positive integer")
            defaults = Primitive.__dataclass_fields__
            for name in ("stride", "step", "offset", "qpu", "boundary",
                         "edge_order", "filter", "mapping"):
                if getattr(self, name) != defaults[name].default:
                    raise ValueError(f"Qfree does not take {name!r}")
            return

        if self.free is not None:
            raise ValueError("only Qfree takes a free specification")
        if not _is_int(self.stride) or self.stride < 0:
            raise ValueError("stride must be a non-negative integer")
        if not _is_int(self.step) or self.step < 1:
            raise ValueError("step must be a positive integer")
        if not _is_int(self.offset) or self.offset < 0:
            raise ValueError("offset must be a non-negative integer")
        if not _is_int(self.qpu) or self.qpu < 1:
            raise ValueError("qpu must be a positive integer")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.edge_order is not None:
            if any(not _is_int(i) or i < 1 for i in self.edge_order):
                raise ValueError("edge_order holds 1-based edge indices")
        if self.kind == "qpool":
            if self.filter is None:
                raise ValueError("Qpool needs a filter")
            if self.filter not in FILTER_FAMILIES and (
                not self.filter or set(self.filter) - {"0", "1"}
            ):
                raise ValueError(
                    f"filter {self.filter!r} is neither a family nor a binary string"
                )
        elif self.filter is not None:
            raise ValueError("only Qpool takes a filter")
        if self.mapping is not None and not isinstance(self.mapping, (str, Motif)):
            raise TypeError("mapping must be a registry name or a Motif")

    @property
    def level(self) -> int:
        return 1

    @property
    def tag(self) -> str:
        return KIND_TAGS[self.kind]


@dataclass(frozen=True)
class Composite(Motif):
    children: tuple[Motif, ...]
    level: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ValueError("a composite motif needs at least one child")
        for c in children:
            if not isinstance(c, Motif):
                raise TypeError(f"composite children must be motifs, got {type(c).__name__}")
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "level", 1 + max(c.level for c in children))


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


# -- constructors mirroring the usual notation -----------------------------

def Qfree(free: int | tuple[int, ...] | list[int]) -> Primitive:
    return Primitive("qfree", free=tuple(free) if isinstance(free, (list, tuple)) else free)


def Qconv(stride: int = 1, step: int = 1, offset: int = 0, *, qpu: int = 2,
          boundary: str = "periodic", edge_order=None, mapping=None) -> Primitive:
    return Primitive("qconv", stride=stride, step=step, offset=offset, qpu=qpu,
                     boundary=boundary, edge_order=edge_order, mapping=mapping)


def Qpool(stride: int = 0, filter: str = "right", *, step: int = 1, offset: int = 0,
          qpu: int = 2, boundary: str = "periodic", edge_order=None, mapping=None) -> Primitive:
    return Primitive("qpool", stride=stride, step=step, offset=offset, qpu=qpu,
                     boundary=boundary, edge_order=edge_order, filter=filter, mapping=mapping)


def Qdense(*, qpu: int = 2, edge_order=None, mapping=None) -> Primitive:
    return Primitive("qdense", qpu=qpu, edge_order=edge_order, mapping=mapping)


# -- algebra ---------------------------------------------------------------

def append(a: Motif, b: Motif) -> Composite:
    return Composite((a, b))


def repeat(m: Motif, k: int) -> Composite:
    if not _is_int(k) or k < 1:
        raise ValueError(f"repeat count must be a positive integer, got {k!r}")
    return Composite((m,) * k)


def iter_primitives(m: Motif) -> Iterator[Primitive]:
    stack = [m]
    while stack:
        node = stack.pop()
        if isinstance(node, Primitive):
            yield node
        else:
            stack.extend(reversed(node.children))


def flatten(m: Motif) -> list[Primitive]:
    """Depth-first, left-to-right list of the primitives in ``m``."""
    return list(iter_primitives(m))


def replace_primitive(m: Motif, index: int, new: Motif) -> Motif:
    """Return ``m`` with its ``index``-th flattened primitive swapped for ``new``."""
    counter = [0]

    def walk(node):
        if isinstance(node, Primitive):
            i = counter[0]
            counter[0] += 1
            return new if i == index else node
        return Composite(tuple(walk(c) for c in node.children))

    n = sum(1 for _ in iter_primitives(m))
    if not 0 <= index < n:
        raise IndexError(f"primitive index {index} out of range for {n} primitives")
    return walk(m)


def drop_first_primitive(m: Motif) -> Motif | None:
    """Remove the first flattened primitive; ``None`` if nothing is left."""
    if isinstance(m, Primitive):
        return None
    first, *rest = m.children
    head = drop_first_primitive(first)
    children = ([head] if head is not None else []) + rest
    return Composite(tuple(children)) if children else None


# -- JSON ------------------------------------------------------------------

_PRIM_DEFAULTS = {f.name: f.default for f in fields(Primitive) if f.name != "kind"}


def motif_to_dict(m: Motif) -> dict:
    if isinstance(m, Composite):
        return {"seq": [motif_to_dict(c) for c in m.children]}
    out: dict[str, Any] = {"kind": m.kind}
    if m.kind == "qfree":
        out["free"] = list(m.free) if isinstance(m.free, tuple) else m.free
        return out
    out.update(stride=m.stride, step=m.step, offset=m.offset, qpu=m.qpu, boundary=m.boundary)
    if m.edge_order is not None:
        out["edge_order"] = list(m.edge_order)
    if m.filter is not None:
        out["filter"] = m.filter
    if isinstance(m.mapping, Motif):
        out["mapping"] = motif_to_dict(m.mapping)
    elif m.mapping is not None:
        out["mapping"] = m.mapping
    return out


def motif_from_dict(d: dict) -> Motif:
    if "seq" in d:
        return Composite(tuple(motif_from_dict(c) for c in d["seq"]))
    d = dict(d)
    kind = d.pop("kind")
    unknown = set(d) - set(_PRIM_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown primitive fields: {sorted(unknown)}")
    if isinstance(d.get("mapping"), dict):
        d["mapping"] = motif_from_dict(d["mapping"])
    return Primitive(kind, **d)


def dumps(m: Motif, **kw) -> str:
    return json.dumps(motif_to_dict(m), **kw)


def loads(text: str) -> Motif:
    return motif_from_dict(json.loads(text))


def with_mapping(p: Primitive, mapping) -> Primitive:
    return replace(p, mapping=mapping)
