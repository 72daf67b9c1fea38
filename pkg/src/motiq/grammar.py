"""Inline motif expressions such as ``Qfree(8) + (Qconv(1) + Qpool(0, "right")) * 3``.

Grammar (a strict subset of Python expression syntax, parsed with :mod:`ast`)::

    expr  := expr "+" expr | expr "*" INT | INT "*" expr | "(" expr ")" | call
    call  := NAME "(" args ")"
    NAME  := Qfree | Qconv | Qpool | Qdense | Seq

Primitive calls take positional ``stride, step, offset`` (``Qpool``:
``stride, filter``) plus keywords ``step``, ``offset``, ``qpu``,
``boundary``, ``edge_order`` and ``mapping`` (a registry name). ``Seq(a, b,
c)`` builds a composite with those children directly. Mappings that are
themselves motifs are only available through JSON.
"""
from __future__ import annotations

import ast

from .motif import Composite, Motif, Primitive, Qconv, Qdense, Qfree, Qpool


class MotifSyntaxError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        where = f" at column {offset + 1}" if offset is not None else ""
        super().__init__(f"{msg}{where}")


_CALLS = {"Qfree": Qfree, "Qconv": Qconv, "Qpool": Qpool, "Qdense": Qdense}


def _literal(node):
    try:
        return ast.literal_eval(node)
    except ValueError:
        raise MotifSyntaxError("arguments must be literals", node.col_offset) from None


def _build(node) -> Motif:
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Add):
            return _build(node.left) + _build(node.right)
        if isinstance(node.op, ast.Mult):
            for m, k in ((node.left, node.right), (node.right, node.left)):
                if isinstance(k, ast.Constant) and isinstance(k.value, int) \
                        and not isinstance(k.value, bool):
                    try:
                        return _build(m) * k.value
                    except ValueError as exc:
                        raise MotifSyntaxError(str(exc), k.col_offset) from None
            raise MotifSyntaxError("'*' needs a motif and an integer", node.col_offset)
        raise MotifSyntaxError("only '+' and '*' combine motifs", node.col_offset)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        if name == "Seq":
            if node.keywords or not node.args:
                raise MotifSyntaxError("Seq takes one or more motifs", node.col_offset)
            return Composite(tuple(_build(a) for a in node.args))
        if name not in _CALLS:
            raise MotifSyntaxError(f"unknown primitive {name!r}", node.col_offset)
        args = [_literal(a) for a in node.args]
        kwargs = {kw.arg: _literal(kw.value) for kw in node.keywords}
        if None in kwargs:
            raise MotifSyntaxError("'**' is not allowed", node.col_offset)
        try:
            return _CALLS[name](*args, **kwargs)
        except (TypeError, ValueError) as exc:
            raise MotifSyntaxError(f"{name}: {exc}", node.col_offset) from None
    raise MotifSyntaxError(f"unexpected {type(node).__name__}",
                           getattr(node, "col_offset", None))


def parse_motif_expr(text: str) -> Motif:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise MotifSyntaxError(f"syntax error: {exc.msg}",
                               (exc.offset or 1) - 1) from None
    return _build(tree.body)


# -- printing -----------------------------------------------------------------

def _format_primitive(p: Primitive) -> str:
    if p.kind == "qfree":
        return f"Qfree({list(p.free) if isinstance(p.free, tuple) else p.free})"
    if isinstance(p.mapping, Motif):
        raise ValueError("motif-valued mappings are not expressible inline; use JSON")
    kw = []
    if p.kind == "qconv":
        args = [repr(p.stride), repr(p.step), repr(p.offset)]
    elif p.kind == "qpool":
        args = [repr(p.stride), repr(p.filter)]
        if p.step != 1:
            kw.append(f"step={p.step}")
        if p.offset != 0:
            kw.append(f"offset={p.offset}")
    else:
        args = []
    if p.qpu != 2:
        kw.append(f"qpu={p.qpu}")
    if p.boundary != "periodic":
        kw.append(f"boundary={p.boundary!r}")
    if p.edge_order is not None:
        kw.append(f"edge_order={list(p.edge_order)}")
    if p.mapping is not None:
        kw.append(f"mapping={p.mapping!r}")
    name = {"qconv": "Qconv", "qpool": "Qpool", "qdense": "Qdense"}[p.kind]
    return f"{name}({', '.join(args + kw)})"


def format_motif(m: Motif) -> str:
    """Text that :func:`parse_motif_expr` turns back into an equal motif."""
    if isinstance(m, Primitive):
        return _format_primitive(m)
    ch = m.children
    if len(ch) == 2:
        right = format_motif(ch[1])
        if isinstance(ch[1], Composite) and len(ch[1].children) == 2:
            right = f"({right})"
        return f"{format_motif(ch[0])} + {right}"
    if all(c == ch[0] for c in ch):
        inner = format_motif(ch[0])
        if isinstance(ch[0], Composite) and len(ch[0].children) == 2:
            inner = f"({inner})"
        return f"({inner} * {len(ch)})"
    return f"Seq({', '.join(format_motif(c) for c in ch)})"
