"""Ready-made architecture families built from the motif algebra."""
from __future__ import annotations

import math

from .motif import Motif, Qconv, Qdense, Qfree, Qpool


def reverse_binary_tree(n_qubits: int | tuple[int, ...], conv_stride: int = 1,
                        pool_stride: int = 0, pool_filter: str = "right", *,
                        conv_mapping=None, pool_mapping=None) -> Motif:
    """Alternate convolution and halving pooling until one qubit is left.

    ``n_qubits`` may be an explicit label tuple to lay the tree over a
    subset of a larger register.
    """
    k = n_qubits if isinstance(n_qubits, int) else len(n_qubits)
    if k < 2 or k & (k - 1):
        raise ValueError(f"reverse binary tree needs a power-of-two qubit count, got {k}")
    unit = Qconv(conv_stride, mapping=conv_mapping) + Qpool(pool_stride, pool_filter,
                                                          mapping=pool_mapping)
    return Qfree(n_qubits) + unit * int(math.log2(k))


def original_qcnn(n_qubits: int = 15, block: int = 3, depth: int = 1) -> Motif:
    """Gell-Mann parameterised QCNN of the classic block construction.

    ``block`` (odd) is the width of each convolution unitary. Each depth
    repetition applies: an inter-block dense unitary of width ``block + 1``,
    ``block`` staggered convolutions, pooling that keeps the middle qubit of
    every block, and one unitary over everything that survives.
    """
    n, big = block, n_qubits
    if n < 3 or n % 2 == 0:
        raise ValueError("block width must be an odd integer >= 3")
    if big % n:
        raise ValueError(f"{big} qubits do not split into blocks of {n}")
    half = (n - 1) // 2
    bridge = Qfree(n + 1) + Qdense(mapping="gm2")
    layer = Qconv(1, n, n - 1, qpu=n + 1, boundary="open", mapping=bridge)
    for i in range(n):
        layer = layer + Qconv(1, n, i, qpu=n, mapping=f"gm{n}")
    mask = ("1" * half + "0" + "1" * half) * (big // n)
    layer = layer + Qpool(1, mask, step=n, qpu=n, mapping=f"cgm{n}")
    rest = big // n
    layer = layer + Qconv(1, qpu=rest, boundary="open", mapping=f"gm{rest}")
    return (Qfree(big) + layer) * depth
