import itertools
from collections import Counter

import pydot
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motiq.architectures import original_qcnn, reverse_binary_tree
from motiq.expansion import (apply_filter, conv_edges, count_unitaries, dense_edges,
                             expand_filter, graphs_to_json, pool_edges, resolve, resolves,
                             to_dot)
from motiq.motif import FILTER_FAMILIES, Qconv, Qdense, Qfree, Qpool
from strategies import binary_masks

FIG6 = [
    ("qfree", [], []),
    ("qconv", [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 1)], []),
    ("qpool", [(8, 1), (7, 2), (6, 3), (5, 4)], [5, 6, 7, 8]),
    ("qconv", [(1, 2), (2, 3), (3, 4), (4, 1)], []),
    ("qpool", [(4, 1), (3, 2)], [3, 4]),
    ("qconv", [(1, 2)], []),
    ("qpool", [(2, 1)], [2]),
]


def test_fig6_graph_sequence():
    graphs = resolve(reverse_binary_tree(8, 1, 0, "right"))
    assert len(graphs) == 7
    for g, (kind, edges, measured) in zip(graphs, FIG6):
        assert g.kind == kind
        assert set(g.edges) == set(edges)
        assert set(g.measured) == set(measured)
    assert graphs[-1].remaining == (1,)


def test_qfree_alone():
    (g,) = resolve(Qfree(4))
    assert g.qubits == (1, 2, 3, 4) and g.edges == ()


def test_qfree_label_set_is_ordered_layout():
    g = resolve(Qfree([4, 7, 2]) + Qconv(1))
    assert g[1].edges == ((4, 7), (7, 2), (2, 4))


def test_conv_stride_one_ring():
    assert conv_edges(range(1, 9), 1) == [(i, i % 8 + 1) for i in range(1, 9)]


def test_conv_degenerate_sizes():
    assert conv_edges([5], 3) == [(5, 5)]
    assert conv_edges([2, 7], 5) == [(2, 7)]


def test_conv_zero_stride_rejected():
    with pytest.raises(ValueError):
        conv_edges(range(1, 5), 4)
    with pytest.raises(ValueError):
        conv_edges(range(1, 9), 0)


def test_hyperedges_step_and_offset():
    q = range(1, 16)
    assert conv_edges(q, 1, 3, 0, qpu=3) == [(1, 2, 3), (4, 5, 6), (7, 8, 9), (10, 11, 12),
                                              (13, 14, 15)]
    assert conv_edges(q, 1, 3, 2, qpu=3) == [(3, 4, 5), (6, 7, 8), (9, 10, 11), (12, 13, 14),
                                              (15, 1, 2)]
    assert conv_edges(q, 1, 3, 2, qpu=3, boundary="open") == [(3, 4, 5), (6, 7, 8), (9, 10, 11),
                                                               (12, 13, 14)]
    assert conv_edges(q, 3, 1, 0, qpu=3)[:2] == [(1, 4, 7), (2, 5, 8)]


def test_hyperedge_too_wide():
    with pytest.raises(ValueError):
        conv_edges(range(1, 3), 1, qpu=3)


def test_dense_edges():
    assert dense_edges([1, 2]) == [(1, 2), (2, 1)]
    assert len(dense_edges(range(1, 5))) == 12
    with pytest.raises(ValueError):
        dense_edges([3])


def test_dense_in_original_qcnn_bridge():
    g = resolve(Qfree(4) + Qdense())
    assert len(g[1].edges) == 12 and set(g[1].qubits) == {1, 2, 3, 4}


@pytest.mark.parametrize("fam,k,expected", [
    ("right", 8, "00001111"), ("left", 8, "11110000"), ("odd", 8, "01010101"),
    ("even", 8, "10101010"), ("inside", 8, "00111100"), ("outside", 8, "11000011"),
    ("inside", 2, "01"), ("outside", 2, "10"), ("inside", 4, "0110"), ("outside", 4, "1001"),
])
def test_filter_families(fam, k, expected):
    assert expand_filter(fam, k) == expected


def test_filter_errors():
    with pytest.raises(ValueError):
        expand_filter("right", 7)
    with pytest.raises(ValueError):
        expand_filter("inside", 6)
    with pytest.raises(ValueError):
        expand_filter("0101", 5)
    with pytest.raises(ValueError):
        expand_filter("0121", 4)


def test_apply_filter_examples():
    assert apply_filter("010", [4, 7, 2]) == ((4, 2), (7,))
    assert apply_filter("0000", [1, 2, 3, 4]) == ((1, 2, 3, 4), ())
    assert apply_filter("00001111", range(1, 9))[0] == (1, 2, 3, 4)
    with pytest.raises(ValueError):
        apply_filter("01", [1, 2, 3])


def test_pool_edges_examples():
    assert pool_edges(range(1, 9), "00001111", 0) == [(8, 1), (7, 2), (6, 3), (5, 4)]
    assert pool_edges(range(1, 9), "00001111", 1) == [(8, 2), (7, 3), (6, 4), (5, 1)]
    for s in range(4):
        assert pool_edges([1, 2], "01", s) == [(2, 1)]
    with pytest.raises(ValueError):
        pool_edges([1, 2], "11", 0)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_reverse_binary_tree_counts(n):
    graphs = resolve(reverse_binary_tree(n))
    ops = [g for g in graphs if g.is_operational]
    assert len(ops) == 2 * (n.bit_length() - 1)
    counts = count_unitaries(graphs)
    # the footnote's geometric series: N(1 + ... + 2/N) conv plus N(1/2 + ... + 2/N) pool
    assert counts["conv"] == 2 * n - 3
    assert counts["total"] == 3 * n - 4


def test_pool_reduces_to_zero_count():
    g = resolve(Qfree(8) + Qpool(0, "odd"))
    assert len(g[1].remaining) == expand_filter("odd", 8).count("0")


def test_resolve_errors_carry_index():
    with pytest.raises(ValueError, match="primitive 1"):
        resolve(Qconv(1) + Qconv(1))
    with pytest.raises(ValueError, match="primitive 3"):
        resolve(Qfree(4) + Qconv(1) + Qconv(4))
    assert not resolves(Qfree(3) + Qpool(0, "right"))


def test_single_qubit_convolution_after_full_pooling():
    g = resolve(reverse_binary_tree(4) + Qconv(1))
    assert g[-1].edges == ((1, 1),)


def test_edge_order_permutes_edges():
    base = resolve(Qfree(4) + Qconv(1))[1].edges
    reordered = resolve(Qfree(4) + Qconv(1, edge_order=[3, 1, 4, 2]))[1].edges
    assert set(base) == set(reordered)
    assert reordered == (base[2], base[0], base[3], base[1])
    with pytest.raises(ValueError):
        resolve(Qfree(4) + Qconv(1, edge_order=[1, 2]))


def test_original_qcnn_layers():
    graphs = resolve(original_qcnn(15, 3))
    kinds = [g.kind for g in graphs]
    assert kinds == ["qfree", "qconv", "qconv", "qconv", "qconv", "qpool", "qconv"]
    assert graphs[2].edges[0] == (1, 2, 3)
    assert graphs[4].edges[0] == (3, 4, 5)
    assert graphs[5].edges[0] == (1, 3, 2)
    assert graphs[-1].remaining == (2, 5, 8, 11, 14)
    assert graphs[-1].edges == ((2, 5, 8, 11, 14),)


def test_resolve_deterministic():
    m = reverse_binary_tree(16, 3, 2, "outside")
    assert resolve(m) == resolve(m)


def test_dot_parses_and_marks_layers():
    graphs = resolve(reverse_binary_tree(8))
    text = to_dot(graphs)
    (dot,) = pydot.graph_from_dot_data(text)
    subs = dot.get_subgraphs()
    assert len(subs) == 7
    assert len(subs[-1].get_nodes()) - 1 == 1  # one qubit node plus the label attribute node
    assert 'label="V_6"' in text and 'label="U_1"' in text
    (single,) = pydot.graph_from_dot_data(to_dot(resolve(Qfree(3))))
    assert len(single.get_subgraphs()) == 1 and not single.get_subgraphs()[0].get_edges()


def test_graphs_json():
    import json
    data = json.loads(graphs_to_json(resolve(reverse_binary_tree(4))))
    assert data[2]["measured"] == [3, 4] and data[2]["remaining"] == [1, 2]


# -- properties ---------------------------------------------------------------------------

@settings(max_examples=10_000, deadline=None)
@given(binary_masks, st.integers(0, 12), st.data())
def test_pool_degree_constraints(mask, stride, data):
    labels = data.draw(st.permutations(list(range(1, len(mask) + 1))))
    edges = pool_edges(labels, mask, stride)
    kept, measured = apply_filter(mask, labels)
    outdeg = Counter(i for i, _ in edges)
    indeg = Counter(j for _, j in edges)
    assert all(i != j for i, j in edges)
    assert set(outdeg) == set(measured) and all(v == 1 for v in outdeg.values())
    assert all(indeg[c] == 0 for c in measured)
    assert all(outdeg[t] == 0 for t in indeg) and set(indeg) <= set(kept)


@settings(max_examples=10_000, deadline=None)
@given(st.sampled_from(FILTER_FAMILIES), st.integers(1, 16))
def test_filter_language_equal_count(fam, half):
    k = 2 * half
    try:
        mask = expand_filter(fam, k)
    except ValueError:
        assert fam in ("inside", "outside") and k > 2 and k % 4
        return
    assert len(mask) == k and mask.count("0") == mask.count("1") == half


@settings(max_examples=500, deadline=None)
@given(st.integers(3, 20), st.integers(1, 40))
def test_conv_translational_invariance(n, stride):
    if stride % n == 0:
        return
    edges = conv_edges(range(1, n + 1), stride)
    assert len(edges) == n and len(set(edges)) == n


def test_alg1_sweep_resolves_except_zero_strides():
    bad = 0
    for sc, sp, f in itertools.product(range(1, 8), range(4), FILTER_FAMILIES):
        bad += not resolves(reverse_binary_tree(8, sc, sp, f))
    assert bad == 24  # s_c = 4 folds to zero on the four-qubit layer
