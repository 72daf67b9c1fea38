import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motiq.architectures import original_qcnn, reverse_binary_tree
from motiq.backend import (CONV_ANSATZ_KEYS, basis_state, compile_program, encode,
                           encode_batch, expectation_z, readout, registry_default, run,
                           state_to_csv, to_qasm)
from motiq.backend.gates import gell_mann_basis
from motiq.expansion import apply_filter, expand_filter, resolve
from motiq.motif import Qconv, Qdense, Qfree, Qpool
from motiq.search import is_valid, random_primitive

REG = registry_default()


# -- independent oracles -------------------------------------------------------------------

def full_operator(u, wires, n):
    """Dense 2**n matrix of ``u`` on ``wires`` built entry by entry (label 1 = MSB)."""
    k = len(wires)
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = int("".join(str(bits[w]) for w in wires), 2)
        for sub_out in range(2 ** k):
            amp = u[sub_out, sub_in]
            if amp == 0:
                continue
            new = list(bits)
            for t, w in enumerate(wires):
                new[w] = (sub_out >> (k - 1 - t)) & 1
            out[int("".join(map(str, new)), 2), col] += amp
    return out


def oracle_run(prog, params, psi):
    total = np.eye(2 ** prog.num_qubits, dtype=complex)
    for op, u in zip(prog.ops, prog.matrices(params)):
        total = full_operator(u, op.wires, prog.num_qubits) @ total
    return total @ psi


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def random_program(seed, max_qubits=4, max_prims=4):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_qubits + 1))
    m = Qfree(n)
    for _ in range(int(rng.integers(1, max_prims + 1))):
        avail = len(resolve(m)[-1].remaining)
        cand = m + random_primitive(rng, avail)
        if is_valid(cand):
            m = cand
    prog = compile_program(resolve(m), num_qubits=n)
    return prog, rng.uniform(0, 2 * np.pi, prog.n_params), random_state(rng, n)


# -- registry ------------------------------------------------------------------------------

def test_conv_param_counts():
    counts = [REG.get(k).param_count for k in "abcdefgh"]
    assert counts == [2, 2, 4, 6, 6, 6, 10, 10]
    assert [REG.get(CONV_ANSATZ_KEYS[k]).arity for k in "abcdefgh"] == [2] * 8


def test_gell_mann_counts():
    assert REG.get("gm1").param_count == 3
    assert REG.get("gm2").param_count == 15
    assert len(gell_mann_basis(3)) == 63
    for v in (1, 2):
        for a, b in itertools.combinations(gell_mann_basis(v), 2):
            assert abs(np.trace(a @ b)) < 1e-12
        for a in gell_mann_basis(v):
            assert np.allclose(a, a.conj().T) and abs(np.trace(a)) < 1e-12


def test_unknown_mapping():
    with pytest.raises(KeyError):
        REG.get("u_42")
    assert "gm4" in REG and "gm0" not in REG


@pytest.mark.parametrize("name", sorted(REG.names()) + ["gm1", "gm2", "gm3", "cgm2", "cgm3"])
def test_mapping_unitary(name):
    m = REG.get(name)
    rng = np.random.default_rng(7)
    for _ in range(5):
        u = m.matrix(rng.uniform(-np.pi, np.pi, m.param_count))
        assert np.linalg.norm(u.conj().T @ u - np.eye(2 ** m.arity)) < 1e-10


def test_pool_crz_crx_branches():
    m = REG.get("pool_crz_crx")
    t = np.array([0.7, 1.3])
    u = m.matrix(t)
    from motiq.backend.gates import rx, rz
    assert np.allclose(u[2:, 2:], rz(0.7))
    assert np.allclose(u[:2, :2], rx(1.3))


# -- simulator ----------------------------------------------------------------------------------

def test_cnot_conv_on_basis_states():
    prog = compile_program(resolve(Qfree(2) + Qconv(1)), conv_mapping="cnot")
    assert np.allclose(run(prog, [], basis_state(2, 0b00)), basis_state(2, 0b00))
    assert np.allclose(run(prog, [], basis_state(2, 0b10)), basis_state(2, 0b11))


def test_empty_program_is_identity():
    prog = compile_program(resolve(Qfree(3)))
    psi = random_state(np.random.default_rng(0), 3)
    assert prog.n_params == 0 and np.allclose(run(prog, [], psi), psi)


def test_dimension_mismatch():
    prog = compile_program(resolve(Qfree(3)))
    with pytest.raises(ValueError):
        run(prog, [], basis_state(2))


def test_readout_examples():
    assert readout(basis_state(1, 1), 1) == 1.0
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(readout(plus, 1) - 0.5) < 1e-12
    assert expectation_z(basis_state(1, 0), 1) == 1.0
    assert abs(expectation_z(plus, 1)) < 1e-12
    # label 1 is the most significant bit
    assert readout(basis_state(3, 0b100), 1) == 1.0 and readout(basis_state(3, 0b100), 3) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10 ** 6))
def test_readout_marginal(n, seed):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, n)
    q = int(rng.integers(1, n + 1))
    probs = np.abs(psi) ** 2
    p1 = sum(p for i, p in enumerate(probs) if (i >> (n - q)) & 1)
    assert abs(readout(psi, q) - p1) < 1e-12
    p0 = sum(p for i, p in enumerate(probs) if not (i >> (n - q)) & 1)
    assert abs(readout(psi, q) + p0 - 1) < 1e-12
    assert abs(expectation_z(psi, q) - (1 - 2 * readout(psi, q))) < 1e-12


@settings(max_examples=400, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_simulator_matches_dense_oracle(seed):
    prog, params, psi = random_program(seed)
    assert np.max(np.abs(run(prog, params, psi) - oracle_run(prog, params, psi))) < 1e-10


@settings(max_examples=10_000, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_norm_preservation(seed):
    prog, params, psi = random_program(seed, max_qubits=5)
    assert abs(np.linalg.norm(run(prog, params, psi)) - 1) < 1e-9


# -- compilation -------------------------------------------------------------------------------

def test_alg1_parameter_counts():
    graphs = resolve(reverse_binary_tree(8))
    a = compile_program(graphs, conv_mapping="a")
    assert a.param_counts()["conv"] == 6
    assert compile_program(graphs, conv_mapping="a", pool_mapping="cnot").n_params == 6
    assert compile_program(graphs, conv_mapping="g", pool_mapping="cnot").n_params == 30
    assert len({op.group for op in a.ops if op.graph == 1}) == 1


def test_single_qubit_conv_uses_one_qubit_unitary():
    prog = compile_program(resolve(Qfree(1) + Qconv(1)))
    assert len(prog.ops) == 1 and prog.ops[0].mapping.arity == 1 and prog.ops[0].wires == (0,)


def test_arity_mismatch():
    with pytest.raises(ValueError):
        compile_program(resolve(Qfree(4) + Qconv(1, qpu=3)), conv_mapping="u_ttn")
    with pytest.raises(ValueError):
        compile_program(resolve(Qfree(4) + Qconv(1)), conv_mapping="nope")


def test_readout_defaults_to_last_remaining():
    assert compile_program(resolve(reverse_binary_tree(8, 1, 0, "left"))).readout == 8
    assert compile_program(resolve(Qfree(3) + Qconv(1))).readout == 3
    assert compile_program(resolve(Qfree(3)), readout=2).readout == 2
    with pytest.raises(ValueError):
        compile_program(resolve(Qfree(3)), readout=4)


def test_weight_sharing_matches_tiled_unshared():
    graphs = resolve(reverse_binary_tree(4))
    shared = compile_program(graphs, conv_mapping="u_so4")
    split = compile_program(graphs, conv_mapping="u_so4", share_weights=False)
    rng = np.random.default_rng(3)
    theta = rng.uniform(0, 6, shared.n_params)
    tiled = np.concatenate([theta[shared.group_slice(_group_for(shared, split, i))]
                            for i in range(len(split.groups))])
    psi = random_state(rng, 4)
    assert np.allclose(run(shared, theta, psi), run(split, tiled, psi))
    # one shared parameter moves every gate of its layer
    bumped = theta.copy()
    bumped[0] += 0.3
    mats0, mats1 = shared.matrices(theta), shared.matrices(bumped)
    changed = [i for i, (a, b) in enumerate(zip(mats0, mats1)) if not np.allclose(a, b)]
    assert changed == [i for i, op in enumerate(shared.ops) if op.group == 0]
    assert len(changed) == 4


def _group_for(shared, split, i):
    """Index of the shared group covering the same graph as unshared group ``i``."""
    g = split.groups[i].graph
    return next(j for j, sg in enumerate(shared.groups) if sg.graph == g)


def test_motif_mapping_expands_into_subops():
    graphs = resolve(original_qcnn(15, 3))
    prog = compile_program(graphs)
    bridge = [op for op in prog.ops if op.graph == 1]
    assert len(bridge) == 4 * 12 and len({op.group for op in bridge}) == 1
    assert prog.n_params == 15 + 3 * 63 + 3 + 1023


def test_qasm_export():
    prog = compile_program(resolve(reverse_binary_tree(4)), conv_mapping="u_13")
    text = to_qasm(prog, np.zeros(prog.n_params))
    assert text.startswith("OPENQASM 2.0;")
    assert "qreg q[4];" in text and "measure q[0] -> c[0];" in text
    assert text.count("// u_13") == 5 and text.count("// pool_crz_crx") == 3
    gm = compile_program(resolve(Qfree(2) + Qconv(1)), conv_mapping="gm2")
    assert "opaque gm2" in to_qasm(gm, np.zeros(15))


def test_state_csv():
    lines = state_to_csv(basis_state(2, 3)).splitlines()
    assert lines[0] == "index,re,im" and lines[4].startswith("3,1,")


# -- deferred measurement -----------------------------------------------------------------------

def _kept_density_controlled(psi, n, edges, kept):
    prog_u = np.eye(2 ** n, dtype=complex)
    from motiq.backend.gates import FIXED
    for c, t in edges:
        prog_u = full_operator(FIXED["cnot"], (c - 1, t - 1), n) @ prog_u
    out = (prog_u @ psi).reshape((2,) * n)
    keep_axes = [k - 1 for k in kept]
    drop = [a for a in range(n) if a not in keep_axes]
    mat = np.transpose(out, keep_axes + drop).reshape(2 ** len(kept), -1)
    return mat @ mat.conj().T


def _kept_density_measured(psi, n, edges, kept, measured):
    rho = np.zeros((2 ** len(kept),) * 2, dtype=complex)
    amps = psi.reshape((2,) * n)
    for outcome in itertools.product((0, 1), repeat=len(measured)):
        idx = [slice(None)] * n
        for q, b in zip(measured, outcome):
            idx[q - 1] = b
        branch = amps[tuple(idx)]  # axes of unmeasured qubits in label order
        rest = [q for q in range(1, n + 1) if q not in measured]
        branch = branch.reshape((2,) * len(rest))
        for (c, t), b in zip(sorted(edges, key=lambda e: measured.index(e[0])), outcome):
            if b:
                branch = np.flip(branch, axis=rest.index(t))
        vec = branch.reshape(-1)
        rho += np.outer(vec, vec.conj())
    return rho


@settings(max_examples=10_000, deadline=None)
@given(st.integers(2, 5), st.integers(0, 3), st.integers(0, 10 ** 9))
def test_deferred_measurement_equivalence(n, stride, seed):
    rng = np.random.default_rng(seed)
    while True:
        mask = "".join(rng.choice(["0", "1"], n))
        if "0" in mask and "1" in mask:
            break
    labels = tuple(range(1, n + 1))
    graphs = resolve(Qfree(n) + Qpool(stride, mask))
    edges = graphs[1].edges
    kept, measured = apply_filter(mask, labels)
    psi = random_state(rng, n)
    a = _kept_density_controlled(psi, n, edges, kept)
    b = _kept_density_measured(psi, n, edges, kept, list(measured))
    assert np.max(np.abs(a - b)) < 1e-9


# -- encodings ------------------------------------------------------------------------------------

def test_amplitude_basis_vector():
    assert np.allclose(encode([1, 0, 0, 0], "amplitude", 2), basis_state(2, 0))
    assert np.allclose(encode([1], "amplitude", 3), basis_state(3, 0))


def test_qubit_encoding_zero_and_angles():
    assert np.allclose(encode(np.zeros(4), "qubit", 4), basis_state(4, 0))
    x = np.array([0.3, 1.1])
    ry = lambda t: np.array([np.cos(t / 2), np.sin(t / 2)])
    assert np.allclose(encode(x, "qubit", 2), np.kron(ry(2 * x[0]), ry(2 * x[1])))


def test_amplitude_norm_256():
    v = np.random.default_rng(1).uniform(0, 1, 256)
    assert abs(np.linalg.norm(encode(v, "amplitude", 8)) - 1) < 1e-12


def test_iqp_matches_matrix_construction():
    x = np.array([0.4, 1.2, 2.0])
    n = 3
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    hn = np.kron(np.kron(h, h), h)
    z = np.diag([1, -1])
    eye = np.eye(2)
    zs = [np.kron(np.kron(*(z if i == j else eye for j in range(2))), z if i == 2 else eye)
          for i in range(3)]
    gen = sum(x[i] * zs[i] for i in range(n)) + sum(x[i] * x[i + 1] * zs[i] @ zs[i + 1]
                                                    for i in range(n - 1))
    d = np.diag(np.exp(1j * np.diag(gen)))
    expected = d @ hn @ d @ hn @ basis_state(3, 0)
    assert np.allclose(encode(x, "iqp", 3), expected)


def test_encoding_errors():
    with pytest.raises(ValueError):
        encode(np.zeros(4), "amplitude", 2)
    with pytest.raises(ValueError):
        encode(np.ones(3), "qubit", 4)
    with pytest.raises(ValueError):
        encode(np.ones(5), "amplitude", 2)
    with pytest.raises(ValueError):
        encode(np.ones(2), "fourier", 2)
    assert encode_batch(np.ones((3, 2)), "iqp", 2).shape == (3, 4)


@pytest.mark.parametrize("name", sorted(registry_default().names()) + ["gm2", "gm3", "cgm3"])
def test_mapping_derivatives_match_finite_difference(name):
    m = registry_default().get(name)
    theta = np.random.default_rng(len(name)).uniform(-2, 2, m.param_count)
    d = m.derivatives(theta)
    assert d.shape == (m.param_count, 2 ** m.arity, 2 ** m.arity)
    for k in range(m.param_count):
        e = np.zeros_like(theta)
        e[k] = 1e-6
        fd = (m.matrix(theta + e) - m.matrix(theta - e)) / 2e-6
        assert np.max(np.abs(d[k] - fd)) < 1e-8
