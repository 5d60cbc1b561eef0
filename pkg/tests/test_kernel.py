import numpy as np
import pytest

from optdiscrim import kernel
from optdiscrim.errors import SystemMismatch, UnsupportedSystem
from optdiscrim.models import ClassicalModel, QuantumModel, gbit_square, random_measurement, random_state, vectorize

from conftest import ket_vec

EQ = 1e-12


def sys_(label, n):
    return kernel.System(label, QuantumModel(n))


def rand_proc(rng, a, b):
    return kernel.ExtendedProcess(a, b, rng.normal(size=(b.dim, a.dim)))


def test_identity_absorption(rng):
    A, B = sys_("A", 2), sys_("B", 3)
    f = rand_proc(rng, A, B)
    assert kernel.compose_seq(kernel.identity(A), f).equals(f, 0.0)
    assert kernel.compose_seq(f, kernel.identity(B)).equals(f, 0.0)


def test_associativity(rng):
    A, B, C, D = sys_("A", 2), sys_("B", 2), sys_("C", 3), sys_("D", 2)
    for _ in range(50):
        f, g, h = rand_proc(rng, A, B), rand_proc(rng, B, C), rand_proc(rng, C, D)
        lhs = kernel.compose_seq(kernel.compose_seq(f, g), h)
        rhs = kernel.compose_seq(f, kernel.compose_seq(g, h))
        assert np.max(np.abs(lhs.matrix - rhs.matrix)) <= EQ * max(1, np.abs(lhs.matrix).max())


def test_interchange_law(rng):
    A, B, C, D, E, F = (sys_(x, 2) for x in "ABCDEF")
    for _ in range(50):
        f, g = rand_proc(rng, A, B), rand_proc(rng, B, C)
        h, k = rand_proc(rng, D, E), rand_proc(rng, E, F)
        lhs = kernel.compose_seq(kernel.compose_par(f, h), kernel.compose_par(g, k))
        rhs = kernel.compose_par(kernel.compose_seq(f, g), kernel.compose_seq(h, k))
        assert np.max(np.abs(lhs.matrix - rhs.matrix)) <= EQ * max(1, np.abs(lhs.matrix).max())


def test_type_mismatch():
    A, B = sys_("A", 2), sys_("B", 2)
    with pytest.raises(SystemMismatch):
        kernel.compose_seq(kernel.identity(A), kernel.identity(B))
    with pytest.raises(SystemMismatch):
        kernel.ExtendedProcess(A, B, np.eye(3))


def test_classical_basis_delta():
    cs = kernel.ClassicalStructure.canonical(3)
    for m, e in enumerate(cs.basis_effects):
        for n, s in enumerate(cs.basis_states):
            assert kernel.compose_seq(s, e).scalar() == (1.0 if m == n else 0.0)


def test_confusion_matrix_by_composition(rng):
    A = sys_("A", 2)
    M = 3
    effs = random_measurement(A.model, M, rng)
    states = np.array([random_state(A.model, rng) for _ in range(M)])
    e = kernel.ExtendedProcess(A, kernel.classical(M), effs)
    rho = kernel.ExtendedProcess(kernel.classical(M), A, states.T)
    conf = kernel.compose_seq(rho, e).matrix
    for m in range(M):
        for n in range(M):
            assert abs(conf[m, n] - effs[m] @ states[n]) <= 1e-15


def test_scalar_and_discard_products(rng):
    A, B = sys_("A", 2), sys_("B", 3)
    f = rand_proc(rng, A, B)
    assert kernel.compose_par(kernel.scalar(0.3), f).equals(0.3 * f)
    both = kernel.compose_par(kernel.discard(A), kernel.discard(B))
    assert both.equals(kernel.discard(kernel.tensor(A, B)))


def test_swap(rng):
    A, B = sys_("A", 2), sys_("B", 3)
    r1, r2 = random_state(A.model, rng), random_state(B.model, rng)
    s = kernel.swap(A, B)
    out = kernel.compose_seq(kernel.compose_par(kernel.state(A, r1), kernel.state(B, r2)), s)
    assert np.allclose(out.vector(), np.kron(r2, r1), atol=1e-15)
    assert kernel.swap(A, kernel.TRIVIAL).equals(kernel.identity(A))


def test_swap_naturality(rng):
    A, B, C = sys_("A", 2), sys_("B", 3), sys_("C", 2)
    for _ in range(20):
        f = rand_proc(rng, A, C)
        lhs = kernel.compose_seq(kernel.compose_seq(kernel.swap(B, A), kernel.compose_par(f, kernel.identity(B))), kernel.swap(C, B))
        rhs = kernel.compose_par(kernel.identity(B), f)
        assert lhs.equals(rhs, EQ)


def test_determinism_examples(rng):
    A = sys_("A", 2)
    assert kernel.is_deterministic(kernel.identity(A))
    e = kernel.ExtendedProcess(A, kernel.classical(3), random_measurement(A.model, 3, rng))
    assert kernel.is_deterministic(e)
    prep = kernel.ExtendedProcess(kernel.classical(2), A, np.array([ket_vec([1, 0]), ket_vec([0, 1])]).T / 2)
    assert not kernel.is_deterministic(prep)


def test_yanking():
    assert kernel.yank_check(kernel.ClassicalStructure.canonical(1))
    cs = kernel.ClassicalStructure.canonical(3)
    assert kernel.yank_check(cs)
    bad = cs.cup.matrix.copy()
    bad[0, 0] = 0.0
    broken = kernel.ClassicalStructure(cs.system, kernel.ExtendedProcess(cs.cup.input, cs.cup.output, bad), cs.cap)
    assert not kernel.yank_check(broken)


def test_measurement_packing(rng):
    A = sys_("A", 2)
    single = kernel.measurement_to_process([kernel.discard(A)])
    assert single.output.dim == 1 and kernel.is_deterministic(single)
    C = kernel.classical(2)
    assert kernel.measurement_to_process(kernel.ClassicalStructure.canonical(2).basis_effects).equals(kernel.identity(C))
    effs = [kernel.effect(A, w) for w in random_measurement(A.model, 3, rng)]
    packed = kernel.measurement_to_process(effs)
    back = kernel.process_to_effects(packed)
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(effs, back))


def test_is_measurement_examples():
    A = sys_("A", 2)
    assert kernel.is_measurement([kernel.discard(A)])
    z = [kernel.effect(A, ket_vec([1, 0])), kernel.effect(A, ket_vec([0, 1]))]
    assert kernel.is_measurement(z)
    assert not kernel.is_measurement([kernel.effect(A, 1.2 * ket_vec([1, 0])), z[1]])


def test_normalization_equivalence(rng):
    # sum of effects equals the unit iff outcome probabilities sum to 1 on every normalized state
    A = sys_("A", 2)
    effs = random_measurement(A.model, 3, rng)
    for _ in range(100):
        s = random_state(A.model, rng)
        assert abs((effs @ s).sum() - 1) <= 1e-12
    skew = effs.copy()
    skew[0] *= 1.01
    s = random_state(A.model, rng)
    assert abs((skew @ s).sum() - 1) > 1e-6


def test_classical_composite_decomposition(rng):
    C, A = kernel.classical(3), sys_("A", 2)
    parts = [0.2 * random_state(A.model, rng), 0.5 * random_state(A.model, rng), 0.3 * random_state(A.model, rng)]
    v = sum(np.kron(np.eye(3)[m], parts[m]) for m in range(3))
    CA = kernel.tensor(C, A)
    cs = kernel.ClassicalStructure.canonical(3)
    for m, bra in enumerate(cs.basis_effects):
        proj = kernel.compose_seq(kernel.state(CA, v), kernel.compose_par(bra, kernel.identity(A)))
        assert np.allclose(proj.vector(), parts[m], atol=1e-15)
        assert A.model.contains_state(proj.vector())


def test_gbit_composite_rejected():
    G = kernel.System("G", gbit_square())
    with pytest.raises(UnsupportedSystem):
        kernel.tensor(G, kernel.System("H", gbit_square()))
    assert kernel.tensor(G, kernel.System("C", ClassicalModel(2))).dim == 6


def test_process_is_read_only():
    A = sys_("A", 2)
    f = kernel.identity(A)
    with pytest.raises(ValueError):
        f.matrix[0, 0] = 5.0
    assert vectorize(np.eye(2), (2,)).shape == (4,)
