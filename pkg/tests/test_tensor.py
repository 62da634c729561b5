import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loccsim.tensor import (
    LayoutError,
    Ket,
    DensityOperator,
    Projector,
    SystemLayout,
    basis_ket,
    basis_projector,
    coefficient_matrix,
    complement,
    embed,
    from_coefficient_matrix,
    gram_matrix,
    identity_projector,
    is_projective_measurement,
    kron,
    partial_trace,
    project,
    projector,
    proportional,
    schmidt_decompose,
    schmidt_rank,
    superpose,
    tensor,
)

from conftest import random_state

AB = SystemLayout.of(("A", 3, "A"), ("B", 3, "B"))
ABab = SystemLayout.of(("A", 3, "A"), ("B", 3, "B"), ("a", 2, "A"), ("b", 2, "B"))


def test_layout_basics():
    assert ABab.dims == (3, 3, 2, 2)
    assert ABab.total_dim == 36
    assert ABab.parties == ("A", "B")
    assert ABab.owned_by("A") == ("A", "a")
    with pytest.raises(LayoutError):
        SystemLayout.of(("A", 2, "A"), ("A", 2, "B"))
    with pytest.raises(LayoutError):
        AB.concat(AB)
    with pytest.raises(LayoutError):
        ABab.index("c")


def test_ket_length_checked():
    with pytest.raises(LayoutError):
        Ket(AB, np.ones(8))


def test_superpose_and_kron():
    v = superpose(3, {0: 1, 1: -1})
    assert np.allclose(v, np.array([1, -1, 0]) / np.sqrt(2))
    raw = superpose(3, [1, 1], normalize=False)
    assert np.allclose(raw, [1, 1, 0])
    assert np.allclose(kron(basis_ket(2, 1), basis_ket(3, 2)), np.eye(6)[5])


def test_tensor_labels_and_layout():
    a = Ket(AB, np.eye(9)[0], "x")
    b = Ket(SystemLayout.of(("a", 2, "A"), ("b", 2, "B")), np.array([1, 0, 0, 1]), "phi")
    t = tensor(a, b)
    assert t.layout.ids == ("A", "B", "a", "b")
    assert t.label == "x(x)phi"
    assert t.norm2 == pytest.approx(2.0)


def test_project_matches_dense_embedding(rng):
    p = basis_projector(("B", "b"), (3, 2), [(0, 0), (1, 0), (2, 1)])
    amps = random_state(rng, 36)
    k = Ket(ABab, amps)
    # oracle: build I_A (x) P_Bb (x) I_a on the permuted order explicitly
    full = np.zeros((36, 36), dtype=complex)
    for i in range(36):
        A, B, a, b = np.unravel_index(i, (3, 3, 2, 2))
        for j in range(36):
            A2, B2, a2, b2 = np.unravel_index(j, (3, 3, 2, 2))
            if A == A2 and a == a2:
                full[i, j] = p.matrix[B * 2 + b, B2 * 2 + b2]
    assert np.allclose(project(k, p).amplitudes, full @ amps)
    assert np.allclose(embed(p, ABab).matrix, full)


def test_project_flags_elimination():
    p = basis_projector(("A",), (3,), [(0,)])
    k = Ket(AB, kron(basis_ket(3, 1), basis_ket(3, 1)))
    assert project(k, p).eliminated
    assert not project(k, complement(p)).eliminated


def test_project_rejects_wrong_dims():
    p = identity_projector(("B",), (4,))
    with pytest.raises(LayoutError):
        project(Ket(AB, np.eye(9)[0]), p)


def test_complement_and_identity():
    p = projector(("A",), (3,), [superpose(3, [1, 1, 1])])
    q = complement(p)
    assert np.allclose(p.matrix + q.matrix, np.eye(3))
    assert q.rank == 2
    assert is_projective_measurement([p, q])


def test_measurement_check_reports_each_defect():
    p0 = basis_projector(("A",), (3,), [(0,)])
    p1 = basis_projector(("A",), (3,), [(1,)])
    chk = is_projective_measurement([p0, p1])
    assert not chk and "elements do not sum to the identity" in chk.problems
    overlap = projector(("A",), (3,), [superpose(3, [1, 1])])
    chk = is_projective_measurement([p0, overlap, complement(p0)])
    assert any("not orthogonal" in s for s in chk.problems)
    bad = Projector(("A",), (3,), np.diag([2.0, 0, 0]))
    assert any("idempotent" in s for s in is_projective_measurement([bad]).problems)
    nonherm = Projector(("A",), (3,), np.array([[1, 1, 0], [0, 0, 0], [0, 0, 0]]))
    assert any("Hermitian" in s for s in is_projective_measurement([nonherm]).problems)


def test_schmidt_matches_svd_oracle(rng):
    amps = random_state(rng, 36)
    k = Ket(ABab, amps)
    # A side = (A, a), B side = (B, b)
    t = amps.reshape(3, 3, 2, 2).transpose(0, 2, 1, 3).reshape(6, 6)
    s = np.linalg.svd(t, compute_uv=False)
    sd = schmidt_decompose(k)
    assert np.allclose(sd.coefficients, s)
    assert np.allclose(sd.reconstruct(), coefficient_matrix(k))
    assert schmidt_rank(k) == 6


def test_coefficient_roundtrip(rng):
    amps = random_state(rng, 36)
    k = Ket(ABab, amps)
    back = from_coefficient_matrix(ABab, coefficient_matrix(k))
    assert np.allclose(back.amplitudes, amps)


def test_schmidt_rank_values():
    mes3 = Ket(AB, sum(kron(basis_ket(3, i), basis_ket(3, i)) for i in range(3)))
    assert schmidt_rank(mes3) == 3
    prod = Ket(AB, kron(superpose(3, [1, 1]), basis_ket(3, 2)))
    assert schmidt_rank(prod) == 1
    assert schmidt_rank(Ket(AB, np.zeros(9))) == 0
    with pytest.raises(ValueError):
        schmidt_rank(prod, tol=0)


def test_partial_trace_oracle(rng):
    amps = random_state(rng, 36)
    rho = DensityOperator.from_ket(Ket(ABab, amps))
    t = amps.reshape(3, 3, 2, 2)
    oracle = np.einsum("iabc,jabc->ij", t, t.conj())
    red = partial_trace(rho, ["A"])
    assert np.allclose(red.matrix, oracle)
    # keep order follows the request
    rb_a = partial_trace(rho, ["b", "A"]).matrix
    oracle2 = np.einsum("ixyb,jxyc->bicj", t, t.conj()).reshape(6, 6)
    assert np.allclose(rb_a, oracle2)
    assert red.is_valid()


def test_gram_matrix_errors():
    with pytest.raises(ValueError):
        gram_matrix([Ket(AB, np.zeros(9))])
    with pytest.raises(LayoutError):
        gram_matrix([Ket(AB, np.eye(9)[0]), Ket(ABab, np.eye(36)[0])])


def test_proportional():
    x = np.array([1, 1j, 0])
    assert proportional(x, (2 - 3j) * x)
    assert not proportional(x, np.array([1, -1j, 0]))
    assert proportional(np.zeros(3), np.zeros(3))


dims_st = st.sampled_from([(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)])


@settings(max_examples=40, deadline=None)
@given(dims_st, st.integers(0, 2**32 - 1))
def test_partial_trace_preserves_trace(dims, seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.of(("A", dims[0], "A"), ("B", dims[1], "B"))
    k = Ket(lay, random_state(rng, lay.total_dim))
    rho = DensityOperator.from_ket(k)
    ra = partial_trace(rho, ["A"])
    rb = partial_trace(rho, ["B"])
    assert abs(ra.trace - 1) < 1e-12 and abs(rb.trace - 1) < 1e-12
    # both marginals share their nonzero spectrum with the squared Schmidt coefficients
    s2 = schmidt_decompose(k).coefficients ** 2
    ea = np.sort(np.linalg.eigvalsh(ra.matrix))[::-1][: len(s2)]
    assert np.allclose(ea, s2, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_projector_from_random_vectors(k, seed):
    rng = np.random.default_rng(seed)
    vecs = [random_state(rng, 6) for _ in range(k)]
    p = projector(("B", "b"), (3, 2), vecs)
    assert p.is_valid(1e-12)
    assert p.rank == k
    assert is_projective_measurement([p, complement(p)], 1e-12)
    for v in vecs:
        assert np.allclose(p.matrix @ v, v)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_idempotent(seed):
    rng = np.random.default_rng(seed)
    p = projector(("B", "b"), (3, 2), [random_state(rng, 6) for _ in range(3)])
    k = Ket(ABab, random_state(rng, 36))
    once = project(k, p)
    assert np.allclose(project(once, p).amplitudes, once.amplitudes)
