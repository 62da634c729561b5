import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loccsim.builtin import (
    mirror,
    prop1_alice_second,
    prop1_bob_root,
    prop1_protocol,
    prop3_alice_second,
    prop3_bob_root,
    prop3_protocol,
    variant_bob_root,
    variant_first_round,
)
from loccsim.catalog import (
    CatalogSet,
    QUTRITS,
    product_resource,
    pure,
    quad13,
    quad_S,
    resource_phi,
    tiles6,
    tiles_rho_psi,
    variant_set,
)
from loccsim.protocol import (
    ELIMINATED,
    InvalidMeasurementError,
    Leaf,
    LocalMeasurement,
    Measure,
    ProtocolTree,
    aggregate_povm,
    apply_local_measurement,
    check_layout,
    depth,
    identify,
    iter_measurements,
    iter_nodes,
    lift_mixed,
    resource_cost,
    sample_run,
    teleport_baseline,
    verify,
)
from loccsim.tensor import (
    Ket,
    LayoutError,
    basis_projector,
    identity_projector,
    proportional,
    tensor,
)

from conftest import random_state

W = np.exp(2j * np.pi / 3)


def node_at(tree, path):
    for p, n in iter_nodes(tree.root):
        if p == path:
            return n
    raise KeyError(path)


def dense_embed(p, layout):
    """Full-space matrix of ``p`` by explicit index bookkeeping."""
    dims = layout.dims
    n = layout.total_dim
    idx = np.array(np.unravel_index(np.arange(n), dims)).T  # (n, k) multi-indices
    axes = [layout.index(s) for s in p.subsystems]
    rest = [i for i in range(len(dims)) if i not in axes]
    sub = np.ravel_multi_index(idx[:, axes].T, p.dims)
    other = idx[:, rest]
    same = np.all(other[:, None, :] == other[None, :, :], axis=2)
    return np.where(same, p.matrix[np.ix_(sub, sub)], 0)


def dense_walk(tree, cset):
    """Independent branch simulation: yields (path, node, {label: vector})."""
    layout = tree.layout_for(cset)
    res = tree.resource.normalized()
    start = {lab: np.kron(k.normalized(), res) for lab, _, k, _ in cset.constituents()}
    out = []

    def walk(node, path, states):
        out.append((path, node, states))
        if isinstance(node, Measure):
            for name, p, ch in zip(node.measurement.outcomes, node.measurement.projectors, node.children):
                m = dense_embed(p, layout)
                nxt = {lab: m @ v for lab, v in states.items()}
                nxt = {lab: v for lab, v in nxt.items() if np.vdot(v, v).real > 1e-12}
                walk(ch, f"{path}/{name}" if path else name, nxt)

    walk(tree.root, "", start)
    return out


# --- Tiles protocol ---------------------------------------------------------

def e(d, i):
    return np.eye(d)[i]


def full(A, B, a, b):
    return np.kron(np.kron(np.kron(A, B), a), b)


def test_root_measurement_is_rank3_basis_split():
    m = prop1_bob_root()
    oracle1 = sum(np.outer(np.kron(e(3, B), e(2, b)), np.kron(e(3, B), e(2, b))) for B, b in [(0, 0), (1, 0), (2, 1)])
    oracle2 = sum(np.outer(np.kron(e(3, B), e(2, b)), np.kron(e(3, B), e(2, b))) for B, b in [(0, 1), (1, 1), (2, 0)])
    assert np.array_equal(m.projectors[0].matrix, oracle1)
    assert np.array_equal(m.projectors[1].matrix, oracle2)
    assert [p.rank for p in m.projectors] == [3, 3]
    assert m.subsystems == ("B", "b")


def test_resource_is_unnormalized_phi():
    t = prop1_protocol()
    assert np.allclose(t.resource.amplitudes, [1, 0, 0, 1])
    assert t.resource.layout.ids == ("a", "b")


def test_first_round_transformed_states():
    tree = prop1_protocol()
    walk = {p: s for p, _, s in dense_walk(tree, tiles6())}
    m01, p01 = e(3, 0) - e(3, 1), e(3, 0) + e(3, 1)
    m12, p012 = e(3, 1) - e(3, 2), e(3, 0) + e(3, 1) + e(3, 2)
    z, o = e(2, 0), e(2, 1)
    expected = {
        "Psi_1": full(e(3, 0), m01, z, z),
        "Psi_2": full(m01, e(3, 2), o, o),
        "Psi_3": full(e(3, 2), e(3, 1), z, z) - full(e(3, 2), e(3, 2), o, o),
        "Psi_4": full(m12, e(3, 0), z, z),
        "Psi_5": full(p012, p01, z, z) + full(p012, e(3, 2), o, o),
        "Psi_6": full(e(3, 0), p01, z, z) / np.sqrt(2) - full(p01, e(3, 2), o, o) / np.sqrt(2),
    }
    b1 = walk["B1"]
    assert set(b1) == set(expected)
    for lab, ref in expected.items():
        assert proportional(b1[lab], ref), lab


def test_alice_second_round():
    tree = prop1_protocol()
    walk = {p: s for p, _, s in dense_walk(tree, tiles6())}
    assert set(walk["B1/A1"]) == {"Psi_1", "Psi_2", "Psi_5", "Psi_6"}
    # second outcome wipes out Psi_1, Psi_2, Psi_6 completely
    assert set(walk["B1/A2"]) == {"Psi_3", "Psi_4", "Psi_5"}
    z, o = e(2, 0), e(2, 1)
    p01, p12 = e(3, 0) + e(3, 1), e(3, 1) + e(3, 2)
    assert proportional(walk["B1/A1"]["Psi_5"], full(e(3, 0), p01, z, z) + full(p01, e(3, 2), o, o))
    assert proportional(walk["B1/A2"]["Psi_5"], full(p12, p01, z, z) + full(e(3, 2), e(3, 2), o, o))


def test_alice_second_operators():
    m = prop1_alice_second()
    oracle = sum(np.outer(np.kron(e(3, A), e(2, a)), np.kron(e(3, A), e(2, a))) for A, a in [(0, 0), (0, 1), (1, 1)])
    assert np.array_equal(m.projectors[0].matrix, oracle)


def test_subspace_splits_identify_states():
    rep = verify(prop1_protocol(), tiles6())
    assert rep.survivors["B1/A1/0-1|1"] == ("Psi_2",)
    assert rep.survivors["B1/A1/other"] == ("Psi_1", "Psi_5", "Psi_6")
    assert rep.survivors["B1/A1/other/0-1|0"] == ("Psi_1",)
    assert rep.survivors["B1/A1/other/other"] == ("Psi_5", "Psi_6")
    assert set(rep.two_state) >= {"B1/A1/other/other", "B1/A2/00", "B1/A2/other"}


def test_prop1_verifies():
    tree = prop1_protocol()
    rep = verify(tree, tiles6())
    assert rep.passed, rep.failures
    assert rep.resource_rank == 2
    for lab, p in rep.constituent_success.items():
        assert abs(p - 1) < 1e-9, lab
    assert depth(tree.root) <= 4
    assert all(v for v in rep.node_checks.values())


def test_mirror_branch_is_ancilla_relabelling():
    tree = prop1_protocol()
    b1, b2 = tree.root.children
    x = np.array([[0, 1], [1, 0]])
    f = np.kron(np.eye(3), x)
    for (_, m1), (_, m2) in zip(iter_measurements(ProtocolTree("x", tree.resource, b1)),
                                iter_measurements(ProtocolTree("y", tree.resource, b2))):
        for p, q in zip(m1.projectors, m2.projectors):
            if p.subsystems == ("A", "a") or p.subsystems == ("B", "b"):
                assert np.allclose(f @ p.matrix @ f, q.matrix)
            else:
                assert np.allclose(p.matrix, q.matrix)
    # root outcomes map into each other under the same relabelling
    b = prop1_bob_root()
    assert np.allclose(f @ b.projectors[0].matrix @ f, b.projectors[1].matrix)
    assert mirror(identify("x")) == identify("x")


# --- invariants -------------------------------------------------------------

@pytest.mark.parametrize("make", [prop1_protocol, prop3_protocol])
def test_branch_probabilities_sum_to_one(make):
    tree = make()
    cset = tiles6() if tree.name == "prop1" else quad13()
    layout = tree.layout_for(cset)
    rng = np.random.default_rng(11)
    for path, m in iter_measurements(tree):
        k = Ket(layout, random_state(rng, layout.total_dim), "r")
        branches = apply_local_measurement([("r", k, 1.0)], m)
        assert abs(sum(b.probabilities["r"] for b in branches) - 1) < 1e-10, path
        assert m.is_local(layout)
        assert m.check(1e-12)


@pytest.mark.parametrize("make,cset", [(prop1_protocol, tiles6), (prop3_protocol, quad13)])
def test_survivors_orthogonal_dense_oracle(make, cset):
    tree, s = make(), cset()
    credit = {lab: 0.0 for lab, _, _, _ in s.constituents()}
    for path, node, states in dense_walk(tree, s):
        labs = list(states)
        for i in range(len(labs)):
            for j in range(i + 1, len(labs)):
                x, y = states[labs[i]], states[labs[j]]
                assert abs(np.vdot(x, y)) / np.linalg.norm(x) / np.linalg.norm(y) < 1e-10, (path, labs[i], labs[j])
        if isinstance(node, Leaf):
            if node.kind == "identify":
                assert set(states) <= {node.labels[0]}, path
                for lab, v in states.items():
                    credit[lab] += np.vdot(v, v).real
            elif node.kind == "two_state":
                assert set(states) <= set(node.labels), path
                for lab, v in states.items():
                    credit[lab] += np.vdot(v, v).real
            else:
                assert not states, path
    for lab, c in credit.items():
        assert abs(c - 1) < 1e-10, lab


def test_verify_invariant_under_phase_and_scale():
    base = tiles6()
    rng = np.random.default_rng(3)
    cands = []
    for k in base.kets():
        f = rng.uniform(0.1, 10) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        cands.append(pure(Ket(k.layout, f * k.amplitudes, k.label)))
    rep = verify(prop1_protocol(), CatalogSet("scaled", QUTRITS, tuple(cands)))
    assert rep.passed, rep.failures


# --- two-ququad protocol ----------------------------------------------------

def test_prop3_root_operators():
    m = prop3_bob_root()
    assert [p.rank for p in m.projectors] == [4, 4]
    levels = [(0, 1), (1, 1), (2, 1), (3, 0)]
    oracle = sum(np.outer(np.kron(e(4, B), e(2, b)), np.kron(e(4, B), e(2, b))) for B, b in levels)
    assert np.array_equal(m.projectors[0].matrix, oracle)
    assert prop3_alice_second().check(1e-12)


def test_prop3_verifies():
    tree = prop3_protocol()
    rep = verify(tree, quad13())
    assert rep.passed, rep.failures
    assert len(rep.constituent_success) == 13
    assert all(abs(p - 1) < 1e-9 for p in rep.constituent_success.values())
    assert rep.resource_rank == 2


def test_prop3_branch_contents():
    rep = verify(prop3_protocol(), quad13())
    assert set(rep.survivors["B1/A1"]) == {"Psi_2^(2)", "Psi_2^(3)"}
    gone = {"Psi_1^(2)", "Psi_1^(3)", "Psi_2^(2)", "Psi_2^(3)", "Psi_7"}
    assert not gone & set(rep.survivors["B1/A3"])
    assert set(rep.survivors["B1/A2"]) == {"Psi_1^(2)", "Psi_1^(3)", "Psi_6", "Psi_7"}


def test_prop3_first_round_forms():
    walk = {p: s for p, _, s in dense_walk(prop3_protocol(), quad13())}
    f = lambda p: e(4, 0) + W ** p * e(4, 1) + W ** (2 * p) * e(4, 2)  # noqa: E731
    o = e(2, 1)
    assert proportional(walk["B1"]["Psi_1^(2)"], full(e(4, 0), f(1), o, o))
    assert proportional(walk["B1"]["Psi_1^(3)"], full(e(4, 0), f(2), o, o))


def test_prop3_final_states_orthogonal_on_bob_side():
    tree = prop3_protocol()
    for sign in ("a+", "a-"):
        path = f"B1/A3/other/other/{sign}"
        walk = {p: s for p, _, s in dense_walk(tree, quad13())}
        states = walk[path]
        assert set(states) == {"Psi_3^(2)", "Psi_3^(3)", "Psi_6"}
        # reduce to Bob's (B, b) and require orthogonal supports
        red = {}
        for lab, v in states.items():
            t = v.reshape(4, 4, 2, 2).transpose(0, 2, 1, 3).reshape(8, 8)
            red[lab] = t.T @ t.conj()
        labs = sorted(red)
        for i in range(3):
            for j in range(i + 1, 3):
                assert abs(np.trace(red[labs[i]] @ red[labs[j]])) < 1e-12


def test_prop3_grouping_lift():
    rep = lift_mixed(prop3_protocol(), quad_S())
    assert rep.passed, rep.failures
    assert rep.group_success == {"mixed": pytest.approx(1.0), "pure": pytest.approx(1.0)}


# --- lifting and POVMs ------------------------------------------------------

def test_prop2_grouping_and_identity_grouping():
    tree = prop1_protocol()
    rep = lift_mixed(tree, tiles_rho_psi())
    assert rep.passed
    assert rep.grouping == {f"Psi_{i}": "rho" for i in range(1, 6)} | {"Psi_6": "psi"}
    plain = verify(tree, tiles6())
    ident = lift_mixed(tree, tiles6(), {lab: lab for lab in tiles6().labels()})
    assert ident.constituent_success == plain.constituent_success
    assert ident.passed == plain.passed and ident.failures == plain.failures
    with pytest.raises(ValueError):
        lift_mixed(tree, tiles6(), {"Psi_1": "x"})


def test_lift_with_nonuniform_weights():
    rep = lift_mixed(prop1_protocol(), tiles_rho_psi([0.05, 0.15, 0.3, 0.3, 0.2]))
    assert rep.passed
    assert rep.candidate_success["rho"] == pytest.approx(1.0)


def test_aggregate_povm_group_identities():
    tree = prop1_protocol()
    cset = tiles_rho_psi()
    povm = aggregate_povm(tree, cset)
    n = povm.layout.total_dim
    assert np.max(np.abs(povm.total() - np.eye(n))) < 1e-10
    for lab, el in povm.elements.items():
        assert np.min(np.linalg.eigvalsh((el + el.conj().T) / 2)) > -1e-10, lab
    r = tree.resource.normalized()
    phi_hat = np.outer(r, r.conj())
    rho = np.kron(cset["rho"].density.matrix, phi_hat)
    psi = np.kron(cset["psi"].density.matrix, phi_hat)
    e_psi = povm.group(["Psi_6"])
    e_rho = povm.group([f"Psi_{i}" for i in range(1, 6)])
    assert abs(np.trace(rho @ e_psi)) < 1e-9
    assert abs(np.trace(psi @ e_rho)) < 1e-9
    assert abs(np.trace(rho @ e_rho) - 1) < 1e-9
    assert abs(np.trace(psi @ e_psi) - 1) < 1e-9


def test_aggregate_povm_prop3_complete():
    povm = aggregate_povm(prop3_protocol(), quad13())
    assert np.max(np.abs(povm.total() - np.eye(povm.layout.total_dim))) < 1e-10


def test_single_leaf_povm():
    s = tiles6()
    one = CatalogSet("one", QUTRITS, (s.candidates[0],))
    tree = ProtocolTree("leaf", resource_phi(), identify("Psi_1"))
    povm = aggregate_povm(tree, one)
    assert np.allclose(povm.elements["Psi_1"], np.eye(36))
    assert verify(tree, one).passed


# --- measurement application ------------------------------------------------

def test_identity_measurement_single_branch():
    s = tiles6()
    res = resource_phi()
    cands = [(lab, tensor(k, res), 1.0) for lab, _, k, _ in s.constituents()]
    m = LocalMeasurement("A", (identity_projector(("A", "a"), (3, 2)),))
    (b,) = apply_local_measurement(cands, m)
    assert b.survivors == tuple(s.labels())
    assert all(abs(p - 1) < 1e-12 for p in b.probabilities.values())


def test_invalid_measurement_raises():
    m = LocalMeasurement("B", (basis_projector(("B", "b"), (3, 2), [(0, 0)]),), name="broken")
    k = tensor(tiles6().kets()[0], resource_phi())
    with pytest.raises(InvalidMeasurementError) as exc:
        apply_local_measurement([("x", k, 1.0)], m)
    assert "sum to the identity" in str(exc.value)
    nonlocal_m = LocalMeasurement("A", (identity_projector(("B",), (3,)),))
    with pytest.raises(InvalidMeasurementError):
        apply_local_measurement([("x", k, 1.0)], nonlocal_m)


def test_layout_mismatch():
    with pytest.raises(LayoutError):
        check_layout(prop3_protocol(), prop3_protocol().layout_for(tiles6()))
    with pytest.raises(LayoutError):
        verify(prop3_protocol(), tiles6())


def test_leaf_validation():
    with pytest.raises(ValueError):
        Leaf("identify", ())
    with pytest.raises(ValueError):
        Leaf("guess", ("x",))
    assert ELIMINATED.describe() == "Eliminated"


# --- mutations --------------------------------------------------------------

def _replace(tree, path, new):
    def rec(node, p):
        if p == path:
            return new(node)
        if isinstance(node, Leaf):
            return node
        kids = tuple(rec(c, f"{p}/{n}" if p else n) for n, c in zip(node.measurement.outcomes, node.children))
        return Measure(node.measurement, kids)

    return ProtocolTree(tree.name + "-mutant", tree.resource, rec(tree.root, ""), tree.target)


def test_mutation_swapped_children():
    t = _replace(prop1_protocol(), "B1", lambda n: Measure(n.measurement, n.children[::-1]))
    rep = verify(t, tiles6())
    assert not rep.passed
    assert any(f.startswith("B1/A") for f in rep.failures)


def test_mutation_swapped_leaf_labels():
    t = _replace(prop1_protocol(), "B1/A1/0-1|1", lambda n: identify("Psi_1"))
    rep = verify(t, tiles6())
    assert not rep.passed
    assert any(f.startswith("B1/A1/0-1|1: Identify(Psi_1) leaf reached by Psi_2") for f in rep.failures)


def test_mutation_dropped_outcome():
    def drop(n):
        m = n.measurement
        short = LocalMeasurement(m.party, m.projectors[:1], m.outcomes[:1], m.name)
        return Measure(short, n.children[:1])

    rep = verify(_replace(prop1_protocol(), "B1/A2", drop), tiles6())
    assert not rep.passed
    assert any(f.startswith("B1/A2: invalid measurement") for f in rep.failures)


def test_mutation_product_resource():
    t = prop1_protocol()
    rep = verify(ProtocolTree("prop1-00", product_resource(), t.root), tiles6())
    assert not rep.passed
    assert rep.resource_rank == 1
    assert "B1: survivors Psi_5 and Psi_6 are not orthogonal (overlap 0.577)" in rep.failures


# --- resources and sampling -------------------------------------------------

def test_resource_costs():
    c1, c3 = resource_cost(prop1_protocol()), resource_cost(prop3_protocol())
    assert (c1.schmidt_rank, c1.ebits) == (2, 1.0)
    assert (c3.schmidt_rank, c3.ebits) == (2, 1.0)
    assert teleport_baseline(tiles6().layout) == pytest.approx(np.log2(3))
    assert teleport_baseline(quad13().layout) == 2.0
    zero = resource_cost(ProtocolTree("p", product_resource(), ELIMINATED))
    assert zero.ebits == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sample_run_always_correct(seed):
    rng = np.random.default_rng(seed)
    tree = prop1_protocol()
    cset = tiles6()
    rep = verify(tree, cset)
    res = resource_phi()
    for lab, _, k, _ in cset.constituents():
        state = tensor(Ket(k.layout, k.normalized()), Ket(res.layout, res.normalized())).relabel(lab)
        _, got = sample_run(tree, rep, state, rng)
        assert got == lab


# --- variant ----------------------------------------------------------------

def test_variant_first_round():
    m, rep = variant_first_round()
    assert rep.passed
    assert rep.check.ok
    b1 = sum(np.outer(np.kron(e(3, B), e(2, b)), np.kron(e(3, B), e(2, b))) for B, b in [(0, 0), (1, 1), (2, 1)])
    assert np.array_equal(m.projectors[0].matrix, b1)
    assert np.allclose(m.projectors[0].matrix + m.projectors[1].matrix, np.eye(6))
    assert all(v < 1e-10 for v in rep.max_overlap.values())
    assert set(rep.survivors) == {"B1", "B2"}
    assert variant_bob_root().outcomes == ("B1", "B2")


def test_variant_first_round_gram_oracle():
    """Dense Gram check of the survivors of each outcome."""
    m = variant_bob_root()
    layout = variant_set().layout.concat(resource_phi().layout)
    res = resource_phi().normalized()
    for p in m.projectors:
        big = dense_embed(p, layout)
        vs = [big @ np.kron(k.normalized(), res) for k in variant_set().kets()]
        vs = [v / np.linalg.norm(v) for v in vs if np.linalg.norm(v) > 1e-9]
        g = np.array([[np.vdot(a, b) for b in vs] for a in vs])
        assert np.max(np.abs(g - np.eye(len(vs)))) < 1e-10
