"""Built-in protocol trees for the two-qutrit and two-ququad sets.

Each tree starts with Bob's two-outcome measurement on ``B, b``. The second
root outcome is handled by the same steps with the ancilla bits relabelled
(0 <-> 1 on both ``a`` and ``b``), which leaves the shared resource
``|00> + |11>`` invariant. :func:`mirror` applies that relabelling; the verifier
re-checks the mirrored branch like any other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import CatalogSet, resource_phi, variant_set
from .protocol import (
    ELIMINATED,
    LocalMeasurement,
    Leaf,
    Measure,
    Node,
    ProtocolTree,
    identify,
    two_state,
)
from .tensor import (
    OMEGA,
    MeasurementCheck,
    Projector,
    basis_ket,
    basis_projector,
    complement,
    gram_matrix,
    kron,
    project,
    projector,
    superpose,
    tensor,
    Ket,
)

ANCILLA_IDS = ("a", "b")


def _split(party: str, subsystems: Sequence[str], dims: Sequence[int], groups: Sequence[Sequence[np.ndarray]],
           names: Sequence[str], name: str, rest: str | None = "rest") -> LocalMeasurement:
    """Measurement onto the spans of ``groups``, completed by their joint complement."""
    projs = [projector(subsystems, dims, g) for g in groups]
    outs = list(names)
    if rest is not None:
        vecs = [v for g in groups for v in g]
        projs.append(complement(projector(subsystems, dims, vecs)))
        outs.append(rest)
    return LocalMeasurement(party, tuple(projs), tuple(outs), name)


def _flip_matrix(p: Projector) -> np.ndarray:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    op = np.ones((1, 1), dtype=complex)
    for sid, d in zip(p.subsystems, p.dims):
        op = np.kron(op, x if sid in ANCILLA_IDS else np.eye(d))
    return op


def mirror_projector(p: Projector) -> Projector:
    f = _flip_matrix(p)
    vecs = None if p.vectors is None else f @ p.vectors
    return Projector(p.subsystems, p.dims, f @ p.matrix @ f, vecs)


def mirror(node: Node) -> Node:
    """Relabel ancilla levels 0 <-> 1 throughout a subtree."""
    if isinstance(node, Leaf):
        return node
    m = node.measurement
    mm = LocalMeasurement(m.party, tuple(mirror_projector(p) for p in m.projectors), m.outcomes, m.name)
    return Measure(mm, tuple(mirror(c) for c in node.children))


def _e(d, i):
    return basis_ket(d, i)


def prop1_bob_root() -> LocalMeasurement:
    b1 = basis_projector(("B", "b"), (3, 2), [(0, 0), (1, 0), (2, 1)])
    b2 = basis_projector(("B", "b"), (3, 2), [(0, 1), (1, 1), (2, 0)])
    return LocalMeasurement("B", (b1, b2), ("B1", "B2"), "Bob B1/B2")


def prop1_alice_second() -> LocalMeasurement:
    a1 = basis_projector(("A", "a"), (3, 2), [(0, 0), (0, 1), (1, 1)])
    a2 = basis_projector(("A", "a"), (3, 2), [(1, 0), (2, 0), (2, 1)])
    return LocalMeasurement("A", (a1, a2), ("A1", "A2"), "Alice A1/A2")


def _prop1_b1_branch() -> Node:
    m01 = superpose(3, {0: 1, 1: -1})
    alice_split = _split("A", ("A", "a"), (3, 2), [[kron(m01, _e(2, 1))]], ["0-1|1"], "Alice split after A1",
                         rest="other")
    bob_split = _split("B", ("B", "b"), (3, 2), [[kron(m01, _e(2, 0))]], ["0-1|0"], "Bob split after A1",
                       rest="other")
    after_a1 = Measure(alice_split, (
        identify("Psi_2"),
        Measure(bob_split, (identify("Psi_1"), two_state("Psi_5", "Psi_6"))),
    ))
    bob_a2 = _split("B", ("B", "b"), (3, 2), [[kron(_e(3, 0), _e(2, 0))]], ["00"], "Bob split after A2",
                    rest="other")
    after_a2 = Measure(bob_a2, (two_state("Psi_4", "Psi_5"), two_state("Psi_3", "Psi_5")))
    return Measure(prop1_alice_second(), (after_a1, after_a2))


def prop1_protocol() -> ProtocolTree:
    """Two-qutrit protocol consuming one two-qubit maximally entangled state."""
    b1 = _prop1_b1_branch()
    root = Measure(prop1_bob_root(), (b1, mirror(b1)))
    return ProtocolTree("prop1", resource_phi(), root, target="tiles6")


def _f4(offset: int, power: int) -> np.ndarray:
    return superpose(4, {offset: 1, offset + 1: OMEGA ** power, offset + 2: OMEGA ** (2 * power)})


def prop3_bob_root() -> LocalMeasurement:
    b1 = basis_projector(("B", "b"), (4, 2), [(0, 1), (1, 1), (2, 1), (3, 0)])
    b2 = basis_projector(("B", "b"), (4, 2), [(0, 0), (1, 0), (2, 0), (3, 1)])
    return LocalMeasurement("B", (b1, b2), ("B1", "B2"), "Bob B1/B2")


def prop3_alice_second() -> LocalMeasurement:
    aa = ("A", "a")
    a1 = projector(aa, (4, 2), [kron(_f4(0, 1), _e(2, 0)), kron(_f4(0, 2), _e(2, 0))])
    a2 = projector(aa, (4, 2), [kron(_f4(0, 0), _e(2, 0)), kron(_e(4, 0), _e(2, 1))])
    a3 = basis_projector(aa, (4, 2), [(3, 0), (3, 1), (1, 1), (2, 1)])
    return LocalMeasurement("A", (a1, a2, a3), ("A1", "A2", "A3"), "Alice A1/A2/A3")


def _bob_final(sign: int) -> LocalMeasurement:
    """Bob's last split after Alice's ancilla outcome ``|0 + sign 1>``."""
    one_b, zero_b = _e(2, 1), _e(2, 0)
    lv = lambda c: superpose(4, c, normalize=False)  # noqa: E731
    v32 = sign * kron(lv({1: 1, 2: OMEGA}), one_b) + kron(lv({3: OMEGA ** 2}), zero_b)
    v33 = sign * kron(lv({1: 1, 2: OMEGA ** 2}), one_b) + kron(lv({3: OMEGA}), zero_b)
    v6 = sign * kron(lv({1: 1, 2: 1}), one_b) + kron(lv({3: 1}), zero_b)
    return _split("B", ("B", "b"), (4, 2), [[v32], [v33], [v6]], ["Psi_3^(2)", "Psi_3^(3)", "Psi_6"],
                  f"Bob final split ({'+' if sign > 0 else '-'})")


def _prop3_b1_branch() -> Node:
    after_a1 = Measure(
        _split("A", ("A",), (4,), [[_f4(0, 1)]], ["0+w1+w2 2"], "Alice identifies Psi_2", rest="other"),
        (identify("Psi_2^(2)"), identify("Psi_2^(3)")),
    )
    bob_a2 = _split("B", ("B", "b"), (4, 2), [[kron(_f4(0, 1), _e(2, 1)), kron(_f4(0, 2), _e(2, 1))]],
                    ["twisted"], "Bob split after A2", rest="other")
    after_a2 = Measure(bob_a2, (two_state("Psi_1^(2)", "Psi_1^(3)"), two_state("Psi_6", "Psi_7")))

    alice_q4 = _split("A", ("A",), (4,), [[_f4(1, 1)], [_f4(1, 2)]], ["1+w2+w2 3", "1+w2 2+w3"],
                      "Alice identifies Psi_4", rest="other")
    left = Measure(alice_q4, (identify("Psi_4^(2)"), identify("Psi_4^(3)"), identify("Psi_6")))

    p12, m12 = superpose(4, {1: 1, 2: 1}), superpose(4, {1: 1, 2: -1})
    alice_three = _split("A", ("A", "a"), (4, 2), [[kron(p12, _e(2, 1))], [kron(m12, _e(2, 1))]],
                         ["1+2|1", "1-2|1"], "Alice three-subspace split", rest="other")
    ancilla = LocalMeasurement("A", (projector(("a",), (2,), [superpose(2, [1, 1])]),
                                     projector(("a",), (2,), [superpose(2, [1, -1])])),
                               ("a+", "a-"), "Alice ancilla |0+-1>")
    final = Measure(ancilla, tuple(
        Measure(_bob_final(s), (identify("Psi_3^(2)"), identify("Psi_3^(3)"), identify("Psi_6"), ELIMINATED))
        for s in (1, -1)
    ))
    right = Measure(alice_three, (two_state("Psi_5^(2)", "Psi_6"), two_state("Psi_5^(3)", "Psi_5^(4)"), final))
    bob_a3 = _split("B", ("B", "b"), (4, 2), [[kron(_e(4, 0), _e(2, 1))]], ["01"], "Bob split after A3",
                    rest="other")
    after_a3 = Measure(bob_a3, (left, right))
    return Measure(prop3_alice_second(), (after_a1, after_a2, after_a3))


def prop3_protocol() -> ProtocolTree:
    """Two-ququad protocol for the twelve-state UPB plus ``Psi_7``, one ebit."""
    b1 = _prop3_b1_branch()
    root = Measure(prop3_bob_root(), (b1, mirror(b1)))
    return ProtocolTree("prop3", resource_phi(), root, target="quad13")


PROTOCOLS = {"prop1": prop1_protocol, "prop3": prop3_protocol}


def get_protocol(name: str) -> ProtocolTree:
    try:
        return PROTOCOLS[name]()
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}") from None


@dataclass(frozen=True)
class FirstRoundReport:
    check: MeasurementCheck
    survivors: dict[str, tuple[str, ...]]
    max_overlap: dict[str, float]
    passed: bool


def variant_bob_root() -> LocalMeasurement:
    b1 = basis_projector(("B", "b"), (3, 2), [(0, 0), (1, 1), (2, 1)])
    b2 = basis_projector(("B", "b"), (3, 2), [(0, 1), (1, 0), (2, 0)])
    return LocalMeasurement("B", (b1, b2), ("B1", "B2"), "Bob B1/B2 (variant)")


def variant_first_round(cset: CatalogSet | None = None, tol: float = 1e-10) -> tuple[LocalMeasurement, FirstRoundReport]:
    """Bob's opening measurement for the alternative entangled state, checked for one round only.

    The check covers validity of the measurement and mutual orthogonality of
    the survivors on each outcome; nothing is claimed about later rounds.
    """
    cset = cset or variant_set()
    m = variant_bob_root()
    res = resource_phi()
    chk = m.check(1e-12)
    kets = [tensor(Ket(k.layout, k.normalized()), res).relabel(lab) for lab, _, k, _ in cset.constituents()]
    survivors, overlaps = {}, {}
    for name, p in zip(m.outcomes, m.projectors):
        out = [project(k, p) for k in kets]
        alive = [o for o in out if not o.eliminated]
        survivors[name] = tuple(o.label for o in alive)
        g = gram_matrix(alive) if alive else np.zeros((0, 0))
        off = np.abs(g - np.eye(len(g)))
        overlaps[name] = float(off.max(initial=0.0))
    passed = bool(chk) and all(v <= tol for v in overlaps.values())
    return m, FirstRoundReport(chk, survivors, overlaps, passed)
