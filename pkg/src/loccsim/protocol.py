"""Measurement-tree LOCC protocols: simulation, verification and POVM aggregation.

A protocol is a tree whose internal nodes are party-local projective
measurements and whose leaves carry a decision. Verification pushes every pure
constituent of every candidate (tensored with the shared resource) through all
branches and checks, leaf by leaf, that what survives is what the leaf claims.

The verifier only certifies protocols whose same-branch survivors stay mutually
orthogonal at every node; that keeps the perfect-discrimination check local to
each leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log2
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .catalog import CatalogSet
from .tensor import (
    Ket,
    LayoutError,
    MeasurementCheck,
    Projector,
    SystemLayout,
    _check_slice,
    coefficient_matrix,
    embed,
    is_projective_measurement,
    project,
    schmidt_rank,
    tensor,
)
from .twostate import TwoStateProtocol, run_two_state, walgate_protocol

MASS_TOL = 1e-9
MEAS_TOL = 1e-12
ORTH_TOL = 1e-10
ELIM_TOL = 1e-12


class InvalidMeasurementError(ValueError):
    def __init__(self, check: MeasurementCheck, where: str = ""):
        self.check = check
        msg = "; ".join(check.problems) or "invalid measurement"
        super().__init__(f"{where}: {msg}" if where else msg)


@dataclass(frozen=True, eq=False)
class LocalMeasurement:
    party: str
    projectors: tuple[Projector, ...]
    outcomes: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "projectors", tuple(self.projectors))
        names = tuple(self.outcomes) or tuple(str(i) for i in range(len(self.projectors)))
        if len(names) != len(self.projectors):
            raise ValueError("one outcome name per projector")
        object.__setattr__(self, "outcomes", names)

    @property
    def subsystems(self) -> tuple[str, ...]:
        return self.projectors[0].subsystems if self.projectors else ()

    def check(self, tol: float = MEAS_TOL) -> MeasurementCheck:
        return is_projective_measurement(self.projectors, tol)

    def is_local(self, layout: SystemLayout) -> bool:
        owned = set(layout.owned_by(self.party))
        return all(set(p.subsystems) <= owned for p in self.projectors)


@dataclass(frozen=True)
class Leaf:
    kind: str  # "identify" | "two_state" | "eliminated"
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        need = {"identify": 1, "two_state": 2, "eliminated": 0}
        if self.kind not in need:
            raise ValueError(f"unknown leaf kind {self.kind!r}")
        if len(self.labels) != need[self.kind]:
            raise ValueError(f"{self.kind} leaf needs {need[self.kind]} label(s), got {self.labels}")

    def describe(self) -> str:
        if self.kind == "identify":
            return f"Identify({self.labels[0]})"
        if self.kind == "two_state":
            return f"TwoState({self.labels[0]}, {self.labels[1]})"
        return "Eliminated"


def identify(label: str) -> Leaf:
    return Leaf("identify", (label,))


def two_state(a: str, b: str) -> Leaf:
    return Leaf("two_state", (a, b))


ELIMINATED = Leaf("eliminated")


@dataclass(frozen=True, eq=False)
class Measure:
    measurement: LocalMeasurement
    children: tuple["Node", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


Node = Union[Measure, Leaf]


@dataclass(frozen=True, eq=False)
class ProtocolTree:
    name: str
    resource: Ket
    root: Node
    target: str | None = None

    def layout_for(self, cset: CatalogSet) -> SystemLayout:
        return cset.layout.concat(self.resource.layout)


def child_path(path: str, name: str) -> str:
    return f"{path}/{name}" if path else name


def iter_nodes(node: Node, path: str = "") -> Iterator[tuple[str, Node]]:
    yield path, node
    if isinstance(node, Measure):
        for name, ch in zip(node.measurement.outcomes, node.children):
            yield from iter_nodes(ch, child_path(path, name))


def iter_measurements(tree: ProtocolTree) -> Iterator[tuple[str, LocalMeasurement]]:
    for path, node in iter_nodes(tree.root):
        if isinstance(node, Measure):
            yield path, node.measurement


def depth(node: Node) -> int:
    """Longest chain of measurements from ``node`` to a leaf."""
    if isinstance(node, Leaf):
        return 0
    return 1 + max((depth(c) for c in node.children), default=0)


def check_layout(tree: ProtocolTree, layout: SystemLayout) -> None:
    """Raise :class:`LayoutError` if any projector does not fit ``layout``."""
    for path, m in iter_measurements(tree):
        for p in m.projectors:
            try:
                _check_slice(p, layout)
            except LayoutError as exc:
                raise LayoutError(f"{tree.name} at {path or 'root'}: {exc}") from None


@dataclass(frozen=True)
class Branch:
    outcome: str
    states: tuple[tuple[str, Ket, float], ...]
    survivors: tuple[str, ...]
    probabilities: dict[str, float]


def apply_local_measurement(candidates: Sequence[tuple[str, Ket, float]], m: LocalMeasurement,
                            tol: float = MEAS_TOL, elim_tol: float = ELIM_TOL) -> list[Branch]:
    """Project every candidate onto every outcome of ``m``.

    Branch probabilities are ``|P k|^2 / |k|^2``; a candidate survives an outcome
    when that ratio exceeds ``elim_tol``.
    """
    chk = m.check(tol)
    if not chk:
        raise InvalidMeasurementError(chk, m.name)
    if candidates and not m.is_local(candidates[0][1].layout):
        raise InvalidMeasurementError(MeasurementCheck(False, (f"not local to party {m.party}",)), m.name)
    out = []
    for name, p in zip(m.outcomes, m.projectors):
        states, surv, probs = [], [], {}
        for label, k, w in candidates:
            pk = project(k, p, elim_tol)
            probs[label] = pk.norm2 / k.norm2
            states.append((label, pk, w))
            if not pk.eliminated:
                surv.append(label)
        out.append(Branch(name, tuple(states), tuple(surv), probs))
    return out


@dataclass
class VerificationReport:
    protocol: str
    set_name: str
    passed: bool
    constituent_success: dict[str, float]
    candidate_success: dict[str, float]
    group_success: dict[str, float]
    grouping: dict[str, str]
    survivors: dict[str, tuple[str, ...]]
    leaf_masses: dict[str, dict[str, float]]
    leaf_decisions: dict[str, str]
    node_checks: dict[str, MeasurementCheck]
    resource_rank: int
    failures: list[str] = field(default_factory=list)
    two_state: dict[str, TwoStateProtocol] = field(default_factory=dict)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.protocol} on {self.set_name}: {verdict} ({len(self.failures)} failure(s))"


def _default_grouping(cset: CatalogSet) -> dict[str, str]:
    return {lab: cand for lab, cand, _, _ in cset.constituents()}


def lift_mixed(tree: ProtocolTree, cset: CatalogSet, grouping: Mapping[str, str] | None = None,
               tol: float = MASS_TOL, meas_tol: float = MEAS_TOL, orth_tol: float = ORTH_TOL,
               elim_tol: float = ELIM_TOL) -> VerificationReport:
    """Verify ``tree`` on the pure constituents of ``cset`` and credit decisions by group.

    ``grouping`` maps constituent labels to group names (default: the label of
    the candidate each constituent belongs to). A constituent is credited
    whenever it reaches a leaf whose decision lies in its own group.
    """
    labels = [lab for lab, _, _, _ in cset.constituents()]
    if grouping is None:
        grouping = _default_grouping(cset)
    grouping = dict(grouping)
    missing = [lab for lab in labels if lab not in grouping]
    if missing:
        raise ValueError(f"grouping does not cover {missing}")
    return _run(tree, cset, grouping, tol, meas_tol, orth_tol, elim_tol)


def verify(tree: ProtocolTree, cset: CatalogSet, tol: float = MASS_TOL, meas_tol: float = MEAS_TOL,
           orth_tol: float = ORTH_TOL, elim_tol: float = ELIM_TOL) -> VerificationReport:
    """Check that ``tree`` identifies every pure constituent of ``cset`` with certainty."""
    grouping = {lab: lab for lab, _, _, _ in cset.constituents()}
    return _run(tree, cset, grouping, tol, meas_tol, orth_tol, elim_tol)


def _run(tree, cset, grouping, tol, meas_tol, orth_tol, elim_tol) -> VerificationReport:
    layout = tree.layout_for(cset)
    check_layout(tree, layout)
    res = Ket(tree.resource.layout, tree.resource.normalized(), tree.resource.label)
    start = []
    for lab, _, k, _ in cset.constituents():
        start.append((lab, tensor(Ket(k.layout, k.normalized()), res).relabel(lab)))
    group_of = lambda lab: grouping.get(lab, lab)  # noqa: E731

    rep = VerificationReport(
        protocol=tree.name, set_name=cset.name, passed=False,
        constituent_success={lab: 0.0 for lab, _ in start},
        candidate_success={}, group_success={}, grouping=dict(grouping),
        survivors={}, leaf_masses={}, leaf_decisions={}, node_checks={},
        resource_rank=schmidt_rank(tree.resource, layout.parties[:2]) if len(layout.parties) >= 2 else 0,
    )
    fail = rep.failures.append

    def where(path):
        return path or "root"

    def orthogonality(path, states):
        for i in range(len(states)):
            for j in range(i + 1, len(states)):
                (li, ki), (lj, kj) = states[i], states[j]
                ov = abs(ki.inner(kj)) / (ki.norm * kj.norm)
                if ov > orth_tol:
                    fail(f"{where(path)}: survivors {li} and {lj} are not orthogonal (overlap {ov:.3g})")

    def walk(node, path, states):
        rep.survivors[path] = tuple(lab for lab, _ in states)
        orthogonality(path, states)
        if isinstance(node, Leaf):
            leaf(node, path, states)
            return
        m = node.measurement
        chk = m.check(meas_tol)
        rep.node_checks[path] = chk
        if not chk:
            fail(f"{where(path)}: invalid measurement {m.name!r}: {'; '.join(chk.problems)}")
        if not m.is_local(layout):
            fail(f"{where(path)}: measurement {m.name!r} is not local to party {m.party}")
        if len(node.children) != len(m.projectors):
            fail(f"{where(path)}: {len(m.projectors)} outcomes but {len(node.children)} children")
        totals = {lab: 0.0 for lab, _ in states}
        for i, (name, p) in enumerate(zip(m.outcomes, m.projectors)):
            nxt = []
            for lab, k in states:
                pk = project(k, p, elim_tol)
                totals[lab] += pk.norm2
                if not pk.eliminated:
                    nxt.append((lab, pk))
            sub = child_path(path, name)
            if i < len(node.children):
                walk(node.children[i], sub, nxt)
            elif nxt:
                fail(f"{sub}: outcome has no child but {[lab for lab, _ in nxt]} reach it")
        for lab, k in states:
            if abs(totals[lab] - k.norm2) > tol:
                fail(f"{where(path)}: outcome probabilities of {lab} do not sum to its branch mass")

    def leaf(node, path, states):
        rep.leaf_decisions[path] = node.describe()
        rep.leaf_masses[path] = {lab: k.norm2 for lab, k in states}
        if node.kind == "eliminated":
            for lab, k in states:
                fail(f"{path}: {node.describe()} leaf reached by {lab} with mass {k.norm2:.3g}")
            return
        if node.kind == "identify":
            target = node.labels[0]
            for lab, k in states:
                if group_of(lab) == group_of(target):
                    rep.constituent_success[lab] += k.norm2
                else:
                    fail(f"{path}: {node.describe()} leaf reached by {lab} with mass {k.norm2:.3g}")
            return
        pair = node.labels
        strays = [lab for lab, _ in states if lab not in pair]
        for lab in strays:
            fail(f"{path}: {node.describe()} leaf reached by {lab} outside the named pair")
        inside = [(lab, k) for lab, k in states if lab in pair]
        if len(inside) == 1:
            lab, k = inside[0]
            rep.constituent_success[lab] += k.norm2
            return
        if len(inside) < 2:
            return
        (l1, k1), (l2, k2) = inside
        try:
            proto = walgate_protocol(k1, k2, layout.parties[:2], tol=orth_tol)
        except ValueError as exc:
            fail(f"{path}: two-state subroutine rejected {l1}, {l2}: {exc}")
            return
        rep.two_state[path] = proto
        for lab, k in inside:
            out = run_two_state(proto, k, tol)
            credit = sum(v for name, v in out.probabilities.items()
                         if name != "unresolved" and group_of(name) == group_of(lab))
            rep.constituent_success[lab] += k.norm2 * credit
            if abs(credit - 1) > tol:
                fail(f"{path}: two-state subroutine resolves {lab} with probability {credit:.6g}")

    walk(tree.root, "", start)

    for lab, mass in rep.constituent_success.items():
        if abs(mass - 1) > tol:
            fail(f"{lab}: identified with total probability {mass:.12g}")
    for lab, cand, _, w in cset.constituents():
        rep.candidate_success[cand] = rep.candidate_success.get(cand, 0.0) + w * rep.constituent_success[lab]
    for lab, _, _, w in cset.constituents():
        g = group_of(lab)
        rep.group_success.setdefault(g, 1.0)
        rep.group_success[g] = min(rep.group_success[g], rep.constituent_success[lab])
    rep.passed = not rep.failures
    return rep


@dataclass(frozen=True)
class PovmAggregate:
    elements: dict[str, np.ndarray]
    layout: SystemLayout

    def total(self) -> np.ndarray:
        return sum(self.elements.values())

    def group(self, labels) -> np.ndarray:
        n = self.layout.total_dim
        out = np.zeros((n, n), dtype=complex)
        for lab in labels:
            if lab in self.elements:
                out = out + self.elements[lab]
        return out


def aggregate_povm(tree: ProtocolTree, cset: CatalogSet, report: VerificationReport | None = None) -> PovmAggregate:
    """Global POVM elements ``E_L = sum K^H K`` over branch operators ending in decision ``L``.

    Two-state leaves are refined with the subroutine built from ``cset``'s
    residues at that leaf. Undecided mass is collected under ``"eliminated"``.
    """
    if report is None:
        report = verify(tree, cset)
    layout = tree.layout_for(cset)
    n = layout.total_dim
    elems: dict[str, np.ndarray] = {}
    cache: dict[int, tuple[Projector, np.ndarray]] = {}

    def emb(p: Projector) -> np.ndarray:
        # the projector is stored alongside so its id cannot be recycled
        key = id(p)
        if key not in cache:
            cache[key] = (p, embed(p, layout).matrix)
        return cache[key][1]

    def add(label, k):
        elems[label] = elems.get(label, np.zeros((n, n), dtype=complex)) + k.conj().T @ k

    def walk(node, path, k):
        if isinstance(node, Measure):
            for name, p, ch in zip(node.measurement.outcomes, node.measurement.projectors, node.children):
                walk(ch, child_path(path, name), emb(p) @ k)
            return
        if node.kind == "identify":
            add(node.labels[0], k)
        elif node.kind == "eliminated":
            add("eliminated", k)
        elif path in report.two_state:
            proto = report.two_state[path]
            for pa, bob in zip(proto.alice_projectors(), proto.bob):
                ka = emb(pa) @ k
                if bob is None:
                    add("eliminated", ka)
                    continue
                for lab, pb in zip(proto.labels, bob):
                    add(lab, emb(pb) @ ka)
        else:
            surv = report.survivors.get(path, ())
            add(surv[0] if len(surv) == 1 else "eliminated", k)

    walk(tree.root, "", np.eye(n, dtype=complex))
    return PovmAggregate(elems, layout)


@dataclass(frozen=True)
class ResourceCost:
    schmidt_rank: int
    ebits: float


def resource_cost(tree: ProtocolTree) -> ResourceCost:
    parties = tree.resource.layout.parties
    if len(parties) != 2:
        raise LayoutError("resource must be shared between exactly two parties")
    r = schmidt_rank(tree.resource, parties)
    return ResourceCost(r, log2(r) if r > 0 else 0.0)


def teleport_baseline(layout: SystemLayout) -> float:
    """Ebits needed to teleport the smaller party's share of ``layout``."""
    dims = []
    for party in layout.parties:
        dims.append(int(np.prod(layout.dims_of(layout.owned_by(party)), dtype=np.int64)))
    return log2(min(dims))


def sample_run(tree: ProtocolTree, report: VerificationReport, state: Ket, rng: np.random.Generator,
               elim_tol: float = ELIM_TOL) -> tuple[str, str | None]:
    """Run the protocol once on ``state`` (already tensored with the resource), sampling outcomes.

    Returns ``(leaf path, decided label)``; the label is None at an eliminated leaf.
    """
    node, path = tree.root, ""
    k = Ket(state.layout, state.normalized(), state.label)
    while isinstance(node, Measure):
        outs = [project(k, p, elim_tol) for p in node.measurement.projectors]
        probs = np.clip([o.norm2 for o in outs], 0.0, None)
        i = int(rng.choice(len(outs), p=probs / probs.sum()))
        k = Ket(k.layout, outs[i].normalized(), k.label)
        path = child_path(path, node.measurement.outcomes[i])
        node = node.children[i]
    if node.kind == "identify":
        return path, node.labels[0]
    if node.kind == "eliminated":
        return path, None
    proto = report.two_state.get(path)
    if proto is None:
        surv = report.survivors.get(path, ())
        return path, surv[0] if len(surv) == 1 else None
    rows = proto.alice_basis.conj().T @ coefficient_matrix(k, proto.bipartition)
    pa = np.clip([np.vdot(r, r).real for r in rows], 0.0, None)
    i = int(rng.choice(len(rows), p=pa / pa.sum()))
    r = rows[i] / np.sqrt(pa[i])
    bob = proto.bob[i]
    if bob is None:
        return path, None
    # rounding can leave tiny negative weights
    pb = np.clip([np.vdot(r, b.matrix @ r).real for b in bob], 0.0, None)
    j = int(rng.choice(2, p=pb / pb.sum()))
    return path, proto.labels[j]
