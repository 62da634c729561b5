"""Dense complex linear algebra over small multipartite Hilbert spaces.

Everything here works on explicitly labelled subsystems. A :class:`SystemLayout`
fixes the order of tensor factors; kets store their amplitudes in that order and
projectors name the subsystems they act on, so a projector on ``("B", "b")``
can be applied to a ket laid out as ``A, B, a, b`` without the caller shuffling
axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-10
RANK_TOL = 1e-8
OMEGA = np.exp(2j * np.pi / 3)


class LayoutError(ValueError):
    """Raised when subsystems are missing, duplicated or have the wrong dimension."""


@dataclass(frozen=True)
class Subsystem:
    id: str
    dim: int
    party: str


@dataclass(frozen=True)
class SystemLayout:
    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        ids = [s.id for s in self.subsystems]
        if len(set(ids)) != len(ids):
            raise LayoutError(f"duplicate subsystem ids in {ids}")
        for s in self.subsystems:
            if int(s.dim) < 1:
                raise LayoutError(f"subsystem {s.id!r} has non-positive dimension {s.dim}")

    @classmethod
    def of(cls, *items: tuple[str, int, str]) -> "SystemLayout":
        """``SystemLayout.of(("A", 3, "A"), ("B", 3, "B"))``."""
        return cls(tuple(Subsystem(i, int(d), p) for i, d, p in items))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    @property
    def parties(self) -> tuple[str, ...]:
        seen: list[str] = []
        for s in self.subsystems:
            if s.party not in seen:
                seen.append(s.party)
        return tuple(seen)

    def index(self, sid: str) -> int:
        try:
            return self.ids.index(sid)
        except ValueError:
            raise LayoutError(f"unknown subsystem {sid!r}; layout has {self.ids}") from None

    def subsystem(self, sid: str) -> Subsystem:
        return self.subsystems[self.index(sid)]

    def owned_by(self, party: str) -> tuple[str, ...]:
        return tuple(s.id for s in self.subsystems if s.party == party)

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        clash = set(self.ids) & set(other.ids)
        if clash:
            raise LayoutError(f"subsystem id collision: {sorted(clash)}")
        return SystemLayout(self.subsystems + other.subsystems)

    def dims_of(self, ids: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.subsystem(i).dim for i in ids)


@dataclass(frozen=True, eq=False)
class Ket:
    """Unnormalized pure state. Zero vectors only arise as elimination outcomes."""

    layout: SystemLayout
    amplitudes: np.ndarray
    label: str | None = None
    eliminated: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.total_dim:
            raise LayoutError(
                f"amplitude vector has length {amps.shape[0]}, layout needs {self.layout.total_dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> np.ndarray:
        n = self.norm
        if n == 0:
            raise ValueError(f"cannot normalize zero ket {self.label!r}")
        return self.amplitudes / n

    def relabel(self, label: str | None) -> "Ket":
        return Ket(self.layout, self.amplitudes, label, self.eliminated)

    def inner(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise LayoutError(f"density matrix has shape {m.shape}, layout needs {(n, n)}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, k: Ket) -> "DensityOperator":
        v = k.normalized()
        return cls(k.layout, np.outer(v, v.conj()))

    def is_valid(self, tol: float = ATOL) -> bool:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            return False
        if abs(np.trace(m) - 1) > tol:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


@dataclass(frozen=True, eq=False)
class Projector:
    """Operator on the listed subsystems.

    ``vectors`` (orthonormal columns spanning the range) is kept when the
    projector was built from a spanning set; serialization writes those so that
    exported files round-trip byte for byte.
    """

    subsystems: tuple[str, ...]
    dims: tuple[int, ...]
    matrix: np.ndarray
    vectors: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.subsystems) != len(self.dims):
            raise LayoutError("projector needs one dimension per subsystem")
        n = int(np.prod(self.dims, dtype=np.int64))
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (n, n):
            raise LayoutError(f"projector matrix has shape {m.shape}, expected {(n, n)}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.vectors is not None:
            v = np.asarray(self.vectors, dtype=complex).reshape(n, -1)
            v.setflags(write=False)
            object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def is_valid(self, tol: float = ATOL) -> bool:
        m = self.matrix
        return bool(
            np.max(np.abs(m - m.conj().T), initial=0.0) <= tol
            and np.max(np.abs(m @ m - m), initial=0.0) <= tol
        )

    def range_basis(self) -> np.ndarray:
        if self.vectors is not None:
            return self.vectors
        w, v = np.linalg.eigh((self.matrix + self.matrix.conj().T) / 2)
        return v[:, w > 0.5]


def basis_ket(dim: int, i: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[i] = 1
    return e


def superpose(dim: int, coeffs: dict[int, complex] | Sequence[complex], normalize: bool = True) -> np.ndarray:
    """Local vector from ``{level: amplitude}``; normalized unless asked otherwise."""
    v = np.zeros(dim, dtype=complex)
    items = coeffs.items() if isinstance(coeffs, dict) else enumerate(coeffs)
    for i, c in items:
        v[i] += c
    if normalize:
        v = v / np.linalg.norm(v)
    return v


def kron(*vs: np.ndarray) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vs:
        out = np.kron(out, v)
    return out


def projector(subsystems: Sequence[str], dims: Sequence[int], vectors: Iterable[np.ndarray]) -> Projector:
    """Orthogonal projector onto the span of ``vectors`` (orthonormalized in order)."""
    n = int(np.prod(dims, dtype=np.int64))
    cols = [np.asarray(v, dtype=complex).reshape(n) for v in vectors]
    basis = _gram_schmidt(cols, n)
    return Projector(tuple(subsystems), tuple(dims), basis @ basis.conj().T, basis)


def basis_projector(subsystems: Sequence[str], dims: Sequence[int], levels: Iterable[Sequence[int]]) -> Projector:
    """Projector onto computational basis states, e.g. ``levels=[(0, 0), (1, 0)]`` on ``("B", "b")``."""
    vecs = []
    for lv in levels:
        vecs.append(kron(*(basis_ket(d, i) for d, i in zip(dims, lv))))
    return projector(subsystems, dims, vecs)


def complement(p: Projector) -> Projector:
    """``I - p`` with a deterministic range basis (Gram-Schmidt of the standard basis)."""
    n = p.size
    existing = list(p.range_basis().T)
    k = len(existing)
    full = _gram_schmidt(existing + [basis_ket(n, i) for i in range(n)], n)
    rest = full[:, k:]
    return Projector(p.subsystems, p.dims, rest @ rest.conj().T, rest)


def identity_projector(subsystems: Sequence[str], dims: Sequence[int]) -> Projector:
    n = int(np.prod(dims, dtype=np.int64))
    return Projector(tuple(subsystems), tuple(dims), np.eye(n, dtype=complex), np.eye(n, dtype=complex))


def _gram_schmidt(cols: list[np.ndarray], n: int, tol: float = 1e-8) -> np.ndarray:
    kept: list[np.ndarray] = []
    for c in cols:
        r = np.array(c, dtype=complex)
        scale = np.linalg.norm(r)
        if scale == 0:
            continue
        for _ in range(2):  # re-orthogonalize once
            for q in kept:
                r = r - q * np.vdot(q, r)
        nr = np.linalg.norm(r)
        if nr > tol * scale:
            kept.append(r / nr)
    if not kept:
        return np.zeros((n, 0), dtype=complex)
    return np.column_stack(kept)


def ket(layout: SystemLayout, amplitudes, label: str | None = None) -> Ket:
    return Ket(layout, np.asarray(amplitudes, dtype=complex), label)


def tensor(a: Ket, b: Ket) -> Ket:
    layout = a.layout.concat(b.layout)
    label = None
    if a.label or b.label:
        label = "(x)".join(x for x in (a.label, b.label) if x)
    return Ket(layout, np.kron(a.amplitudes, b.amplitudes), label)


def _check_slice(p: Projector, layout: SystemLayout) -> list[int]:
    axes = [layout.index(s) for s in p.subsystems]
    if len(set(axes)) != len(axes):
        raise LayoutError(f"projector repeats a subsystem: {p.subsystems}")
    actual = layout.dims_of(p.subsystems)
    if actual != p.dims:
        raise LayoutError(f"projector on {p.subsystems} has dims {p.dims}, layout has {actual}")
    return axes


def apply_local(matrix: np.ndarray, axes: Sequence[int], dims: Sequence[int], amplitudes: np.ndarray) -> np.ndarray:
    """Apply an operator acting on tensor ``axes`` to a flattened state vector."""
    full = tuple(dims)
    t = amplitudes.reshape(full)
    sub = [full[a] for a in axes]
    op = matrix.reshape(sub + sub)
    k = len(axes)
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    out = np.moveaxis(out, list(range(k)), list(axes))
    return out.reshape(-1)


def embed(p: Projector, layout: SystemLayout) -> Projector:
    """Extend ``p`` by the identity on every other subsystem of ``layout``."""
    axes = _check_slice(p, layout)
    n = layout.total_dim
    m = np.empty((n, n), dtype=complex)
    eye = np.eye(n, dtype=complex)
    for j in range(n):
        m[:, j] = apply_local(p.matrix, axes, layout.dims, eye[:, j])
    return Projector(layout.ids, layout.dims, m)


def project(k: Ket, p: Projector, elim_tol: float = 1e-12) -> Ket:
    """Apply ``p`` (embedded) to ``k``. Results with negligible norm are flagged eliminated."""
    axes = _check_slice(p, k.layout)
    amps = apply_local(p.matrix, axes, k.layout.dims, k.amplitudes)
    out = Ket(k.layout, amps, k.label)
    n_in = k.norm2
    if n_in == 0 or out.norm2 <= elim_tol * n_in:
        object.__setattr__(out, "eliminated", True)
    return out


def _party_axes(layout: SystemLayout, bipartition: Sequence[str]) -> tuple[list[int], list[int]]:
    if len(bipartition) != 2:
        raise LayoutError("bipartition must name exactly two parties")
    left, right = bipartition
    if left == right:
        raise LayoutError("bipartition parties must differ")
    la = [i for i, s in enumerate(layout.subsystems) if s.party == left]
    ra = [i for i, s in enumerate(layout.subsystems) if s.party == right]
    stray = [s.id for s in layout.subsystems if s.party not in (left, right)]
    if stray:
        raise LayoutError(f"bipartition {tuple(bipartition)} does not cover subsystems {stray}")
    return la, ra


def coefficient_matrix(k: Ket, bipartition: Sequence[str] = ("A", "B")) -> np.ndarray:
    """Reshape amplitudes into a (left party) x (right party) matrix."""
    la, ra = _party_axes(k.layout, bipartition)
    dims = k.layout.dims
    t = np.transpose(k.tensor_view(), la + ra)
    dl = int(np.prod([dims[i] for i in la], dtype=np.int64))
    return t.reshape(dl, -1)


def from_coefficient_matrix(layout: SystemLayout, c: np.ndarray, bipartition: Sequence[str] = ("A", "B"),
                            label: str | None = None) -> Ket:
    la, ra = _party_axes(layout, bipartition)
    dims = layout.dims
    order = la + ra
    t = np.asarray(c, dtype=complex).reshape([dims[i] for i in order])
    t = np.transpose(t, np.argsort(order))
    return Ket(layout, t.reshape(-1), label)


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left: np.ndarray  # columns
    right: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.coefficients) @ self.right.T


def schmidt_decompose(k: Ket, bipartition: Sequence[str] = ("A", "B")) -> SchmidtDecomposition:
    c = coefficient_matrix(k, bipartition)
    u, s, vh = np.linalg.svd(c, full_matrices=False)
    return SchmidtDecomposition(s, u, vh.T)


def schmidt_rank(k: Ket, bipartition: Sequence[str] = ("A", "B"), tol: float = RANK_TOL) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = schmidt_decompose(k, bipartition).coefficients
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def gram_matrix(states: Sequence[Ket]) -> np.ndarray:
    if not states:
        return np.zeros((0, 0), dtype=complex)
    layout = states[0].layout
    for s in states:
        if s.layout != layout:
            raise LayoutError("gram_matrix needs a shared layout")
        if s.norm == 0:
            raise ValueError(f"zero-norm state {s.label!r} in gram_matrix")
    v = np.column_stack([s.normalized() for s in states])
    return v.conj().T @ v


def partial_trace(d: DensityOperator, keep: Sequence[str]) -> DensityOperator:
    if not keep:
        raise LayoutError("keep must name at least one subsystem")
    layout = d.layout
    keep_axes = [layout.index(s) for s in keep]
    dims = layout.dims
    n = len(dims)
    drop = [i for i in range(n) if i not in keep_axes]
    t = d.matrix.reshape(dims + dims)
    # bring (kept rows, dropped rows, kept cols, dropped cols)
    t = np.transpose(t, keep_axes + drop + [n + i for i in keep_axes] + [n + i for i in drop])
    dk = int(np.prod([dims[i] for i in keep_axes], dtype=np.int64))
    dd = int(np.prod([dims[i] for i in drop], dtype=np.int64)) if drop else 1
    t = t.reshape(dk, dd, dk, dd)
    m = np.einsum("ajbj->ab", t)
    sub = SystemLayout(tuple(layout.subsystems[i] for i in keep_axes))
    return DensityOperator(sub, m)


@dataclass(frozen=True)
class MeasurementCheck:
    ok: bool
    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def is_projective_measurement(ops: Sequence[Projector], tol: float = ATOL) -> MeasurementCheck:
    """Hermitian idempotent elements, pairwise orthogonal, summing to the identity."""
    if not ops:
        raise LayoutError("measurement has no elements")
    sl, dims = ops[0].subsystems, ops[0].dims
    for p in ops:
        if p.subsystems != sl or p.dims != dims:
            raise LayoutError(f"measurement elements act on different slices: {sl} vs {p.subsystems}")
    problems = []
    for i, p in enumerate(ops):
        m = p.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            problems.append(f"element {i} is not Hermitian")
        if np.max(np.abs(m @ m - m), initial=0.0) > tol:
            problems.append(f"element {i} is not idempotent")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            if np.max(np.abs(ops[i].matrix @ ops[j].matrix), initial=0.0) > tol:
                problems.append(f"elements {i} and {j} are not orthogonal")
    total = sum(p.matrix for p in ops)
    if np.max(np.abs(total - np.eye(total.shape[0])), initial=0.0) > tol:
        problems.append("elements do not sum to the identity")
    return MeasurementCheck(not problems, tuple(problems))


def proportional(x: np.ndarray, y: np.ndarray, tol: float = ATOL) -> bool:
    """True when ``x`` and ``y`` agree up to a nonzero complex scalar."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return nx == ny
    return abs(abs(np.vdot(x, y)) / (nx * ny) - 1) <= tol
