"""LOCC discrimination of two orthogonal bipartite pure states without entanglement.

Alice measures in a basis ``{|i>}`` chosen so that, writing
``|psi> = sum_i |i>|eta_i>`` and ``|phi> = sum_i |i>|nu_i>``, every pair of
conditional vectors is orthogonal. Bob then separates ``eta_i`` from ``nu_i``.
Finding that basis amounts to unitarily rotating the traceless matrix
``Phi Psi^dagger`` (coefficient matrices) to zero diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .tensor import (
    ATOL,
    Ket,
    LayoutError,
    Projector,
    coefficient_matrix,
    identity_projector,
    projector,
)


class NotOrthogonalError(ValueError):
    pass


def _segment_point(m: np.ndarray, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Unit ``v`` in span{x, y} with ``v^H m v = (1-t) x^H m x + t y^H m y``.

    ``x`` and ``y`` must be orthonormal and ``0 <= t <= 1``.
    """
    alpha = np.vdot(x, m @ x)
    beta = np.vdot(y, m @ y)
    c = np.vdot(x, m @ y)
    d = np.vdot(y, m @ x)
    delta = beta - alpha
    if abs(delta) == 0 or t <= 0:
        return x
    if t >= 1:
        return y
    # pick the relative phase that makes the cross term a real multiple of delta
    p = ((c + d) * np.conj(delta)).imag
    q = ((c - d) * np.conj(delta)).real
    phase = np.arctan2(-p, q) if (p or q) else 0.0
    g = np.exp(1j * phase) * c + np.exp(-1j * phase) * d
    r = (g * np.conj(delta)).real / abs(delta) ** 2
    # solve sin^2(th) + r sin(th) cos(th) = t  on th in [0, pi/2]
    big = np.hypot(1.0, r)
    gamma = np.arctan2(1.0, r)
    s = np.clip((2 * t - 1) / big, -1.0, 1.0)
    theta = 0.5 * (gamma + np.arcsin(s))
    return np.cos(theta) * x + np.exp(1j * phase) * np.sin(theta) * y


def _zero_point(m: np.ndarray) -> np.ndarray:
    """Unit vector ``v`` with ``v^H m v = 0`` for traceless ``m``."""
    n = m.shape[0]
    herm = (m + m.conj().T) / 2
    _, e = np.linalg.eigh(herm)
    z = np.einsum("ki,kl,li->i", e.conj(), m, e)
    scale = max(np.linalg.norm(m), np.finfo(float).tiny)
    best = None  # (residual, order, builder)
    for i in range(n):
        if abs(z[i]) <= 1e-15 * scale:
            return e[:, i]
    for i, j in combinations(range(n), 2):
        a, b = z[i], z[j]
        t = abs(a) / (abs(a) + abs(b))
        resid = abs((1 - t) * a + t * b)
        if best is None or resid < best[0]:
            best = (resid, ("pair", i, j, t))
    for i, j, k in combinations(range(n), 3):
        mat = np.array([[z[i].real, z[j].real, z[k].real],
                        [z[i].imag, z[j].imag, z[k].imag],
                        [1.0, 1.0, 1.0]])
        if abs(np.linalg.det(mat)) < 1e-12 * scale ** 2:
            continue
        w = np.linalg.solve(mat, [0.0, 0.0, 1.0])
        if w.min() < -1e-9:
            continue
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        resid = abs(w[0] * z[i] + w[1] * z[j] + w[2] * z[k])
        if resid < best[0]:
            best = (resid, ("triple", i, j, k, w))
    kind = best[1]
    if kind[0] == "pair":
        _, i, j, t = kind
        return _segment_point(m, e[:, i], e[:, j], t)
    _, i, j, k, w = kind
    wjk = w[1] + w[2]
    if wjk == 0:
        return e[:, i]
    u = _segment_point(m, e[:, j], e[:, k], w[2] / wjk)
    return _segment_point(m, e[:, i], u, wjk)


def zero_diagonal_unitary(m: np.ndarray, tol: float = ATOL) -> np.ndarray:
    """Unitary ``U`` such that ``U m U^H`` has zero diagonal. ``m`` must be traceless."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("zero_diagonal_unitary needs a square matrix")
    n = m.shape[0]
    norm = np.linalg.norm(m)
    if abs(np.trace(m)) > tol * max(norm, 1.0):
        raise ValueError(f"matrix is not traceless (trace {np.trace(m):.3g})")
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if np.max(np.abs(np.diag(m))) <= tol * max(norm, 1.0):
        return np.eye(n, dtype=complex)
    basis = _zero_basis(m)
    return basis.conj().T


def _zero_basis(m: np.ndarray) -> np.ndarray:
    """Orthonormal columns ``b_i`` with ``b_i^H m b_i = 0``."""
    n = m.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    v = _zero_point(m)
    q, _ = np.linalg.qr(v.reshape(n, 1), mode="complete")
    q[:, 0] = v
    rest = q[:, 1:]
    sub = rest.conj().T @ m @ rest
    inner = _zero_basis(sub)
    return np.column_stack([v, rest @ inner])


@dataclass(frozen=True, eq=False)
class TwoStateProtocol:
    """Alice measures in ``alice_basis`` (columns); on outcome ``i`` Bob applies ``bob[i]``.

    ``bob[i]`` is ``(P_first, P_second)`` or ``None`` when neither target can
    produce outcome ``i``.
    """

    labels: tuple[str, str]
    bipartition: tuple[str, str]
    alice_subsystems: tuple[str, ...]
    alice_dims: tuple[int, ...]
    alice_basis: np.ndarray
    bob_subsystems: tuple[str, ...]
    bob_dims: tuple[int, ...]
    bob: tuple[tuple[Projector, Projector] | None, ...]

    def alice_projectors(self) -> list[Projector]:
        return [projector(self.alice_subsystems, self.alice_dims, [self.alice_basis[:, i]])
                for i in range(self.alice_basis.shape[1])]


@dataclass(frozen=True)
class TwoStateResult:
    label: str | None
    probabilities: dict[str, float]
    alice_outcomes: tuple[float, ...]


def _party_split(layout, bipartition):
    left, right = bipartition
    a = layout.owned_by(left)
    b = layout.owned_by(right)
    if len(a) + len(b) != len(layout.subsystems):
        raise LayoutError(f"bipartition {bipartition} does not cover the layout")
    return a, layout.dims_of(a), b, layout.dims_of(b)


def walgate_protocol(psi: Ket, phi: Ket, bipartition: Sequence[str] = ("A", "B"),
                     tol: float = ATOL, elim_tol: float = 1e-12) -> TwoStateProtocol:
    if psi.layout != phi.layout:
        raise LayoutError("both states must share a layout")
    bipartition = tuple(bipartition)
    x, y = psi.normalized(), phi.normalized()
    if abs(np.vdot(x, y)) > tol:
        raise NotOrthogonalError(f"states overlap by {abs(np.vdot(x, y)):.3g}")
    a_ids, a_dims, b_ids, b_dims = _party_split(psi.layout, bipartition)
    cpsi = coefficient_matrix(Ket(psi.layout, x), bipartition)
    cphi = coefficient_matrix(Ket(phi.layout, y), bipartition)
    overlap = cphi @ cpsi.conj().T
    u = zero_diagonal_unitary(overlap, tol=tol)
    etas = u @ cpsi
    nus = u @ cphi
    db = cpsi.shape[1]
    bob = []
    for eta, nu in zip(etas, nus):
        ne, nn = np.vdot(eta, eta).real, np.vdot(nu, nu).real
        ident = identity_projector(b_ids, b_dims)
        zero = Projector(b_ids, b_dims, np.zeros((db, db)), np.zeros((db, 0)))
        if ne <= elim_tol and nn <= elim_tol:
            bob.append(None)
        elif ne <= elim_tol:
            bob.append((zero, ident))
        elif nn <= elim_tol:
            bob.append((ident, zero))
        else:
            first = projector(b_ids, b_dims, [eta])
            bob.append((first, Projector(b_ids, b_dims, np.eye(db) - first.matrix)))
    return TwoStateProtocol(
        labels=(psi.label or "psi", phi.label or "phi"),
        bipartition=bipartition,
        alice_subsystems=a_ids,
        alice_dims=a_dims,
        alice_basis=u.conj().T,
        bob_subsystems=b_ids,
        bob_dims=b_dims,
        bob=tuple(bob),
    )


def run_two_state(p: TwoStateProtocol, state: Ket, tol: float = ATOL) -> TwoStateResult:
    """Outcome statistics of ``p`` on ``state``; ``label`` is None unless one answer has mass 1."""
    c = coefficient_matrix(Ket(state.layout, state.normalized()), p.bipartition)
    rows = p.alice_basis.conj().T @ c
    first, second = p.labels
    probs = {first: 0.0, second: 0.0, "unresolved": 0.0}
    alice = []
    for r, bob in zip(rows, p.bob):
        pa = float(np.vdot(r, r).real)
        alice.append(pa)
        if bob is None:
            probs["unresolved"] += pa
            continue
        probs[first] += float(np.vdot(r, bob[0].matrix @ r).real)
        probs[second] += float(np.vdot(r, bob[1].matrix @ r).real)
    label = None
    for lab in (first, second):
        if abs(probs[lab] - 1) <= tol:
            label = lab
    return TwoStateResult(label, probs, tuple(alice))
