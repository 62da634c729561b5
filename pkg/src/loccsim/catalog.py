"""State sets, mixed candidates and resource states used by the protocols.

Local superpositions such as ``|0+1+2>`` are normalized; sums of product terms
(the entangled members) are left unnormalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import (
    ATOL,
    OMEGA,
    DensityOperator,
    Ket,
    SystemLayout,
    basis_ket,
    gram_matrix,
    kron,
    superpose,
)

QUTRITS = SystemLayout.of(("A", 3, "A"), ("B", 3, "B"))
QUQUADS = SystemLayout.of(("A", 4, "A"), ("B", 4, "B"))
ANCILLA = SystemLayout.of(("a", 2, "A"), ("b", 2, "B"))

# Cited necessary resource ranks; never computed here.
YU14 = "Yu, Duan & Ying, IEEE Trans. Inf. Theory 60, 2069 (2014)"
BANDYOPADHYAY11 = "Bandyopadhyay, Phys. Rev. Lett. 106, 210402 (2011)"
SHI20 = "Shi et al. (2020)"


@dataclass(frozen=True, eq=False)
class Candidate:
    """One member of a discrimination problem: a pure ket or a convex mixture of orthonormal kets."""

    label: str
    constituents: tuple[Ket, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.constituents) != len(self.weights) or not self.constituents:
            raise ValueError("candidate needs one weight per constituent")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1) > ATOL:
            raise ValueError(f"weights of {self.label!r} must be positive and sum to 1")
        if len(self.constituents) > 1:
            g = gram_matrix(list(self.constituents))
            if np.max(np.abs(g - np.eye(len(g)))) > ATOL:
                raise ValueError(f"constituents of {self.label!r} are not orthonormal")

    @property
    def is_pure(self) -> bool:
        return len(self.constituents) == 1

    @property
    def layout(self) -> SystemLayout:
        return self.constituents[0].layout

    @property
    def density(self) -> DensityOperator:
        n = self.layout.total_dim
        m = np.zeros((n, n), dtype=complex)
        for w, k in zip(self.weights, self.constituents):
            v = k.normalized()
            m += w * np.outer(v, v.conj())
        return DensityOperator(self.layout, m)

    def constituent_labels(self) -> list[str]:
        return [k.label or self.label for k in self.constituents]


def pure(k: Ket, label: str | None = None) -> Candidate:
    return Candidate(label or k.label, (k,), (1.0,))


def mixed(label: str, kets: Sequence[Ket], weights: Sequence[float] | None = None) -> Candidate:
    if weights is None:
        weights = [1.0 / len(kets)] * len(kets)
    return Candidate(label, tuple(kets), tuple(float(w) for w in weights))


@dataclass(frozen=True, eq=False)
class CatalogSet:
    name: str
    layout: SystemLayout
    candidates: tuple[Candidate, ...]
    metadata: dict = field(default_factory=dict)

    def labels(self) -> list[str]:
        return [c.label for c in self.candidates]

    def __getitem__(self, label: str) -> Candidate:
        for c in self.candidates:
            if c.label == label:
                return c
        raise KeyError(label)

    def constituents(self) -> list[tuple[str, str, Ket, float]]:
        """``(state label, candidate label, ket, weight)`` for every pure constituent."""
        out = []
        for c in self.candidates:
            for lab, k, w in zip(c.constituent_labels(), c.constituents, c.weights):
                out.append((lab, c.label, k, w))
        return out

    def kets(self) -> list[Ket]:
        return [k for _, _, k, _ in self.constituents()]

    def is_orthogonal(self, tol: float = ATOL) -> bool:
        g = gram_matrix(self.kets())
        return bool(np.max(np.abs(g - np.eye(len(g))), initial=0.0) <= tol)


def _product(layout: SystemLayout, a: np.ndarray, b: np.ndarray, label: str) -> Ket:
    return Ket(layout, kron(a, b), label)


def tiles_states() -> list[Ket]:
    """The six two-qutrit states: five Tiles product states and the entangled ``Psi_6``."""
    L = QUTRITS
    e = lambda i: basis_ket(3, i)  # noqa: E731
    p01m = superpose(3, {0: 1, 1: -1})
    p12m = superpose(3, {1: 1, 2: -1})
    p01 = superpose(3, {0: 1, 1: 1})
    p012 = superpose(3, [1, 1, 1])
    psi6 = kron(e(0), p01) - kron(p01, e(2))
    return [
        _product(L, e(0), p01m, "Psi_1"),
        _product(L, p01m, e(2), "Psi_2"),
        _product(L, e(2), p12m, "Psi_3"),
        _product(L, p12m, e(0), "Psi_4"),
        _product(L, p012, p012, "Psi_5"),
        Ket(L, psi6, "Psi_6"),
    ]


def tiles6() -> CatalogSet:
    kets = tiles_states()
    return CatalogSet("tiles6", QUTRITS, tuple(pure(k) for k in kets),
                      {"upb": "Psi_1..Psi_5 (Tiles UPB)", "standard_labels": True})


def tiles5() -> CatalogSet:
    kets = tiles_states()[:5]
    return CatalogSet("tiles5", QUTRITS, tuple(pure(k) for k in kets), {"upb": "analytic"})


def tiles4_no_stopper() -> CatalogSet:
    kets = tiles_states()[:4]
    return CatalogSet("tiles4-no-stopper", QUTRITS, tuple(pure(k) for k in kets), {"upb": "extendible"})


def tiles_rho_psi(weights: Sequence[float] | None = None) -> CatalogSet:
    """``{rho, psi}``: rho mixes the five Tiles states (uniform unless ``weights`` given), psi is ``Psi_6``."""
    kets = tiles_states()
    rho = mixed("rho", kets[:5], weights)
    psi = pure(kets[5], "psi")
    return CatalogSet("tiles-rho-psi", QUTRITS, (rho, psi),
                      {"many_copy_indistinguishable": ("cited", BANDYOPADHYAY11)})


def mes(d: int, layout: SystemLayout | None = None, label: str | None = None) -> Ket:
    layout = layout or SystemLayout.of(("A", d, "A"), ("B", d, "B"))
    v = sum(kron(basis_ket(d, i), basis_ket(d, i)) for i in range(d))
    return Ket(layout, v, label or f"mes{d}")


def yu_duan(d: int) -> CatalogSet:
    if d not in (3, 4):
        raise ValueError(f"yu_duan supports d = 3 or 4, got {d}")
    layout = QUTRITS if d == 3 else QUQUADS
    phi = mes(d, layout, "phi")
    v = phi.normalized()
    sigma_matrix = (np.eye(d * d) - np.outer(v, v.conj())) / (d * d - 1)
    # spectral decomposition of sigma: an orthonormal basis of the complement of phi
    w, vecs = np.linalg.eigh(sigma_matrix)
    comp = [Ket(layout, vecs[:, i], f"sigma_{j}") for j, i in enumerate(np.flatnonzero(w > 0.5 / (d * d)))]
    sigma = mixed("sigma", comp)
    return CatalogSet(f"yu-duan-{d}", layout, (sigma, pure(phi)), {
        "necessary_schmidt_rank": d,
        "necessary_schmidt_rank_source": ("cited", YU14),
        "many_copy_indistinguishable": ("cited", YU14),
    })


def _fourier3(offset: int, power: int) -> np.ndarray:
    """``|o + w^p (o+1) + w^2p (o+2)>`` on a ququad."""
    return superpose(4, {offset: 1, offset + 1: OMEGA ** power, offset + 2: OMEGA ** (2 * power)})


def quad_product_states() -> dict[str, Ket]:
    L = QUQUADS
    e = lambda i: basis_ket(4, i)  # noqa: E731
    out: dict[str, Ket] = {}
    powers = {1: 0, 2: 1, 3: 2}
    for j, pw in powers.items():
        out[f"Psi_1^({j})"] = _product(L, e(0), _fourier3(0, pw), f"Psi_1^({j})")
    for j, pw in powers.items():
        out[f"Psi_2^({j})"] = _product(L, _fourier3(0, pw), e(3), f"Psi_2^({j})")
    for j, pw in powers.items():
        out[f"Psi_3^({j})"] = _product(L, e(3), _fourier3(1, pw), f"Psi_3^({j})")
    for j, pw in powers.items():
        out[f"Psi_4^({j})"] = _product(L, _fourier3(1, pw), e(0), f"Psi_4^({j})")
    p = superpose(4, {1: 1, 2: 1})
    m = superpose(4, {1: 1, 2: -1})
    for j, (a, b) in enumerate([(p, p), (p, m), (m, p), (m, m)], start=1):
        out[f"Psi_5^({j})"] = _product(L, a, b, f"Psi_5^({j})")
    return out


def quad_psi6() -> Ket:
    u = superpose(4, [1, 1, 1, 1])
    return Ket(QUQUADS, kron(u, u), "Psi_6")


def quad_psi7() -> Ket:
    u = superpose(4, [1, 1, 1, 0])
    v = kron(basis_ket(4, 0), u) - kron(u, basis_ket(4, 3))
    return Ket(QUQUADS, v, "Psi_7")


def quad_product_basis() -> CatalogSet:
    kets = list(quad_product_states().values())
    return CatalogSet("quad-basis16", QUQUADS, tuple(pure(k) for k in kets), {"complete_basis": True})


def quad_upb_states() -> list[Ket]:
    states = quad_product_states()
    keep = [k for lab, k in states.items() if not lab.endswith("^(1)")]
    return keep + [quad_psi6()]


def quad_upb() -> CatalogSet:
    return CatalogSet("quad-upb12", QUQUADS, tuple(pure(k) for k in quad_upb_states()),
                      {"upb": ("cited", SHI20)})


def quad13() -> CatalogSet:
    kets = quad_upb_states() + [quad_psi7()]
    return CatalogSet("quad13", QUQUADS, tuple(pure(k) for k in kets), {})


def quad_S(weights: Sequence[float] | None = None) -> CatalogSet:
    mix = mixed("mixed", quad_upb_states(), weights)
    return CatalogSet("quad-S", QUQUADS, (mix, pure(quad_psi7(), "pure")),
                      {"many_copy_indistinguishable": ("cited", BANDYOPADHYAY11)})


def resource_phi() -> Ket:
    v = kron(basis_ket(2, 0), basis_ket(2, 0)) + kron(basis_ket(2, 1), basis_ket(2, 1))
    return Ket(ANCILLA, v, "phi_ab")


def product_resource() -> Ket:
    return Ket(ANCILLA, kron(basis_ket(2, 0), basis_ket(2, 0)), "00_ab")


def variant_entangled() -> Ket:
    """``|1+2>|0> - |2>|1+2>``: an alternative member of the Tiles complement."""
    p12 = superpose(3, {1: 1, 2: 1})
    v = kron(p12, basis_ket(3, 0)) - kron(basis_ket(3, 2), p12)
    return Ket(QUTRITS, v, "Psi_6'")


def variant_set() -> CatalogSet:
    kets = tiles_states()[:5] + [variant_entangled()]
    return CatalogSet("tiles-variant", QUTRITS, tuple(pure(k) for k in kets), {})


SETS = {
    "tiles6": tiles6,
    "tiles5": tiles5,
    "tiles4-no-stopper": tiles4_no_stopper,
    "tiles-rho-psi": tiles_rho_psi,
    "tiles-variant": variant_set,
    "yu-duan-3": lambda: yu_duan(3),
    "yu-duan-4": lambda: yu_duan(4),
    "quad-basis16": quad_product_basis,
    "quad-upb12": quad_upb,
    "quad13": quad13,
    "quad-S": quad_S,
}


def named_states() -> dict[str, Ket]:
    """Single states addressable by name (CLI ``schmidt --state``)."""
    t = tiles_states()
    out = {f"psi{i + 1}": k for i, k in enumerate(t)}
    out.update({
        "psi7": quad_psi7(),
        "quad-psi6": quad_psi6(),
        "phi": resource_phi(),
        "mes2": mes(2),
        "mes3": mes(3),
        "mes4": mes(4),
        "variant": variant_entangled(),
    })
    return out


def get_set(name: str) -> CatalogSet:
    try:
        return SETS[name]()
    except KeyError:
        raise KeyError(f"unknown set {name!r}; choose from {', '.join(SETS)}") from None
