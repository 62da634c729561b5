"""Numerical unextendibility checks for orthogonal product sets.

The complement of a product set contains a product state iff
``max <ab|Q|ab>`` over unit ``a``, ``b`` equals 1, with ``Q`` the projector onto
the complement. The maximum is searched by alternating exact eigenvector
steps from random starts. A value below the threshold is evidence, not proof,
so the verdict is "unextendible-candidate".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .catalog import CatalogSet
from .tensor import ATOL, Ket, Projector, gram_matrix, schmidt_rank, schmidt_decompose

UNEXTENDIBLE = "unextendible-candidate"
EXTENDIBLE = "extendible"
COMPLETE = "complete-basis"


@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 50
    max_iters: int = 500
    tol: float = 1e-14
    seed: int = 0
    threshold: float = 1 - 1e-6

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")


@dataclass
class UpbVerdict:
    max_overlap: float
    witness: tuple[np.ndarray, np.ndarray] | None
    traces: list[np.ndarray]
    verdict: str
    best_restart: int = -1
    complement_rank: int = -1
    config: SeesawConfig = field(default_factory=SeesawConfig)

    @property
    def extendible(self) -> bool:
        return self.verdict == EXTENDIBLE


def complement_projector(states: list[Ket], tol: float = ATOL) -> Projector:
    """``I - sum |s><s|`` over the normalized states, which must be mutually orthogonal."""
    if not states:
        raise ValueError("need at least one state")
    g = gram_matrix(states)
    if np.max(np.abs(g - np.eye(len(g)))) > tol:
        raise ValueError("states are not mutually orthogonal")
    layout = states[0].layout
    v = np.column_stack([s.normalized() for s in states])
    n = layout.total_dim
    return Projector(layout.ids, layout.dims, np.eye(n) - v @ v.conj().T)


def _random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def product_overlap(q: Projector, a: np.ndarray, b: np.ndarray) -> float:
    x = np.kron(a, b)
    return float(np.vdot(x, q.matrix @ x).real)


def seesaw_max_product_overlap(q: Projector, dims: tuple[int, int], cfg: SeesawConfig = SeesawConfig()) -> UpbVerdict:
    da, db = dims
    if q.size != da * db:
        raise ValueError(f"projector size {q.size} does not match dims {dims}")
    q4 = np.ascontiguousarray(q.matrix.reshape(da, db, da, db))
    rng = np.random.default_rng(cfg.seed)
    best, best_r, witness = -np.inf, -1, None
    traces = []
    for r in range(cfg.restarts):
        a0, b0 = _random_unit(rng, da), _random_unit(rng, db)
        a, b, tr = kernels.seesaw_restart(q4, a0, b0, cfg.max_iters, cfg.tol)
        traces.append(tr)
        # strict comparison keeps the earliest restart on ties
        if tr[-1] > best:
            best, best_r, witness = float(tr[-1]), r, (np.asarray(a), np.asarray(b))
    verdict = EXTENDIBLE if best >= cfg.threshold else UNEXTENDIBLE
    return UpbVerdict(best, witness, traces, verdict, best_r, q.rank, cfg)


class NotProductError(ValueError):
    pass


def check_upb(cset: CatalogSet, cfg: SeesawConfig = SeesawConfig()) -> UpbVerdict:
    kets = cset.kets()
    parties = cset.layout.parties
    for k in kets:
        if schmidt_rank(k, parties) != 1:
            raise NotProductError(f"{k.label} is not a product state across {parties}")
    q = complement_projector(kets)
    da, db = (int(np.prod(cset.layout.dims_of(cset.layout.owned_by(p)))) for p in parties)
    if q.rank == 0:
        return UpbVerdict(0.0, None, [], COMPLETE, -1, 0, cfg)
    return seesaw_max_product_overlap(q, (da, db), cfg)


def product_factors(k: Ket) -> tuple[np.ndarray, np.ndarray]:
    """Local factors of a product ket (largest Schmidt term)."""
    sd = schmidt_decompose(k, k.layout.parties)
    return sd.left[:, 0] * sd.coefficients[0], sd.right[:, 0]
