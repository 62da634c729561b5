"""Report builders shared by the command line: hierarchy table, lock demo, JSON envelopes.

JSON reports are plain dicts whose key order is fixed by construction, wrapped
in a versioned envelope and validated against :data:`REPORT_SCHEMA` before
they are printed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import log2
from typing import Any

import jsonschema
import numpy as np

from .builtin import prop1_protocol, prop3_protocol
from .catalog import BANDYOPADHYAY11, get_set, quad_S, tiles_rho_psi
from .protocol import (
    ProtocolTree,
    VerificationReport,
    iter_measurements,
    lift_mixed,
    resource_cost,
    sample_run,
    teleport_baseline,
)
from .tensor import Ket, tensor
from .upb import UpbVerdict

REPORT_FORMAT = "loccsim-report"
REPORT_VERSION = 1

VERIFIED = "verified"
CITED = "cited"
UNVERIFIED = "unverified"
CITED_NOT_VERIFIED = "cited, not verified"

_num = {"type": "number"}
_str = {"type": "string"}
_bool = {"type": "boolean"}
_cplx = {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}


def _obj(props: dict, required: list[str] | None = None) -> dict:
    return {"type": "object", "properties": props,
            "required": list(props) if required is None else required}


_RESULTS = {
    "verify": _obj({
        "protocol": _str, "set": _str, "passed": _bool, "resource_rank": {"type": "integer"},
        "tolerance": _num,
        "constituents": {"type": "array", "items": _obj({"label": _str, "candidate": _str, "group": _str,
                                                         "success": _num})},
        "candidates": {"type": "object", "additionalProperties": _num},
        "groups": {"type": "object", "additionalProperties": _num},
        "nodes": {"type": "array", "items": _obj({"path": _str, "measurement": _str, "party": _str,
                                                  "valid": _bool, "survivors": {"type": "array"},
                                                  "problems": {"type": "array"}})},
        "leaves": {"type": "array", "items": _obj({"path": _str, "decision": _str,
                                                   "masses": {"type": "object"}})},
        "failures": {"type": "array", "items": _str},
    }),
    "upb-check": _obj({
        "set": _str, "verdict": {"enum": ["unextendible-candidate", "extendible", "complete-basis"]},
        "max_overlap": _num, "complement_rank": {"type": "integer"}, "restarts": {"type": "integer"},
        "iters": {"type": "integer"}, "seed": {"type": "integer"}, "threshold": _num,
        "best_restart": {"type": "integer"}, "monotone": _bool,
        "witness": {"oneOf": [{"type": "null"}, _obj({"a": _cplx, "b": _cplx, "overlap": _num})]},
    }),
    "hierarchy": _obj({
        "rows": {"type": "array", "items": _obj({
            "symbol": _str, "set": _str, "dims": {"type": "array", "items": {"type": "integer"}},
            "kind": {"enum": ["sufficient", "necessary"]},
            "schmidt_rank": {"type": ["integer", "null"]}, "ebits": {"type": ["number", "null"]},
            "provenance": {"enum": [VERIFIED, CITED, UNVERIFIED]}, "source": _str,
            "teleport_baseline_ebits": _num,
        })},
        "deltas": {"type": "array", "items": _obj({
            "name": _str, "low": _str, "high": _str, "rank": {"type": ["integer", "null"]},
            "ebits": {"type": ["number", "null"]},
        })},
    }),
    "lock-demo": _obj({
        "pairs": {"type": "integer", "minimum": 1}, "bit": {"enum": [0, 1]}, "seed": {"type": "integer"},
        "message": _str, "protocol": _str, "lift_passed": _bool,
        "transcript": {"type": "array", "items": _obj({
            "pair": {"type": "integer"}, "sent": _str, "leaf": _str, "decoded": {"type": ["string", "null"]},
            "success": _bool, "success_probability": _num, "schmidt_rank": {"type": "integer"}, "ebits": _num,
        })},
        "decoded": {"type": "integer"}, "total_ebits": _num, "all_success": _bool,
        "security_notes": {"type": "array", "items": _obj({"claim": _str, "provenance": {"const": CITED_NOT_VERIFIED},
                                                           "source": _str})},
    }),
    "schmidt": _obj({"state": _str, "coefficients": {"type": "array", "items": _num},
                     "rank": {"type": "integer"}, "ebits_if_maximal": _num}),
}

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "version", "command", "result"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "version": {"const": REPORT_VERSION},
        "command": {"enum": sorted(_RESULTS)},
        "result": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": cmd}}}, "then": {"properties": {"result": sch}}}
        for cmd, sch in _RESULTS.items()
    ],
}


def envelope(command: str, result: dict) -> dict:
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION, "command": command, "result": result}
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def to_json(command: str, result: dict) -> str:
    return json.dumps(envelope(command, result), indent=2, ensure_ascii=False)


def _c(v: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v)]


# verification --------------------------------------------------------------

def verification_result(rep: VerificationReport, tree: ProtocolTree, cset, tol: float) -> dict:
    cons = [{"label": lab, "candidate": cand, "group": rep.grouping.get(lab, lab),
             "success": rep.constituent_success[lab]} for lab, cand, _, _ in cset.constituents()]
    info = dict(iter_measurements(tree))
    nodes = []
    for path, chk in rep.node_checks.items():
        m = info[path]
        nodes.append({"path": path, "measurement": m.name, "party": m.party, "valid": bool(chk),
                      "survivors": list(rep.survivors.get(path, ())), "problems": list(chk.problems)})
    leaves = [{"path": p, "decision": d, "masses": rep.leaf_masses.get(p, {})} for p, d in rep.leaf_decisions.items()]
    return {
        "protocol": rep.protocol, "set": rep.set_name, "passed": rep.passed,
        "resource_rank": rep.resource_rank, "tolerance": tol, "constituents": cons,
        "candidates": rep.candidate_success, "groups": rep.group_success,
        "nodes": nodes, "leaves": leaves, "failures": list(rep.failures),
    }


def verification_text(result: dict) -> str:
    lines = [f"protocol {result['protocol']} on set {result['set']}: "
             f"{'PASS' if result['passed'] else 'FAIL'}",
             f"resource Schmidt rank: {result['resource_rank']}",
             "success probabilities:"]
    for c in result["constituents"]:
        grp = f" [{c['group']}]" if c["group"] != c["label"] else ""
        lines.append(f"  {c['label']:<14}{grp} {c['success']:.12f}")
    if any(c["group"] != c["label"] for c in result["constituents"]):
        lines.append("group success:")
        for g, v in result["groups"].items():
            lines.append(f"  {g:<14} {v:.12f}")
    bad = [n for n in result["nodes"] if not n["valid"]]
    lines.append(f"measurements checked: {len(result['nodes'])} ({len(bad)} invalid)")
    lines.append(f"leaves: {len(result['leaves'])}")
    for f in result["failures"]:
        lines.append(f"  failure: {f}")
    return "\n".join(lines)


# upb -----------------------------------------------------------------------

def upb_result(name: str, v: UpbVerdict, q=None) -> dict:
    cfg = v.config
    steps = [float(np.min(np.diff(t))) for t in v.traces if len(t) > 1]
    wit = None
    if v.witness is not None:
        a, b = v.witness
        ov = float(np.vdot(np.kron(a, b), q.matrix @ np.kron(a, b)).real) if q is not None else v.max_overlap
        wit = {"a": _c(a), "b": _c(b), "overlap": ov}
    return {
        "set": name, "verdict": v.verdict, "max_overlap": float(v.max_overlap),
        "complement_rank": int(v.complement_rank), "restarts": cfg.restarts, "iters": cfg.max_iters,
        "seed": cfg.seed, "threshold": cfg.threshold, "best_restart": v.best_restart,
        "monotone": all(s >= -1e-12 for s in steps), "witness": wit,
    }


def _fmt_vec(v) -> str:
    parts = []
    for re, im in v:
        z = complex(round(re, 4), round(im, 4))
        parts.append(f"{z.real:+.4f}" if abs(z.imag) < 5e-5 else f"{z:.4f}")
    return "(" + ", ".join(parts) + ")"


def upb_text(r: dict) -> str:
    lines = [f"set {r['set']}: {r['verdict']}",
             f"complement rank: {r['complement_rank']}",
             f"max product overlap: {r['max_overlap']:.15f} (threshold {r['threshold']})",
             f"restarts {r['restarts']}, iters {r['iters']}, seed {r['seed']}, best restart {r['best_restart']}",
             f"traces monotone: {r['monotone']}"]
    if r["verdict"] == "extendible" and r["witness"]:
        lines.append(f"witness a = {_fmt_vec(r['witness']['a'])}")
        lines.append(f"witness b = {_fmt_vec(r['witness']['b'])}")
        lines.append(f"witness overlap: {r['witness']['overlap']:.15f}")
    if r["verdict"] == "unextendible-candidate":
        lines.append("note: numerical evidence only, not a proof")
    return "\n".join(lines)


# hierarchy -----------------------------------------------------------------

@dataclass
class HierarchyRow:
    symbol: str
    set_name: str
    dims: tuple[int, int]
    kind: str
    schmidt_rank: int | None
    provenance: str
    source: str
    baseline: float
    report: VerificationReport | None = field(default=None, repr=False)

    @property
    def ebits(self) -> float | None:
        return None if self.schmidt_rank is None else log2(self.schmidt_rank)

    def as_dict(self) -> dict:
        return {"symbol": self.symbol, "set": self.set_name, "dims": list(self.dims), "kind": self.kind,
                "schmidt_rank": self.schmidt_rank, "ebits": self.ebits, "provenance": self.provenance,
                "source": self.source, "teleport_baseline_ebits": self.baseline}


def _verified_row(symbol: str, tree: ProtocolTree, cset) -> HierarchyRow:
    rep = lift_mixed(tree, cset)
    layout = cset.layout
    dims = tuple(int(d) for d in layout.dims)
    base = teleport_baseline(layout)
    if rep.passed:
        return HierarchyRow(symbol, cset.name, dims, "sufficient", resource_cost(tree).schmidt_rank, VERIFIED,
                            f"{tree.name} lift on {cset.name}, this run", base, rep)
    return HierarchyRow(symbol, cset.name, dims, "sufficient", None, UNVERIFIED,
                        f"{tree.name} lift on {cset.name} failed in this run", base, rep)


def _cited_row(symbol: str, set_name: str) -> HierarchyRow:
    cset = get_set(set_name)
    tag, source = cset.metadata["necessary_schmidt_rank_source"]
    assert tag == CITED
    dims = tuple(int(d) for d in cset.layout.dims)
    return HierarchyRow(symbol, set_name, dims, "necessary", int(cset.metadata["necessary_schmidt_rank"]), CITED,
                        source, teleport_baseline(cset.layout))


def hierarchy_rows() -> list[HierarchyRow]:
    return [
        _verified_row("𝒮", prop1_protocol(), tiles_rho_psi()),
        _cited_row("𝒮′", "yu-duan-3"),
        _verified_row("𝕊", prop3_protocol(), quad_S()),
        _cited_row("𝕊′", "yu-duan-4"),
    ]


def _delta(name: str, low: HierarchyRow, high: HierarchyRow) -> dict:
    ok = low.schmidt_rank is not None and high.schmidt_rank is not None
    return {"name": name, "low": low.symbol, "high": high.symbol,
            "rank": high.schmidt_rank - low.schmidt_rank if ok else None,
            "ebits": high.ebits - low.ebits if ok else None}


def hierarchy_result(rows: list[HierarchyRow] | None = None) -> dict:
    rows = rows if rows is not None else hierarchy_rows()
    return {"rows": [r.as_dict() for r in rows],
            "deltas": [_delta("ΔE", rows[0], rows[1]), _delta("ΔE′", rows[2], rows[3])]}


def hierarchy_text(r: dict) -> str:
    head = f"{'set':<4} {'catalog':<14} {'dims':<6} {'kind':<11} {'rank':>4} {'ebits':>6} {'teleport':>8}  provenance"
    lines = [head, "-" * len(head)]
    for row in r["rows"]:
        rank = "-" if row["schmidt_rank"] is None else str(row["schmidt_rank"])
        eb = "-" if row["ebits"] is None else f"{row['ebits']:.3f}"
        dims = "x".join(str(d) for d in row["dims"])
        lines.append(f"{row['symbol']:<4} {row['set']:<14} {dims:<6} {row['kind']:<11} {rank:>4} {eb:>6} "
                     f"{row['teleport_baseline_ebits']:>8.3f}  {row['provenance']} ({row['source']})")
    lines.append("")
    for d in r["deltas"]:
        if d["rank"] is None:
            lines.append(f"{d['name']} = E({d['high']}) - E({d['low']}): unavailable")
        else:
            lines.append(f"{d['name']} = E({d['high']}) - E({d['low']}) = {d['rank']} in Schmidt rank "
                         f"({d['ebits']:.3f} ebits)")
    a, b = r["deltas"]
    if a["rank"] is not None and b["rank"] is not None:
        lines.append(f"{b['name']} {'>' if b['rank'] > a['rank'] else '<='} {a['name']}")
    return "\n".join(lines)


# lock demo -----------------------------------------------------------------

SECURITY_NOTES = (
    ("copies of rho and psi cannot be perfectly distinguished by LOCC for any finite number of copies",
     BANDYOPADHYAY11),
    ("no LOCC strategy on finitely many copies gives a conclusive answer with nonzero probability",
     BANDYOPADHYAY11),
)


@dataclass
class LockDemoTranscript:
    pairs: int
    bit: int
    seed: int
    rows: list[dict]
    lift_passed: bool

    @property
    def all_success(self) -> bool:
        return self.lift_passed and all(r["success"] for r in self.rows)


def lock_demo(pairs: int, bit: int, seed: int) -> LockDemoTranscript:
    """Encode ``bit`` as rho (0) or psi (1) on every pair and decode each pair with one fresh ebit."""
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    tree = prop1_protocol()
    cset = tiles_rho_psi()
    rep = lift_mixed(tree, cset)
    cost = resource_cost(tree)
    cand = cset[("rho", "psi")[bit]]
    rng = np.random.default_rng(seed)
    res = Ket(tree.resource.layout, tree.resource.normalized(), tree.resource.label)
    rows = []
    for i in range(pairs):
        j = int(rng.choice(len(cand.constituents), p=np.asarray(cand.weights)))
        k = cand.constituents[j]
        sent = k.label or cand.label
        state = tensor(Ket(k.layout, k.normalized()), res).relabel(sent)
        path, label = sample_run(tree, rep, state, rng)
        decoded = rep.grouping.get(label) if label is not None else None
        rows.append({
            "pair": i + 1, "sent": sent, "leaf": path, "decoded": decoded,
            "success": decoded == cand.label,
            "success_probability": rep.constituent_success[sent],
            "schmidt_rank": cost.schmidt_rank, "ebits": cost.ebits,
        })
    return LockDemoTranscript(pairs, bit, seed, rows, rep.passed)


def lock_result(t: LockDemoTranscript) -> dict:
    return {
        "pairs": t.pairs, "bit": t.bit, "seed": t.seed, "message": ("rho", "psi")[t.bit],
        "protocol": "prop1", "lift_passed": t.lift_passed, "transcript": t.rows,
        "decoded": sum(r["success"] for r in t.rows), "total_ebits": float(sum(r["ebits"] for r in t.rows)),
        "all_success": t.all_success,
        "security_notes": [{"claim": c, "provenance": CITED_NOT_VERIFIED, "source": s} for c, s in SECURITY_NOTES],
    }


def lock_text(r: dict) -> str:
    lines = [f"message bit {r['bit']} encoded as {r['message']} on {r['pairs']} pair(s), seed {r['seed']}",
             f"{'pair':>4}  {'sent':<8} {'decoded':<8} {'ok':<3} {'P(success)':>10} {'rank':>4} {'ebits':>5}  leaf"]
    for row in r["transcript"]:
        lines.append(f"{row['pair']:>4}  {row['sent']:<8} {str(row['decoded']):<8} "
                     f"{'yes' if row['success'] else 'no':<3} {row['success_probability']:>10.6f} "
                     f"{row['schmidt_rank']:>4} {row['ebits']:>5.1f}  {row['leaf']}")
    lines.append(f"decoded {r['decoded']}/{r['pairs']} as {r['message']}, total {r['total_ebits']:.1f} ebits")
    lines.append("security notes:")
    for n in r["security_notes"]:
        lines.append(f"  [{n['provenance']}] {n['claim']} ({n['source']})")
    return "\n".join(lines)


# schmidt -------------------------------------------------------------------

def schmidt_result(name: str, coeffs: np.ndarray, rank: int) -> dict:
    return {"state": name, "coefficients": [float(c) for c in coeffs], "rank": rank,
            "ebits_if_maximal": log2(rank) if rank else 0.0}


def schmidt_text(r: dict) -> str:
    cs = ", ".join(f"{c:.12f}" for c in r["coefficients"])
    return f"state {r['state']}\nSchmidt coefficients (normalized): {cs}\nSchmidt rank: {r['rank']}"
