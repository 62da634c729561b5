"""JSON text format for protocol trees.

Layout of a file::

    {"format": "loccsim-protocol", "version": 1, "name": ..., "target": ...,
     "resource": {"label": ..., "subsystems": [{"id", "dim", "party"}, ...],
                  "terms": [{"basis": "00", "amp": [re, im]}, ...]},
     "root": NODE}

    NODE = {"measure": {"party", "name", "subsystems", "dims",
                        "outcomes": [{"name", "vectors": [[TERM, ...], ...]}, ...]},
            "children": [NODE, ...]}
         | {"leaf": "identify" | "two_state" | "eliminated", "labels": [...]}

Each outcome lists orthonormal vectors spanning its projector, written as sparse
amplitudes over basis labels of the measured subsystems (one digit per
subsystem, comma separated once any dimension exceeds 10). Floats are written
with ``repr`` precision, so built-in trees round-trip byte for byte.
"""

from __future__ import annotations

import json
from itertools import product
from typing import Any

import jsonschema
import numpy as np

from .protocol import Leaf, LocalMeasurement, Measure, Node, ProtocolTree
from .tensor import Ket, LayoutError, Projector, SystemLayout

FORMAT = "loccsim-protocol"
VERSION = 1

_TERM = {
    "type": "object",
    "required": ["basis", "amp"],
    "additionalProperties": False,
    "properties": {
        "basis": {"type": "string"},
        "amp": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "version", "name", "resource", "root"],
    "additionalProperties": False,
    "properties": {
        "format": {"const": FORMAT},
        "version": {"const": VERSION},
        "name": {"type": "string"},
        "target": {"type": ["string", "null"]},
        "resource": {
            "type": "object",
            "required": ["subsystems", "terms"],
            "additionalProperties": False,
            "properties": {
                "label": {"type": ["string", "null"]},
                "subsystems": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id", "dim", "party"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string"},
                            "dim": {"type": "integer", "minimum": 1},
                            "party": {"type": "string"},
                        },
                    },
                },
                "terms": {"type": "array", "items": _TERM},
            },
        },
        "root": {"$ref": "#/$defs/node"},
    },
    "$defs": {
        "node": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["leaf"],
                    "additionalProperties": False,
                    "properties": {
                        "leaf": {"enum": ["identify", "two_state", "eliminated"]},
                        "labels": {"type": "array", "items": {"type": "string"}},
                    },
                },
                {
                    "type": "object",
                    "required": ["measure", "children"],
                    "additionalProperties": False,
                    "properties": {
                        "measure": {
                            "type": "object",
                            "required": ["party", "subsystems", "dims", "outcomes"],
                            "additionalProperties": False,
                            "properties": {
                                "party": {"type": "string"},
                                "name": {"type": "string"},
                                "subsystems": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                         "minItems": 1},
                                "outcomes": {
                                    "type": "array",
                                    "minItems": 1,
                                    "items": {
                                        "type": "object",
                                        "required": ["name", "vectors"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "name": {"type": "string"},
                                            "vectors": {"type": "array",
                                                        "items": {"type": "array", "items": _TERM}},
                                        },
                                    },
                                },
                            },
                        },
                        "children": {"type": "array", "items": {"$ref": "#/$defs/node"}},
                    },
                },
            ]
        }
    },
}


class ProtocolFormatError(ValueError):
    """Malformed protocol text. ``line``/``column`` are set for syntax errors, ``path`` for structural ones."""

    def __init__(self, msg: str, line: int | None = None, column: int | None = None, path: str | None = None):
        self.line, self.column, self.path = line, column, path
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path is not None:
            where.append(path)
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)


def _sep(dims) -> str:
    return "," if max(dims) > 10 else ""


def _labels(dims) -> list[str]:
    sep = _sep(dims)
    return [sep.join(str(i) for i in idx) for idx in product(*(range(d) for d in dims))]


def _amp(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _terms(v: np.ndarray, dims) -> list[dict]:
    return [{"basis": lab, "amp": _amp(z)} for lab, z in zip(_labels(dims), v) if z != 0]


def _vector(terms: list[dict], dims, path: str) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(_labels(dims))}
    v = np.zeros(len(index), dtype=complex)
    for j, t in enumerate(terms):
        i = index.get(t["basis"])
        if i is None:
            raise ProtocolFormatError(f"basis label {t['basis']!r} does not fit dims {list(dims)}",
                                      path=f"{path}[{j}].basis")
        v[i] += complex(t["amp"][0], t["amp"][1])
    return v


def _node_doc(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.kind, "labels": list(node.labels)}
    m = node.measurement
    outs = []
    for name, p in zip(m.outcomes, m.projectors):
        vecs = p.range_basis()
        outs.append({"name": name, "vectors": [_terms(vecs[:, i], p.dims) for i in range(vecs.shape[1])]})
    return {
        "measure": {"party": m.party, "name": m.name, "subsystems": list(m.subsystems),
                    "dims": list(m.projectors[0].dims), "outcomes": outs},
        "children": [_node_doc(c) for c in node.children],
    }


def to_document(tree: ProtocolTree) -> dict:
    lay = tree.resource.layout
    return {
        "format": FORMAT,
        "version": VERSION,
        "name": tree.name,
        "target": tree.target,
        "resource": {
            "label": tree.resource.label,
            "subsystems": [{"id": s.id, "dim": s.dim, "party": s.party} for s in lay.subsystems],
            "terms": _terms(tree.resource.amplitudes, lay.dims),
        },
        "root": _node_doc(tree.root),
    }


def dumps(tree: ProtocolTree) -> str:
    return json.dumps(to_document(tree), indent=1) + "\n"


def _schema_path(err: jsonschema.ValidationError) -> str:
    out = "$"
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _node(doc: dict, path: str) -> Node:
    if "leaf" in doc:
        try:
            return Leaf(doc["leaf"], tuple(doc.get("labels", ())))
        except ValueError as exc:
            raise ProtocolFormatError(str(exc), path=path) from None
    md = doc["measure"]
    subs, dims = tuple(md["subsystems"]), tuple(md["dims"])
    if len(subs) != len(dims):
        raise ProtocolFormatError("subsystems and dims differ in length", path=f"{path}.measure")
    n = int(np.prod(dims))
    projs, names = [], []
    for i, out in enumerate(md["outcomes"]):
        opath = f"{path}.measure.outcomes[{i}].vectors"
        cols = [_vector(t, dims, f"{opath}[{j}]") for j, t in enumerate(out["vectors"])]
        v = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=complex)
        projs.append(Projector(subs, dims, v @ v.conj().T, v))
        names.append(out["name"])
    kids = doc["children"]
    if len(kids) != len(projs):
        raise ProtocolFormatError(f"{len(projs)} outcomes but {len(kids)} children", path=f"{path}.children")
    m = LocalMeasurement(md["party"], tuple(projs), tuple(names), md.get("name", ""))
    return Measure(m, tuple(_node(c, f"{path}.children[{i}]") for i, c in enumerate(kids)))


def from_document(doc: Any) -> ProtocolTree:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errs:
        best = jsonschema.exceptions.best_match(errs)
        raise ProtocolFormatError(best.message, path=_schema_path(best))
    r = doc["resource"]
    try:
        lay = SystemLayout.of(*((s["id"], s["dim"], s["party"]) for s in r["subsystems"]))
    except LayoutError as exc:
        raise ProtocolFormatError(str(exc), path="$.resource.subsystems") from None
    amps = _vector(r["terms"], lay.dims, "$.resource.terms")
    res = Ket(lay, amps, r.get("label"))
    return ProtocolTree(doc["name"], res, _node(doc["root"], "$.root"), doc.get("target"))


def loads(text: str) -> ProtocolTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolFormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return from_document(doc)


def dump(tree: ProtocolTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(tree))


def load(path) -> ProtocolTree:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _same_node(x: Node, y: Node, tol: float) -> bool:
    if isinstance(x, Leaf) or isinstance(y, Leaf):
        return x == y
    mx, my = x.measurement, y.measurement
    if (mx.party, mx.name, mx.outcomes, mx.subsystems) != (my.party, my.name, my.outcomes, my.subsystems):
        return False
    if len(x.children) != len(y.children):
        return False
    for p, q in zip(mx.projectors, my.projectors):
        if p.dims != q.dims or np.max(np.abs(p.matrix - q.matrix), initial=0.0) > tol:
            return False
    return all(_same_node(a, b, tol) for a, b in zip(x.children, y.children))


def trees_equal(x: ProtocolTree, y: ProtocolTree, tol: float = 0.0) -> bool:
    """Structural equality; projector matrices and resource amplitudes compared entrywise within ``tol``."""
    if (x.name, x.target, x.resource.label) != (y.name, y.target, y.resource.label):
        return False
    if x.resource.layout != y.resource.layout:
        return False
    if np.max(np.abs(x.resource.amplitudes - y.resource.amplitudes)) > tol:
        return False
    return _same_node(x.root, y.root, tol)
