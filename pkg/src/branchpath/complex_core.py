"""Layered branched complexes, their boundary matrices, and refinement.

A branched complex is a finite set of top simplices laid out on integer time
slices. Vertices carry a coordinate ``(t, x)``; only the first ``n_dim``
components of ``x`` are spatial, any further components are sheet labels
that keep coincident points on different branches apart. Shared faces are
computed from vertex sets, never declared.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

import jsonschema
import numpy as np

from .errors import (
    DanglingFace,
    MalformedDescription,
    RefinementUnsupported,
    UnknownSimplex,
    WeightBelowBound,
)

__all__ = [
    "COMPLEX_SCHEMA",
    "Vertex",
    "Simplex",
    "Face",
    "BranchedComplex",
    "BoundaryMatrix",
    "build_complex",
    "load_complex",
    "dump_complex",
    "complex_to_description",
    "boundary_matrix",
    "refine",
    "disjoint_union",
    "natural_key",
    "to_fraction",
]

_ID = {"type": ["string", "integer"]}
_NUMBER = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+|\.\d+)?\s*$"},
    ]
}

COMPLEX_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "branched complex description",
    "type": "object",
    "additionalProperties": False,
    "required": ["n_dim", "vertices", "simplices", "lower_bound_L"],
    "properties": {
        "n_dim": {"type": "integer", "minimum": 0},
        "lower_bound_L": _NUMBER,
        "total_weight": _NUMBER,
        "vertices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "t", "x"],
                "properties": {
                    "id": _ID,
                    "t": {"type": "integer"},
                    "x": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
        "simplices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "vertices"],
                "properties": {
                    "id": _ID,
                    "vertices": {"type": "array", "items": _ID, "minItems": 2},
                    "weight": _NUMBER,
                    "field": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                    "region": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}

_DIGITS = re.compile(r"(\d+)")


def natural_key(ident: str) -> tuple:
    """Sort key that orders ``w2`` before ``w10``."""
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in _DIGITS.split(ident) if p)


def to_fraction(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise MalformedDescription(f"boolean is not a number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # repr round-trips, so 0.1 means 1/10 rather than the binary expansion
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.replace(" ", ""))
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedDescription(f"not a rational number: {value!r}") from exc
    raise MalformedDescription(f"not a number: {value!r}")


def _perm_sign(seq: Sequence[str], target: Sequence[str]) -> int:
    pos = {v: i for i, v in enumerate(target)}
    perm = [pos[v] for v in seq]
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class Vertex:
    id: str
    t: int
    x: tuple[int, ...]


@dataclass(frozen=True)
class Simplex:
    """Top simplex. The listed vertex order carries the orientation."""

    id: str
    vertex_ids: tuple[str, ...]
    layer_span: tuple[int, int]
    region: int = 0

    @property
    def t_start(self) -> int:
        return self.layer_span[0]

    @property
    def t_end(self) -> int:
        return self.layer_span[1]


@dataclass(frozen=True)
class Face:
    id: str
    vertex_ids: tuple[str, ...]
    incident_simplex_ids: tuple[str, ...]
    signs: tuple[int, ...]


@dataclass(frozen=True)
class BoundaryMatrix:
    """Signed face/simplex incidence. Rows are shared faces, columns simplices."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    data: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_ids), len(self.col_ids))

    def apply(self, vector: Sequence[Any]) -> list[Any]:
        """Exact product ``D @ vector`` (works for Fractions and ints)."""
        if len(vector) != len(self.col_ids):
            raise ValueError(f"vector has {len(vector)} entries, D has {len(self.col_ids)} columns")
        out = []
        for row in self.data:
            acc = 0
            for coeff, v in zip(row.tolist(), vector):
                if coeff:
                    acc += coeff * v
            out.append(acc)
        return out

    def annihilates(self, vector: Sequence[Any]) -> bool:
        return all(v == 0 for v in self.apply(vector))

    def to_list(self) -> list[list[int]]:
        return self.data.tolist()


@dataclass(frozen=True, eq=False)
class BranchedComplex:
    n_dim: int
    vertices: Mapping[str, Vertex]
    simplices: tuple[Simplex, ...]
    faces: tuple[Face, ...]
    lower_bound: Fraction
    total_weight: Fraction | None = None
    weights: Mapping[str, Fraction] | None = None
    field_values: Mapping[str, tuple[complex, ...]] | None = None
    _index: Mapping[str, int] = field(default=MappingProxyType({}), repr=False)

    @property
    def simplex_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.simplices)

    def simplex(self, sid: str) -> Simplex:
        try:
            return self.simplices[self._index[sid]]
        except KeyError:
            raise UnknownSimplex(f"unknown simplex {sid!r}") from None

    def column(self, sid: str) -> int:
        self.simplex(sid)
        return self._index[sid]

    @property
    def t_min(self) -> int:
        return min(s.t_start for s in self.simplices)

    @property
    def t_max(self) -> int:
        return max(s.t_end for s in self.simplices)

    def projected(self, vid: str) -> tuple[int, tuple[int, ...]]:
        """Image of a vertex under the coordinate map (time, spatial part of x)."""
        v = self.vertices[vid]
        return (v.t, v.x[: self.n_dim])

    def simplices_at(self, t: int) -> list[Simplex]:
        """Simplices whose time span covers the unit step [t, t+1)."""
        return [s for s in self.simplices if s.t_start <= t < s.t_end]

    def first_layer(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.simplices if s.t_start == self.t_min)

    def last_layer(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.simplices if s.t_end == self.t_max)

    def cells(self) -> list[tuple[tuple, tuple[str, ...]]]:
        """Groups of simplices lying over the same spacetime point.

        Each cell must carry the total branch weight. A cell is a unit time
        step, a region tag, and (for n_dim >= 1) the projected vertex set.
        """
        groups: dict[tuple, list[str]] = {}
        for s in self.simplices:
            if self.n_dim:
                foot = tuple(sorted(self.projected(v) for v in s.vertex_ids))
            else:
                foot = ()
            for t in range(s.t_start, s.t_end):
                groups.setdefault((s.region, t, foot), []).append(s.id)
        return [(key, tuple(groups[key])) for key in sorted(groups)]

    def max_branching(self) -> int:
        return max(len(ids) for _, ids in self.cells())

    def weight_vector(self) -> list[Fraction]:
        if self.weights is None:
            raise ValueError("complex carries no weights")
        return [self.weights[s.id] for s in self.simplices]

    def with_weights(self, weights: Mapping[str, Any] | Sequence[Any]) -> "BranchedComplex":
        if not isinstance(weights, Mapping):
            weights = dict(zip(self.simplex_ids, weights))
        desc = complex_to_description(self)
        for s in desc["simplices"]:
            s["weight"] = str(to_fraction(weights[s["id"]]))
        return build_complex(desc)


def _validate_schema(description: Any) -> None:
    try:
        jsonschema.validate(description, COMPLEX_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise MalformedDescription(f"{where}: {exc.message}") from None


def build_complex(description: Mapping[str, Any]) -> BranchedComplex:
    """Validate a complex description and compute its shared faces."""
    _validate_schema(description)
    n_dim = description["n_dim"]
    lower = to_fraction(description["lower_bound_L"])
    if lower <= 0:
        raise MalformedDescription("lower_bound_L must be positive")
    total = description.get("total_weight")
    total = to_fraction(total) if total is not None else None

    vertices: dict[str, Vertex] = {}
    coords: set[tuple] = set()
    for raw in description["vertices"]:
        vid = str(raw["id"])
        if vid in vertices:
            raise MalformedDescription(f"duplicate vertex id {vid!r}")
        x = tuple(raw["x"])
        if len(x) < n_dim:
            raise MalformedDescription(f"vertex {vid!r}: x needs at least {n_dim} components")
        coord = (raw["t"], x)
        if coord in coords:
            raise MalformedDescription(f"vertex {vid!r}: coordinate {coord} already used")
        coords.add(coord)
        vertices[vid] = Vertex(vid, raw["t"], x)

    def vkey(vid: str) -> tuple:
        v = vertices[vid]
        return (v.t, v.x, natural_key(vid))

    simplices: list[Simplex] = []
    weights: dict[str, Fraction] = {}
    fields: dict[str, tuple[complex, ...]] = {}
    seen: set[str] = set()
    for raw in description["simplices"]:
        sid = str(raw["id"])
        if sid in seen:
            raise MalformedDescription(f"duplicate simplex id {sid!r}")
        seen.add(sid)
        vids = tuple(str(v) for v in raw["vertices"])
        if len(vids) != n_dim + 2:
            raise MalformedDescription(f"simplex {sid!r}: expected {n_dim + 2} vertices, got {len(vids)}")
        if len(set(vids)) != len(vids):
            raise MalformedDescription(f"simplex {sid!r}: repeated vertex")
        for v in vids:
            if v not in vertices:
                raise MalformedDescription(f"simplex {sid!r}: unknown vertex {v!r}")
        times = [vertices[v].t for v in vids]
        if times != sorted(times):
            raise MalformedDescription(f"simplex {sid!r}: vertices must be listed earlier layer first")
        t0, t1 = times[0], times[-1]
        if t1 <= t0:
            raise MalformedDescription(f"simplex {sid!r}: must span at least one time step")
        if n_dim and t1 != t0 + 1:
            raise MalformedDescription(f"simplex {sid!r}: must span exactly one time step")
        simplices.append(Simplex(sid, vids, (t0, t1), raw.get("region", 0)))
        if "weight" in raw:
            w = to_fraction(raw["weight"])
            if w < lower:
                raise WeightBelowBound(f"simplex {sid!r}: weight {w} below lower bound {lower}")
            weights[sid] = w
        if "field" in raw:
            re_, im = raw["field"]
            fields[sid] = (complex(re_, im),)

    if weights and len(weights) != len(simplices):
        raise MalformedDescription("either every simplex carries a weight or none does")

    used = {v for s in simplices for v in s.vertex_ids}
    dangling = sorted(set(vertices) - used, key=natural_key)
    if dangling:
        raise DanglingFace(f"vertices not on any simplex: {', '.join(dangling)}")

    simplices.sort(key=lambda s: natural_key(s.id))
    # each region has its own initial and final slice
    span: dict[int, tuple[int, int]] = {}
    for s in simplices:
        lo, hi = span.get(s.region, (s.t_start, s.t_end))
        span[s.region] = (min(lo, s.t_start), max(hi, s.t_end))
    region_of = {s.id: s.region for s in simplices}

    incident: dict[tuple[str, ...], list[tuple[str, int]]] = {}
    for s in simplices:
        for i in range(len(s.vertex_ids)):
            face = s.vertex_ids[:i] + s.vertex_ids[i + 1:]
            canon = tuple(sorted(face, key=vkey))
            sign = (-1) ** i * _perm_sign(face, canon)
            incident.setdefault(canon, []).append((s.id, sign))

    faces = []
    for canon, members in incident.items():
        if len(members) < 2:
            continue
        ft = {vertices[v].t for v in canon}
        regions = {region_of[m[0]] for m in members}
        t_lo = min(span[r][0] for r in regions)
        t_hi = max(span[r][1] for r in regions)
        if ft == {t_lo} or ft == {t_hi}:
            continue  # initial/final slices are free boundary
        faces.append(
            Face(
                id="|".join(canon),
                vertex_ids=canon,
                incident_simplex_ids=tuple(m[0] for m in members),
                signs=tuple(m[1] for m in members),
            )
        )
    faces.sort(key=lambda f: (min(vertices[v].t for v in f.vertex_ids), natural_key(f.id)))

    return BranchedComplex(
        n_dim=n_dim,
        vertices=MappingProxyType(vertices),
        simplices=tuple(simplices),
        faces=tuple(faces),
        lower_bound=lower,
        total_weight=total,
        weights=MappingProxyType(weights) if weights else None,
        field_values=MappingProxyType(fields) if fields else None,
        _index=MappingProxyType({s.id: i for i, s in enumerate(simplices)}),
    )


def load_complex(path: str | Path) -> BranchedComplex:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedDescription(f"cannot read {path}: {exc.strerror}") from None
    try:
        description = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDescription(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return build_complex(description)


def _num(value: Fraction) -> int | str:
    return int(value) if value.denominator == 1 else str(value)


def complex_to_description(cx: BranchedComplex) -> dict[str, Any]:
    desc: dict[str, Any] = {
        "n_dim": cx.n_dim,
        "lower_bound_L": _num(cx.lower_bound),
        "vertices": [
            {"id": v.id, "t": v.t, "x": list(v.x)}
            for v in sorted(cx.vertices.values(), key=lambda v: (v.t, v.x, natural_key(v.id)))
        ],
        "simplices": [],
    }
    if cx.total_weight is not None:
        desc["total_weight"] = _num(cx.total_weight)
    for s in cx.simplices:
        entry: dict[str, Any] = {"id": s.id, "vertices": list(s.vertex_ids)}
        if s.region:
            entry["region"] = s.region
        if cx.weights is not None:
            entry["weight"] = _num(cx.weights[s.id])
        if cx.field_values is not None and s.id in cx.field_values:
            z = cx.field_values[s.id][0]
            entry["field"] = [z.real, z.imag]
        desc["simplices"].append(entry)
    return desc


def dump_complex(cx: BranchedComplex, path: str | Path) -> None:
    Path(path).write_text(json.dumps(complex_to_description(cx), indent=2) + "\n", encoding="utf-8")


def boundary_matrix(cx: BranchedComplex) -> BoundaryMatrix:
    data = np.zeros((len(cx.faces), len(cx.simplices)), dtype=np.int64)
    for r, face in enumerate(cx.faces):
        for sid, sign in zip(face.incident_simplex_ids, face.signs):
            data[r, cx.column(sid)] += sign
    return BoundaryMatrix(
        row_ids=tuple(f.id for f in cx.faces),
        col_ids=cx.simplex_ids,
        data=data,
    )


def refine(cx: BranchedComplex, simplex_id: str, parts: int) -> BranchedComplex:
    """Split one simplex along time into ``parts`` pieces of equal weight.

    Time is rescaled by ``parts`` everywhere so the new vertices sit on
    integer slices; untouched simplices then span ``parts`` slices. Only
    0+1-dimensional complexes are supported.
    """
    target = cx.simplex(simplex_id)
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if parts == 1:
        return cx
    if cx.n_dim != 0:
        raise RefinementUnsupported("time refinement is implemented for 0+1-dimensional complexes only")

    desc = complex_to_description(cx)
    for v in desc["vertices"]:
        v["t"] *= parts
    u, w = target.vertex_ids
    start = cx.vertices[u]
    step = target.t_end - target.t_start
    chain = [u]
    for j in range(1, parts):
        vid = f"{simplex_id}~{j}"
        desc["vertices"].append({"id": vid, "t": start.t * parts + j * step, "x": list(start.x)})
        chain.append(vid)
    chain.append(w)

    old = next(s for s in desc["simplices"] if s["id"] == simplex_id)
    desc["simplices"].remove(old)
    for j in range(parts):
        piece = dict(old)
        piece["id"] = f"{simplex_id}.{j + 1}"
        piece["vertices"] = [chain[j], chain[j + 1]]
        desc["simplices"].append(piece)
    return build_complex(desc)


def disjoint_union(complexes: Iterable[BranchedComplex]) -> BranchedComplex:
    """Place complexes side by side in separate regions.

    Ids get a ``c<i>:`` prefix. Regions keep the per-point weight totals of
    the parts independent of each other.
    """
    complexes = list(complexes)
    if not complexes:
        raise ValueError("need at least one complex")
    n_dims = {c.n_dim for c in complexes}
    bounds = {c.lower_bound for c in complexes}
    totals = {c.total_weight for c in complexes}
    if len(n_dims) != 1 or len(bounds) != 1 or len(totals) != 1:
        raise MalformedDescription("parts of a union must share n_dim, lower bound and total weight")
    has_weights = {c.weights is not None for c in complexes}
    if len(has_weights) != 1:
        raise MalformedDescription("either all parts carry weights or none does")

    out: dict[str, Any] = {
        "n_dim": complexes[0].n_dim,
        "lower_bound_L": _num(complexes[0].lower_bound),
        "vertices": [],
        "simplices": [],
    }
    if complexes[0].total_weight is not None:
        out["total_weight"] = _num(complexes[0].total_weight)
    region_base = 0
    for i, c in enumerate(complexes):
        desc = complex_to_description(c)
        for v in desc["vertices"]:
            out["vertices"].append({"id": f"c{i}:{v['id']}", "t": v["t"], "x": v["x"] + [i]})
        regions = {s.region for s in c.simplices}
        for s in desc["simplices"]:
            s = dict(s)
            s["id"] = f"c{i}:{s['id']}"
            s["vertices"] = [f"c{i}:{v}" for v in s["vertices"]]
            s["region"] = region_base + s.get("region", 0)
            out["simplices"].append(s)
        region_base += max(regions) + 1
    return build_complex(out)
