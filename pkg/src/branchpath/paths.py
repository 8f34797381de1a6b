"""Paths through a branched complex and the path/simplex change of basis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .complex_core import BranchedComplex, natural_key
from .errors import DegenerateEnsemble, DimensionMismatch, InvalidEndpoints, PathExplosion

__all__ = [
    "DEFAULT_PATH_CAP",
    "Path",
    "PathSet",
    "IncidenceMatrix",
    "successors",
    "count_paths",
    "enumerate_paths",
    "incidence_matrix",
    "simplex_weights_from_paths",
    "path_probabilities",
    "log_partition",
    "path_trajectory",
]

DEFAULT_PATH_CAP = 10**5

Path = tuple[str, ...]


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]
    source_config: tuple[str, ...]
    target_config: tuple[str, ...]
    simplex_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class IncidenceMatrix:
    row_ids: tuple[str, ...]
    paths: tuple[Path, ...]
    entries: np.ndarray

    def to_list(self) -> list[list[int]]:
        return self.entries.tolist()


def successors(cx: BranchedComplex) -> dict[str, list[str]]:
    """Simplices that continue each simplex forward in time through a shared face."""
    by_start: dict[int, list] = {}
    for s in cx.simplices:
        by_start.setdefault(s.t_start, []).append(s)
    need = cx.n_dim + 1
    out = {}
    for s in cx.simplices:
        mine = set(s.vertex_ids)
        nxt = [n.id for n in by_start.get(s.t_end, []) if len(mine.intersection(n.vertex_ids)) >= need]
        out[s.id] = sorted(nxt, key=natural_key)
    return out


def _endpoints(cx: BranchedComplex, c_I: Iterable[str] | None, c_F: Iterable[str] | None):
    c_I = tuple(sorted(cx.first_layer() if c_I is None else c_I, key=natural_key))
    c_F = tuple(sorted(cx.last_layer() if c_F is None else c_F, key=natural_key))
    for sid in c_I:
        if cx.simplex(sid).t_start != cx.t_min:
            raise InvalidEndpoints(f"{sid!r} does not start on the first slice")
    for sid in c_F:
        if cx.simplex(sid).t_end != cx.t_max:
            raise InvalidEndpoints(f"{sid!r} does not end on the last slice")
    return c_I, c_F


def _paths_to_target(cx: BranchedComplex, succ: dict[str, list[str]], c_F: Sequence[str]) -> dict[str, int]:
    target = set(c_F)
    ways: dict[str, int] = {}
    for s in sorted(cx.simplices, key=lambda s: -s.t_start):
        ways[s.id] = int(s.id in target) + sum(ways[n] for n in succ[s.id])
    return ways


def count_paths(cx: BranchedComplex, c_I: Iterable[str] | None = None, c_F: Iterable[str] | None = None) -> int:
    """Number of paths from c_I to c_F, by dynamic programming over slices."""
    c_I, c_F = _endpoints(cx, c_I, c_F)
    ways = _paths_to_target(cx, successors(cx), c_F)
    return sum(ways[s] for s in c_I)


def enumerate_paths(
    cx: BranchedComplex,
    c_I: Iterable[str] | None = None,
    c_F: Iterable[str] | None = None,
    cap: int = DEFAULT_PATH_CAP,
) -> PathSet:
    """All paths from ``c_I`` to ``c_F`` in lexicographic order of simplex ids.

    Defaults to the whole first and last layers. An empty result is not an
    error. Raises PathExplosion before enumerating if more than ``cap``
    paths exist.
    """
    c_I, c_F = _endpoints(cx, c_I, c_F)
    succ = successors(cx)
    ways = _paths_to_target(cx, succ, c_F)
    total = sum(ways[s] for s in c_I)
    if total > cap:
        raise PathExplosion(f"{total} paths exceed the cap of {cap}")
    target = set(c_F)
    found: list[Path] = []

    def walk(prefix: list[str]) -> None:
        last = prefix[-1]
        if last in target:
            found.append(tuple(prefix))
        for n in succ[last]:
            if ways[n]:
                prefix.append(n)
                walk(prefix)
                prefix.pop()

    for s in c_I:
        if ways[s]:
            walk([s])
    return PathSet(tuple(found), c_I, c_F, cx.simplex_ids)


def incidence_matrix(path_set: PathSet) -> IncidenceMatrix:
    row = {sid: i for i, sid in enumerate(path_set.simplex_ids)}
    A = np.zeros((len(row), len(path_set.paths)), dtype=np.int64)
    for j, p in enumerate(path_set.paths):
        for sid in p:
            A[row[sid], j] = 1
    return IncidenceMatrix(path_set.simplex_ids, path_set.paths, A)


def simplex_weights_from_paths(A: IncidenceMatrix, path_weights: Sequence[Any]) -> list[Any] | np.ndarray:
    """w_sigma = sum_i A[sigma, i] * w_i. Exact when the weights are Fractions or ints."""
    if len(path_weights) != A.entries.shape[1]:
        raise DimensionMismatch(
            f"{len(path_weights)} path weights for {A.entries.shape[1]} paths"
        )
    if any(isinstance(w, Fraction) for w in path_weights):
        rows = A.entries.tolist()
        return [sum((w for a, w in zip(r, path_weights) if a), Fraction(0)) for r in rows]
    w = np.asarray(path_weights)
    if np.any(w < 0):
        raise ValueError("path weights must be non-negative")
    return A.entries @ w


def log_partition(actions: Sequence[float], k: float) -> float:
    """ln Z_P with Z_P = sum_j exp(-k S_j), evaluated with a max shift."""
    a = -k * np.asarray(actions, dtype=float)
    if a.size == 0:
        raise DegenerateEnsemble("empty action vector")
    top = a.max()
    return float(top + math.log(np.exp(a - top).sum()))


def path_probabilities(actions: Sequence[float], k: float) -> np.ndarray:
    """Entropic path distribution P(p_i) = exp(-k S_i) / Z_P."""
    a = np.asarray(actions, dtype=float)
    if a.size == 0:
        raise DegenerateEnsemble("empty action vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("actions must be finite")
    if k < 0:
        raise ValueError("k must be >= 0")
    z = -k * a
    z -= z.max()
    p = np.exp(z)
    return p / p.sum()


def path_trajectory(cx: BranchedComplex, path: Path) -> list[int]:
    """Label trajectory x_0..x_T along a 0+1-dimensional path (first label component)."""
    if cx.n_dim != 0:
        raise ValueError("trajectories are defined for 0+1-dimensional complexes")
    first = cx.simplex(path[0])
    traj = [cx.vertices[first.vertex_ids[0]].x[0]]
    for sid in path:
        s = cx.simplex(sid)
        traj.append(cx.vertices[s.vertex_ids[-1]].x[0])
    return traj
