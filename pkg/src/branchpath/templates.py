"""Generators for the small complexes used in experiments and tests."""

from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np

from .complex_core import BranchedComplex, build_complex

__all__ = [
    "merge_split",
    "chain",
    "toy_uncollapsed",
    "toy_collapsed",
    "two_strand",
    "cohesion_pair",
    "two_cluster",
    "lattice_complex",
    "random_layered_complex",
]


def _desc(n_dim: int = 0, L: Any = 1, total: Any = None) -> dict[str, Any]:
    d: dict[str, Any] = {"n_dim": n_dim, "lower_bound_L": L, "vertices": [], "simplices": []}
    if total is not None:
        d["total_weight"] = total
    return d


def merge_split(weights: Sequence[Any] | None = None, L: Any = 1, total: Any = None) -> BranchedComplex:
    """Two branches merge, run together for two steps, then split (edges w1..w6)."""
    d = _desc(L=L, total=total)
    d["vertices"] = [
        {"id": "s1", "t": 0, "x": [0]},
        {"id": "s2", "t": 0, "x": [1]},
        {"id": "m1", "t": 1, "x": [0]},
        {"id": "m2", "t": 2, "x": [0]},
        {"id": "m3", "t": 3, "x": [0]},
        {"id": "e1", "t": 4, "x": [0]},
        {"id": "e2", "t": 4, "x": [1]},
    ]
    edges = [("s1", "m1"), ("s2", "m1"), ("m1", "m2"), ("m2", "m3"), ("m3", "e1"), ("m3", "e2")]
    for i, (a, b) in enumerate(edges):
        s: dict[str, Any] = {"id": f"w{i + 1}", "vertices": [a, b]}
        if weights is not None:
            s["weight"] = weights[i]
        d["simplices"].append(s)
    return build_complex(d)


def chain(T: int, L: Any = 1, total: Any = None, weight: Any = None) -> BranchedComplex:
    """A single unbranched strand of ``T`` edges."""
    if T < 1:
        raise ValueError("T must be >= 1")
    d = _desc(L=L, total=total)
    d["vertices"] = [{"id": f"v{t}", "t": t, "x": [0]} for t in range(T + 1)]
    for t in range(T):
        s: dict[str, Any] = {"id": f"e{t}", "vertices": [f"v{t}", f"v{t + 1}"]}
        if weight is not None:
            s["weight"] = weight
        d["simplices"].append(s)
    return build_complex(d)


def two_strand(T: int, meets: Iterable[int], L: Any = 1, total: Any = None) -> BranchedComplex:
    """Two strands over ``T`` steps that share a vertex at each slice in ``meets``.

    Slices 0 and T are always kept apart; ``meets`` must lie in 1..T-1.
    """
    meets = set(meets)
    if any(not 0 < t < T for t in meets):
        raise ValueError("meeting slices must lie strictly inside (0, T)")
    d = _desc(L=L, total=total)

    def vid(t: int, strand: int) -> str:
        return f"n{t}" if t in meets else f"v{t}_{strand}"

    for t in range(T + 1):
        if t in meets:
            d["vertices"].append({"id": vid(t, 0), "t": t, "x": [0]})
        else:
            for strand in (0, 1):
                d["vertices"].append({"id": vid(t, strand), "t": t, "x": [strand]})
    for t in range(T):
        for strand, tag in ((0, "a"), (1, "b")):
            d["simplices"].append(
                {"id": f"s{t}{tag}", "vertices": [vid(t, strand), vid(t + 1, strand)]}
            )
    return build_complex(d)


def toy_uncollapsed(T: int, L: Any = 1, total: Any = None) -> BranchedComplex:
    """Two branches that never intersect."""
    return two_strand(T, (), L=L, total=total)


def toy_collapsed(T: int, L: Any = 1, total: Any = None) -> BranchedComplex:
    """Two branches that meet at every integer time and separate again.

    Each step carries two parallel edges between consecutive meeting
    vertices, so there are 2**T paths from the first to the last slice.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    d = _desc(L=L, total=total)
    d["vertices"] = [{"id": f"n{t}", "t": t, "x": [0]} for t in range(T + 1)]
    for t in range(T):
        for tag in ("a", "b"):
            d["simplices"].append({"id": f"s{t}{tag}", "vertices": [f"n{t}", f"n{t + 1}"]})
    return build_complex(d)


def cohesion_pair(
    T: int, frequent: int, rare: int, rng: np.random.Generator
) -> tuple[BranchedComplex, BranchedComplex]:
    """Two-strand complexes of equal size with many vs few intersections."""
    if not 0 <= rare < frequent <= T - 1:
        raise ValueError("need 0 <= rare < frequent <= T-1")
    interior = np.arange(1, T)
    many = rng.choice(interior, size=frequent, replace=False).tolist()
    few = rng.choice(interior, size=rare, replace=False).tolist()
    return two_strand(T, many), two_strand(T, few)


def two_cluster(V: int, width: int = 1, connected: bool = True, L: Any = 1) -> BranchedComplex:
    """Two clusters of ``width`` strands over ``2V`` slices.

    Strands inside a cluster meet at every odd slice. In the connected
    variant the two clusters meet there as well; in the blocked variant they
    never touch, so the boundary matrix splits into one block per cluster.
    Both variants have ``4 * width * V`` edges.
    """
    if V < 1 or width < 1:
        raise ValueError("V and width must be >= 1")
    T = 2 * V
    d = _desc(L=L)
    strands = [(c, j) for c in (0, 1) for j in range(width)]

    def vid(t: int, c: int, j: int) -> str:
        if t % 2 == 1 and t < T:
            return f"n{t}" if connected else f"n{t}_{c}"
        return f"v{t}_{c}_{j}"

    added = set()
    for t in range(T + 1):
        for c, j in strands:
            v = vid(t, c, j)
            if v in added:
                continue
            added.add(v)
            x = [c * width + j] if not v.startswith("n") else ([0] if connected else [c])
            d["vertices"].append({"id": v, "t": t, "x": x})
    for t in range(T):
        for c, j in strands:
            d["simplices"].append(
                {"id": f"s{t}_{c}_{j}", "vertices": [vid(t, c, j), vid(t + 1, c, j)]}
            )
    return build_complex(d)


def lattice_complex(sites: int, steps: int, L: Any = 1) -> BranchedComplex:
    """Complete layered graph: every site at t links to every site at t+1.

    Vertex labels carry the site index, so paths read off as lattice
    trajectories x_0..x_steps.
    """
    if sites < 1 or steps < 1:
        raise ValueError("sites and steps must be >= 1")
    d = _desc(L=L)
    width = len(str(sites - 1))
    for t in range(steps + 1):
        for x in range(sites):
            d["vertices"].append({"id": f"t{t}x{x:0{width}d}", "t": t, "x": [x]})
    for t in range(steps):
        for x in range(sites):
            for y in range(sites):
                d["simplices"].append(
                    {
                        "id": f"t{t}x{x:0{width}d}y{y:0{width}d}",
                        "vertices": [f"t{t}x{x:0{width}d}", f"t{t + 1}x{y:0{width}d}"],
                    }
                )
    return build_complex(d)


def random_layered_complex(
    rng: np.random.Generator,
    layers: int | None = None,
    max_width: int = 3,
    max_simplices: int = 40,
    parallel_prob: float = 0.1,
) -> BranchedComplex:
    """Random 0+1-dimensional layered complex with at most ``max_simplices`` edges."""
    while True:
        T = layers if layers is not None else int(rng.integers(2, 8))
        widths = rng.integers(1, max_width + 1, size=T + 1).tolist()
        d = _desc()
        for t, w in enumerate(widths):
            for j in range(w):
                d["vertices"].append({"id": f"v{t}_{j}", "t": t, "x": [j]})
        edges: list[tuple[str, str]] = []
        for t in range(T):
            pairs = {(a, b) for a in range(widths[t]) for b in range(widths[t + 1])
                     if rng.random() < 0.5}
            # every vertex keeps at least one edge on each side it has
            for a in range(widths[t]):
                if not any(p[0] == a for p in pairs):
                    pairs.add((a, int(rng.integers(widths[t + 1]))))
            for b in range(widths[t + 1]):
                if not any(p[1] == b for p in pairs):
                    pairs.add((int(rng.integers(widths[t])), b))
            for a, b in sorted(pairs):
                edges.append((f"v{t}_{a}", f"v{t + 1}_{b}"))
                if rng.random() < parallel_prob:
                    edges.append((f"v{t}_{a}", f"v{t + 1}_{b}"))
        if len(edges) <= max_simplices:
            break
    for i, (a, b) in enumerate(edges):
        d["simplices"].append({"id": f"e{i:02d}", "vertices": [a, b]})
    return build_complex(d)
